use proptest::prelude::*;
use tgdecay_core::fit::least_squares;
use tgdecay_core::poles::find_poles;
use tgdecay_core::scattering::{physical_state, s_matrix};
use tgdecay_core::spectral::{
    decay_curve, evolve_mode_with, nonescape_probability_with, survival_probability_with,
};
use tgdecay_core::{ModeIndex, Propagator, SpatialGrid, SpectralOptions, TimeGrid, TrapSpec};

fn mode(n: u32) -> ModeIndex {
    ModeIndex::new(n).unwrap()
}

fn trap(eta: f64) -> TrapSpec {
    TrapSpec::new(1.0, eta).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    // Time reversal of the evolution rests on conj(<x|k+>) = S(k)^* <x|k+>.
    #[test]
    fn continuum_states_are_real_up_to_the_s_matrix(x in 0.0f64..6.0, k in 0.01f64..80.0, eta in 0.0f64..15.0) {
        let t = trap(eta);
        let psi = physical_state(x, k, &t).unwrap();
        let reversed = s_matrix(k, &t).conj() * psi;
        prop_assert!((psi.conj() - reversed).norm() < 1e-12);
    }
}

#[test]
fn evolved_state_is_time_reversal_symmetric_in_momentum() {
    // conj(phi_n(t)) has amplitude S^* conj(a) e^{ik^2 t}; evolving it by t
    // removes the phase, and phi_n comes back only if S^* conj(a) = a.
    let t = trap(5.0);
    for n in 1..=3 {
        for k in [0.5, 2.7, 10.0, 77.7] {
            let a = tgdecay_core::scattering::mode_overlap(mode(n), k, &t);
            let reversed = s_matrix(k, &t).conj() * a.conj();
            assert!((reversed - a).norm() < 1e-14 * a.norm().max(1e-300), "n={n} k={k}");
        }
    }
}

#[test]
fn halving_tolerance_changes_nonescape_less_than_tolerance() {
    let t = trap(5.0);
    let loose = SpectralOptions::with_tol(1e-8);
    let tight = SpectralOptions::with_tol(5e-9);
    for n in [1, 3] {
        for time in [0.05, 0.5, 2.0, 8.0] {
            let a = nonescape_probability_with(mode(n), time, &t, &loose).unwrap();
            let b = nonescape_probability_with(mode(n), time, &t, &tight).unwrap();
            assert!((a - b).abs() <= 1e-8 * a.max(1e-300) + 1e-15, "n={n} t={time}: {a} vs {b}");
        }
    }
}

#[test]
fn survival_short_time_exponent_is_three_halves() {
    let t = trap(5.0);
    let opts = SpectralOptions::default();
    let times: Vec<f64> = (0..5).map(|i| 1e-4 * 10f64.powf(0.5 * i as f64)).collect();
    let logs: Vec<(f64, f64)> = times
        .iter()
        .map(|&s| {
            let v = survival_probability_with(mode(1), s, &t, &opts).unwrap();
            assert!(v <= 1.0);
            (s.ln(), (1.0 - v).ln())
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = logs.into_iter().unzip();
    let (slope, _) = least_squares(&xs, &ys);
    assert!((slope - 1.5).abs() < 0.1, "exponent {slope}");
}

#[test]
fn survival_is_bounded_and_starts_at_one() {
    let t = trap(5.0);
    let opts = SpectralOptions::default();
    assert_eq!(survival_probability_with(mode(2), 0.0, &t, &opts).unwrap(), 1.0);
    for time in [0.01, 0.3, 3.0] {
        let s = survival_probability_with(mode(2), time, &t, &opts).unwrap();
        let p = nonescape_probability_with(mode(2), time, &t, &opts).unwrap();
        assert!((0.0..=1.0).contains(&s));
        // |<phi|psi>|^2 <= int_0^L |psi|^2 by Cauchy-Schwarz on [0, L].
        assert!(s <= p + 1e-8, "t={time}: S={s} P={p}");
    }
}

#[test]
fn curves_are_ordered_by_mode_at_early_time() {
    let t = trap(5.0);
    let p: Vec<f64> = (1..=10)
        .map(|n| Propagator::for_trap(&t, &SpectralOptions::default()).nonescape(mode(n), 0.3).unwrap())
        .collect();
    for w in p.windows(2) {
        assert!(w[0] > w[1], "{p:?}");
    }
}

#[test]
fn exponential_slope_matches_first_pole() {
    let t = trap(5.0);
    let gamma = find_poles(&t, 1).unwrap().get(1).unwrap().width;
    let curve = decay_curve(mode(1), &t, &TimeGrid::linear(0.2, 8.0, 40).unwrap()).unwrap();
    let fit = curve.annotations.exponential.expect("exponential window");
    assert!((fit.slope + gamma).abs() < 0.02 * gamma, "slope {} vs {}", fit.slope, -gamma);
}

#[test]
fn no_exponential_window_without_barrier() {
    let curve = decay_curve(mode(1), &trap(0.0), &TimeGrid::logarithmic(0.05, 200.0, 60).unwrap()).unwrap();
    assert!(curve.annotations.exponential.is_none(), "{:?}", curve.annotations);
}

#[test]
fn grid_state_matches_nonescape() {
    let t = trap(10.0);
    let grid = SpatialGrid::interior(&t, 512).unwrap();
    let opts = SpectralOptions::default();
    let state = evolve_mode_with(mode(2), 1.5, &t, &grid, &opts).unwrap();
    let p = nonescape_probability_with(mode(2), 1.5, &t, &opts).unwrap();
    let q = state.trap_norm().value;
    assert!((p - q).abs() < 1e-6 * p, "{p} vs {q}");
}
