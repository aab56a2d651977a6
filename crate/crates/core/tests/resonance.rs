use tgdecay_core::resonance::{
    coefficient_sum_rule, exponential_nonescape, late_time_nonescape, longtime_asymptote, validity_windows,
};
use tgdecay_core::{ExpansionTable, ModeIndex, Propagator, SpectralOptions, TrapSpec};

fn mode(n: u32) -> ModeIndex {
    ModeIndex::new(n).unwrap()
}

fn log_points(a: f64, b: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| a * (b / a).powf(i as f64 / (count - 1) as f64))
        .collect()
}

/// Largest relative deviation of `approx` from the spectral value over `times`.
fn worst(prop: &Propagator, n: ModeIndex, times: &[f64], approx: impl Fn(f64) -> f64) -> f64 {
    times
        .iter()
        .map(|&t| {
            let exact = prop.nonescape(n, t).unwrap();
            (approx(t) - exact).abs() / exact
        })
        .fold(0.0, f64::max)
}

#[test]
fn three_descriptions_agree_in_their_windows() {
    for eta in [5.0, 10.0] {
        let trap = TrapSpec::new(1.0, eta).unwrap();
        let prop = Propagator::for_trap(&trap, &SpectralOptions::default());
        let table = ExpansionTable::for_trap(&trap, 5, 5).unwrap();
        for n in 1..=5 {
            let w = validity_windows(mode(n), &trap).unwrap();
            let (a, b) = w.exponential;
            assert!(a < b, "eta={eta} n={n}: empty exponential window {w:?}");
            let exp_times = log_points(a, b, 8);
            let e = worst(&prop, mode(n), &exp_times, |t| {
                exponential_nonescape(mode(n), t, n as usize, &table).unwrap()
            });
            assert!(e < 0.05, "eta={eta} n={n}: pole expansion off by {e:.3} in {:?}", w.exponential);
            let late_times = log_points(w.late.0, w.late.1, 8);
            let l = worst(&prop, mode(n), &late_times, |t| longtime_asymptote(mode(n), t, &trap).unwrap());
            assert!(l < 0.05, "eta={eta} n={n}: t^-3 law off by {l:.3} in {:?}", w.late);
        }
    }
}

#[test]
fn late_time_delegate_matches_spectral_value() {
    // Just below the spectral cap, the pole part plus the t^-3 law should
    // reproduce the quadrature.
    let trap = TrapSpec::new(1.0, 5.0).unwrap();
    let opts = SpectralOptions::default();
    let prop = Propagator::for_trap(&trap, &opts);
    for n in [1, 2] {
        let t = 0.9 * opts.t_cap;
        let exact = prop.nonescape(mode(n), t).unwrap();
        let late = late_time_nonescape(mode(n), t, &trap).unwrap();
        assert!((late - exact).abs() < 1e-3 * exact, "n={n}: {late} vs {exact}");
    }
}

#[test]
fn sum_rule_approaches_one() {
    let trap = TrapSpec::new(1.0, 5.0).unwrap();
    let table = ExpansionTable::for_trap(&trap, 3, 200).unwrap();
    for n in 1..=3 {
        let s = coefficient_sum_rule(mode(n), &table);
        assert!((s.re - 1.0).abs() < 1e-4, "n={n}: {s}");
    }
}
