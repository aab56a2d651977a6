//! Barrier-free evolution (`eta = 0`) in closed form.
//!
//! With only the wall at the origin the propagator is
//! `K0(x - x') - K0(x + x')`. The box mode is the restriction to `x > 0` of
//! the odd function `sqrt(2/L) sin(k_n x)` on `[-L, L]`, which the free
//! propagator keeps odd, so the wall is imposed automatically. Writing
//! `sin = (e^{ikx} - e^{-ikx})/(2i)` and each truncated plane wave as a
//! difference of half-line plane waves,
//!
//! ```text
//! e^{ikx} [-L <= x <= L] = e^{ikL} theta(L - x) e^{ik(x-L)} - e^{-ikL} theta(-L - x) e^{ik(x+L)},
//! ```
//!
//! gives four terms. A half-line plane wave `e^{ikx} theta(-x)` evolves into
//! the Moshinsky function
//!
//! ```text
//! M(x, k, t) = 1/2 e^{i(kx - k^2 t)} erfc(e^{-i pi/4} (x - 2kt) / (2 sqrt t)),
//! ```
//!
//! so
//!
//! ```text
//! psi(x, t) = sqrt(2/L)/(2i) sum_{s=+-1} s [e^{i s k_n L} M(x - L, s k_n, t) - e^{-i s k_n L} M(x + L, s k_n, t)].
//! ```

use std::f64::consts::PI;

use errorfunctions::ComplexErrorFunctions;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{initial_mode, ModeIndex, ModeState, QuadReport, SpatialGrid, TrapSpec};
use crate::quadrature::simpson_with_error;
use crate::scattering::mode_overlap_envelope;
use crate::spectral::{assemble_half_line_norm, HalfLineNorm, SpectralOptions};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// One evaluation of the Moshinsky function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoshinskyEval {
    pub x: f64,
    pub k: Complex64,
    pub t: f64,
    pub value: Complex64,
}

impl MoshinskyEval {
    pub fn new(x: f64, k: Complex64, t: f64) -> Result<Self> {
        Ok(Self {
            x,
            k,
            t,
            value: moshinsky(x, k, t)?,
        })
    }
}

/// Faddeeva function `w(z) = e^{-z^2} erfc(-iz)`.
pub fn faddeeva(z: Complex64) -> Complex64 {
    z.w()
}

/// Complementary error function of a complex argument.
pub fn erfc(z: Complex64) -> Complex64 {
    ComplexErrorFunctions::erfc(z)
}

fn argument(x: f64, k: Complex64, t: f64) -> Complex64 {
    Complex64::from_polar(1.0, -PI / 4.0) * (x - 2.0 * k * t) / (2.0 * t.sqrt())
}

/// `M(x, k, t)` without overflow.
///
/// Since `i(kx - k^2 t) - u^2 = i x^2/(4t)` for the erfc argument `u`, the
/// value is `1/2 e^{ix^2/4t} w(iu)` when `Re u >= 0`, and
/// `e^{i(kx - k^2 t)} - 1/2 e^{ix^2/4t} w(-iu)` otherwise; both use the
/// Faddeeva function in its bounded half-plane.
pub fn moshinsky(x: f64, k: Complex64, t: f64) -> Result<Complex64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("Moshinsky function needs t > 0, got {t}")));
    }
    let u = argument(x, k, t);
    let gauss = Complex64::from_polar(0.5, x * x / (4.0 * t));
    if u.re >= 0.0 {
        Ok(gauss * faddeeva(I * u))
    } else {
        Ok((I * (k * x - k * k * t)).exp() - gauss * faddeeva(-I * u))
    }
}

/// `M` and its `x`-derivative `ik M - e^{-i pi/4} e^{ix^2/4t} / (2 sqrt(pi t))`.
pub fn moshinsky_with_derivative(x: f64, k: Complex64, t: f64) -> Result<(Complex64, Complex64)> {
    let m = moshinsky(x, k, t)?;
    let d = I * k * m - Complex64::from_polar(1.0 / (2.0 * (PI * t).sqrt()), x * x / (4.0 * t) - PI / 4.0);
    Ok((m, d))
}

/// The four image terms of the free evolution at `(x, t)`, in the order
/// `(s=+1, edge L), (s=+1, edge -L), (s=-1, edge L), (s=-1, edge -L)`,
/// each with its sign and the overall `sqrt(2/L)/(2i)` included.
pub fn image_terms(n: ModeIndex, x: f64, t: f64, length: f64) -> Result<[Complex64; 4]> {
    let kn = n.get() as f64 * PI / length;
    let pref = (2.0 / length).sqrt() / (2.0 * I);
    let mut out = [Complex64::new(0.0, 0.0); 4];
    for (slot, (s, edge)) in out.iter_mut().zip([(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]) {
        let k = Complex64::new(s * kn, 0.0);
        let shift = Complex64::from_polar(1.0, s * kn * length * edge);
        let m = moshinsky(x - edge * length, k, t)?;
        *slot = pref * s * edge * shift * m;
    }
    Ok(out)
}

/// Value and `x`-derivative of the freely evolved mode at one point.
pub fn free_point(n: ModeIndex, x: f64, t: f64, length: f64) -> Result<(Complex64, Complex64)> {
    let kn = n.get() as f64 * PI / length;
    let pref = (2.0 / length).sqrt() / (2.0 * I);
    let mut v = Complex64::new(0.0, 0.0);
    let mut d = Complex64::new(0.0, 0.0);
    for s in [1.0, -1.0] {
        let k = Complex64::new(s * kn, 0.0);
        for edge in [1.0, -1.0] {
            let shift = Complex64::from_polar(1.0, s * kn * length * edge);
            let (m, dm) = moshinsky_with_derivative(x - edge * length, k, t)?;
            v += s * edge * shift * m;
            d += s * edge * shift * dm;
        }
    }
    Ok((pref * v, pref * d))
}

/// `phi_n(x, t)` with the barrier switched off (only `trap.length` is used).
pub fn evolve_mode_free(n: ModeIndex, t: f64, trap: &TrapSpec, grid: &SpatialGrid) -> Result<ModeState> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return initial_mode(n, trap, grid);
    }
    grid.check_trap(trap)?;
    let samples = (0..grid.len())
        .map(|i| {
            let x = grid.abscissa(i);
            if x == 0.0 {
                Ok(Complex64::new(0.0, 0.0))
            } else {
                Ok(free_point(n, x, t, trap.length)?.0)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModeState {
        n,
        t,
        grid: grid.clone(),
        samples,
        report: QuadReport::closed_form(1e-13),
    })
}

/// In-trap probability of the freely evolving mode.
pub fn nonescape_free(n: ModeIndex, t: f64, trap: &TrapSpec, opts: &SpectralOptions) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let mut intervals = opts.interior_intervals.max(4);
    intervals += (4 - intervals % 4) % 4;
    loop {
        let grid = SpatialGrid::interior(trap, intervals)?;
        let state = evolve_mode_free(n, t, trap, &grid)?;
        let dens: Vec<f64> = state.samples.iter().map(|z| z.norm_sqr()).collect();
        let (value, err) = simpson_with_error(&dens, grid.spacing());
        if err <= opts.grid_tol * value + 1e-300 || 2 * intervals > opts.max_interior_intervals {
            return Ok(value.clamp(0.0, 1.0));
        }
        intervals *= 2;
    }
}

/// Half-line norm of the freely evolving mode: grid part plus the current
/// through `x_max` integrated over time.
pub fn half_line_norm_free(
    n: ModeIndex,
    t: f64,
    trap: &TrapSpec,
    grid: &SpatialGrid,
    tol: f64,
) -> Result<HalfLineNorm> {
    let state = evolve_mode_free(n, t, trap, grid)?;
    let x = grid.x_max();
    let length = trap.length;
    let current = |tau: f64| -> Result<f64> {
        let (v, d) = free_point(n, x, tau, length)?;
        Ok(2.0 * (v.conj() * d).im)
    };
    let free_trap = TrapSpec::new(length, 0.0)?;
    let envelope = |k: f64| mode_overlap_envelope(n, k, &free_trap);
    let k_floor = 4.0 * n.wavenumber(trap);
    assemble_half_line_norm(&state, trap, t, tol, &current, 0.0, None, &envelope, k_floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn moshinsky_rejects_nonpositive_time() {
        assert!(moshinsky(0.0, c(1.0, 0.0), 0.0).is_err());
        assert!(moshinsky(0.0, c(1.0, 0.0), -1.0).is_err());
    }

    #[test]
    fn moshinsky_half_line_sum_rule() {
        // e^{ikx} theta(-x) + e^{ikx} theta(x) is a plane wave.
        for &(x, k, t) in &[(0.3, 2.0, 0.1), (-1.5, -4.0, 2.0), (3.0, 10.0, 0.01), (0.0, 0.5, 5.0)] {
            let k = c(k, 0.0);
            let sum = moshinsky(x, k, t).unwrap() + moshinsky(-x, -k, t).unwrap();
            let plane = (I * (k * x - k * k * t)).exp();
            assert!((sum - plane).norm() < 1e-12, "x={x} k={k} t={t}");
        }
    }

    #[test]
    fn moshinsky_short_time_limit() {
        let k = c(3.0, 0.0);
        let left = moshinsky(-0.5, k, 1e-8).unwrap();
        assert!((left - (I * k * -0.5).exp()).norm() < 1e-3);
        assert!(moshinsky(0.5, k, 1e-8).unwrap().norm() < 1e-3);
    }

    #[test]
    fn moshinsky_bounded_far_out() {
        for &(x, k, t) in &[(500.0, 3.0, 1e-4), (-500.0, 30.0, 1e-4), (1e3, -50.0, 100.0)] {
            let v = moshinsky(x, c(k, 0.0), t).unwrap();
            assert!(v.is_finite() && v.norm() <= 1.5);
        }
    }

    #[test]
    fn free_mode_vanishes_at_wall_and_starts_as_box_mode() {
        let trap = TrapSpec::new(1.0, 0.0).unwrap();
        let n = ModeIndex::new(2).unwrap();
        let (v, _) = free_point(n, 0.0, 0.7, 1.0).unwrap();
        assert!(v.norm() < 1e-13);
        let grid = SpatialGrid::new(&trap, 2.0, 65).unwrap();
        let s = evolve_mode_free(n, 1e-9, &trap, &grid).unwrap();
        for i in 1..grid.len() {
            let x = grid.abscissa(i);
            if (x - 1.0).abs() < 0.05 {
                continue;
            }
            let expect = crate::model::box_mode(n, &trap, x);
            assert!((s.samples[i] - expect).norm() < 1e-6, "x={x}");
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let n = ModeIndex::new(1).unwrap();
        let h = 1e-6;
        for &(x, t) in &[(0.5, 0.3), (2.0, 1.0), (4.0, 0.05)] {
            let (_, d) = free_point(n, x, t, 1.0).unwrap();
            let fd = (free_point(n, x + h, t, 1.0).unwrap().0 - free_point(n, x - h, t, 1.0).unwrap().0) / (2.0 * h);
            assert!((d - fd).norm() < 1e-6 * d.norm().max(1.0));
        }
    }
}
