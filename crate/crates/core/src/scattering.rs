//! Jost function, S-matrix and continuum states of the delta-capped box.
//!
//! The outgoing continuum states are
//!
//! ```text
//! <x|k+> = sqrt(2/pi) sin(kx) / J+(k)                       x <= L
//!        = sqrt(2/pi) (i/2) [exp(-ikx) - S(k) exp(ikx)]     x >= L
//! ```
//!
//! with `J+(k) = 1 + eta (exp(2ikL) - 1)/(2ik)` and `S = J-/J+`. They are
//! normalized as `<k+|k'+> = delta(k - k')`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{ModeIndex, TrapSpec};
use crate::special::{sinc, sinc_prime, sine_product_integral};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `J+(k) = 1 + eta L exp(ikL) sinc(kL)`, an entire function of `k`.
pub fn jost_plus(k: Complex64, trap: &TrapSpec) -> Complex64 {
    if trap.eta == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let z = k * trap.length;
    1.0 + trap.opacity() * (I * z).exp() * sinc(z)
}

/// `dJ+/dk`, differentiated term by term.
pub fn jost_plus_derivative(k: Complex64, trap: &TrapSpec) -> Complex64 {
    if trap.eta == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let z = k * trap.length;
    trap.opacity() * trap.length * (I * z).exp() * (I * sinc(z) + sinc_prime(z))
}

/// `J-(k) = J+(-k)`: the continuation that equals `conj(J+(k))` for real `k`.
pub fn jost_minus(k: Complex64, trap: &TrapSpec) -> Complex64 {
    jost_plus(-k, trap)
}

/// `S(k) = J-(k)/J+(k)` for real `k`; unimodular.
pub fn s_matrix(k: f64, trap: &TrapSpec) -> Complex64 {
    let jp = jost_plus(Complex64::new(k, 0.0), trap);
    jp.conj() / jp
}

/// `|J+(k)|^2` for real `k`.
pub fn jost_modulus_sqr(k: f64, trap: &TrapSpec) -> f64 {
    jost_plus(Complex64::new(k, 0.0), trap).norm_sqr()
}

/// Continuum state `<x|k+>` for `x >= 0`, real `k > 0`.
pub fn physical_state(x: f64, k: f64, trap: &TrapSpec) -> Result<Complex64> {
    if x < 0.0 || !x.is_finite() {
        return Err(Error::domain(format!("physical state needs x >= 0, got {x}")));
    }
    let norm = (2.0 / PI).sqrt();
    if x <= trap.length {
        Ok(norm * (k * x).sin() / jost_plus(Complex64::new(k, 0.0), trap))
    } else {
        Ok(outer_state(x, k, trap))
    }
}

/// Outer branch of `<x|k+>`, usable at any `x` (agrees with the inner one at `x = L`).
pub fn outer_state(x: f64, k: f64, trap: &TrapSpec) -> Complex64 {
    let norm = (2.0 / PI).sqrt();
    let e = Complex64::from_polar(1.0, k * x);
    norm * 0.5 * I * (e.conj() - s_matrix(k, trap) * e)
}

/// `int_0^L sin(kx) sin(k_n x) dx`.
pub fn mode_bracket(n: ModeIndex, k: f64, trap: &TrapSpec) -> f64 {
    let kn = n.wavenumber(trap);
    sine_product_integral(Complex64::new(k, 0.0), Complex64::new(kn, 0.0), trap.length).re
}

/// `<k+|phi_n>` in closed form.
pub fn mode_overlap(n: ModeIndex, k: f64, trap: &TrapSpec) -> Complex64 {
    let pref = (2.0 / PI).sqrt() * (2.0 / trap.length).sqrt();
    pref * mode_bracket(n, k, trap) / jost_plus(Complex64::new(k, 0.0), trap).conj()
}

/// Upper bound of `|<k+|phi_n>|` for `k > max(2 k_n, 2 eta)`.
///
/// Uses `|int sin sin| <= k_n/(k^2 - k_n^2)` and `|J+| >= 1 - eta/k`.
pub fn mode_overlap_envelope(n: ModeIndex, k: f64, trap: &TrapSpec) -> f64 {
    let kn = n.wavenumber(trap);
    let jmin = 1.0 - trap.eta / k;
    if k <= kn || jmin <= 0.0 {
        return f64::INFINITY;
    }
    (2.0 / PI).sqrt() * (2.0 / trap.length).sqrt() * kn / ((k * k - kn * kn) * jmin)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trap(eta: f64) -> TrapSpec {
        TrapSpec::new(1.0, eta).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn jost_trivial_values() {
        assert_eq!(jost_plus(c(1.3, -0.2), &trap(0.0)), c(1.0, 0.0));
        assert!((jost_plus(c(PI, 0.0), &trap(5.0)) - 1.0).norm() < 1e-14);
        assert!((jost_minus(c(PI, 0.0), &trap(5.0)) - 1.0).norm() < 1e-14);
        assert_eq!(jost_minus(c(0.4, 0.1), &trap(0.0)), c(1.0, 0.0));
        let at_zero = jost_plus(c(0.0, 0.0), &trap(5.0));
        assert!((at_zero - 6.0).norm() < 1e-15);
    }

    #[test]
    fn jost_series_branch_matches_direct_formula() {
        let t = trap(5.0);
        for k in [c(1.1e-4, 0.0), c(2e-4, -1e-4), c(1e-3, 2e-4)] {
            let direct = 1.0 + t.eta * ((2.0 * I * k).exp() - 1.0) / (2.0 * I * k);
            assert!((jost_plus(k, &t) - direct).norm() < 1e-10);
        }
        let tiny = c(3e-5, 1e-5);
        let taylor = 1.0 + 5.0 * (1.0 + I * tiny - 2.0 / 3.0 * tiny * tiny);
        assert!((jost_plus(tiny, &t) - taylor).norm() < 1e-12);
    }

    #[test]
    fn jost_vanishes_at_first_pole() {
        let k1 = c(2.71038173182388, -0.177999234346025);
        assert!(jost_plus(k1, &trap(5.0)).norm() < 1e-12);
        assert!(jost_plus(c(2.7103, -0.1781), &trap(5.0)).norm() < 1e-3);
    }

    #[test]
    fn jost_minus_is_conjugate_on_real_axis() {
        let t = trap(5.0);
        let k = c(2.0, 0.0);
        assert!((jost_minus(k, &t) - jost_plus(k, &t).conj()).norm() < 1e-15);
    }

    #[test]
    fn s_matrix_values() {
        assert_eq!(s_matrix(2.3, &trap(0.0)), c(1.0, 0.0));
        assert!((s_matrix(PI, &trap(5.0)) - 1.0).norm() < 1e-14);
        // k = 1, eta = 5: J+ = 1 + 5 (e^{2i} - 1)/(2i) evaluated independently.
        let jp = 1.0 + 5.0 * (2.0f64.sin() / 2.0) + I * 5.0 * (1.0 - 2.0f64.cos()) / 2.0;
        let s = s_matrix(1.0, &trap(5.0));
        assert!((s.norm() - 1.0).abs() < 1e-14);
        assert!((s - jp.conj() / jp).norm() < 1e-14);
        assert!((s.arg() - (-2.0 * jp.arg())).abs() < 1e-13);
    }

    #[test]
    fn physical_state_branches() {
        let t = trap(5.0);
        assert_eq!(physical_state(0.0, 3.0, &t).unwrap(), c(0.0, 0.0));
        assert!(physical_state(-0.1, 3.0, &t).is_err());
        let free = trap(0.0);
        let v = physical_state(0.3, 2.0, &free).unwrap();
        assert!((v - (2.0 / PI).sqrt() * (0.6f64).sin()).norm() < 1e-15);
        let inner = physical_state(1.0, 2.0, &t).unwrap();
        let outer = outer_state(1.0, 2.0, &t);
        assert!((inner - outer).norm() < 1e-10 * inner.norm());
    }

    #[test]
    fn overlap_values() {
        let free = trap(0.0);
        let n1 = ModeIndex::new(1).unwrap();
        let at_resonance = mode_overlap(n1, PI, &free);
        assert!((at_resonance - (1.0 / PI).sqrt()).norm() < 1e-14);
        assert!(mode_overlap(n1, 1e-9, &trap(5.0)).norm() < 1e-8);
        let k = 3.0;
        let closed = mode_bracket(n1, k, &free);
        let alt = -(k).sin() * PI / (k * k - PI * PI);
        assert!((closed - alt).abs() < 1e-14);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let t = trap(5.0);
        for k in [c(2.0, -0.3), c(0.5, 0.4), c(8.0, -1.0), c(1e-5, 0.0)] {
            let h = 1e-6;
            let fd = (jost_plus(k + h, &t) - jost_plus(k - h, &t)) / (2.0 * h);
            let d = jost_plus_derivative(k, &t);
            assert!((fd - d).norm() < 1e-6 * d.norm().max(1.0));
        }
    }
}
