//! Gauss-Legendre rules, adaptive integration and composite Simpson sums.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<T: Integrand>(&self, a: f64, b: f64, f: impl Fn(f64) -> T) -> T {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + f(mid + half * x) * (w * half);
        }
        acc
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let pn = if n == 0 { 1.0 } else { p1 };
    let pm = if n == 0 { 0.0 } else { p0 };
    let d = n as f64 * (x * pn - pm) / (x * x - 1.0);
    (pn, d)
}

/// Values that can be integrated: real or complex.
pub trait Integrand: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl Integrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
}

/// Globally adaptive Gauss-Legendre integration by bisection.
///
/// Each interval is accepted when the 10- and 20-point rules agree to within
/// its share of `abs_tol`. Intervals are summed left to right, so the result
/// is deterministic.
pub fn adaptive<T: Integrand>(
    f: impl Fn(f64) -> T,
    a: f64,
    b: f64,
    abs_tol: f64,
) -> Result<Estimate<T>> {
    adaptive_with(&f, a, b, abs_tol, 60, 2_000_000)
}

pub fn adaptive_with<T: Integrand>(
    f: &impl Fn(f64) -> T,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_depth: usize,
    max_evaluations: usize,
) -> Result<Estimate<T>> {
    adaptive_noisy(f, a, b, abs_tol, 0.0, max_depth, max_evaluations)
}

/// [`adaptive_with`] for an integrand known only to within `noise` at each
/// point: an interval is also accepted once the two rules agree to within
/// what that noise allows.
pub fn adaptive_noisy<T: Integrand>(
    f: &impl Fn(f64) -> T,
    a: f64,
    b: f64,
    abs_tol: f64,
    noise: f64,
    max_depth: usize,
    max_evaluations: usize,
) -> Result<Estimate<T>> {
    let lo = low_rule();
    let hi = high_rule();
    let span = (b - a).abs();
    let mut stack = vec![(a, b, 0usize)];
    let mut value = T::zero();
    let mut error = 0.0;
    let mut evaluations = 0;
    while let Some((x0, x1, depth)) = stack.pop() {
        let coarse = lo.integrate(x0, x1, f);
        let fine = hi.integrate(x0, x1, f);
        evaluations += lo.len() + hi.len();
        let diff = (fine - coarse).magnitude();
        let share = abs_tol * (x1 - x0).abs() / span.max(f64::MIN_POSITIVE) + 2.0 * noise * (x1 - x0).abs();
        if diff <= share || depth >= max_depth {
            value = value + fine;
            error += diff;
            continue;
        }
        if evaluations > max_evaluations {
            return Err(Error::numerical(format!(
                "adaptive quadrature on [{a}, {b}] exceeded {max_evaluations} evaluations"
            )));
        }
        let mid = 0.5 * (x0 + x1);
        stack.push((mid, x1, depth + 1));
        stack.push((x0, mid, depth + 1));
    }
    Ok(Estimate {
        value,
        error,
        evaluations,
    })
}

fn low_rule() -> &'static GaussLegendre {
    static RULE: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(10))
}

fn high_rule() -> &'static GaussLegendre {
    static RULE: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(20))
}

/// Shared 32-point rule used by the momentum quadrature.
pub fn panel_rule() -> &'static GaussLegendre {
    static RULE: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(32))
}

/// Composite Simpson sum of uniformly spaced samples (odd count, at least 3).
pub fn simpson(values: &[f64], h: f64) -> f64 {
    assert!(values.len() >= 3 && values.len() % 2 == 1, "Simpson needs an odd number of samples");
    let n = values.len() - 1;
    let mut odd = 0.0;
    let mut even = 0.0;
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / 3.0 * (values[0] + values[n] + 4.0 * odd + 2.0 * even)
}

/// Simpson sum with a Richardson estimate of its discretization error.
///
/// The error compares against the same rule on every other sample, which
/// needs the interval count to be a multiple of four; otherwise the error is
/// reported as NaN.
pub fn simpson_with_error(values: &[f64], h: f64) -> (f64, f64) {
    let fine = simpson(values, h);
    let intervals = values.len() - 1;
    if !intervals.is_multiple_of(4) {
        return (fine, f64::NAN);
    }
    let coarse_samples: Vec<f64> = values.iter().step_by(2).copied().collect();
    let coarse = simpson(&coarse_samples, 2.0 * h);
    (fine, (fine - coarse).abs() / 15.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(8);
        let v = rule.integrate(0.0, 2.0, |x: f64| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
        let w: f64 = rule.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_32_is_symmetric_and_accurate() {
        let rule = panel_rule();
        for i in 0..rule.len() {
            assert!((rule.nodes[i] + rule.nodes[rule.len() - 1 - i]).abs() < 1e-15);
        }
        let v = rule.integrate(0.0, PI, |x: f64| x.sin());
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let est = adaptive(|x: f64| x.sqrt().ln(), 0.0, 1.0, 1e-10).unwrap();
        assert!((est.value + 0.5).abs() < 1e-9);
    }

    #[test]
    fn adaptive_complex_oscillatory() {
        let est = adaptive(|x: f64| Complex64::new(0.0, 50.0 * x).exp(), 0.0, 1.0, 1e-12).unwrap();
        let exact = (Complex64::new(0.0, 50.0).exp() - 1.0) / Complex64::new(0.0, 50.0);
        assert!((est.value - exact).norm() < 1e-11);
    }

    #[test]
    fn simpson_error_estimate_tracks_true_error() {
        let n = 64;
        let h = 1.0 / n as f64;
        let v: Vec<f64> = (0..=n).map(|i| (3.0 * i as f64 * h).exp()).collect();
        let (s, e) = simpson_with_error(&v, h);
        let exact = (3f64.exp() - 1.0) / 3.0;
        assert!((s - exact).abs() < 2.0 * e && e < 1e-6);
    }
}
