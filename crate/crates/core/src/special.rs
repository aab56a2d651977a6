//! Small special functions shared by the closed-form integrals.

use num_complex::Complex64;

const SERIES_RADIUS: f64 = 1e-4;

/// `sin(z)/z` with the removable point handled by its Taylor series.
pub fn sinc(z: Complex64) -> Complex64 {
    if z.norm() < SERIES_RADIUS {
        let z2 = z * z;
        Complex64::new(1.0, 0.0) - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// Derivative of [`sinc`]: `(z cos z - sin z)/z^2`.
pub fn sinc_prime(z: Complex64) -> Complex64 {
    if z.norm() < SERIES_RADIUS {
        let z2 = z * z;
        -z / 3.0 + z * z2 / 30.0
    } else {
        (z * z.cos() - z.sin()) / (z * z)
    }
}

/// `int_0^L sin(a x) sin(b x) dx` for complex `a`, `b`.
///
/// Written as `f(a - b) - f(a + b)` with `f(z) = (L/2) sinc(z L)`, which is
/// regular when `a = +-b`.
pub fn sine_product_integral(a: Complex64, b: Complex64, length: f64) -> Complex64 {
    let half = 0.5 * length;
    half * (sinc((a - b) * length) - sinc((a + b) * length))
}

/// `int_0^L x sin(a x) dx` for complex `a` (regular at `a = 0`).
pub fn sine_moment_integral(a: Complex64, length: f64) -> Complex64 {
    let z = a * length;
    if z.norm() < 1e-3 {
        let z2 = z * z;
        length * length * z * (Complex64::new(1.0 / 3.0, 0.0) - z2 / 30.0 + z2 * z2 / 840.0)
    } else {
        (z.sin() - z * z.cos()) / (a * a)
    }
}
