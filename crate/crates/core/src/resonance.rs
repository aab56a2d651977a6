//! Resonant (Gamow) states and the pole expansion of the nonescape
//! probability.
//!
//! Inside the trap `u_j(x) = A_j sin(k_j x)`; outside it is purely outgoing,
//! `u_j(L) e^{i k_j (x - L)}`. The amplitude is fixed by the resonant-state
//! normalization
//!
//! ```text
//! int_0^L u_j(x)^2 dx + i u_j(L)^2 / (2 k_j) = 1
//! ```
//!
//! (a square, not a modulus), with `Re A_j > 0`. With
//! `c_j(n) = int_0^L phi_n u_j dx` and `I_js = int_0^L u_j u_s^* dx` the
//! exponential part of the nonescape probability is
//!
//! ```text
//! P_exp(t) = sum_{j,s} c_j c_s^* I_js exp(-i(k_j^2 - (k_s^*)^2) t).
//! ```
//!
//! The remainder (the background contour contribution) is not integrated
//! directly: it is the exact spectral value minus `P_exp`, and at late times
//! it approaches `L^3 C(n)^2 / (12 pi (1 + eta L)^4 t^3)` with
//! `C(n) = int_0^L phi_n x dx = L sqrt(2L) (-1)^n / (n pi)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ModeIndex, TrapSpec};
use crate::poles::{find_poles, PoleSet};
use crate::quadrature::GaussLegendre;
use crate::special::sine_product_integral;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Gamow state `u_j` for a certified pole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonantState {
    pub j: usize,
    pub k: Complex64,
    pub amplitude: Complex64,
    /// The normalization functional re-evaluated by quadrature (target 1).
    pub norm_certificate: Complex64,
    length: f64,
}

impl ResonantState {
    /// `u_j(x)` for `x >= 0`.
    pub fn value(&self, x: f64) -> Complex64 {
        if x <= self.length {
            self.amplitude * (self.k * x).sin()
        } else {
            self.amplitude * (self.k * self.length).sin() * (I * self.k * (x - self.length)).exp()
        }
    }

    /// Relative mismatch of the jump condition `u'(L+) - u'(L-) = eta u(L)`.
    pub fn matching_residual(&self, trap: &TrapSpec) -> f64 {
        let kl = self.k * self.length;
        let u = self.amplitude * kl.sin();
        let inside = self.amplitude * self.k * kl.cos();
        let outside = I * self.k * u;
        (outside - inside - trap.eta * u).norm() / (self.amplitude * self.k).norm()
    }
}

/// `int_0^L sin(kx)^2 dx + i sin(kL)^2 / (2k)`.
fn normalization_functional(k: Complex64, length: f64) -> Complex64 {
    let s = (k * length).sin();
    sine_product_integral(k, k, length) + I * s * s / (2.0 * k)
}

/// Builds `u_j` from pole `j` of a certified pole set.
pub fn build_resonant_state(j: usize, poles: &PoleSet) -> Result<ResonantState> {
    let pole = poles
        .get(j)
        .ok_or_else(|| Error::domain(format!("pole {j} is not in the certified set of {}", poles.len())))?;
    let length = poles.trap().length;
    let k = pole.k;
    let amplitude = normalization_functional(k, length).sqrt().inv();
    let amplitude = if amplitude.re < 0.0 { -amplitude } else { amplitude };

    // Independent check: Gauss-Legendre on the square of the sampled state.
    let rule = GaussLegendre::new(32);
    let panels = 8 + (k.re * length / PI).ceil() as usize;
    let h = length / panels as f64;
    let mut integral = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let a = p as f64 * h;
        integral += rule.integrate(a, a + h, |x| {
            let u = amplitude * (k * x).sin();
            u * u
        });
    }
    let edge = amplitude * (k * length).sin();
    let norm_certificate = integral + I * edge * edge / (2.0 * k);
    Ok(ResonantState {
        j,
        k,
        amplitude,
        norm_certificate,
        length,
    })
}

/// Expansion coefficients `c_j(n)` and overlaps `I_js`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionTable {
    pub trap: TrapSpec,
    pub states: Vec<ResonantState>,
    /// `c[n-1][j-1] = c_j(n)`.
    pub c: Vec<Vec<Complex64>>,
    /// `overlap[j-1][s-1] = I_js`.
    pub overlap: Vec<Vec<Complex64>>,
}

impl ExpansionTable {
    /// Finds `j_max` poles and builds the table for modes `1..=n_max`.
    pub fn for_trap(trap: &TrapSpec, n_max: usize, j_max: usize) -> Result<Self> {
        let poles = find_poles(trap, j_max)?;
        expansion_coefficients(n_max, j_max, &poles)
    }

    pub fn n_max(&self) -> usize {
        self.c.len()
    }

    pub fn j_max(&self) -> usize {
        self.states.len()
    }

    /// `c_j(n)`.
    pub fn coefficient(&self, n: ModeIndex, j: usize) -> Complex64 {
        self.c[n.get() as usize - 1][j - 1]
    }
}

/// `c_j(n) = sqrt(2/L) A_j int sin(k_j x) sin(k_n x)` and
/// `I_js = A_j A_s^* int sin(k_j x) sin(k_s^* x)`, in closed form.
pub fn expansion_coefficients(n_max: usize, j_max: usize, poles: &PoleSet) -> Result<ExpansionTable> {
    if n_max == 0 || j_max == 0 {
        return Err(Error::domain("expansion table needs n_max >= 1 and j_max >= 1"));
    }
    let trap = *poles.trap();
    let l = trap.length;
    let states = (1..=j_max)
        .map(|j| build_resonant_state(j, poles))
        .collect::<Result<Vec<_>>>()?;
    let c = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let kn = Complex64::new(n as f64 * PI / l, 0.0);
            states
                .iter()
                .map(|u| (2.0 / l).sqrt() * u.amplitude * sine_product_integral(u.k, kn, l))
                .collect()
        })
        .collect();
    let overlap = states
        .par_iter()
        .map(|u| {
            states
                .iter()
                .map(|v| u.amplitude * v.amplitude.conj() * sine_product_integral(u.k, v.k.conj(), l))
                .collect()
        })
        .collect();
    Ok(ExpansionTable {
        trap,
        states,
        c,
        overlap,
    })
}

/// `sum_j c_j(n)^2` over the table; its real part tends to 1.
pub fn coefficient_sum_rule(n: ModeIndex, table: &ExpansionTable) -> Complex64 {
    table.c[n.get() as usize - 1].iter().map(|c| c * c).sum()
}

/// Exponential (pole) part of `P_n(t)` truncated to `n_terms` poles.
pub fn exponential_nonescape(n: ModeIndex, t: f64, n_terms: usize, table: &ExpansionTable) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("time must be >= 0, got {t}")));
    }
    if n_terms == 0 || n_terms > table.j_max() || n.get() as usize > table.n_max() {
        return Err(Error::domain(format!(
            "table holds {} poles and {} modes; asked for {n_terms} poles of mode {n}",
            table.j_max(),
            table.n_max()
        )));
    }
    let row = &table.c[n.get() as usize - 1];
    let v: Vec<Complex64> = (0..n_terms)
        .map(|j| {
            let k = table.states[j].k;
            row[j] * (-I * k * k * t).exp()
        })
        .collect();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for j in 0..n_terms {
        for s in 0..n_terms {
            let term = v[j] * v[s].conj() * table.overlap[j][s];
            sum += term;
            scale += term.norm();
        }
    }
    if sum.im.abs() > 1e-8 * sum.re.abs() + 1e-14 * scale {
        return Err(Error::numerical(format!(
            "pole expansion is not real: {sum} at t = {t}"
        )));
    }
    Ok(sum.re)
}

/// `C(n) = L sqrt(2L) (-1)^n / (n pi)`.
///
/// This is `-int_0^L phi_n(x) x dx` for `phi_n = sqrt(2/L) sin(k_n x)`; only
/// `C(n)^2` enters any observable.
pub fn first_moment(n: ModeIndex, trap: &TrapSpec) -> f64 {
    let l = trap.length;
    let sign = if n.get().is_multiple_of(2) { 1.0 } else { -1.0 };
    l * (2.0 * l).sqrt() * sign / (n.get() as f64 * PI)
}

/// Late-time law `L^3 C(n)^2 / (12 pi (1 + eta L)^4 t^3)`.
pub fn longtime_asymptote(n: ModeIndex, t: f64, trap: &TrapSpec) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("long-time asymptote diverges at t = {t}")));
    }
    let l = trap.length;
    let c = first_moment(n, trap);
    Ok(l.powi(3) * c * c / (12.0 * PI * (1.0 + trap.opacity()).powi(4) * t.powi(3)))
}

/// Background (non-pole) part given an exact value and the pole part.
pub fn nonexponential_part(exact: f64, exponential: f64) -> f64 {
    exact - exponential
}

/// Late-time nonescape probability: pole part with `n` terms plus the
/// `t^-3` tail.
pub fn late_time_nonescape(n: ModeIndex, t: f64, trap: &TrapSpec) -> Result<f64> {
    let terms = n.get() as usize;
    let table = ExpansionTable::for_trap(trap, terms, terms)?;
    Ok(exponential_nonescape(n, t, terms, &table)? + longtime_asymptote(n, t, trap)?)
}

/// Time where the leading pole term `|c_1|^2 I_11 e^{-Gamma_1 t}` meets the
/// `t^-3` law: the crossover from exponential to power-law decay.
pub fn transition_time(n: ModeIndex, trap: &TrapSpec) -> Result<f64> {
    let table = ExpansionTable::for_trap(trap, n.get() as usize, 1)?;
    let c1 = table.coefficient(n, 1);
    let weight = (c1 * c1.conj() * table.overlap[0][0]).re;
    let gamma = -4.0 * table.states[0].k.re * table.states[0].k.im;
    let gap = |t: f64| weight.ln() - gamma * t - longtime_asymptote(n, t, trap).unwrap().ln();
    let lo = 3.0 / gamma;
    if gap(lo) <= 0.0 {
        return Err(Error::numerical("no exponential regime before the power law"));
    }
    let mut hi = 2.0 * lo;
    while gap(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::numerical("crossover time not bracketed"));
        }
    }
    bisect(gap, lo, hi)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Time windows where each approximation is expected to hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityWindows {
    /// After higher-pole transients, before the power-law onset.
    pub exponential: (f64, f64),
    /// Well past the crossover.
    pub late: (f64, f64),
    pub crossover: f64,
}

/// Exponential window from `8/(Gamma_2 - Gamma_1)` until the `n`-term pole
/// sum is only `2500` times the `t^-3` law (interference with the background
/// then stays below about 4%), capped at `t_c/2`; late window `[2 t_c, 10 t_c]`
/// around the crossover time `t_c`.
pub fn validity_windows(n: ModeIndex, trap: &TrapSpec) -> Result<ValidityWindows> {
    let poles = find_poles(trap, 2)?;
    let settle = 8.0 / (poles.poles()[1].width - poles.poles()[0].width);
    let tc = transition_time(n, trap)?;
    let terms = n.get() as usize;
    let table = ExpansionTable::for_trap(trap, terms, terms)?;
    let margin = |t: f64| {
        let pole = exponential_nonescape(n, t, terms, &table).unwrap_or(0.0);
        pole.ln() - longtime_asymptote(n, t, trap).unwrap().ln() - 2.5e3f64.ln()
    };
    let mut end = 0.5 * tc;
    if margin(end) <= 0.0 && margin(settle) > 0.0 {
        end = bisect(margin, settle, end)?;
    }
    Ok(ValidityWindows {
        exponential: (settle, end),
        late: (2.0 * tc, 10.0 * tc),
        crossover: tc,
    })
}
