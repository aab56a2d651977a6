//! Exact evolution by quadrature over the outgoing continuum.
//!
//! ```text
//! psi(x, t) = int_0^inf dk <x|k+> <k+|psi> exp(-i k^2 t)
//! ```
//!
//! The momentum axis is cut into panels of width `pi/(2L)`; each panel is
//! split into 32-point Gauss-Legendre sub-panels so that the phase swept by
//! the integrand across a sub-panel stays under a budget. Past the cutoff
//! `K` the integral is replaced by two terms of its integration-by-parts
//! expansion, and `K` is raised until the first neglected term is below the
//! amplitude tolerance. Each evaluation is repeated with half the phase
//! budget until the in-trap norm stops changing.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fit::RegimeAnnotations;
use crate::model::{GridNorm, ModeIndex, ModeState, QuadReport, SpatialGrid, TimeGrid, TrapSpec};
use crate::propagator::Propagator;
use crate::quadrature::{self, panel_rule, simpson_with_error};
use crate::scattering::{jost_plus, mode_overlap, mode_overlap_envelope};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const BLOCK: usize = 2048;
const RESYNC: usize = 128;

/// Accuracy and cost controls for the continuum quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    /// Relative tolerance on the in-trap norm between refinement levels.
    pub tol: f64,
    /// Phase (radians) one 32-node sub-panel may sweep at level 0.
    pub phase_budget: f64,
    /// Maximum number of budget halvings.
    pub max_refinements: usize,
    /// Hard cap on the momentum cutoff, in units of `1/L`.
    pub k_cap: f64,
    /// Cutoff used at `t = 0`, in units of `1/L` (no oscillatory tail there).
    pub k_initial: f64,
    /// Beyond this time nonescape probabilities come from the resonance
    /// expansion plus the `t^-3` asymptote.
    pub t_cap: f64,
    /// Starting Simpson interval count on `[0, L]` for nonescape probabilities.
    pub interior_intervals: usize,
    /// Largest interval count the grid refinement may reach.
    pub max_interior_intervals: usize,
    /// Relative Simpson error accepted for nonescape probabilities.
    pub grid_tol: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            phase_budget: 60.0,
            max_refinements: 4,
            k_cap: 2e5,
            k_initial: 1e4,
            t_cap: 1e3,
            interior_intervals: 256,
            max_interior_intervals: 2048,
            grid_tol: 1e-6,
        }
    }
}

impl SpectralOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    /// Pointwise amplitude target used to place the cutoff.
    fn amplitude_tol(&self) -> f64 {
        (1e-3 * self.tol).max(1e-15)
    }
}

/// A state given by its continuum amplitudes `<k+|psi>`.
pub trait MomentumProfile: Sync {
    fn amplitude(&self, k: f64) -> Complex64;
    /// Upper bound of `|amplitude|` at `k`, valid for `k` beyond
    /// [`MomentumProfile::base_cutoff`]; used only for error control.
    fn envelope(&self, k: f64) -> f64;
    /// Smallest cutoff worth considering.
    fn base_cutoff(&self) -> f64;
    /// The amplitude written as `sum_s c_s(k) e^{isk}` with coefficients
    /// that vary slowly next to the carriers. `order` is how many terms of a
    /// multiple-reflection series to split off. Only used past the cutoff.
    fn carriers(&self, k: f64, _order: usize) -> Vec<(f64, Complex64)> {
        vec![(0.0, self.amplitude(k))]
    }
    /// Wavenumber and relative size of the oscillation left in the carrier
    /// coefficients at `k`; `None` when unknown.
    fn ripple(&self, _k: f64, _order: usize) -> Option<(f64, f64)> {
        None
    }
}

/// The box mode `phi_n` as a continuum profile.
#[derive(Debug, Clone, Copy)]
pub struct ModeProfile {
    pub n: ModeIndex,
    pub trap: TrapSpec,
}

impl ModeProfile {
    pub fn new(n: ModeIndex, trap: &TrapSpec) -> Self {
        Self { n, trap: *trap }
    }
}

impl MomentumProfile for ModeProfile {
    fn amplitude(&self, k: f64) -> Complex64 {
        mode_overlap(self.n, k, &self.trap)
    }

    fn envelope(&self, k: f64) -> f64 {
        mode_overlap_envelope(self.n, k, &self.trap)
    }

    fn base_cutoff(&self) -> f64 {
        let l = self.trap.length;
        (4.0 * self.n.wavenumber(&self.trap)).max(40.0 / l).max(4.0 * self.trap.eta)
    }

    /// `<k+|phi_n> = sqrt(2/pi) sqrt(2/L) (-1)^n k_n sin(kL) / ((k^2 - k_n^2) J+(k)^*)`.
    fn carriers(&self, k: f64, order: usize) -> Vec<(f64, Complex64)> {
        let l = self.trap.length;
        let kn = self.n.wavenumber(&self.trap);
        let sign = if self.n.get().is_multiple_of(2) { 1.0 } else { -1.0 };
        let r = (2.0 / PI).sqrt() * (2.0 / l).sqrt() * sign * kn / (k * k - kn * kn);
        let half = r / (2.0 * I);
        // 1/J+^* is the conjugate series, with carriers at -2mL.
        let inverse: Vec<(f64, Complex64)> = inverse_jost_series(k, &self.trap, order)
            .into_iter()
            .map(|(s, c)| (-s, c.conj()))
            .collect();
        convolve(&[(l, half), (-l, -half)], &inverse)
    }

    fn ripple(&self, k: f64, order: usize) -> Option<(f64, f64)> {
        Some((2.0 * self.trap.length, series_ripple(k, &self.trap, order)))
    }
}

/// Most multiple-reflection terms split off in the tail.
const MAX_ORDER: usize = 24;

/// `1/J+(k)` for real `k` as `sum_{m <= order} c_m(k) e^{2imkL}`.
///
/// With `beta = eta/(2ik)`, `J+ = alpha (1 + gamma e^{2ikL})` where
/// `alpha = 1 - beta` and `gamma = beta/alpha`; the geometric series is
/// exact because the last coefficient keeps the remainder
/// `(-gamma)^order / (alpha (1 + gamma e^{2ikL}))`.
fn inverse_jost_series(k: f64, trap: &TrapSpec, order: usize) -> Vec<(f64, Complex64)> {
    if trap.eta == 0.0 {
        return vec![(0.0, Complex64::new(1.0, 0.0))];
    }
    let l = trap.length;
    let beta = trap.eta / (2.0 * I * k);
    let alpha = 1.0 - beta;
    let gamma = beta / alpha;
    let mut out = Vec::with_capacity(order + 1);
    let mut c = 1.0 / alpha;
    for m in 0..order {
        out.push((2.0 * m as f64 * l, c));
        c *= -gamma;
    }
    let z = Complex64::from_polar(1.0, 2.0 * k * l);
    out.push((2.0 * order as f64 * l, c / (1.0 + gamma * z)));
    out
}

/// `J+(k)^*` for real `k` as carriers.
fn conj_jost_carriers(k: f64, trap: &TrapSpec) -> Vec<(f64, Complex64)> {
    if trap.eta == 0.0 {
        return vec![(0.0, Complex64::new(1.0, 0.0))];
    }
    let beta = trap.eta / (2.0 * I * k);
    vec![(0.0, (1.0 - beta).conj()), (-2.0 * trap.length, beta.conj())]
}

/// Bound on `|f''| / |f|` from the remainder left in the last coefficient
/// of [`inverse_jost_series`], in units of `(2L)^2`.
fn series_ripple(k: f64, trap: &TrapSpec, order: usize) -> f64 {
    if trap.eta == 0.0 {
        return 0.0;
    }
    let r = trap.eta / (2.0 * k);
    if r >= 0.5 {
        return f64::INFINITY;
    }
    r.powi(order as i32 + 1) * (1.0 + r) / (1.0 - r).powi(3)
}

/// Product of two carrier sums, merging equal carriers.
fn convolve(a: &[(f64, Complex64)], b: &[(f64, Complex64)]) -> Vec<(f64, Complex64)> {
    let mut out: Vec<(f64, Complex64)> = Vec::with_capacity(a.len() + b.len());
    for &(sa, ca) in a {
        for &(sb, cb) in b {
            let s = sa + sb;
            match out.iter_mut().find(|(so, _)| (so - s).abs() <= 1e-9 * (1.0 + s.abs())) {
                Some(slot) => slot.1 += ca * cb,
                None => out.push((s, ca * cb)),
            }
        }
    }
    out
}

/// Quadrature nodes on `[0, K]`.
struct NodeSet {
    k: Vec<f64>,
    w: Vec<f64>,
}

fn build_nodes(t: f64, k_max: f64, span: f64, budget: f64, trap: &TrapSpec) -> NodeSet {
    let rule = panel_rule();
    let length = trap.length;
    let width = PI / (2.0 * length);
    let panels = (k_max / width).ceil() as usize;
    let mut k = Vec::new();
    let mut w = Vec::new();
    for p in 0..panels {
        let a = p as f64 * width;
        let b = ((p + 1) as f64 * width).min(k_max);
        let phase = (b - a) * (t * (a + b) + span);
        let mut subs = (phase / budget).ceil().max(1.0);
        if trap.eta > 0.0 {
            // Keep sub-panels narrow next to the zeros of J+ below the axis.
            let half = 0.5 * pole_depth(a.max(width), trap);
            subs = subs.max((0.5 * (b - a) / half).ceil());
        }
        let subs = subs as usize;
        let h = (b - a) / subs as f64;
        for s in 0..subs {
            let lo = a + s as f64 * h;
            let half = 0.5 * h;
            let mid = lo + half;
            for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                k.push(mid + half * x);
                w.push(wt * half);
            }
        }
    }
    NodeSet { k, w }
}

/// Approximate distance below the real axis of the zeros of `J+` near
/// `Re k = k`, from `|e^{2ikL}| = |1 - 2ik/eta|`.
fn pole_depth(k: f64, trap: &TrapSpec) -> f64 {
    let r = 2.0 * k / trap.eta;
    (1.0 + r * r).ln() / (4.0 * trap.length)
}

/// Bound on the first neglected terms of the two-term tail expansion of
/// `int_K^inf G(k) exp(-i(k^2 t - s k)) dk` for `s <= reach`, with
/// `|G| <= env`, `|G'| <= env slope / k` and `|G''| <= env curvature`.
fn tail_residual(env: f64, k: f64, t: f64, reach: f64, slope: f64, curvature: f64) -> f64 {
    let d = 2.0 * k * t - reach;
    if d <= 0.0 {
        return f64::INFINITY;
    }
    4.0 * env * (curvature / d.powi(3) + 6.0 * slope * t / (k * d.powi(4)) + 12.0 * t * t / d.powi(5))
}

/// Chosen momentum cutoff.
#[derive(Debug, Clone, Copy)]
struct Cutoff {
    k: f64,
    /// Bound on the tail error per amplitude.
    error: f64,
    /// Multiple-reflection terms split off in the tail.
    order: usize,
}

/// Chooses the cutoff `K` for abscissae up to `x_max`, together with the
/// number of reflection terms that makes the tail expansion cheapest.
///
/// `power` is 0 for values and 1 for `x`-derivatives (integrand grows by `k`).
fn choose_cutoff<P: MomentumProfile>(
    profile: &P,
    trap: &TrapSpec,
    t: f64,
    x_max: f64,
    amp_tol: f64,
    opts: &SpectralOptions,
    power: i32,
) -> Cutoff {
    let l = trap.length;
    let cap = opts.k_cap / l;
    let width = PI / (2.0 * l);
    let round = |k: f64| (k / width).ceil() * width;
    let env = |k: f64| {
        let jmin = 1.0 - trap.eta / k;
        (2.0 / PI).sqrt() * profile.envelope(k) / jmin * k.powi(power)
    };
    if t == 0.0 {
        let k = round((opts.k_initial / l).max(profile.base_cutoff()));
        // Without a phase the tail only decays like the envelope times k.
        return Cutoff {
            k,
            error: env(k) * k,
            order: 0,
        };
    }
    let carrier_reach = profile
        .carriers(profile.base_cutoff(), 0)
        .iter()
        .map(|c| c.0)
        .fold(0.0, f64::max);
    let max_order = if trap.eta == 0.0 { 0 } else { MAX_ORDER };
    let residual = |k: f64, order: usize| {
        let (q, eps) = match profile.ripple(k, order) {
            Some((q, eps)) => (q.max(2.0 * l), eps + series_ripple(k, trap, order)),
            None => (3.0 * l, 1.0),
        };
        let m = order as f64 + power as f64;
        let curvature = q * q * eps + (m + 2.0) * (m + 3.0) / (k * k);
        let reach = carrier_reach + 2.0 * order as f64 * l + x_max;
        tail_residual(env(k), k, t, reach, m + 2.0, curvature)
    };
    let best = |k: f64| {
        (0..=max_order)
            .map(|o| (residual(k, o), o))
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
    };
    let mut k = profile.base_cutoff().max((carrier_reach + x_max) / t);
    while k < cap && best(k).0 > amp_tol {
        k *= 1.1;
    }
    let k = round(k.min(cap));
    let (error, order) = best(k);
    Cutoff { k, error, order }
}

/// Carrier coefficients of the integrand just past the cutoff, at
/// `K - delta, K, K + delta`, split by region.
struct TailData {
    k: f64,
    delta: f64,
    t: f64,
    /// `(carrier, sign of x in the exponent, G at the three points)`.
    inner: Vec<(f64, f64, [Complex64; 3])>,
    outer: Vec<(f64, f64, [Complex64; 3])>,
}

impl TailData {
    fn new<P: MomentumProfile>(profile: &P, trap: &TrapSpec, cutoff: &Cutoff, t: f64) -> Self {
        let norm = (2.0 / PI).sqrt();
        let k = cutoff.k;
        let delta = 1e-3 / trap.length;
        // Per point: a/J+ (inside), a and a J+^*/J+ (outside).
        let per_k: Vec<[Vec<(f64, Complex64)>; 3]> = [k - delta, k, k + delta]
            .iter()
            .map(|&k| {
                let a = profile.carriers(k, cutoff.order);
                let inverse = inverse_jost_series(k, trap, cutoff.order);
                let inside = convolve(&a, &inverse);
                let reflected = convolve(&convolve(&a, &conj_jost_carriers(k, trap)), &inverse);
                [inside, a, reflected]
            })
            .collect();
        let gather = |which: usize, coef: Complex64| -> Vec<(f64, [Complex64; 3])> {
            per_k[0][which]
                .iter()
                .enumerate()
                .map(|(ci, &(sigma, _))| (sigma, [0, 1, 2].map(|p| coef * per_k[p][which][ci].1)))
                .collect()
        };
        let mut inner = Vec::new();
        let mut outer = Vec::new();
        for rho in [1.0, -1.0] {
            // sin(kx)/J = (e^{ikx} - e^{-ikx}) / (2i J).
            for (sigma, g) in gather(0, rho * norm / (2.0 * I)) {
                inner.push((sigma, rho, g));
            }
        }
        // (i/2)(e^{-ikx} - S e^{ikx}).
        for (sigma, g) in gather(1, norm * 0.5 * I) {
            outer.push((sigma, -1.0, g));
        }
        for (sigma, g) in gather(2, -norm * 0.5 * I) {
            outer.push((sigma, 1.0, g));
        }
        Self {
            k,
            delta,
            t,
            inner,
            outer,
        }
    }

    /// `int_K^inf` of the value and `x`-derivative integrands at `x`.
    fn correction(&self, x: f64, inside: bool) -> (Complex64, Complex64) {
        let terms = if inside { &self.inner } else { &self.outer };
        let (k, t, delta) = (self.k, self.t, self.delta);
        let ks = [k - delta, k, k + delta];
        let mut v = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for &(sigma, rho, g) in terms {
            let s = sigma + rho * x;
            let dphi = 2.0 * k * t - s;
            let e = Complex64::from_polar(1.0, -(k * k * t - s * k)) / (I * dphi);
            let two = |g: [Complex64; 3]| {
                let dg = (g[2] - g[0]) / (2.0 * delta);
                let h = dg / (I * dphi) - g[1] * 2.0 * t / (I * dphi * dphi);
                e * (g[1] + h)
            };
            v += two(g);
            let gd = [0, 1, 2].map(|p| g[p] * I * rho * ks[p]);
            d += two(gd);
        }
        (v, d)
    }
}

/// Per-node data shared by all abscissae.
struct NodeData {
    /// Inner coefficient: `sqrt(2/pi) w a(k) e^{-ik^2t} / J+(k)` (times `sin kx`).
    inner: Vec<Complex64>,
    /// Outer coefficients: `sqrt(2/pi)(i/2) w a e^{-ik^2t}` (times `e^{-ikx}`) and
    /// the same times `S(k)` (times `-e^{ikx}`).
    outer_in: Vec<Complex64>,
    outer_out: Vec<Complex64>,
    /// Bound on accumulated rounding in any single sample.
    rounding: f64,
}

fn node_data<P: MomentumProfile>(profile: &P, trap: &TrapSpec, t: f64, nodes: &NodeSet, need_outer: bool) -> NodeData {
    let norm = (2.0 / PI).sqrt();
    let n = nodes.k.len();
    let mut inner = Vec::with_capacity(n);
    let mut outer_in = Vec::with_capacity(if need_outer { n } else { 0 });
    let mut outer_out = Vec::with_capacity(if need_outer { n } else { 0 });
    let mut rounding = 0.0;
    for (&k, &w) in nodes.k.iter().zip(&nodes.w) {
        let phase = k * k * t;
        let a = profile.amplitude(k) * w * Complex64::from_polar(1.0, -phase);
        let jp = jost_plus(Complex64::new(k, 0.0), trap);
        let c = norm * a / jp;
        inner.push(c);
        rounding += c.norm() * (8.0 + phase) * f64::EPSILON;
        if need_outer {
            let o = norm * 0.5 * I * a;
            outer_in.push(o);
            outer_out.push(o * jp.conj() / jp);
        }
    }
    NodeData {
        inner,
        outer_in,
        outer_out,
        rounding,
    }
}

/// Sums the nodes over every grid abscissa (uniform spacing `h`).
fn accumulate(nodes: &NodeSet, data: &NodeData, h: f64, rows: usize, edge: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); rows];
    let n = nodes.k.len();
    let mut start = 0;
    let mut zr = vec![0.0; BLOCK];
    let mut zi = vec![0.0; BLOCK];
    let mut er = vec![0.0; BLOCK];
    let mut ei = vec![0.0; BLOCK];
    let mut cr = vec![0.0; BLOCK];
    let mut ci = vec![0.0; BLOCK];
    let mut ar = vec![0.0; BLOCK];
    let mut ai = vec![0.0; BLOCK];
    let mut br = vec![0.0; BLOCK];
    let mut bi = vec![0.0; BLOCK];
    while start < n {
        let end = (start + BLOCK).min(n);
        let len = end - start;
        for i in 0..len {
            let k = nodes.k[start + i];
            let (s, c) = (k * h).sin_cos();
            zr[i] = c;
            zi[i] = s;
            er[i] = 1.0;
            ei[i] = 0.0;
            cr[i] = data.inner[start + i].re;
            ci[i] = data.inner[start + i].im;
            if rows > edge + 1 {
                ar[i] = data.outer_in[start + i].re;
                ai[i] = data.outer_in[start + i].im;
                br[i] = data.outer_out[start + i].re;
                bi[i] = data.outer_out[start + i].im;
            }
        }
        for (m, slot) in out.iter_mut().enumerate() {
            if m > 0 && m % RESYNC == 0 {
                let x = m as f64 * h;
                for i in 0..len {
                    let (s, c) = (nodes.k[start + i] * x).sin_cos();
                    er[i] = c;
                    ei[i] = s;
                }
            }
            let (sr, si) = if m <= edge {
                dot_inner(&cr[..len], &ci[..len], &ei[..len])
            } else {
                dot_outer(&ar[..len], &ai[..len], &br[..len], &bi[..len], &er[..len], &ei[..len])
            };
            *slot += Complex64::new(sr, si);
            rotate(&mut er[..len], &mut ei[..len], &zr[..len], &zi[..len]);
        }
        start = end;
    }
    out
}

#[inline]
fn rotate(er: &mut [f64], ei: &mut [f64], zr: &[f64], zi: &[f64]) {
    for (((r, i), a), b) in er.iter_mut().zip(ei.iter_mut()).zip(zr).zip(zi) {
        let nr = *r * a - *i * b;
        let ni = *r * b + *i * a;
        *r = nr;
        *i = ni;
    }
}

/// `sum c_i sin(k_i x)` with four interleaved partial sums.
#[inline]
fn dot_inner(cr: &[f64], ci: &[f64], ei: &[f64]) -> (f64, f64) {
    let mut pr = [0.0; 4];
    let mut pi = [0.0; 4];
    let chunks = cr.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            let i = 4 * c + l;
            pr[l] += cr[i] * ei[i];
            pi[l] += ci[i] * ei[i];
        }
    }
    for i in 4 * chunks..cr.len() {
        pr[0] += cr[i] * ei[i];
        pi[0] += ci[i] * ei[i];
    }
    ((pr[0] + pr[1]) + (pr[2] + pr[3]), (pi[0] + pi[1]) + (pi[2] + pi[3]))
}

/// `sum a_i e^{-ik_i x} - b_i e^{ik_i x}` with four interleaved partial sums.
#[inline]
fn dot_outer(ar: &[f64], ai: &[f64], br: &[f64], bi: &[f64], er: &[f64], ei: &[f64]) -> (f64, f64) {
    let mut pr = [0.0; 4];
    let mut pi = [0.0; 4];
    let chunks = ar.len() / 4;
    let term = |i: usize| {
        let re = ar[i] * er[i] + ai[i] * ei[i] - (br[i] * er[i] - bi[i] * ei[i]);
        let im = ai[i] * er[i] - ar[i] * ei[i] - (br[i] * ei[i] + bi[i] * er[i]);
        (re, im)
    };
    for c in 0..chunks {
        for l in 0..4 {
            let (re, im) = term(4 * c + l);
            pr[l] += re;
            pi[l] += im;
        }
    }
    for i in 4 * chunks..ar.len() {
        let (re, im) = term(i);
        pr[0] += re;
        pi[0] += im;
    }
    ((pr[0] + pr[1]) + (pr[2] + pr[3]), (pi[0] + pi[1]) + (pi[2] + pi[3]))
}

/// Integrand of the continuum expansion at one `(x, k)`, without the
/// `exp(-ik^2 t)` factor, and its `x`-derivative.
fn integrand<P: MomentumProfile>(profile: &P, trap: &TrapSpec, x: f64, k: f64) -> (Complex64, Complex64) {
    let norm = (2.0 / PI).sqrt();
    let a = profile.amplitude(k);
    let jp = jost_plus(Complex64::new(k, 0.0), trap);
    if x <= trap.length {
        let c = norm * a / jp;
        let (s, co) = (k * x).sin_cos();
        (c * s, c * k * co)
    } else {
        let o = norm * 0.5 * I * a;
        let s = jp.conj() / jp;
        let e = Complex64::from_polar(1.0, k * x);
        let v = o * (e.conj() - s * e);
        let d = o * (-I * k) * (e.conj() + s * e);
        (v, d)
    }
}

/// Evaluates `profile` evolved to time `t` on every node of `grid`.
///
/// Refines the phase budget until the in-trap norm changes by less than
/// `opts.tol` (relative) between levels.
pub fn evolve_profile<P: MomentumProfile>(
    profile: &P,
    t: f64,
    trap: &TrapSpec,
    grid: &SpatialGrid,
    opts: &SpectralOptions,
) -> Result<(Vec<Complex64>, QuadReport)> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("time must be >= 0, got {t}")));
    }
    grid.check_trap(trap)?;
    let span = grid.x_max() + 3.0 * trap.length;
    let cutoff = choose_cutoff(profile, trap, t, grid.x_max(), opts.amplitude_tol(), opts, 0);
    let (k_max, tail_err) = (cutoff.k, cutoff.error);
    let tail = (t > 0.0).then(|| TailData::new(profile, trap, &cutoff, t));
    let rows = grid.len();
    let edge = grid.edge_index();
    let h = grid.spacing();
    let need_outer = rows > edge + 1;

    let mut previous: Option<(Vec<Complex64>, f64)> = None;
    let mut budget = opts.phase_budget;
    for level in 0..=opts.max_refinements {
        let nodes = build_nodes(t, k_max, span, budget, trap);
        let data = node_data(profile, trap, t, &nodes, need_outer);
        let mut samples = accumulate(&nodes, &data, h, rows, edge);
        if let Some(tail) = &tail {
            for (i, s) in samples.iter_mut().enumerate() {
                *s += tail.correction(grid.abscissa(i), i <= edge).0;
            }
        }
        samples[0] = Complex64::new(0.0, 0.0);
        let p = trap_norm(&samples, edge, h).value;
        let amp_floor = data.rounding + tail_err;
        if let Some((prev, p_prev)) = previous {
            let p_floor = 2.0 * p.sqrt() * amp_floor * trap.length.sqrt() + amp_floor * amp_floor;
            let change = (p - p_prev).abs();
            if change <= opts.tol * p + p_floor {
                let diff = samples
                    .iter()
                    .zip(&prev)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                let report = QuadReport {
                    k_max,
                    nodes: nodes.k.len(),
                    estimated_error: diff + amp_floor,
                    refinements: level,
                };
                return Ok((samples, report));
            }
        }
        previous = Some((samples, p));
        budget *= 0.5;
    }
    Err(Error::numerical(format!(
        "continuum quadrature did not converge at t = {t} after {} refinements (k_max = {k_max})",
        opts.max_refinements
    )))
}

fn trap_norm(samples: &[Complex64], edge: usize, h: f64) -> GridNorm {
    let dens: Vec<f64> = samples[..=edge].iter().map(|z| z.norm_sqr()).collect();
    let (value, grid_error) = simpson_with_error(&dens, h);
    GridNorm { value, grid_error }
}

/// `phi_n(x, t)` on `grid` by continuum quadrature (default options).
pub fn evolve_mode(n: ModeIndex, t: f64, trap: &TrapSpec, grid: &SpatialGrid) -> Result<ModeState> {
    evolve_mode_with(n, t, trap, grid, &SpectralOptions::default())
}

pub fn evolve_mode_with(
    n: ModeIndex,
    t: f64,
    trap: &TrapSpec,
    grid: &SpatialGrid,
    opts: &SpectralOptions,
) -> Result<ModeState> {
    let (samples, report) = evolve_profile(&ModeProfile::new(n, trap), t, trap, grid, opts)?;
    Ok(ModeState {
        n,
        t,
        grid: grid.clone(),
        samples,
        report,
    })
}

/// Nonescape probability together with its error budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonescapeReport {
    pub value: f64,
    /// Simpson discretization error on `[0, L]`.
    pub grid_error: f64,
    /// Momentum-quadrature contribution to the error.
    pub quadrature_error: f64,
    pub intervals: usize,
}

/// `P_n(t) = int_0^L |phi_n(x, t)|^2 dx` (default options).
pub fn nonescape_probability(n: ModeIndex, t: f64, trap: &TrapSpec) -> Result<f64> {
    nonescape_probability_with(n, t, trap, &SpectralOptions::default())
}

pub fn nonescape_probability_with(n: ModeIndex, t: f64, trap: &TrapSpec, opts: &SpectralOptions) -> Result<f64> {
    Propagator::for_trap(trap, opts).nonescape(n, t)
}

/// Continuum-quadrature nonescape probability with its error budget.
///
/// `t = 0` returns exactly 1: the initial mode is normalized inside the trap,
/// while the quadrature converges slowly there because of the kink at `x = L`.
pub fn nonescape_report(n: ModeIndex, t: f64, trap: &TrapSpec, opts: &SpectralOptions) -> Result<NonescapeReport> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(NonescapeReport {
            value: 1.0,
            grid_error: 0.0,
            quadrature_error: 0.0,
            intervals: 0,
        });
    }
    let profile = ModeProfile::new(n, trap);
    let mut intervals = opts.interior_intervals.max(4);
    intervals += (4 - intervals % 4) % 4;
    loop {
        let grid = SpatialGrid::interior(trap, intervals)?;
        let (samples, report) = evolve_profile(&profile, t, trap, &grid, opts)?;
        let norm = trap_norm(&samples, grid.edge_index(), grid.spacing());
        let quadrature_error = 2.0 * norm.value.sqrt() * report.estimated_error * trap.length.sqrt();
        let done = norm.grid_error <= opts.grid_tol * norm.value + 1e-300
            || 2 * intervals > opts.max_interior_intervals;
        if done {
            return Ok(NonescapeReport {
                value: norm.value.clamp(0.0, 1.0),
                grid_error: norm.grid_error,
                quadrature_error,
                intervals,
            });
        }
        intervals *= 2;
    }
}

/// `|<phi_n(0)|phi_n(t)>|^2` from the one-dimensional momentum integral
/// `int |<k+|phi_n>|^2 exp(-ik^2 t) dk` (default options).
pub fn survival_probability(n: ModeIndex, t: f64, trap: &TrapSpec) -> Result<f64> {
    survival_probability_with(n, t, trap, &SpectralOptions::default())
}

pub fn survival_probability_with(n: ModeIndex, t: f64, trap: &TrapSpec, opts: &SpectralOptions) -> Result<f64> {
    Ok(survival_amplitude(n, t, trap, opts)?.norm_sqr().min(1.0))
}

/// `<phi_n(0)|phi_n(t)>`. Exactly 1 at `t = 0`.
pub fn survival_amplitude(n: ModeIndex, t: f64, trap: &TrapSpec, opts: &SpectralOptions) -> Result<Complex64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let profile = ModeProfile::new(n, trap);
    let span = 3.0 * trap.length;
    let weight = |k: f64| mode_overlap(n, k, trap).norm_sqr();
    let l = trap.length;
    let env2 = |k: f64| profile.envelope(k).powi(2);
    let amp_tol = (1e-3 * opts.tol * t.min(1.0)).max(1e-17);
    let mut k_max = profile.base_cutoff().max(2.0 * span / t);
    while k_max < opts.k_cap / l && env2(k_max) * span * span / (2.0 * k_max * t).powi(3) > amp_tol {
        k_max *= 1.1;
    }
    let width = PI / (2.0 * l);
    let k_max = (k_max.min(opts.k_cap / l) / width).ceil() * width;
    let tail = {
        let delta = 1e-3 / span;
        let f = weight(k_max);
        let df = (weight(k_max + delta) - weight(k_max - delta)) / (2.0 * delta);
        let e = Complex64::from_polar(1.0, -k_max * k_max * t) / (2.0 * I * k_max * t);
        e * (f + df / (2.0 * I * k_max * t) - f / (2.0 * I * k_max * k_max * t))
    };
    let mut previous: Option<Complex64> = None;
    let mut budget = opts.phase_budget;
    for _ in 0..=opts.max_refinements {
        let nodes = build_nodes(t, k_max, span, budget, trap);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut rounding = 0.0;
        for (&k, &w) in nodes.k.iter().zip(&nodes.w) {
            let v = weight(k) * w;
            acc += v * Complex64::from_polar(1.0, -k * k * t);
            rounding += v * (8.0 + k * k * t) * f64::EPSILON;
        }
        acc += tail;
        if let Some(prev) = previous {
            if (acc - prev).norm() <= opts.tol * acc.norm() + rounding {
                return Ok(acc);
            }
        }
        previous = Some(acc);
        budget *= 0.5;
    }
    Err(Error::numerical(format!("survival quadrature did not converge at t = {t}")))
}

/// Value and `x`-derivative of the evolved profile at a single point.
pub fn point_value<P: MomentumProfile>(
    profile: &P,
    x: f64,
    t: f64,
    trap: &TrapSpec,
    opts: &SpectralOptions,
) -> Result<(Complex64, Complex64)> {
    point_value_with_tol(profile, x, t, trap, opts, opts.amplitude_tol())
}

/// [`point_value`] with an explicit absolute tolerance on the derivative.
pub fn point_value_with_tol<P: MomentumProfile>(
    profile: &P,
    x: f64,
    t: f64,
    trap: &TrapSpec,
    opts: &SpectralOptions,
    amp_tol: f64,
) -> Result<(Complex64, Complex64)> {
    let p = point_detail(profile, x, t, trap, opts, amp_tol)?;
    Ok((p.value, p.derivative))
}

/// A point evaluation with its rounding bounds.
#[derive(Debug, Clone, Copy)]
struct PointDetail {
    value: Complex64,
    derivative: Complex64,
    value_rounding: f64,
    derivative_rounding: f64,
}

fn point_detail<P: MomentumProfile>(
    profile: &P,
    x: f64,
    t: f64,
    trap: &TrapSpec,
    opts: &SpectralOptions,
    amp_tol: f64,
) -> Result<PointDetail> {
    if !(t > 0.0 && x >= 0.0) {
        return Err(Error::domain("point evaluation needs t > 0 and x >= 0"));
    }
    let span = x + 3.0 * trap.length;
    let cutoff = choose_cutoff(profile, trap, t, x, amp_tol, opts, 1);
    let k_max = cutoff.k;
    let nodes = build_nodes(t, k_max, span, 0.5 * opts.phase_budget, trap);
    let mut v = Complex64::new(0.0, 0.0);
    let mut d = Complex64::new(0.0, 0.0);
    let mut rv = 0.0;
    let mut rd = 0.0;
    for (&k, &w) in nodes.k.iter().zip(&nodes.w) {
        let (f, df) = integrand(profile, trap, x, k);
        let phase = k * k * t;
        let e = Complex64::from_polar(w, -phase);
        v += f * e;
        d += df * e;
        let scale = w * (8.0 + phase + k * x) * f64::EPSILON;
        rv += f.norm() * scale;
        rd += df.norm() * scale;
    }
    let (tv, td) = TailData::new(profile, trap, &cutoff, t).correction(x, x <= trap.length);
    Ok(PointDetail {
        value: v + tv,
        derivative: d + td,
        value_rounding: rv,
        derivative_rounding: rd,
    })
}

/// Norm over the half line: grid part plus the probability that has crossed
/// `x_max`, obtained by integrating the current there over time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfLineNorm {
    pub grid_part: f64,
    pub flux_part: f64,
    pub total: f64,
    /// Combined error estimate (grid, samples, flux integration, early tail).
    pub error: f64,
}

/// Probability current `2 Im(psi^* psi')` through a fixed point.
pub(crate) type Current<'a> = &'a (dyn Fn(f64) -> Result<f64> + Sync);

/// How the current is obtained at early times, when only very fast
/// components have reached `x_max`.
pub(crate) struct EarlyFlux<'a> {
    pub current: Current<'a>,
    /// Times below this use `current` instead of the exact one.
    pub until: f64,
    /// Relative error of `current` on `[0, until]`.
    pub relative_error: f64,
}

/// Half-line norm of `phi_n(t)` computed by continuum quadrature.
///
/// The current through `x_max` is evaluated by point quadrature. At the
/// earliest times it is carried only by momenta `k > (x_max - L)/(2 tau)`,
/// for which the barrier is almost transparent; there the closed-form
/// barrier-free current is used, with relative error `2 eta / k` charged
/// to the estimate (zero when `eta = 0`).
pub fn half_line_norm(
    n: ModeIndex,
    t: f64,
    trap: &TrapSpec,
    grid: &SpatialGrid,
    opts: &SpectralOptions,
    tol: f64,
) -> Result<HalfLineNorm> {
    let state = evolve_mode_with(n, t, trap, grid, opts)?;
    let profile = ModeProfile::new(n, trap);
    let x = grid.x_max();
    let length = trap.length;
    // Pointwise current accuracy that keeps the time integral within tol.
    let current_tol = 0.02 * tol / t.max(f64::MIN_POSITIVE);
    let evaluate = |tau: f64| -> Result<PointDetail> {
        let loose = 1e-6;
        let p = point_detail(&profile, x, tau, trap, opts, loose)?;
        let k_star = ((x - length) / (2.0 * tau)).max(1.0);
        let needed = current_tol / (4.0 * (p.value.norm() + p.derivative.norm() / k_star) + 1e-300);
        if needed < loose {
            point_detail(&profile, x, tau, trap, opts, needed.max(1e-16))
        } else {
            Ok(p)
        }
    };
    let current = |tau: f64| -> Result<f64> {
        let p = evaluate(tau)?;
        Ok(2.0 * (p.value.conj() * p.derivative).im)
    };
    // Each current value is only good to current_tol (the cutoff moves in
    // steps with tau), or to its rounding, which grows with the phase k^2 tau
    // and so is largest at tau = t.
    let noise = if t > 0.0 {
        let p = evaluate(t)?;
        let rounding = 2.0 * (p.value.norm() * p.derivative_rounding + p.derivative.norm() * p.value_rounding);
        rounding.max(current_tol)
    } else {
        0.0
    };
    let free_current = |tau: f64| -> Result<f64> {
        let (v, d) = crate::free::free_point(n, x, tau, length)?;
        Ok(2.0 * (v.conj() * d).im)
    };
    let envelope = |k: f64| profile.envelope(k);
    // Early window: the fast-component probability times the barrier
    // correction 2 eta / k_c stays below 5% of tol.
    let split = if trap.eta == 0.0 {
        0.25 * t
    } else {
        let mut tau = 0.25 * t;
        loop {
            let kc = (x - length) / (2.0 * tau);
            if kc >= profile.base_cutoff() && fast_probability(&envelope, kc) * 2.0 * trap.eta / kc <= 0.05 * tol {
                break tau;
            }
            tau *= 0.5;
            if tau < 1e-12 {
                break 0.0;
            }
        }
    };
    let early = EarlyFlux {
        current: &free_current,
        until: split,
        relative_error: 2.0 * trap.eta / ((x - length) / (2.0 * split.max(f64::MIN_POSITIVE))),
    };
    assemble_half_line_norm(&state, trap, t, tol, &current, noise, Some(early), &envelope, profile.base_cutoff())
}

/// `int_{k_c}^inf |a|^2 dk` for an amplitude falling like `envelope ~ C/k^2`.
fn fast_probability(envelope: &dyn Fn(f64) -> f64, kc: f64) -> f64 {
    let c = envelope(kc) * kc * kc;
    c * c / (3.0 * kc.powi(3))
}

/// Shared bookkeeping for [`half_line_norm`] and its free-expansion twin.
#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble_half_line_norm(
    state: &ModeState,
    trap: &TrapSpec,
    t: f64,
    tol: f64,
    current: Current<'_>,
    noise: f64,
    early: Option<EarlyFlux<'_>>,
    envelope: &dyn Fn(f64) -> f64,
    k_floor: f64,
) -> Result<HalfLineNorm> {
    let grid_norm = state.grid_norm();
    let sample_err = 2.0 * state.report.estimated_error * state.grid.x_max().sqrt();
    let x = state.grid.x_max();
    if t == 0.0 || x <= trap.length {
        return Ok(HalfLineNorm {
            grid_part: grid_norm.value,
            flux_part: 0.0,
            total: grid_norm.value,
            error: grid_norm.grid_error + sample_err,
        });
    }
    // Probability beyond x at time tau, from the momenta fast enough to get
    // there from the trap edge.
    let beyond = |tau: f64| fast_probability(envelope, ((x - trap.length) / (2.0 * tau)).max(k_floor));
    let mut tau1 = t;
    while beyond(tau1) > 0.1 * tol {
        tau1 *= 0.5;
    }
    let mut cuts = vec![tau1];
    while *cuts.last().unwrap() < t {
        let next = (2.0 * cuts.last().unwrap()).min(t);
        cuts.push(next);
    }
    let (split, early_current, early_rel) = match &early {
        Some(e) => (e.until, Some(e.current), e.relative_error),
        None => (0.0, None, 0.0),
    };
    if split > tau1 && !cuts.contains(&split) {
        cuts.push(split);
        cuts.sort_by(f64::total_cmp);
    }
    let segments = cuts.len() - 1;
    let mut flux = 0.0;
    let mut flux_err = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let use_early = b <= split;
        let (f, floor) = match (use_early, early_current) {
            (true, Some(c)) => (c, 0.0),
            _ => (current, noise),
        };
        let share = 0.1 * tol / segments as f64;
        let failure = std::sync::Mutex::new(None);
        let est = quadrature::adaptive_noisy(
            &|tau: f64| match f(tau) {
                Ok(v) => v,
                Err(e) => {
                    failure.lock().unwrap().get_or_insert(e);
                    0.0
                }
            },
            a,
            b,
            share,
            floor,
            20,
            20_000,
        )?;
        if let Some(e) = failure.into_inner().unwrap() {
            return Err(e);
        }
        flux += est.value;
        flux_err += est.error;
        if use_early {
            flux_err += early_rel * est.value.abs();
        }
    }
    let total = grid_norm.value + flux;
    Ok(HalfLineNorm {
        grid_part: grid_norm.value,
        flux_part: flux,
        total,
        error: grid_norm.grid_error + sample_err + flux_err + beyond(tau1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Nonescape,
    Survival,
    TrappedNumber,
}

/// A sampled decay curve with fitted regime annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCurve {
    pub kind: CurveKind,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub trap: TrapSpec,
    /// Mode or gas this curve belongs to, e.g. `mode n=1` or `btg N=10`.
    pub descriptor: String,
    pub annotations: RegimeAnnotations,
}

impl DecayCurve {
    pub fn new(kind: CurveKind, times: Vec<f64>, values: Vec<f64>, trap: TrapSpec, descriptor: String) -> Self {
        let annotations = RegimeAnnotations::fit(&times, &values);
        Self {
            kind,
            times,
            values,
            trap,
            descriptor,
            annotations,
        }
    }
}

/// `P_n(t)` on a time grid (default options).
pub fn decay_curve(n: ModeIndex, trap: &TrapSpec, times: &TimeGrid) -> Result<DecayCurve> {
    decay_curve_with(n, trap, times, &SpectralOptions::default())
}

/// `P_n(t)` on a time grid; times are evaluated concurrently and merged in order.
pub fn decay_curve_with(n: ModeIndex, trap: &TrapSpec, times: &TimeGrid, opts: &SpectralOptions) -> Result<DecayCurve> {
    let ts = times.samples();
    let propagator = Propagator::for_trap(trap, opts);
    let values = ts
        .par_iter()
        .map(|&t| propagator.nonescape(n, t))
        .collect::<Result<Vec<f64>>>()?;
    Ok(DecayCurve::new(CurveKind::Nonescape, ts, values, *trap, format!("mode n={n}")))
}

/// Survival probability on a time grid.
pub fn survival_curve(n: ModeIndex, trap: &TrapSpec, times: &TimeGrid, opts: &SpectralOptions) -> Result<DecayCurve> {
    let ts = times.samples();
    let values = ts
        .par_iter()
        .map(|&t| survival_probability_with(n, t, trap, opts))
        .collect::<Result<Vec<f64>>>()?;
    Ok(DecayCurve::new(CurveKind::Survival, ts, values, *trap, format!("mode n={n}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::initial_mode;

    fn trap(eta: f64) -> TrapSpec {
        TrapSpec::new(1.0, eta).unwrap()
    }

    fn mode(n: u32) -> ModeIndex {
        ModeIndex::new(n).unwrap()
    }

    #[test]
    fn nonescape_frozen_values_eta5() {
        let t = trap(5.0);
        let p1 = nonescape_probability(mode(1), 1.0, &t).unwrap();
        assert!((p1 - 0.15314756).abs() < 2e-8, "{p1}");
        let p2 = nonescape_probability(mode(1), 2.0, &t).unwrap();
        assert!((p2 - 0.022449482).abs() < 2e-9, "{p2}");
        assert_eq!(nonescape_probability(mode(3), 0.0, &t).unwrap(), 1.0);
    }

    #[test]
    fn nonescape_late_value_eta5() {
        let p = nonescape_probability(mode(1), 30.0, &trap(5.0)).unwrap();
        assert!((p / 1.5358e-10 - 1.0).abs() < 1e-3, "{p}");
    }

    #[test]
    fn reconstruction_at_t0_matches_initial_mode() {
        let t = trap(5.0);
        let grid = SpatialGrid::new(&t, 2.0, 129).unwrap();
        let state = evolve_mode(mode(1), 0.0, &t, &grid).unwrap();
        let init = initial_mode(mode(1), &t, &grid).unwrap();
        for i in 0..grid.len() {
            let err = (state.samples[i] - init.samples[i]).norm();
            assert!(err <= state.report.estimated_error, "x={} err={err}", grid.abscissa(i));
        }
        assert!(state.report.estimated_error < 1e-3);
    }

    #[test]
    fn survival_short_and_bounded() {
        let t = trap(5.0);
        assert_eq!(survival_probability(mode(1), 0.0, &t).unwrap(), 1.0);
        let s = survival_probability(mode(1), 1e-3, &t).unwrap();
        assert!(((1.0 - s) / 3.088e-4 - 1.0).abs() < 1e-2, "{}", 1.0 - s);
        for time in [0.01, 0.5, 3.0] {
            let s = survival_probability(mode(2), time, &t).unwrap();
            assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn negative_time_is_rejected() {
        assert!(nonescape_probability(mode(1), -1.0, &trap(5.0)).is_err());
        assert!(survival_probability(mode(1), -1.0, &trap(5.0)).is_err());
    }
}
