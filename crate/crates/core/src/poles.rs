//! Resonance poles: zeros of `J+(k)` in the fourth quadrant of the k-plane.
//!
//! Zeros satisfy `exp(2ikL) = 1 - 2ik/eta`. Branch `j` of the logarithm
//! carries the pole near `j pi / L`; its mirror image `-k*` is the
//! anti-resonance. Every returned set is certified with the argument
//! principle.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::TrapSpec;
use crate::scattering::{jost_plus, jost_plus_derivative};

const RESIDUAL_TARGET: f64 = 1e-12;
const MAX_NEWTON: usize = 100;

/// A resonance pole `k_j` with `E_j = k_j^2 = energy_re - i width/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonancePole {
    pub j: usize,
    pub k: Complex64,
    pub energy_re: f64,
    pub width: f64,
    pub lifetime: f64,
}

impl ResonancePole {
    pub fn new(j: usize, k: Complex64) -> Self {
        let width = -4.0 * k.re * k.im;
        Self {
            j,
            k,
            energy_re: k.re * k.re - k.im * k.im,
            width,
            lifetime: 1.0 / width,
        }
    }

    /// Complex energy `k^2`.
    pub fn energy(&self) -> Complex64 {
        self.k * self.k
    }

    /// Fourth-quadrant pole with `Re k > |Im k|`.
    pub fn is_proper(&self) -> bool {
        self.k.re > 0.0 && self.k.im < 0.0 && self.k.re > self.k.im.abs()
    }
}

/// Poles found and certified for one trap, ordered by width.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleSet {
    trap: TrapSpec,
    poles: Vec<ResonancePole>,
}

impl PoleSet {
    pub fn trap(&self) -> &TrapSpec {
        &self.trap
    }

    pub fn poles(&self) -> &[ResonancePole] {
        &self.poles
    }

    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    /// Pole `j` (1-based).
    pub fn get(&self, j: usize) -> Option<&ResonancePole> {
        j.checked_sub(1).and_then(|i| self.poles.get(i))
    }
}

/// Axis-aligned rectangle in the complex k-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        if !(re_min < re_max && im_min < im_max) || ![re_min, re_max, im_min, im_max].iter().all(|v| v.is_finite()) {
            return Err(Error::domain("rectangle needs finite min < max on both axes"));
        }
        Ok(Self {
            re_min,
            re_max,
            im_min,
            im_max,
        })
    }

    pub fn contains(&self, k: Complex64) -> bool {
        (self.re_min..=self.re_max).contains(&k.re) && (self.im_min..=self.im_max).contains(&k.im)
    }

    fn dilate(&self, factor: f64) -> Self {
        let cr = 0.5 * (self.re_min + self.re_max);
        let ci = 0.5 * (self.im_min + self.im_max);
        let hr = 0.5 * (self.re_max - self.re_min) * factor;
        let hi = 0.5 * (self.im_max - self.im_min) * factor;
        Self {
            re_min: cr - hr,
            re_max: cr + hr,
            im_min: ci - hi,
            im_max: ci + hi,
        }
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }
}

/// Finds the `count` narrowest resonances, polished and certified.
pub fn find_poles(trap: &TrapSpec, count: usize) -> Result<PoleSet> {
    if trap.eta == 0.0 {
        return Err(Error::NoResonances);
    }
    if count == 0 {
        return Err(Error::domain("pole count must be >= 1"));
    }
    let roots: Vec<Complex64> = (1..=count)
        .into_par_iter()
        .map(|j| branch_pole(trap, j))
        .collect::<Result<_>>()?;

    let mut poles: Vec<ResonancePole> = roots.into_iter().map(|k| ResonancePole::new(0, k)).collect();
    poles.sort_by(|a, b| a.width.total_cmp(&b.width).then(a.k.re.total_cmp(&b.k.re)));
    for (i, p) in poles.iter_mut().enumerate() {
        p.j = i + 1;
    }

    let spacing = PI / trap.length;
    for p in &poles {
        let rect = isolating_rect(p.k, spacing, trap.length);
        let n = count_zeros_in_rectangle(trap, &rect)?;
        if n != 1 {
            return Err(Error::Numerical {
                message: format!("pole {} is not isolated: contour count {n}", p.j),
                last_iterate: Some(p.k),
            });
        }
    }
    let rect = bounding_rect(&poles, spacing, trap.length);
    let n = count_zeros_in_rectangle(trap, &rect)?;
    if n != count {
        return Err(Error::numerical(format!(
            "certification failed: contour count {n}, expected {count}"
        )));
    }
    Ok(PoleSet {
        trap: *trap,
        poles,
    })
}

fn isolating_rect(k: Complex64, spacing: f64, length: f64) -> Rect {
    let half = 0.25 * spacing.min(2.0 * k.re);
    Rect {
        re_min: k.re - half,
        re_max: k.re + half,
        im_min: k.im - 1.0 / length,
        im_max: (k.im + 1.0 / length).min(0.5 / length),
    }
}

fn bounding_rect(poles: &[ResonancePole], spacing: f64, length: f64) -> Rect {
    let re_lo = poles.iter().map(|p| p.k.re).fold(f64::INFINITY, f64::min);
    let re_hi = poles.iter().map(|p| p.k.re).fold(f64::NEG_INFINITY, f64::max);
    let im_lo = poles.iter().map(|p| p.k.im).fold(f64::INFINITY, f64::min);
    let margin = 0.25 * spacing.min(2.0 * re_lo);
    Rect {
        re_min: re_lo - margin,
        re_max: re_hi + 0.25 * spacing,
        im_min: im_lo - 1.0 / length,
        im_max: 0.5 / length,
    }
}

/// Index of the logarithm branch a zero of `J+` belongs to.
fn branch_of(k: Complex64, trap: &TrapSpec) -> i64 {
    let i = Complex64::new(0.0, 1.0);
    let lhs = 2.0 * i * k * trap.length;
    let log = (1.0 - 2.0 * i * k / trap.eta).ln();
    ((lhs - log) / (2.0 * PI * i)).re.round() as i64
}

fn branch_pole(trap: &TrapSpec, j: usize) -> Result<Complex64> {
    let l = trap.length;
    let accept = |k: Complex64| k.re > 0.0 && k.im < 0.0 && branch_of(k, trap) == j as i64;

    let first = Complex64::new(j as f64 * PI / l * trap.opacity() / (1.0 + trap.opacity()), -0.1 / l);
    if let Ok(k) = newton_polish(trap, first) {
        if accept(k) {
            return Ok(k);
        }
    }

    // First-order estimate on branch j, refined by a few fixed-point steps.
    let i = Complex64::new(0.0, 1.0);
    let mut k = Complex64::new(j as f64 * PI / l, 0.0);
    for _ in 0..8 {
        k = ((1.0 - 2.0 * i * k / trap.eta).ln() + 2.0 * PI * i * j as f64) / (2.0 * i * l);
    }
    let last_err = match newton_polish(trap, k) {
        Ok(k) if accept(k) => return Ok(k),
        Ok(k) => Error::Numerical {
            message: format!("Newton from the branch estimate reached branch {}", branch_of(k, trap)),
            last_iterate: Some(k),
        },
        Err(e) => e,
    };

    for seed in scan_minima(trap, j + 2) {
        if let Ok(k) = newton_polish(trap, seed) {
            if accept(k) {
                return Ok(k);
            }
        }
    }
    Err(last_err)
}

/// Local minima of `|J+|` on a grid over `[0, (m+2) pi/L] x [-3/L, 0]`.
fn scan_minima(trap: &TrapSpec, m: usize) -> Vec<Complex64> {
    let l = trap.length;
    let nr = 40 * (m + 2);
    let ni = 60;
    let re_max = (m + 2) as f64 * PI / l;
    let im_min = -3.0 / l;
    let at = |a: usize, b: usize| {
        Complex64::new(re_max * a as f64 / nr as f64, im_min * b as f64 / ni as f64)
    };
    let vals: Vec<Vec<f64>> = (0..=nr)
        .map(|a| (0..=ni).map(|b| jost_plus(at(a, b), trap).norm()).collect())
        .collect();
    let mut out = Vec::new();
    for a in 1..nr {
        for b in 1..ni {
            let v = vals[a][b];
            let neighbours = [vals[a - 1][b], vals[a + 1][b], vals[a][b - 1], vals[a][b + 1]];
            if neighbours.iter().all(|&w| v <= w) {
                out.push(at(a, b));
            }
        }
    }
    out
}

/// Residual accepted for a root: `1e-12`, or the rounding floor of
/// `eta L exp(ikL) sinc(kL)` when the barrier is so strong that `1e-12` is
/// below it.
pub fn residual_target(k: Complex64, trap: &TrapSpec) -> f64 {
    let z = k * trap.length;
    let floor = 8.0 * f64::EPSILON * trap.opacity() * (-z.im).exp() / z.norm().max(1.0);
    RESIDUAL_TARGET.max(floor)
}

/// Newton iteration on `J+` with the analytic derivative.
pub fn newton_polish(trap: &TrapSpec, guess: Complex64) -> Result<Complex64> {
    let mut k = guess;
    let mut residual = jost_plus(k, trap).norm();
    for _ in 0..MAX_NEWTON {
        let f = jost_plus(k, trap);
        let d = jost_plus_derivative(k, trap);
        if d.norm() == 0.0 || !d.is_finite() {
            break;
        }
        let step = f / d;
        k -= step;
        residual = jost_plus(k, trap).norm();
        if residual < residual_target(k, trap) && step.norm() <= 1e-10 * k.norm().max(1.0) {
            // One more step usually lands on the floating-point root.
            let polished = k - jost_plus(k, trap) / jost_plus_derivative(k, trap);
            if jost_plus(polished, trap).norm() <= residual {
                k = polished;
            }
            return Ok(k);
        }
        if !k.is_finite() {
            break;
        }
    }
    Err(Error::Numerical {
        message: format!("Newton did not converge (|J+| = {residual:e})"),
        last_iterate: Some(k),
    })
}

/// Mirror images `-k*` of the poles (zeros of `J+` in the third quadrant).
pub fn anti_resonances(poles: &[ResonancePole]) -> Vec<Complex64> {
    poles.iter().map(|p| -p.k.conj()).collect()
}

/// `E_1 / Gamma_1` for the longest-lived resonance.
pub fn resonance_ratio(trap: &TrapSpec) -> Result<f64> {
    let set = find_poles(trap, 1)?;
    let p = set.poles()[0];
    Ok(p.energy_re / p.width)
}

/// Number of zeros of `J+` inside `rect`, from the winding number of `J+`
/// along its boundary.
///
/// If `|J+|` nearly vanishes on the boundary the rectangle is dilated by 1%
/// about its centre, up to five times.
pub fn count_zeros_in_rectangle(trap: &TrapSpec, rect: &Rect) -> Result<usize> {
    if trap.eta == 0.0 {
        return Ok(0);
    }
    let mut r = *rect;
    for _ in 0..=5 {
        match winding_number(trap, &r) {
            Some(w) => {
                let n = w.round();
                if (w - n).abs() > 1e-3 || n < 0.0 {
                    return Err(Error::numerical(format!("non-integer winding number {w}")));
                }
                return Ok(n as usize);
            }
            None => r = r.dilate(1.01),
        }
    }
    Err(Error::Geometry(format!(
        "zero on the contour boundary after 5 dilations of {rect:?}"
    )))
}

/// Total argument change of `J+` around the rectangle divided by `2 pi`, or
/// `None` when the boundary passes too close to a zero.
fn winding_number(trap: &TrapSpec, rect: &Rect) -> Option<f64> {
    let c = rect.corners();
    let scale = (rect.re_max - rect.re_min).max(rect.im_max - rect.im_min);
    let mut total = 0.0;
    for e in 0..4 {
        total += edge_phase(trap, c[e], c[(e + 1) % 4], scale)?;
    }
    Some(total / (2.0 * PI))
}

fn edge_phase(trap: &TrapSpec, a: Complex64, b: Complex64, scale: f64) -> Option<f64> {
    const SEGMENTS: usize = 64;
    let floor = 1e-9;
    let f = |s: f64| jost_plus(a + (b - a) * s, trap);
    let mut total = 0.0;
    let mut stack: Vec<(f64, f64, Complex64, Complex64, usize)> = Vec::new();
    let mut s0 = 0.0;
    let mut f0 = f(0.0);
    if f0.norm() < floor {
        return None;
    }
    for i in 1..=SEGMENTS {
        let s1 = i as f64 / SEGMENTS as f64;
        let f1 = f(s1);
        stack.push((s0, s1, f0, f1, 0));
        while let Some((sa, sb, fa, fb, depth)) = stack.pop() {
            if fb.norm() < floor {
                return None;
            }
            let sm = 0.5 * (sa + sb);
            let fm = f(sm);
            if fm.norm() < floor {
                return None;
            }
            let whole = (fb / fa).arg();
            let split = (fm / fa).arg() + (fb / fm).arg();
            let smooth = (fb - fa).norm() < 0.5 * fa.norm().min(fb.norm());
            if (whole - split).abs() < 1e-6 && smooth {
                total += whole;
            } else if depth > 48 || (sb - sa) * (b - a).norm() < 1e-13 * scale {
                return None;
            } else {
                stack.push((sm, sb, fm, fb, depth + 1));
                stack.push((sa, sm, fa, fm, depth + 1));
            }
        }
        s0 = s1;
        f0 = f1;
    }
    Some(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trap(eta: f64) -> TrapSpec {
        TrapSpec::new(1.0, eta).unwrap()
    }

    /// Independent oracle: fixed-point iteration on branch j of
    /// exp(2ikL) = 1 - 2ik/eta.
    fn fixed_point(eta: f64, j: usize) -> Complex64 {
        let i = Complex64::new(0.0, 1.0);
        let mut k = Complex64::new(j as f64 * PI, 0.0);
        for _ in 0..2000 {
            k = ((1.0 - 2.0 * i * k / eta).ln() + 2.0 * PI * i * j as f64) / (2.0 * i);
        }
        k
    }

    #[test]
    fn first_pole_eta5_matches_frozen_oracle() {
        let set = find_poles(&trap(5.0), 1).unwrap();
        let p = set.poles()[0];
        assert!((p.k - Complex64::new(2.71038173182388, -0.177999234346025)).norm() < 1e-12);
        assert!((p.energy_re - 7.314485405).abs() < 1e-8);
        assert!((p.width - 1.929783492).abs() < 1e-8);
        assert!((p.lifetime - 1.0 / 1.929783492).abs() < 1e-8);
    }

    #[test]
    fn poles_match_fixed_point_oracle() {
        for eta in [0.5, 2.0, 5.0, 10.0, 40.0] {
            let set = find_poles(&trap(eta), 6).unwrap();
            for p in set.poles() {
                let oracle = fixed_point(eta, p.j);
                assert!((p.k - oracle).norm() < 1e-10, "eta={eta} j={} k={} oracle={oracle}", p.j, p.k);
                assert!(jost_plus(p.k, &trap(eta)).norm() < RESIDUAL_TARGET);
            }
        }
    }

    #[test]
    fn frozen_poles_eta5_and_eta10() {
        let expected5 = [
            (2.71038173182388, -0.177999234346025),
            (5.67193125788352, -0.440579352544551),
            (8.74432833717258, -0.63715331821148),
            (11.8528880720454, -0.78333020020399),
            (14.975851263175, -0.897918933952967),
        ];
        let set = find_poles(&trap(5.0), 5).unwrap();
        for (p, (re, im)) in set.poles().iter().zip(expected5) {
            assert!((p.k - Complex64::new(re, im)).norm() < 1e-11);
        }
        let set = find_poles(&trap(10.0), 2).unwrap();
        assert!((set.poles()[0].k - Complex64::new(2.87757745845759, -0.0665106724899689)).norm() < 1e-11);
        assert!((set.poles()[1].k - Complex64::new(5.84137958607605, -0.206480096302157)).norm() < 1e-11);
    }

    #[test]
    fn widths_increase_and_poles_are_proper() {
        let set = find_poles(&trap(5.0), 8).unwrap();
        for w in set.poles().windows(2) {
            assert!(w[1].width >= w[0].width);
            assert_eq!(w[1].j, w[0].j + 1);
        }
        assert!(set.poles().iter().all(|p| p.is_proper()));
        let e = set.poles()[0].energy();
        assert!((e.re - set.poles()[0].energy_re).abs() < 1e-12);
        assert!((e.im + set.poles()[0].width / 2.0).abs() < 1e-12);
    }

    #[test]
    fn closed_box_limit() {
        let set = find_poles(&trap(1e6), 3).unwrap();
        for p in set.poles() {
            assert!((p.k.re - p.j as f64 * PI).abs() < 1e-4);
            assert!(p.width < 1e-8);
        }
    }

    #[test]
    fn no_resonances_without_barrier() {
        assert_eq!(find_poles(&trap(0.0), 3), Err(Error::NoResonances));
        assert!(resonance_ratio(&trap(0.0)).is_err());
    }

    #[test]
    fn anti_resonances_are_zeros() {
        assert!(anti_resonances(&[]).is_empty());
        let p = ResonancePole::new(1, Complex64::new(2.71, -0.178));
        assert_eq!(anti_resonances(&[p])[0], Complex64::new(-2.71, -0.178));
        let set = find_poles(&trap(5.0), 5).unwrap();
        let mirrored = anti_resonances(set.poles());
        assert_eq!(mirrored.len(), 5);
        for k in mirrored {
            assert!(k.re < 0.0 && k.im < 0.0);
            assert!(jost_plus(k, &trap(5.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn contour_counts() {
        let any = Rect::new(-1.0, 5.0, -2.0, 2.0).unwrap();
        assert_eq!(count_zeros_in_rectangle(&trap(0.0), &any).unwrap(), 0);
        let around_k1 = Rect::new(2.2, 3.2, -0.5, 0.0).unwrap();
        assert_eq!(count_zeros_in_rectangle(&trap(5.0), &around_k1).unwrap(), 1);
        let upper = Rect::new(-0.1, 0.1, 0.1, 2.0).unwrap();
        assert_eq!(count_zeros_in_rectangle(&trap(5.0), &upper).unwrap(), 0);
        let wide = Rect::new(-20.0, 20.0, -2.0, 1.0).unwrap();
        // Six resonances with Re k < 20 and their six mirror images.
        assert_eq!(count_zeros_in_rectangle(&trap(5.0), &wide).unwrap(), 12);
    }

    #[test]
    fn boundary_zero_is_dilated_away() {
        let k1 = Complex64::new(2.71038173182388, -0.177999234346025);
        let rect = Rect::new(2.0, 3.5, k1.im, 0.5).unwrap();
        let n = count_zeros_in_rectangle(&trap(5.0), &rect).unwrap();
        assert_eq!(n, 1);
    }

    #[test]
    fn resonance_ratio_values() {
        let r5 = resonance_ratio(&trap(5.0)).unwrap();
        assert!((r5 - 7.314485405 / 1.929783492).abs() < 1e-8);
        let r10 = resonance_ratio(&trap(10.0)).unwrap();
        assert!(r10 > r5);
        assert!(resonance_ratio(&trap(1e6)).unwrap() > 1e8);
    }

    #[test]
    fn pole_drifts_toward_axis_with_eta() {
        let mut prev = f64::NEG_INFINITY;
        for eta in [0.5, 1.0, 2.0, 5.0, 10.0, 20.0] {
            let k = find_poles(&trap(eta), 1).unwrap().poles()[0].k;
            assert!(k.im > prev);
            prev = k.im;
        }
    }

    #[test]
    fn newton_failure_reports_last_iterate() {
        // Far from any zero and in a region where J+ grows exponentially.
        match newton_polish(&trap(5.0), Complex64::new(0.0, 200.0)) {
            Ok(k) => assert!(jost_plus(k, &trap(5.0)).norm() < 1e-12),
            Err(Error::Numerical { last_iterate, .. }) => assert!(last_iterate.is_some()),
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
