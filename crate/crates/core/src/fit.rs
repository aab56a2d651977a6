//! Regime detection on decay curves.
//!
//! A regime is a plateau of the local slope: a run of consecutive samples
//! whose local slopes (least squares over 4 consecutive intervals) all stay
//! within 2% of their mean. The exponential regime is searched in `ln P`
//! versus `t`, the power-law regime in `ln P` versus `ln t`; the run with the
//! largest drop in `ln P` wins and is fitted by least squares.

/// Straight-line fit over a detected window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
}

/// Fitted exponential and long-time windows of a curve, when present.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RegimeAnnotations {
    /// Slope of `ln P` against `t`.
    pub exponential: Option<SlopeFit>,
    /// Slope of `ln P` against `ln t`.
    pub longtime: Option<SlopeFit>,
}

/// Relative spread allowed in the local slope within a plateau.
pub const PLATEAU_TOLERANCE: f64 = 0.02;
const MIN_SAMPLES: usize = 5;
/// Intervals per local slope.
const SLOPE_SPAN: usize = 4;
/// An exponential window must cover at least two e-folds.
const MIN_EXP_DROP: f64 = 2.0;
/// A power-law window must cover at least a factor 3 in time.
const MIN_LOG_SPAN: f64 = 1.0986;

impl RegimeAnnotations {
    pub fn fit(times: &[f64], values: &[f64]) -> Self {
        Self {
            exponential: exponential_window(times, values),
            longtime: longtime_window(times, values),
        }
    }
}

/// Exponential window: plateau of `d ln P / dt`.
pub fn exponential_window(times: &[f64], values: &[f64]) -> Option<SlopeFit> {
    let (xs, ys, ts) = usable(times, values, false);
    let (a, b) = plateau(&xs, &ys, |xs, _| xs.len() >= MIN_SAMPLES, MIN_EXP_DROP, 0.0)?;
    Some(fit_range(&xs, &ys, &ts, a, b))
}

/// Long-time window: plateau of `d ln P / d ln t`.
pub fn longtime_window(times: &[f64], values: &[f64]) -> Option<SlopeFit> {
    let (xs, ys, ts) = usable(times, values, true);
    let (a, b) = plateau(&xs, &ys, |xs, _| xs.len() >= MIN_SAMPLES, 0.0, MIN_LOG_SPAN)?;
    Some(fit_range(&xs, &ys, &ts, a, b))
}

fn usable(times: &[f64], values: &[f64], log_time: bool) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ts = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if v > 0.0 && v.is_finite() && t.is_finite() && (!log_time || t > 0.0) {
            xs.push(if log_time { t.ln() } else { t });
            ys.push(v.ln());
            ts.push(t);
        }
    }
    (xs, ys, ts)
}

/// Longest-drop run `[a, b]` (sample indices) of near-constant negative slope.
fn plateau(
    xs: &[f64],
    ys: &[f64],
    enough: impl Fn(&[f64], &[f64]) -> bool,
    min_drop: f64,
    min_span: f64,
) -> Option<(usize, usize)> {
    if xs.len() < 2 {
        return None;
    }
    // Local slope i is the least-squares slope over samples i..=i+w, which
    // averages out beats spanning a few samples.
    let w = SLOPE_SPAN.min(xs.len() - 1);
    let slopes: Vec<f64> = (0..xs.len() - w)
        .map(|i| least_squares(&xs[i..=i + w], &ys[i..=i + w]).0)
        .collect();
    let mut best: Option<(usize, usize, f64)> = None;
    for a in 0..slopes.len() {
        if slopes[a] >= 0.0 || !slopes[a].is_finite() {
            continue;
        }
        let (mut lo, mut hi) = (slopes[a], slopes[a]);
        let mut b = a;
        while b + 1 < slopes.len() {
            let s = slopes[b + 1];
            if !(s < 0.0 && s.is_finite()) {
                break;
            }
            let nlo = lo.min(s);
            let nhi = hi.max(s);
            let mid = 0.5 * (nlo + nhi);
            if (nhi - nlo) * 0.5 > PLATEAU_TOLERANCE * mid.abs() {
                break;
            }
            lo = nlo;
            hi = nhi;
            b += 1;
        }
        // Samples a..=b+w span slopes a..=b.
        let (s0, s1) = (a, b + w);
        let drop = ys[s0] - ys[s1];
        let span = xs[s1] - xs[s0];
        if b - a >= w && enough(&xs[s0..=s1], &ys[s0..=s1]) && drop >= min_drop && span >= min_span
            && best.is_none_or(|(_, _, d)| drop > d) {
                best = Some((s0, s1, drop));
            }
    }
    best.map(|(a, b, _)| (a, b))
}

fn fit_range(xs: &[f64], ys: &[f64], ts: &[f64], a: usize, b: usize) -> SlopeFit {
    let (slope, intercept) = least_squares(&xs[a..=b], &ys[a..=b]);
    SlopeFit {
        slope,
        intercept,
        t_start: ts[a],
        t_end: ts[b],
        samples: b - a + 1,
    }
}

/// Ordinary least-squares line `y = slope x + intercept`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
