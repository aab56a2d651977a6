//! Trap specification, mode indexing, grids and the sampled mode state.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::simpson_with_error;

/// Hard-wall box `[0, L]` capped at `x = L` by a delta barrier of strength `eta`.
///
/// Units: `2m = hbar = 1`. `eta` is `(2m/hbar^2)` times the physical delta
/// strength and has units of inverse length. To convert a time `t` to
/// seconds multiply by `2 m L0^2 / hbar` for a length unit `L0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapSpec {
    pub length: f64,
    pub eta: f64,
}

impl TrapSpec {
    pub fn new(length: f64, eta: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::domain(format!("box length must be positive, got {length}")));
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::domain(format!("barrier strength must be >= 0, got {eta}")));
        }
        Ok(Self { length, eta })
    }

    /// `eta * L`, the dimensionless barrier opacity.
    pub fn opacity(&self) -> f64 {
        self.eta * self.length
    }
}

impl Default for TrapSpec {
    fn default() -> Self {
        Self { length: 1.0, eta: 5.0 }
    }
}

/// Box quantum number `n >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeIndex(u32);

impl ModeIndex {
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("mode index must be >= 1"));
        }
        Ok(Self(n))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// `n pi / L`.
    pub fn wavenumber(self, trap: &TrapSpec) -> f64 {
        self.0 as f64 * PI / trap.length
    }
}

impl std::fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Box energy `(n pi / L)^2`.
pub fn box_energy(n: ModeIndex, trap: &TrapSpec) -> f64 {
    let k = n.wavenumber(trap);
    k * k
}

/// `sqrt(2/L) sin(n pi x / L)` on `[0, L]`, zero elsewhere.
pub fn box_mode(n: ModeIndex, trap: &TrapSpec, x: f64) -> f64 {
    if !(0.0..=trap.length).contains(&x) {
        return 0.0;
    }
    (2.0 / trap.length).sqrt() * (n.wavenumber(trap) * x).sin()
}

/// Exact inner product of two box modes from the closed-form sine integral.
pub fn mode_inner_product(m: ModeIndex, n: ModeIndex, trap: &TrapSpec) -> f64 {
    let a = Complex64::new(m.wavenumber(trap), 0.0);
    let b = Complex64::new(n.wavenumber(trap), 0.0);
    2.0 / trap.length * crate::special::sine_product_integral(a, b, trap.length).re
}

/// Uniform grid on `[0, x_max]` with a node exactly at the trap edge.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    x_max: f64,
    points: usize,
    spacing: f64,
    edge_index: usize,
    edge: f64,
}

impl SpatialGrid {
    /// `points` samples on `[0, x_max]`. The number of intervals must be even
    /// (Simpson) and `L` must fall on a node.
    pub fn new(trap: &TrapSpec, x_max: f64, points: usize) -> Result<Self> {
        if points < 3 || !(points - 1).is_multiple_of(2) {
            return Err(Error::domain(format!(
                "grid needs an odd number of points >= 3, got {points}"
            )));
        }
        if !(x_max.is_finite() && x_max >= trap.length) {
            return Err(Error::domain(format!(
                "grid must cover [0, L]: x_max = {x_max} < L = {}",
                trap.length
            )));
        }
        let spacing = x_max / (points - 1) as f64;
        let ratio = trap.length / spacing;
        let edge_index = ratio.round() as usize;
        if (ratio - edge_index as f64).abs() > 1e-9 * ratio.max(1.0) || !edge_index.is_multiple_of(2) {
            return Err(Error::domain(format!(
                "x = L must be an even-indexed grid node (L/h = {ratio})"
            )));
        }
        Ok(Self {
            x_max,
            points,
            spacing,
            edge_index,
            edge: trap.length,
        })
    }

    /// Default grid: 2049 points on `[0, 4L]`, spacing `L/512`.
    pub fn default_for(trap: &TrapSpec) -> Self {
        Self::new(trap, 4.0 * trap.length, 2049).expect("default grid is valid")
    }

    /// Grid on `[0, L]` with the given (even) number of intervals.
    pub fn interior(trap: &TrapSpec, intervals: usize) -> Result<Self> {
        Self::new(trap, trap.length, intervals + 1)
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Index of the node at `x = L`.
    pub fn edge_index(&self) -> usize {
        self.edge_index
    }

    pub fn abscissa(&self, i: usize) -> f64 {
        if i == self.edge_index {
            self.edge
        } else if i + 1 == self.points {
            self.x_max
        } else {
            i as f64 * self.spacing
        }
    }

    pub fn samples(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.abscissa(i)).collect()
    }

    /// Checks that the grid was built for a trap with this length.
    pub fn check_trap(&self, trap: &TrapSpec) -> Result<()> {
        if (self.edge - trap.length).abs() > 1e-12 * trap.length {
            return Err(Error::domain(format!(
                "grid edge node at {} does not match L = {}",
                self.edge, trap.length
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeSpacing {
    Linear,
    Logarithmic,
}

/// Sampling times on `[t_min, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub spacing: TimeSpacing,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn new(spacing: TimeSpacing, t_min: f64, t_max: f64, points: usize) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite() && 0.0 <= t_min && t_min < t_max) {
            return Err(Error::domain(format!(
                "time grid needs 0 <= t_min < t_max, got [{t_min}, {t_max}]"
            )));
        }
        if spacing == TimeSpacing::Logarithmic && t_min <= 0.0 {
            return Err(Error::domain("logarithmic time grid needs t_min > 0"));
        }
        if points < 2 {
            return Err(Error::domain("time grid needs at least 2 points"));
        }
        Ok(Self {
            spacing,
            t_min,
            t_max,
            points,
        })
    }

    pub fn linear(t_min: f64, t_max: f64, points: usize) -> Result<Self> {
        Self::new(TimeSpacing::Linear, t_min, t_max, points)
    }

    pub fn logarithmic(t_min: f64, t_max: f64, points: usize) -> Result<Self> {
        Self::new(TimeSpacing::Logarithmic, t_min, t_max, points)
    }

    pub fn samples(&self) -> Vec<f64> {
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i == 0 {
                    return self.t_min;
                }
                if i + 1 == self.points {
                    return self.t_max;
                }
                let s = i as f64 / last;
                match self.spacing {
                    TimeSpacing::Linear => self.t_min + s * (self.t_max - self.t_min),
                    TimeSpacing::Logarithmic => {
                        (self.t_min.ln() + s * (self.t_max.ln() - self.t_min.ln())).exp()
                    }
                }
            })
            .collect()
    }
}

/// How a sampled state was obtained and how accurate it is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadReport {
    /// Momentum cutoff of the continuum quadrature (0 for closed forms).
    pub k_max: f64,
    /// Number of momentum nodes at the accepted refinement level.
    pub nodes: usize,
    /// Estimated absolute error of the samples.
    pub estimated_error: f64,
    /// Refinement levels taken.
    pub refinements: usize,
}

impl QuadReport {
    pub fn closed_form(error: f64) -> Self {
        Self {
            k_max: 0.0,
            nodes: 0,
            estimated_error: error,
            refinements: 0,
        }
    }
}

/// Wavefunction `phi_n(x, t)` sampled on a grid.
#[derive(Debug, Clone)]
pub struct ModeState {
    pub n: ModeIndex,
    pub t: f64,
    pub grid: SpatialGrid,
    pub samples: Vec<Complex64>,
    pub report: QuadReport,
}

/// A grid norm together with its Simpson discretization error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridNorm {
    pub value: f64,
    pub grid_error: f64,
}

impl ModeState {
    /// `int_0^L |phi|^2 dx` by Simpson on the grid.
    pub fn trap_norm(&self) -> GridNorm {
        self.norm_up_to(self.grid.edge_index())
    }

    /// `int_0^{x_max} |phi|^2 dx` by Simpson on the grid.
    pub fn grid_norm(&self) -> GridNorm {
        self.norm_up_to(self.grid.len() - 1)
    }

    fn norm_up_to(&self, last: usize) -> GridNorm {
        let dens: Vec<f64> = self.samples[..=last].iter().map(|z| z.norm_sqr()).collect();
        let (value, grid_error) = simpson_with_error(&dens, self.grid.spacing());
        GridNorm { value, grid_error }
    }
}

/// Samples of the initial box mode on `grid`.
pub fn initial_mode(n: ModeIndex, trap: &TrapSpec, grid: &SpatialGrid) -> Result<ModeState> {
    grid.check_trap(trap)?;
    let samples = (0..grid.len())
        .map(|i| {
            if i > grid.edge_index() {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(box_mode(n, trap, grid.abscissa(i)), 0.0)
            }
        })
        .collect();
    Ok(ModeState {
        n,
        t: 0.0,
        grid: grid.clone(),
        samples,
        report: QuadReport::closed_form(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trap() -> TrapSpec {
        TrapSpec::new(1.0, 5.0).unwrap()
    }

    #[test]
    fn trap_validation() {
        assert!(TrapSpec::new(0.0, 1.0).is_err());
        assert!(TrapSpec::new(1.0, -1.0).is_err());
        assert!(TrapSpec::new(f64::NAN, 1.0).is_err());
        assert!(ModeIndex::new(0).is_err());
    }

    #[test]
    fn box_energies() {
        let n1 = ModeIndex::new(1).unwrap();
        let n3 = ModeIndex::new(3).unwrap();
        assert!((box_energy(n1, &trap()) - PI * PI).abs() < 1e-14);
        assert!((box_energy(n3, &trap()) - 9.0 * PI * PI).abs() < 1e-12);
        let wide = TrapSpec::new(2.0, 5.0).unwrap();
        assert!((box_energy(n1, &wide) - PI * PI / 4.0).abs() < 1e-14);
    }

    #[test]
    fn initial_mode_values() {
        let t = trap();
        let grid = SpatialGrid::default_for(&t);
        let s1 = initial_mode(ModeIndex::new(1).unwrap(), &t, &grid).unwrap();
        let s2 = initial_mode(ModeIndex::new(2).unwrap(), &t, &grid).unwrap();
        let mid = grid.edge_index() / 2;
        assert_eq!(grid.abscissa(mid), 0.5);
        assert!((s1.samples[mid].re - 2f64.sqrt()).abs() < 1e-14);
        assert!(s2.samples[mid].re.abs() < 1e-14);
        assert!(s1.samples[grid.edge_index() + 1..].iter().all(|z| z.norm() == 0.0));
        let norm = s1.grid_norm();
        assert!((norm.value - 1.0).abs() < 1e-10 && norm.grid_error < 1e-10);
    }

    #[test]
    fn grid_must_cover_trap() {
        let t = trap();
        assert!(SpatialGrid::new(&t, 0.5, 65).is_err());
        assert!(SpatialGrid::new(&t, 4.0, 100).is_err());
        assert!(SpatialGrid::new(&t, 3.0, 101).is_err());
        let other = TrapSpec::new(2.0, 5.0).unwrap();
        let grid = SpatialGrid::default_for(&t);
        assert!(initial_mode(ModeIndex::new(1).unwrap(), &other, &grid).is_err());
    }

    #[test]
    fn grid_is_increasing_and_hits_edge() {
        let t = TrapSpec::new(0.7, 1.0).unwrap();
        let grid = SpatialGrid::new(&t, 2.8, 257).unwrap();
        let xs = grid.samples();
        assert_eq!(xs[0], 0.0);
        assert_eq!(xs[grid.edge_index()], 0.7);
        assert_eq!(*xs.last().unwrap(), 2.8);
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn orthonormality_closed_form() {
        let t = TrapSpec::new(1.3, 0.0).unwrap();
        for m in 1..=8 {
            for n in 1..=8 {
                let v = mode_inner_product(ModeIndex::new(m).unwrap(), ModeIndex::new(n).unwrap(), &t);
                let expect = if m == n { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-12, "m={m} n={n} v={v}");
            }
        }
    }

    #[test]
    fn orthonormality_on_grid() {
        let t = trap();
        let grid = SpatialGrid::interior(&t, 512).unwrap();
        let a = initial_mode(ModeIndex::new(2).unwrap(), &t, &grid).unwrap();
        let b = initial_mode(ModeIndex::new(3).unwrap(), &t, &grid).unwrap();
        let prod: Vec<f64> = a.samples.iter().zip(&b.samples).map(|(x, y)| x.re * y.re).collect();
        let (v, err) = simpson_with_error(&prod, grid.spacing());
        assert!(v.abs() <= 10.0 * err + 1e-14);
        let coarse = SpatialGrid::interior(&t, 256).unwrap();
        let n_fine = initial_mode(ModeIndex::new(7).unwrap(), &t, &grid).unwrap().trap_norm();
        let n_coarse = initial_mode(ModeIndex::new(7).unwrap(), &t, &coarse).unwrap().trap_norm();
        assert!((n_fine.value - n_coarse.value).abs() < n_coarse.grid_error.max(1e-15) * 2.0);
    }

    #[test]
    fn time_grids() {
        assert!(TimeGrid::logarithmic(0.0, 1.0, 10).is_err());
        assert!(TimeGrid::linear(1.0, 1.0, 10).is_err());
        let g = TimeGrid::logarithmic(0.01, 100.0, 5).unwrap().samples();
        assert_eq!(g[0], 0.01);
        assert_eq!(g[4], 100.0);
        assert!((g[2] - 1.0).abs() < 1e-12);
    }
}
