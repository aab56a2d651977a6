//! Tonks-Girardeau gas observables.
//!
//! Through the Fermi-Bose mapping the hard-core Bose gas (BTG) has the density
//! of free fermions filling modes `1..=N`, while the fermionic gas (FTG) maps
//! to an ideal condensate with all `N` particles in the lowest mode. Both are
//! therefore sums of single-mode results with no cross terms.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ModeIndex, SpatialGrid, TimeGrid, TrapSpec};
use crate::propagator::Propagator;
use crate::resonance::longtime_asymptote;
use crate::spectral::{CurveKind, DecayCurve, SpectralOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GasKind {
    Btg,
    Ftg,
    /// Non-interacting bosons; observables coincide with the FTG gas.
    IdealBose,
}

impl GasKind {
    pub fn label(self) -> &'static str {
        match self {
            GasKind::Btg => "btg",
            GasKind::Ftg => "ftg",
            GasKind::IdealBose => "ideal_bose",
        }
    }
}

impl std::str::FromStr for GasKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "btg" => Ok(GasKind::Btg),
            "ftg" => Ok(GasKind::Ftg),
            "ideal_bose" | "bose" => Ok(GasKind::IdealBose),
            other => Err(Error::domain(format!("unknown gas kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GasSpec {
    pub kind: GasKind,
    pub n: usize,
}

impl GasSpec {
    pub fn new(kind: GasKind, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("gas needs at least one particle"));
        }
        Ok(Self { kind, n })
    }

    /// Distinct single-particle modes whose densities make up the gas.
    pub fn orbitals(&self) -> Vec<ModeIndex> {
        match self.kind {
            GasKind::Btg => (1..=self.n as u32).map(|n| ModeIndex::new(n).unwrap()).collect(),
            GasKind::Ftg | GasKind::IdealBose => vec![ModeIndex::new(1).unwrap()],
        }
    }

    fn condensed(&self) -> bool {
        !matches!(self.kind, GasKind::Btg)
    }

    pub fn descriptor(&self) -> String {
        format!("{} N={}", self.kind.label(), self.n)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("time must be >= 0, got {t}")))
    }
}

/// Density `rho(x, t)` on `grid`.
pub fn gas_density(
    gas: &GasSpec,
    t: f64,
    trap: &TrapSpec,
    grid: &SpatialGrid,
    opts: &SpectralOptions,
) -> Result<Vec<f64>> {
    check_time(t)?;
    let propagator = Propagator::for_trap(trap, opts);
    let states = gas
        .orbitals()
        .into_par_iter()
        .map(|n| propagator.evolve(n, t, grid))
        .collect::<Result<Vec<_>>>()?;
    let mut rho = vec![0.0; grid.len()];
    for state in &states {
        for (r, z) in rho.iter_mut().zip(&state.samples) {
            *r += z.norm_sqr();
        }
    }
    if gas.condensed() {
        rho.iter_mut().for_each(|r| *r *= gas.n as f64);
    }
    Ok(rho)
}

/// `P_n(t)` for every orbital of the gas, in mode order.
pub fn orbital_nonescape(gas: &GasSpec, t: f64, trap: &TrapSpec, opts: &SpectralOptions) -> Result<Vec<f64>> {
    check_time(t)?;
    let propagator = Propagator::for_trap(trap, opts);
    gas.orbitals()
        .into_par_iter()
        .map(|n| propagator.nonescape(n, t))
        .collect()
}

/// Combines orbital nonescape probabilities into `N_T`; sums in mode order.
pub fn combine_trapped(gas: &GasSpec, orbital: &[f64]) -> f64 {
    if gas.condensed() {
        gas.n as f64 * orbital[0]
    } else {
        orbital.iter().sum()
    }
}

/// Mean number of particles inside the trap, `N_T(t) = int_0^L rho dx`.
pub fn trapped_number(gas: &GasSpec, t: f64, trap: &TrapSpec, opts: &SpectralOptions) -> Result<f64> {
    Ok(combine_trapped(gas, &orbital_nonescape(gas, t, trap, opts)?))
}

/// `N_T / N`. For the FTG gas this is `P_1(t)` itself.
pub fn per_particle(gas: &GasSpec, t: f64, trap: &TrapSpec, opts: &SpectralOptions) -> Result<f64> {
    let orbital = orbital_nonescape(gas, t, trap, opts)?;
    if gas.condensed() {
        Ok(orbital[0])
    } else {
        Ok(combine_trapped(gas, &orbital) / gas.n as f64)
    }
}

/// Ground-state energy with `2m = hbar = 1`: `pi^2 N(N+1)(2N+1)/(6L^2)` for
/// the BTG gas, `pi^2 N / L^2` for the condensed gases.
pub fn ground_state_energy(gas: &GasSpec, trap: &TrapSpec) -> f64 {
    let n = gas.n as f64;
    let scale = PI * PI / (trap.length * trap.length);
    match gas.kind {
        GasKind::Btg => scale * n * (n + 1.0) * (2.0 * n + 1.0) / 6.0,
        GasKind::Ftg | GasKind::IdealBose => scale * n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Concavity {
    ConcaveUp,
    ConcaveDown,
    Flat,
}

/// Curvature sign of `ln N_T` over `window`.
///
/// The mean second derivative is taken from a least-squares parabola through
/// the samples, which averages the divided differences without letting the
/// transient ripple on top of the curve dominate. A curvature within twice
/// its standard error, or within the quadrature noise, counts as flat.
pub fn concavity_diagnostic(
    gas: &GasSpec,
    trap: &TrapSpec,
    window: &TimeGrid,
    opts: &SpectralOptions,
) -> Result<Concavity> {
    if window.points < 5 {
        return Err(Error::domain(format!(
            "concavity needs at least 5 samples, window has {}",
            window.points
        )));
    }
    let ts = window.samples();
    let ys = ts
        .par_iter()
        .map(|&t| trapped_number(gas, t, trap, opts).map(f64::ln))
        .collect::<Result<Vec<f64>>>()?;
    let noise = 4.0 * (opts.grid_tol + opts.tol);
    Ok(classify_concavity(&ts, &ys, noise))
}

/// Classification on precomputed samples; `noise` is the absolute error of
/// one `y` value.
pub fn classify_concavity(ts: &[f64], ys: &[f64], noise: f64) -> Concavity {
    let m = ts.len() as f64;
    let center = ts.iter().sum::<f64>() / m;
    let half = 0.5 * (ts[ts.len() - 1] - ts[0]);
    let us: Vec<f64> = ts.iter().map(|t| (t - center) / half).collect();
    // Normal equations for y = c0 + c1 u + c2 u^2 on the scaled abscissa.
    let mut a = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for (&u, &y) in us.iter().zip(ys) {
        let basis = [1.0, u, u * u];
        for i in 0..3 {
            rhs[i] += basis[i] * y;
            for j in 0..3 {
                a[i][j] += basis[i] * basis[j];
            }
        }
    }
    let inv = invert3(&a);
    let c: Vec<f64> = (0..3).map(|i| (0..3).map(|j| inv[i][j] * rhs[j]).sum()).collect();
    let rss: f64 = us
        .iter()
        .zip(ys)
        .map(|(&u, &y)| (y - c[0] - c[1] * u - c[2] * u * u).powi(2))
        .sum();
    let sigma2 = rss / (m - 3.0).max(1.0);
    let stderr = (sigma2 * inv[2][2]).sqrt();
    let floor = noise * inv[2][2].sqrt();
    if c[2].abs() <= (2.0 * stderr).max(floor) {
        Concavity::Flat
    } else if c[2] > 0.0 {
        Concavity::ConcaveUp
    } else {
        Concavity::ConcaveDown
    }
}

fn invert3(a: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
    let det = a[0][0] * cof(1, 2, 1, 2) - a[0][1] * cof(1, 2, 0, 2) + a[0][2] * cof(1, 2, 0, 1);
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let rows: Vec<usize> = (0..3).filter(|&r| r != j).collect();
            let cols: Vec<usize> = (0..3).filter(|&c| c != i).collect();
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            inv[i][j] = sign * cof(rows[0], rows[1], cols[0], cols[1]) / det;
        }
    }
    inv
}

/// Late-time trapped number from the `t^-3` law of each orbital.
pub fn longtime_gas_asymptote(gas: &GasSpec, t: f64, trap: &TrapSpec) -> Result<f64> {
    let orbital = gas
        .orbitals()
        .into_iter()
        .map(|n| longtime_asymptote(n, t, trap))
        .collect::<Result<Vec<_>>>()?;
    Ok(combine_trapped(gas, &orbital))
}

/// `N_T(t)` on a time grid.
pub fn trapped_number_curve(
    gas: &GasSpec,
    trap: &TrapSpec,
    times: &TimeGrid,
    opts: &SpectralOptions,
) -> Result<DecayCurve> {
    let ts = times.samples();
    let values = ts
        .par_iter()
        .map(|&t| trapped_number(gas, t, trap, opts))
        .collect::<Result<Vec<f64>>>()?;
    Ok(DecayCurve::new(CurveKind::TrappedNumber, ts, values, *trap, gas.descriptor()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trap() -> TrapSpec {
        TrapSpec::new(1.0, 5.0).unwrap()
    }

    #[test]
    fn energies() {
        let l = trap();
        let e = |kind, n| ground_state_energy(&GasSpec::new(kind, n).unwrap(), &l);
        assert!((e(GasKind::Btg, 1) - PI * PI).abs() < 1e-12);
        assert_eq!(e(GasKind::Btg, 1), e(GasKind::Ftg, 1));
        assert!((e(GasKind::Btg, 2) - 5.0 * PI * PI).abs() < 1e-12);
        assert!((e(GasKind::Ftg, 10) - 10.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn zero_particles_rejected() {
        assert!(GasSpec::new(GasKind::Btg, 0).is_err());
        assert!("nope".parse::<GasKind>().is_err());
        assert_eq!("FTG".parse::<GasKind>().unwrap(), GasKind::Ftg);
    }

    #[test]
    fn initial_counts_and_density() {
        let opts = SpectralOptions::default();
        for kind in [GasKind::Btg, GasKind::Ftg, GasKind::IdealBose] {
            let gas = GasSpec::new(kind, 3).unwrap();
            assert_eq!(trapped_number(&gas, 0.0, &trap(), &opts).unwrap(), 3.0);
        }
        let grid = SpatialGrid::interior(&trap(), 64).unwrap();
        let ftg = GasSpec::new(GasKind::Ftg, 10).unwrap();
        let rho = gas_density(&ftg, 0.0, &trap(), &grid, &opts).unwrap();
        for (i, r) in rho.iter().enumerate() {
            let x = grid.abscissa(i);
            assert!((r - 20.0 * (PI * x).sin().powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn condensed_per_particle_is_ground_mode() {
        let opts = SpectralOptions::default();
        let ftg = GasSpec::new(GasKind::Ftg, 7).unwrap();
        let p = per_particle(&ftg, 0.5, &trap(), &opts).unwrap();
        let p1 = Propagator::for_trap(&trap(), &opts).nonescape(ModeIndex::new(1).unwrap(), 0.5).unwrap();
        assert_eq!(p, p1);
    }

    #[test]
    fn classify_synthetic_curves() {
        let ts: Vec<f64> = (0..9).map(|i| 0.1 + 0.05 * i as f64).collect();
        let up: Vec<f64> = ts.iter().map(|t| t * t).collect();
        let down: Vec<f64> = ts.iter().map(|t| -t * t).collect();
        let line: Vec<f64> = ts.iter().map(|t| 2.0 * t).collect();
        assert_eq!(classify_concavity(&ts, &up, 1e-9), Concavity::ConcaveUp);
        assert_eq!(classify_concavity(&ts, &down, 1e-9), Concavity::ConcaveDown);
        assert_eq!(classify_concavity(&ts, &line, 1e-9), Concavity::Flat);
    }

    #[test]
    fn longtime_asymptote_sums() {
        let l = trap();
        let one = longtime_asymptote(ModeIndex::new(1).unwrap(), 50.0, &l).unwrap();
        let ftg = GasSpec::new(GasKind::Ftg, 4).unwrap();
        assert!((longtime_gas_asymptote(&ftg, 50.0, &l).unwrap() - 4.0 * one).abs() < 1e-30);
        let btg = GasSpec::new(GasKind::Btg, 3).unwrap();
        let expect = one * (1.0 + 0.25 + 1.0 / 9.0);
        assert!((longtime_gas_asymptote(&btg, 50.0, &l).unwrap() - expect).abs() < 1e-14 * expect);
        assert!(longtime_gas_asymptote(&btg, 0.0, &l).is_err());
    }
}
