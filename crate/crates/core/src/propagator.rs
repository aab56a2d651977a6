//! Chooses how a mode is evolved: continuum quadrature for a barrier, the
//! closed-form image solution when `eta = 0`.

use crate::error::{Error, Result};
use crate::free::{evolve_mode_free, nonescape_free};
use crate::model::{initial_mode, ModeIndex, ModeState, SpatialGrid, TrapSpec};
use crate::resonance::late_time_nonescape;
use crate::spectral::{evolve_mode_with, nonescape_report, SpectralOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Propagator {
    Spectral { trap: TrapSpec, options: SpectralOptions },
    Free { trap: TrapSpec, options: SpectralOptions },
}

impl Propagator {
    pub fn for_trap(trap: &TrapSpec, options: &SpectralOptions) -> Self {
        if trap.eta == 0.0 {
            Self::Free {
                trap: *trap,
                options: *options,
            }
        } else {
            Self::Spectral {
                trap: *trap,
                options: *options,
            }
        }
    }

    pub fn trap(&self) -> &TrapSpec {
        match self {
            Self::Spectral { trap, .. } | Self::Free { trap, .. } => trap,
        }
    }

    pub fn options(&self) -> &SpectralOptions {
        match self {
            Self::Spectral { options, .. } | Self::Free { options, .. } => options,
        }
    }

    pub fn is_free(&self) -> bool {
        matches!(self, Self::Free { .. })
    }

    /// `phi_n(x, t)` on `grid`; the exact initial mode at `t = 0`.
    pub fn evolve(&self, n: ModeIndex, t: f64, grid: &SpatialGrid) -> Result<ModeState> {
        if t == 0.0 {
            return initial_mode(n, self.trap(), grid);
        }
        match self {
            Self::Spectral { trap, options } => evolve_mode_with(n, t, trap, grid, options),
            Self::Free { trap, .. } => evolve_mode_free(n, t, trap, grid),
        }
    }

    /// `P_n(t)`. Past `t_cap` the barrier case switches to the pole expansion
    /// plus the `t^-3` tail.
    pub fn nonescape(&self, n: ModeIndex, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("time must be >= 0, got {t}")));
        }
        match self {
            Self::Spectral { trap, options } if t > options.t_cap => {
                Ok(late_time_nonescape(n, t, trap)?.clamp(0.0, 1.0))
            }
            Self::Spectral { trap, options } => Ok(nonescape_report(n, t, trap, options)?.value),
            Self::Free { trap, options } => nonescape_free(n, t, trap, options),
        }
    }
}
