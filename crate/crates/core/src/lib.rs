//! Tunneling decay of hard-wall trap eigenmodes through a delta barrier.
//!
//! A particle starts in an eigenmode of the box `[0, L]` with hard walls. At
//! `t = 0` the wall at `x = L` is replaced by a repulsive delta barrier of
//! strength `eta` and the state leaks into the half line. Everything is in
//! units with `2m = hbar = 1`, so `E = k^2` and plane waves evolve as
//! `exp(-i k^2 t)`.
//!
//! The crate provides:
//!
//! * [`scattering`]: Jost function, S-matrix, continuum states and overlaps.
//! * [`poles`]: resonance poles (zeros of the Jost function) with contour
//!   certification.
//! * [`spectral`]: exact evolution by quadrature over the continuum, and the
//!   nonescape and survival probabilities.
//! * [`resonance`]: Gamow states, the exponential (pole) approximation and the
//!   `t^-3` long-time law.
//! * [`free`]: the barrier-free case in closed form (method of images).
//! * [`gas`]: Tonks-Girardeau gas observables built from single modes.

pub mod error;
pub mod fit;
pub mod free;
pub mod gas;
pub mod model;
pub mod poles;
pub mod propagator;
pub mod quadrature;
pub mod resonance;
pub mod scattering;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
pub use fit::{RegimeAnnotations, SlopeFit};
pub use gas::{Concavity, GasKind, GasSpec};
pub use model::{ModeIndex, ModeState, QuadReport, SpatialGrid, TimeGrid, TimeSpacing, TrapSpec};
pub use poles::{PoleSet, ResonancePole};
pub use propagator::Propagator;
pub use resonance::{ExpansionTable, ResonantState};
pub use spectral::{CurveKind, DecayCurve, SpectralOptions};

pub use num_complex::Complex64;
