//! Pseudo-spectral laboratory for the rotating, stably stratified Boussinesq
//! equations on a horizontally periodic layer.
//!
//! The state is the four-vector `v = (u1, u2, u3, theta)` stored as complex
//! Fourier coefficients. The crate provides the spectral toolbox (grids,
//! transforms, projections), the linear skeleton of the equations (Coriolis
//! and buoyancy skew operator, exact per-mode propagators), Biot–Savart
//! inversions, an integrating-factor RK4 time stepper, analytic reference
//! solutions (Oseen vortex family, Hermite projections, self-similar
//! variables), rate-fitting diagnostics, and a scenario/experiment layer with
//! binary snapshot and CSV output.

pub mod acceptance;
pub mod biotsavart;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod fft;
pub mod field;
pub mod grid;
pub mod linops;
pub mod reference;
pub mod scenario;
pub mod snapshot;

pub use error::{Error, Result};
pub use exec::Exec;
pub use field::{Moments, PhysicalField, SpectralField};
pub use grid::{Bc, Grid, GridSpec};
pub use linops::PhysParams;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;
