//! Solvers for macroscopic fast-exit crowd dynamics.
//!
//! * [`mfg`]: mean-field optimal control, solved by steepest descent with an
//!   implicit forward density solve and a backward adjoint solve.
//! * [`hughes`]: the classical Hughes model (fast-sweeping Eikonal solve plus an
//!   explicit finite-volume step), used as a baseline and to initialize descent.
//! * [`oracle`]: Monte Carlo particle simulation of the underlying Langevin
//!   dynamics, used to cross-check the continuum solvers.
//! * [`cli`]: configuration parsing and experiment orchestration.

pub mod cli;
pub mod config;
pub mod error;
pub mod flux;
pub mod grid;
pub mod hughes;
pub mod linalg;
pub mod mfg;
pub mod model;
pub mod oracle;
pub mod spline;

pub use config::SolverConfig;
pub use error::{Result, SolverError};
pub use grid::{BoundaryTag, Field, Grid, Trajectory};
pub use model::{Energy, ExtendedValue, Mobility, MobilityRole, ModelSpec, TabulatedMobility};
