//! Positive and ground-state standing waves of the Klein-Gordon-Maxwell
//! system by the reduction method.
//!
//! The electrostatic potential is eliminated by solving its constraint
//! exactly ([`reduction`]), which leaves the single-field functional of
//! [`energy`]. Its critical points are computed by the solvers of
//! [`solver`], and [`supercritical`] handles nonlinearities with
//! supercritical growth by truncation.

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod energy;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod nonlinearity;
pub mod reduction;
pub mod solver;
pub mod supercritical;

pub use domain::{build_grid, integrate, DomainGrid, Field, GridKind};
pub use energy::{EnergyReport, Problem};
pub use error::{KgmError, Result};
pub use nonlinearity::Nonlinearity;
pub use solver::SolveOutcome;
