//! Critical-point solvers for the reduced functional.
//!
//! * [`descend`]: Sobolev-gradient descent; by default on the residual merit
//!   `½‖∇_E I‖²_E` with Newton directions, optionally on `I` itself.
//! * [`mountain_pass`]: path deformation between `0` and `e`.
//! * [`nehari_project`] and [`nehari_minimize`]: projected descent on the
//!   Nehari manifold.
//! * [`recenter`]: lattice translation on the periodic cube.

mod descent;
mod geometry;
mod mountain;
mod nehari;
mod recenter;

pub use descent::descend;
pub use geometry::{find_e, gaussian_seeds, random_direction, seeds_for, GeometryOptions, GeometryReport};
pub use mountain::{mountain_pass, MountainPassOptions};
pub use nehari::{nehari_minimize, nehari_minimize_each, nehari_project, NehariOptions, Projection};
pub use recenter::recenter;

use serde::Serialize;

use crate::domain::Field;
use crate::energy::{level_bound_check, EnergyReport, LevelVerdict, Problem, State};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Descent,
    MountainPass,
    Nehari,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Descent => "descent",
            Method::MountainPass => "mountain-pass",
            Method::Nehari => "nehari",
        }
    }
}

/// Merit function minimised by [`descend`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Merit {
    /// `½‖∇_E I(u)‖²_E`, decreased along Newton directions.
    #[default]
    Residual,
    /// `I(u)`, decreased along `−∇_E I`.
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Armijo {
    pub sufficient_decrease: f64,
    pub backtrack: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
}

impl Default for Armijo {
    fn default() -> Self {
        Self {
            sufficient_decrease: 1e-4,
            backtrack: 0.5,
            initial_step: 1.0,
            max_backtracks: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once `cerami ≤ stop_tol · (1 + |I|)`.
    pub stop_tol: f64,
    pub max_iter: usize,
    pub armijo: Armijo,
    pub merit: Merit,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            stop_tol: 1e-6,
            max_iter: 200,
            armijo: Armijo::default(),
            merit: Merit::Residual,
        }
    }
}

impl SolverOptions {
    pub(crate) fn threshold(&self, level: f64) -> f64 {
        self.stop_tol * (1.0 + level.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub iter: usize,
    #[serde(rename = "I")]
    pub level: f64,
    pub cerami: f64,
    pub norm_e: f64,
}

impl TracePoint {
    pub(crate) fn new(iter: usize, r: &EnergyReport) -> Self {
        Self {
            iter,
            level: r.level,
            cerami: r.cerami,
            norm_e: r.norm_e_sq.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificates {
    pub level: LevelVerdict,
    pub min_u: f64,
    pub max_u: f64,
    /// `min u ≥ −10⁻⁸ max u`.
    pub positivity_ok: bool,
    /// `‖∇_E I(u)‖_E`, the weak residual in the dual norm.
    pub weak_residual: f64,
    /// `weak_residual ≤ 10⁻⁶ (1 + ‖u‖_E)`.
    pub residual_ok: bool,
    /// Discrete ℓ² norm of the strong-form residual.
    pub strong_residual: f64,
}

impl Certificates {
    pub fn all_pass(&self) -> bool {
        self.level.passed() && self.positivity_ok && self.residual_ok
    }

    pub fn failed(&self) -> Vec<String> {
        let mut out = self.level.failed.clone();
        if !self.positivity_ok {
            out.push("positivity".into());
        }
        if !self.residual_ok {
            out.push("weak_residual".into());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub u: Field,
    pub phi: Field,
    pub level: f64,
    pub method: Method,
    pub trace: Vec<TracePoint>,
    pub report: EnergyReport,
    pub certificates: Certificates,
    pub converged: bool,
    pub iterations: usize,
    /// Method-specific level estimate before polishing (the path maximum for
    /// the mountain pass), or the final level otherwise.
    pub level_estimate: f64,
}

/// Builds an outcome from a final state, computing every certificate.
pub(crate) fn finish(
    problem: &Problem,
    state: &State,
    method: Method,
    trace: Vec<TracePoint>,
    converged: bool,
    iterations: usize,
    level_estimate: f64,
) -> Result<SolveOutcome> {
    let grid = problem.grid();
    let (report, _) = problem.report_from(state)?;
    let u = Field::new(grid, state.u.clone())?;
    let phi = Field::new(grid, state.phi.clone())?;
    let (min_u, max_u) = (u.min(), u.max());
    let strong = problem.strong_from(state);
    let strong_residual = strong.values().iter().map(|x| x * x).sum::<f64>().sqrt();
    let certificates = Certificates {
        level: level_bound_check(&report, report.level),
        min_u,
        max_u,
        positivity_ok: min_u >= -1e-8 * max_u.max(0.0),
        weak_residual: report.gradient_norm,
        residual_ok: report.gradient_norm <= 1e-6 * (1.0 + report.norm_e_sq.sqrt()),
        strong_residual,
    };
    Ok(SolveOutcome {
        level: report.level,
        u,
        phi,
        method,
        trace,
        report,
        certificates,
        converged,
        iterations,
        level_estimate,
    })
}
