//! The electrostatic constraint `−Δφ + u²φ = −ωu²` and its certificates.

use serde::Serialize;

use crate::domain::{dot, DomainGrid, Field, GridKind};
use crate::error::{KgmError, Result};
use crate::linalg::{CgReport, PreconditionerKind, ShiftedStiffness};

/// Tolerance of the maximum-principle bounds.
pub const BOUND_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionSolution {
    pub phi: Field,
    pub iterations: usize,
    /// Strong-form residual of the constraint relative to its right-hand side.
    pub linear_residual: f64,
    pub bounds_ok: bool,
    /// Extremes of `φ` over the nodes where `u ≠ 0` (0 when there are none).
    pub phi_min: f64,
    pub phi_max: f64,
    pub identity_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionOptions {
    pub tol: f64,
    /// Defaults to ten times the node count.
    pub max_iter: Option<usize>,
    pub initial_guess: Option<Vec<f64>>,
    pub preconditioner: Option<PreconditionerKind>,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
            initial_guess: None,
            preconditioner: None,
        }
    }
}

pub fn solve_phi(grid: &DomainGrid, u: &Field, omega: f64, tol: f64) -> Result<ReductionSolution> {
    solve_phi_with(
        grid,
        u,
        omega,
        &ReductionOptions {
            tol,
            ..Default::default()
        },
    )
}

pub fn solve_phi_with(
    grid: &DomainGrid,
    u: &Field,
    omega: f64,
    opts: &ReductionOptions,
) -> Result<ReductionSolution> {
    grid.check(u)?;
    check_omega(omega)?;
    let (phi, report) = phi_values(grid, u.values(), omega, opts)?;
    let mut phi_min: f64 = 0.0;
    let mut phi_max: f64 = 0.0;
    let mut seen = false;
    for (p, x) in phi.iter().zip(u.values()) {
        if *x != 0.0 {
            if seen {
                phi_min = phi_min.min(*p);
                phi_max = phi_max.max(*p);
            } else {
                (phi_min, phi_max, seen) = (*p, *p, true);
            }
        }
    }
    let identity_residual = identity_defect(grid, u.values(), &phi, omega);
    let bounds_ok = phi
        .iter()
        .all(|p| *p >= -omega - BOUND_SLACK && *p <= BOUND_SLACK);
    Ok(ReductionSolution {
        phi: Field::new(grid, phi)?,
        iterations: report.iterations,
        linear_residual: report.relative_residual,
        bounds_ok,
        phi_min,
        phi_max,
        identity_residual,
    })
}

pub(crate) fn check_omega(omega: f64) -> Result<()> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(KgmError::InvalidParameter {
            name: "omega",
            reason: format!("must be positive, got {omega}"),
        });
    }
    Ok(())
}

/// Solves `(K + W u²) φ = −ω W u²` on the free nodes, `φ = 0` on constrained ones.
pub(crate) fn phi_values(
    grid: &DomainGrid,
    u: &[f64],
    omega: f64,
    opts: &ReductionOptions,
) -> Result<(Vec<f64>, CgReport)> {
    let n = grid.node_count();
    let zero = || {
        (
            vec![0.0; n],
            CgReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        )
    };
    let active = u
        .iter()
        .enumerate()
        .any(|(i, x)| *x != 0.0 && grid.is_free(i));
    if !active {
        // The cube operator is singular here; the zero potential is the decaying solution.
        return Ok(zero());
    }
    let op = ShiftedStiffness::new(grid, u.iter().map(|x| x * x));
    let w = grid.energy_weights();
    let b: Vec<f64> = (0..n).map(|i| -omega * w[i] * u[i] * u[i]).collect();
    let mut phi = match &opts.initial_guess {
        Some(g) if g.len() == n => g.clone(),
        _ => vec![0.0; n],
    };
    grid.zero_constrained(&mut phi);
    let kind = opts
        .preconditioner
        .unwrap_or_else(|| PreconditionerKind::default_for(grid.kind()));
    let max_iter = opts.max_iter.unwrap_or(10 * n);
    let report = op.solve(&b, &mut phi, kind, opts.tol, max_iter);
    if !report.converged {
        return Err(KgmError::NoConvergence {
            what: "potential solve",
            iterations: report.iterations,
            residual: report.relative_residual,
        });
    }
    Ok((phi, report))
}

/// `∫|∇φ|² + ω∫φu² + ∫φ²u²`, computed with the energy weights.
fn identity_defect(grid: &DomainGrid, u: &[f64], phi: &[f64], omega: f64) -> f64 {
    let grad = grid.dirichlet_form(phi);
    let w = grid.energy_weights();
    let (mut lin, mut quad) = (0.0, 0.0);
    for i in 0..u.len() {
        let u2 = u[i] * u[i];
        lin += w[i] * phi[i] * u2;
        quad += w[i] * phi[i] * phi[i] * u2;
    }
    (grad + omega * lin + quad).abs()
}

/// `|∫|∇φ|² + ∫ωφu² + ∫φ²u²|`, which vanishes for the exact constraint solution.
pub fn phi_identity_residual(grid: &DomainGrid, u: &Field, phi: &Field, omega: f64) -> Result<f64> {
    grid.check(u)?;
    grid.check(phi)?;
    Ok(identity_defect(grid, u.values(), phi.values(), omega))
}

/// Strong-form constraint residual `W⁻¹[(K + W u²)φ + ω W u²]` in the discrete ℓ² norm.
pub fn constraint_residual(grid: &DomainGrid, u: &Field, phi: &Field, omega: f64) -> Result<f64> {
    grid.check(u)?;
    grid.check(phi)?;
    let n = grid.node_count();
    let mut kphi = vec![0.0; n];
    grid.apply_stiffness(phi.values(), &mut kphi);
    let w = grid.energy_weights();
    let (u, phi) = (u.values(), phi.values());
    let r: Vec<f64> = (0..n)
        .filter(|i| grid.is_free(*i))
        .map(|i| kphi[i] / w[i] + u[i] * u[i] * (phi[i] + omega))
        .collect();
    Ok(dot(&r, &r).sqrt())
}

/// Whether `φ_{tu} ≡ −ω` is the exact solution, as on the periodic cube.
pub fn is_saturated(grid: &DomainGrid, u: &Field) -> bool {
    grid.kind() == GridKind::PeriodicCube && !u.is_zero()
}
