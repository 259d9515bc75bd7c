//! Truncation pipeline for supercritical perturbations `f₀ + λg`.
//!
//! Each rung replaces `g` above `M_n` by subcritical growth, solves the
//! surrogate problem and accepts once the measured `‖u‖_∞` clears `M_n`;
//! below the threshold the surrogate and the original nonlinearity agree, so
//! an accepted solution solves the original problem.

use serde::Serialize;

use crate::domain::Field;
use crate::energy::Problem;
use crate::error::{KgmError, Result};
use crate::nonlinearity::{compose_f_lambda_n, lambda0_for, Nonlinearity};
use crate::solver::{nehari_minimize, NehariOptions, SolveOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderSpec {
    pub m0: f64,
    pub ratio: f64,
    pub rungs: usize,
    pub q: f64,
}

impl Default for LadderSpec {
    fn default() -> Self {
        Self {
            m0: 4.0,
            ratio: 2.0,
            rungs: 8,
            q: 5.0,
        }
    }
}

impl LadderSpec {
    /// `M_n = M₀ · ratio^n`.
    pub fn sequence(&self) -> Result<Vec<f64>> {
        if !(self.m0 > 0.0 && self.ratio > 1.0 && self.rungs > 0) {
            return Err(KgmError::InvalidParameter {
                name: "ladder",
                reason: format!(
                    "need M0 > 0, ratio > 1 and at least one rung, got M0 = {}, ratio = {}, rungs = {}",
                    self.m0, self.ratio, self.rungs
                ),
            });
        }
        Ok((0..self.rungs)
            .map(|n| self.m0 * self.ratio.powi(n as i32))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RungResult {
    pub index: usize,
    pub m: f64,
    pub lambda0: f64,
    pub admissible: bool,
    pub outcome: Option<SolveOutcome>,
    pub linf: Option<f64>,
    pub accepted: bool,
    /// `‖∇_E I_{λ,n}(u)‖_E` of the surrogate problem.
    pub surrogate_residual: Option<f64>,
    /// The same dual norm with the untruncated `f₀ + λg`.
    pub true_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationLadder {
    pub m_sequence: Vec<f64>,
    pub q: f64,
    pub lambda: f64,
    /// `λ₀` at the accepted rung, or at the last rung tried.
    pub lambda0: f64,
    pub rungs: Vec<RungResult>,
    pub accepted: Option<usize>,
}

impl TruncationLadder {
    pub fn accepted_rung(&self) -> Option<&RungResult> {
        self.accepted.map(|i| &self.rungs[i])
    }
}

/// `max_i |u_i|`.
pub fn linf_norm(u: &Field) -> f64 {
    u.max_abs()
}

/// Runs the ladder on `problem`'s grid, potential and `ω`; the problem's own
/// nonlinearity is ignored.
pub fn run_truncation_pipeline(
    problem: &Problem,
    f0: &Nonlinearity,
    g: &Nonlinearity,
    lambda: f64,
    ladder: &LadderSpec,
    seeds: &[Field],
    opts: &NehariOptions,
) -> Result<TruncationLadder> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(KgmError::InvalidParameter {
            name: "lambda",
            reason: format!("must be nonnegative, got {lambda}"),
        });
    }
    let m_sequence = ladder.sequence()?;
    let original = Nonlinearity::perturbed(f0.clone(), g.clone(), lambda, ladder.q);
    let full = problem.with_nonlinearity(&original);
    let mut rungs = Vec::new();
    let mut accepted = None;
    let mut lambda0 = f64::NAN;
    for (index, &m) in m_sequence.iter().enumerate() {
        let nl = compose_f_lambda_n(f0, g, lambda, m, ladder.q)?;
        lambda0 = match lambda0_for(g, m) {
            Ok(l) => l,
            Err(_) if lambda == 0.0 => f64::INFINITY,
            Err(e) => return Err(e),
        };
        let admissible = lambda <= lambda0;
        let mut rung = RungResult {
            index,
            m,
            lambda0,
            admissible,
            outcome: None,
            linf: None,
            accepted: false,
            surrogate_residual: None,
            true_residual: None,
        };
        if admissible {
            let surrogate = problem.with_nonlinearity(&nl);
            let outcome = nehari_minimize(&surrogate, seeds, opts)?;
            let linf = linf_norm(&outcome.u);
            let true_report = full.report(&outcome.u)?;
            rung.accepted = outcome.converged && (lambda == 0.0 || linf < m);
            rung.linf = Some(linf);
            rung.surrogate_residual = Some(outcome.report.gradient_norm);
            rung.true_residual = Some(true_report.gradient_norm);
            rung.outcome = Some(outcome);
        }
        let done = rung.accepted;
        rungs.push(rung);
        if done {
            accepted = Some(index);
            break;
        }
    }
    Ok(TruncationLadder {
        m_sequence,
        q: ladder.q,
        lambda,
        lambda0,
        rungs,
        accepted,
    })
}
