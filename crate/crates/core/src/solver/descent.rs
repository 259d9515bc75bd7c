use super::{finish, Merit, Method, SolveOutcome, SolverOptions, TracePoint};
use crate::domain::{dot, Field};
use crate::energy::{Problem, State};
use crate::error::Result;
use crate::linalg::minres;

/// Sobolev-gradient descent from `u0` until `cerami ≤ stop_tol · (1 + |I|)`.
///
/// Running out of iterations, failing the line search or collapsing onto the
/// trivial critical point yields a non-converged outcome, not an error.
pub fn descend(problem: &Problem, u0: &Field, opts: &SolverOptions) -> Result<SolveOutcome> {
    problem.grid().check(u0)?;
    let mut state = problem.state(u0.values())?;
    let (mut report, mut w) = problem.report_from(&state)?;
    let initial_norm = report.norm_e_sq;
    let mut trace = vec![TracePoint::new(0, &report)];
    let mut converged = report.cerami <= opts.threshold(report.level);
    let mut iterations = 0;
    while !converged && iterations < opts.max_iter {
        let step = match opts.merit {
            Merit::Residual => newton_step(problem, &state, &w, opts)?,
            Merit::Energy => energy_step(problem, &state, &w, opts)?,
        };
        let Some(next) = step else { break };
        iterations += 1;
        state = next;
        (report, w) = problem.report_from(&state)?;
        trace.push(TracePoint::new(iterations, &report));
        if opts.merit == Merit::Residual && report.norm_e_sq < 1e-12 * initial_norm {
            break;
        }
        converged = report.cerami <= opts.threshold(report.level);
    }
    let level = report.level;
    finish(
        problem,
        &state,
        Method::Descent,
        trace,
        converged,
        iterations,
        level,
    )
}

fn shifted(u: &[f64], d: &[f64], t: f64) -> Vec<f64> {
    u.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

/// One Armijo step on `I` along `−w`.
fn energy_step(
    problem: &Problem,
    state: &State,
    w: &[f64],
    opts: &SolverOptions,
) -> Result<Option<State>> {
    let slope = -dot(&state.grad, w);
    let a = opts.armijo;
    let mut sigma = a.initial_step;
    for _ in 0..=a.max_backtracks {
        let Ok(trial) = problem.state(&shifted(&state.u, w, -sigma)) else {
            sigma *= a.backtrack;
            continue;
        };
        if trial.level <= state.level + a.sufficient_decrease * sigma * slope {
            return Ok(Some(trial));
        }
        sigma *= a.backtrack;
    }
    Ok(None)
}

/// One Armijo step on `Ψ = ½ g·R⁻¹g` along a Newton direction, falling back
/// to the Sobolev gradient of `Ψ` when the Newton direction does not descend.
fn newton_step(
    problem: &Problem,
    state: &State,
    w: &[f64],
    opts: &SolverOptions,
) -> Result<Option<State>> {
    let n = w.len();
    let psi = 0.5 * dot(&state.grad, w);
    let mut hw = vec![0.0; n];
    problem.hessian_apply(state, w, &mut hw)?;
    problem.grid().zero_constrained(&mut hw);

    let rel = (2.0 * psi).sqrt() / (1.0 + state.norm_e_sq.sqrt());
    let tol = rel.clamp(1e-12, 1e-2);
    let rhs: Vec<f64> = state.grad.iter().map(|g| -g).collect();
    let (mut d, _) = minres(
        |v, out| problem.hessian_apply(state, v, out),
        |r, z| {
            z.copy_from_slice(&problem.riesz(r)?);
            Ok(())
        },
        &rhs,
        tol,
        400,
    )?;
    problem.grid().zero_constrained(&mut d);
    let mut slope = dot(&hw, &d);
    if !(slope < 0.0) {
        let z = problem.riesz(&hw)?;
        slope = -dot(&hw, &z);
        d = z.iter().map(|x| -x).collect();
    }
    if !(slope < 0.0) {
        return Ok(None);
    }

    let a = opts.armijo;
    let mut sigma = a.initial_step;
    for _ in 0..=a.max_backtracks {
        // Trial points outside a table's range are rejected like any other overshoot.
        let Ok(trial) = problem.state(&shifted(&state.u, &d, sigma)) else {
            sigma *= a.backtrack;
            continue;
        };
        let tw = problem.riesz(&trial.grad)?;
        let tpsi = 0.5 * dot(&trial.grad, &tw);
        if tpsi <= psi + a.sufficient_decrease * sigma * slope {
            return Ok(Some(trial));
        }
        sigma *= a.backtrack;
    }
    Ok(None)
}
