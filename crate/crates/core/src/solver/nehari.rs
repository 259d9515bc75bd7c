use super::{descend, finish, Method, SolveOutcome, SolverOptions, TracePoint};
use crate::domain::{dot, Field};
use crate::energy::Problem;
use crate::error::{KgmError, Result};
use crate::exec;

const WIDE_SCAN: usize = 24;
const NARROW_SCAN: usize = 10;
const NARROW: (f64, f64) = (0.5, 2.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub t_star: f64,
    pub u: Field,
    /// Sign changes of `t ↦ I′(tu)(tu)` seen by the scan; more than one means
    /// the fibre has several Nehari points in the bracket.
    pub sign_changes: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NehariOptions {
    /// Fibre bracket for the first projection; by default `[10⁻³, t_hi]`
    /// with `t_hi` found by doubling.
    pub bracket: Option<(f64, f64)>,
    /// Projected-descent iterations before handing over to the polisher.
    pub max_iter: usize,
    /// Hand over once `cerami ≤ switch_tol · (1 + |I|)`.
    pub switch_tol: f64,
    pub polish: SolverOptions,
}

impl Default for NehariOptions {
    fn default() -> Self {
        Self {
            bracket: None,
            max_iter: 500,
            switch_tol: 1e-3,
            polish: SolverOptions::default(),
        }
    }
}

fn fiber(problem: &Problem, u: &[f64], t: f64) -> Result<f64> {
    let v: Vec<f64> = u.iter().map(|x| t * x).collect();
    Ok(problem.state(&v)?.nehari)
}

fn default_upper(problem: &Problem, u: &[f64], evals: &mut usize) -> Result<f64> {
    let mut t = 1.0;
    for _ in 0..64 {
        *evals += 1;
        if fiber(problem, u, t)? < 0.0 {
            return Ok(t);
        }
        t *= 2.0;
    }
    Err(KgmError::Projection(
        "I'(tu)(tu) stays positive for every sampled t".into(),
    ))
}

/// Projects `u` onto the Nehari manifold along its fibre `t ↦ tu`, returning
/// the smallest root of `I′(tu)(tu)` in the bracket.
pub fn nehari_project(problem: &Problem, u: &Field, bracket: Option<(f64, f64)>) -> Result<Projection> {
    problem.grid().check(u)?;
    if u.is_zero() {
        return Err(KgmError::Projection("zero field has no Nehari point".into()));
    }
    project(problem, u.values(), bracket, WIDE_SCAN)
}

fn project(
    problem: &Problem,
    u: &[f64],
    bracket: Option<(f64, f64)>,
    scan: usize,
) -> Result<Projection> {
    let mut evals = 0;
    let (lo, hi) = match bracket {
        Some((lo, hi)) => (lo, hi),
        None => (1e-3, default_upper(problem, u, &mut evals)?),
    };
    if !(lo > 0.0 && hi > lo) {
        return Err(KgmError::InvalidParameter {
            name: "bracket",
            reason: format!("need 0 < lo < hi, got [{lo}, {hi}]"),
        });
    }
    let ts: Vec<f64> = (0..scan)
        .map(|j| lo * (hi / lo).powf(j as f64 / (scan - 1) as f64))
        .collect();
    let hs = exec::map(&ts, |t| fiber(problem, u, *t))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    evals += scan;
    let changes: Vec<usize> = (0..scan - 1)
        .filter(|&j| (hs[j] > 0.0) != (hs[j + 1] > 0.0))
        .collect();
    let Some(&j) = changes.first() else {
        return Err(KgmError::Projection(format!(
            "no sign change of I'(tu)(tu) on [{lo}, {hi}]"
        )));
    };
    let t_star = if hs[j] == 0.0 {
        ts[j]
    } else {
        illinois(|t| fiber(problem, u, t), ts[j], hs[j], ts[j + 1], hs[j + 1], &mut evals)?
    };
    let values: Vec<f64> = u.iter().map(|x| t_star * x).collect();
    Ok(Projection {
        t_star,
        u: Field::new(problem.grid(), values)?,
        sign_changes: changes.len(),
        evaluations: evals,
    })
}

/// Illinois false position on a bracket with `h(a) > 0 ≥ h(b)` or the reverse.
fn illinois(
    h: impl Fn(f64) -> Result<f64>,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    evals: &mut usize,
) -> Result<f64> {
    let scale = fa.abs().max(fb.abs());
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = h(c)?;
        *evals += 1;
        if fc == 0.0 || fc.abs() <= 1e-14 * scale || (b - a).abs() <= 1e-15 * c.abs() {
            return Ok(c);
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Ok((a * fb - b * fa) / (fb - fa))
}

fn project_near(problem: &Problem, u: &[f64]) -> Result<Projection> {
    project(problem, u, Some(NARROW), NARROW_SCAN)
        .or_else(|_| project(problem, u, None, WIDE_SCAN))
}

/// Runs the projected descent from every seed and returns the lowest-level
/// converged outcome.
pub fn nehari_minimize(problem: &Problem, seeds: &[Field], opts: &NehariOptions) -> Result<SolveOutcome> {
    let results = nehari_minimize_each(problem, seeds, opts);
    let mut last_err = None;
    let mut best: Option<SolveOutcome> = None;
    for r in results {
        match r {
            Ok(o) => {
                let better = match &best {
                    None => true,
                    Some(b) => (o.converged, -o.level) > (b.converged, -b.level),
                };
                if better {
                    best = Some(o);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| {
        last_err.unwrap_or_else(|| KgmError::InvalidParameter {
            name: "seeds",
            reason: "at least one seed is required".into(),
        })
    })
}

/// One projected-descent run per seed, in seed order.
pub fn nehari_minimize_each(
    problem: &Problem,
    seeds: &[Field],
    opts: &NehariOptions,
) -> Vec<Result<SolveOutcome>> {
    exec::map(seeds, |s| minimize_one(problem, s, opts))
}

fn minimize_one(problem: &Problem, seed: &Field, opts: &NehariOptions) -> Result<SolveOutcome> {
    let proj = nehari_project(problem, seed, opts.bracket)?;
    let mut u = proj.u.into_values();
    let mut state = problem.state(&u)?;
    let (mut report, mut w) = problem.report_from(&state)?;
    let mut trace = vec![TracePoint::new(0, &report)];
    let armijo = opts.polish.armijo;
    let mut sigma = armijo.initial_step;
    let mut iterations = 0;
    while iterations < opts.max_iter && report.cerami > opts.switch_tol * (1.0 + report.level.abs()) {
        let slope = -dot(&state.grad, &w);
        let mut accepted = None;
        for _ in 0..=armijo.max_backtracks {
            let trial: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a - sigma * b).collect();
            if let Ok(p) = project_near(problem, &trial) {
                let s = problem.state(p.u.values())?;
                if s.level <= state.level + armijo.sufficient_decrease * sigma * slope {
                    accepted = Some(s);
                    break;
                }
            }
            sigma *= armijo.backtrack;
        }
        let Some(next) = accepted else { break };
        iterations += 1;
        sigma = (2.0 * sigma).min(armijo.initial_step);
        state = next;
        u = state.u.clone();
        (report, w) = problem.report_from(&state)?;
        trace.push(TracePoint::new(iterations, &report));
    }
    let estimate = report.level;
    let before = report.norm_e_sq;
    let polished = descend(problem, &Field::new(problem.grid(), u)?, &opts.polish)?;
    let offset = iterations;
    trace.extend(polished.trace.iter().skip(1).map(|p| TracePoint {
        iter: p.iter + offset,
        ..*p
    }));
    let nontrivial = polished.report.norm_e_sq > 1e-6 * before;
    let state = problem.state(polished.u.values())?;
    finish(
        problem,
        &state,
        Method::Nehari,
        trace,
        polished.converged && nontrivial,
        iterations + polished.iterations,
        estimate,
    )
}
