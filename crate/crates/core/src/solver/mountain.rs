use super::{descend, finish, GeometryReport, Method, SolveOutcome, SolverOptions, TracePoint};
use crate::domain::{dot, Field};
use crate::energy::Problem;
use crate::error::{KgmError, Result};
use crate::exec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MountainPassOptions {
    pub n_path: usize,
    /// Hand the path maximum to the polisher once its
    /// `cerami ≤ switch_tol · (1 + |I|)`.
    pub switch_tol: f64,
    pub max_sweeps: usize,
    /// Sweeps without a decrease of the path maximum before giving up on deformation.
    pub stagnation: usize,
    pub polish: SolverOptions,
}

impl Default for MountainPassOptions {
    fn default() -> Self {
        Self {
            n_path: 64,
            switch_tol: 1e-3,
            max_sweeps: 5000,
            stagnation: 50,
            polish: SolverOptions::default(),
        }
    }
}

fn argmax(levels: &[f64]) -> usize {
    levels
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bk, bv), (k, v)| if *v > bv { (k, *v) } else { (bk, bv) })
        .0
}

/// One Armijo step on `I` along `−∇_E I` for a single path node.
fn push_node(problem: &Problem, node: &[f64], sigma0: f64, opts: &SolverOptions) -> Result<(Vec<f64>, f64)> {
    let state = problem.state(node)?;
    let (_, w) = problem.report_from(&state)?;
    let slope = -dot(&state.grad, &w);
    let a = opts.armijo;
    let mut sigma = sigma0;
    for _ in 0..=a.max_backtracks {
        let trial: Vec<f64> = node.iter().zip(&w).map(|(x, g)| x - sigma * g).collect();
        if let Ok(level) = problem.level(&trial) {
            if level <= state.level + a.sufficient_decrease * sigma * slope {
                return Ok((trial, sigma));
            }
        }
        sigma *= a.backtrack;
    }
    Ok((node.to_vec(), sigma))
}

/// Redistributes interior nodes uniformly in `E` arc length; endpoints stay fixed.
fn reparametrize(problem: &Problem, path: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = path.len();
    let seg: Vec<f64> = exec::map_range(n - 1, |i| {
        let d: Vec<f64> = path[i + 1].iter().zip(&path[i]).map(|(a, b)| a - b).collect();
        problem.e_sq(&d).sqrt()
    });
    let mut cum = vec![0.0; n];
    for i in 0..n - 1 {
        cum[i + 1] = cum[i] + seg[i];
    }
    let total = cum[n - 1];
    let mut out = Vec::with_capacity(n);
    out.push(path[0].clone());
    let mut i = 0;
    for k in 1..n - 1 {
        let target = total * k as f64 / (n - 1) as f64;
        while i < n - 2 && cum[i + 1] < target {
            i += 1;
        }
        let len = seg[i];
        let a = if len > 0.0 { ((target - cum[i]) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(
            path[i]
                .iter()
                .zip(&path[i + 1])
                .map(|(x, y)| x + a * (y - x))
                .collect(),
        );
    }
    out.push(path[n - 1].clone());
    out
}

/// Golden-section maximisation of `I` on the two segments adjacent to node `k`.
fn refine_max(problem: &Problem, path: &[Vec<f64>], k: usize) -> Result<(Vec<f64>, f64)> {
    let point = |a: f64| -> Vec<f64> {
        let (other, s) = if a < 0.0 { (&path[k - 1], -a) } else { (&path[k + 1], a) };
        path[k].iter().zip(other).map(|(x, y)| x + s * (y - x)).collect()
    };
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = problem.level(&point(x1))?;
    let mut f2 = problem.level(&point(x2))?;
    for _ in 0..40 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = problem.level(&point(x2))?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = problem.level(&point(x1))?;
        }
    }
    let centre = problem.level(&path[k])?;
    let (a, f) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    if f >= centre {
        Ok((point(a), f))
    } else {
        Ok((path[k].clone(), centre))
    }
}

/// Deforms the straight path from `0` to `e` by pushing its maximum down
/// the Sobolev gradient, then polishes the maximum into a critical point.
pub fn mountain_pass(
    problem: &Problem,
    geometry: &GeometryReport,
    opts: &MountainPassOptions,
) -> Result<SolveOutcome> {
    let grid = problem.grid();
    grid.check(&geometry.e)?;
    let n = opts.n_path.max(8);
    let e = geometry.e.values();
    let mut path: Vec<Vec<f64>> = (0..n)
        .map(|k| e.iter().map(|x| x * k as f64 / (n - 1) as f64).collect())
        .collect();
    let levels_of = |path: &[Vec<f64>]| problem.levels(path).into_iter().collect::<Result<Vec<_>>>();
    let mut levels = levels_of(&path)?;
    let mut sigmas = vec![opts.polish.armijo.initial_step; n];
    let mut trace = Vec::new();
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    let mut sweeps = 0;
    let collapse = |k: usize| {
        KgmError::PathCollapse(format!(
            "path maximum at endpoint node {k}; the mountain-pass geometry does not hold"
        ))
    };
    loop {
        let k = argmax(&levels);
        if k == 0 || k == n - 1 {
            return Err(collapse(k));
        }
        let state = problem.state(&path[k])?;
        let (report, _) = problem.report_from(&state)?;
        trace.push(TracePoint::new(sweeps, &report));
        if report.cerami <= opts.switch_tol * (1.0 + report.level.abs()) || sweeps >= opts.max_sweeps {
            break;
        }
        if levels[k] < best - 1e-13 * best.abs() {
            best = levels[k];
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= opts.stagnation {
                break;
            }
        }
        let nodes: Vec<usize> = (k - 1..=k + 1).filter(|j| *j > 0 && *j < n - 1).collect();
        let pushed = exec::map(&nodes, |&j| {
            let s0 = (2.0 * sigmas[j]).min(opts.polish.armijo.initial_step);
            push_node(problem, &path[j], s0, &opts.polish)
        });
        for (&j, r) in nodes.iter().zip(pushed) {
            let (node, sigma) = r?;
            path[j] = node;
            sigmas[j] = sigma;
        }
        path = reparametrize(problem, &path);
        levels = levels_of(&path)?;
        sweeps += 1;
    }
    let k = argmax(&levels);
    let (top, estimate) = refine_max(problem, &path, k)?;
    let before = problem.e_sq(&top);
    let polished = descend(problem, &Field::new(grid, top)?, &opts.polish)?;
    let offset = sweeps;
    trace.extend(polished.trace.iter().skip(1).map(|p| TracePoint {
        iter: p.iter + offset,
        ..*p
    }));
    let nontrivial = polished.report.norm_e_sq > 1e-6 * before;
    let state = problem.state(polished.u.values())?;
    finish(
        problem,
        &state,
        Method::MountainPass,
        trace,
        polished.converged && nontrivial,
        sweeps + polished.iterations,
        estimate,
    )
}
