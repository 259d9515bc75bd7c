//! Subcommand pipelines: build the problem from a config, run the selected
//! solver and write the report, trace and profile files.

use std::path::{Path, PathBuf};

use kgm_core::domain::periodic_potential;
use kgm_core::nonlinearity::{check_hypotheses, compose_f_lambda_n, lambda0_for, CheckOptions, SampledTable};
use kgm_core::reduction::{solve_phi, BOUND_SLACK};
use kgm_core::solver::{
    descend, find_e, mountain_pass, nehari_minimize, nehari_minimize_each, seeds_for, GeometryOptions,
    GeometryReport, Method, MountainPassOptions, NehariOptions, SolverOptions,
};
use kgm_core::supercritical::{linf_norm, run_truncation_pipeline, LadderSpec, RungResult};
use kgm_core::{build_grid, DomainGrid, Field, KgmError, Nonlinearity, Problem, SolveOutcome};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::artifacts::{read_profile, write_jsonl, write_profile, write_report, write_trace};
use crate::config::{ExperimentConfig, LambdaSpec, NonlinearitySpec, PotentialSpec};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Core(#[from] KgmError),
    #[error("{0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("bad profile: {0}")]
    Profile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Reduce,
    Solve,
    Mpa,
    Nehari,
    Truncate,
    CheckNl,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Reduce => "reduce",
            Command::Solve => "solve",
            Command::Mpa => "mpa",
            Command::Nehari => "nehari",
            Command::Truncate => "truncate",
            Command::CheckNl => "check-nl",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Overrides `solver.seed`.
    pub seed: Option<u64>,
    /// Relative paths in the config resolve against this directory.
    pub base_dir: PathBuf,
    /// Omit the wall-clock timestamp (for byte comparisons).
    pub timestamp: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub ok: bool,
    /// Names of failing certificates.
    pub failed: Vec<String>,
    pub report_path: PathBuf,
    pub report: Map<String, Value>,
}

fn pass(ok: bool) -> Value {
    Value::from(if ok { "PASS" } else { "FAIL" })
}

struct Setup {
    grid: DomainGrid,
    potential: Field,
    nl: Nonlinearity,
    seed: u64,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn build_nonlinearity(spec: &NonlinearitySpec, base: &Path) -> Result<Nonlinearity, RunError> {
    Ok(match spec {
        NonlinearitySpec::Zero => Nonlinearity::Zero,
        NonlinearitySpec::Power { p } => Nonlinearity::power(*p)?,
        NonlinearitySpec::SumPowers { q, p, lambda } => Nonlinearity::sum_powers(*q, *p, *lambda)?,
        NonlinearitySpec::LogPower => Nonlinearity::LogPower,
        NonlinearitySpec::Table { path } => {
            let path = resolve(base, path);
            let mut r = csv::Reader::from_path(&path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
            let (mut s, mut f) = (Vec::new(), Vec::new());
            for rec in r.deserialize::<(f64, f64)>() {
                let (a, b) = rec.map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
                s.push(a);
                f.push(b);
            }
            Nonlinearity::Table(SampledTable::new(s, f)?)
        }
    })
}

fn setup(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Setup, RunError> {
    let grid = build_grid(cfg.domain.kind, cfg.domain.extent, cfg.domain.n_points)?;
    let potential = match cfg.model.potential {
        PotentialSpec::Constant { v0 } => Field::constant(&grid, v0),
        PotentialSpec::Periodic { v0, amplitude, cells } => periodic_potential(&grid, cells, |[x, y, z]| {
            let t = 2.0 * std::f64::consts::PI;
            v0 * (1.0 + amplitude * (t * x).cos() * (t * y).cos() * (t * z).cos())
        })?,
    };
    let nl = build_nonlinearity(&cfg.nonlinearity, &opts.base_dir)?;
    Ok(Setup {
        grid,
        potential,
        nl,
        seed: opts.seed.unwrap_or(cfg.solver.seed),
    })
}

fn seeds(cfg: &ExperimentConfig, s: &Setup, opts: &RunOptions) -> Result<Vec<Field>, RunError> {
    if let Some(p) = &cfg.solver.u0 {
        return Ok(vec![read_profile(&resolve(&opts.base_dir, p), &s.grid)?]);
    }
    let period = cfg.solver.period.unwrap_or(1);
    Ok(seeds_for(&s.grid, cfg.solver.seeds, s.seed, period)?)
}

fn solver_options(cfg: &ExperimentConfig) -> SolverOptions {
    SolverOptions {
        stop_tol: cfg.solver.stop_tol,
        max_iter: cfg.solver.max_iter,
        merit: cfg.solver.merit,
        ..SolverOptions::default()
    }
}

fn nehari_options(cfg: &ExperimentConfig) -> NehariOptions {
    NehariOptions {
        polish: solver_options(cfg),
        ..NehariOptions::default()
    }
}

fn header(cmd: Command, cfg: &ExperimentConfig, s: &Setup, opts: &RunOptions) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(cmd.as_str()));
    m.insert("grid_kind".into(), json!(s.grid.kind().as_str()));
    m.insert("extent".into(), json!(cfg.domain.extent));
    m.insert("n_points".into(), json!(cfg.domain.n_points));
    m.insert("omega".into(), json!(cfg.model.omega));
    m.insert("alpha".into(), json!(s.potential.min()));
    m.insert("nonlinearity".into(), json!(s.nl.name()));
    m.insert("seed".into(), json!(s.seed));
    if opts.timestamp {
        m.insert("timestamp".into(), json!(chrono::Utc::now().to_rfc3339()));
    }
    m
}

/// Adds the outcome's numbers and certificate verdicts to `m`; returns the
/// failing certificate names (including `converged`).
fn outcome_fields(m: &mut Map<String, Value>, out: &SolveOutcome) -> Vec<String> {
    let r = &out.report;
    let c = &out.certificates;
    m.insert("method".into(), json!(out.method.as_str()));
    m.insert("converged".into(), json!(out.converged));
    m.insert("iterations".into(), json!(out.iterations));
    m.insert("level".into(), json!(out.level));
    m.insert("level_estimate".into(), json!(out.level_estimate));
    m.insert("norm_E_sq".into(), json!(r.norm_e_sq));
    m.insert("nehari_value".into(), json!(r.nehari));
    m.insert("cerami".into(), json!(r.cerami));
    m.insert("coupling".into(), json!(r.coupling));
    m.insert("quartic_coupling".into(), json!(r.quartic_coupling));
    m.insert("h_integral".into(), json!(r.h_integral));
    m.insert("weak_residual".into(), json!(c.weak_residual));
    m.insert("strong_residual".into(), json!(c.strong_residual));
    m.insert("identity_defect".into(), json!(c.level.identity_defect));
    m.insert("norm_bound_margin".into(), json!(c.level.norm_bound_margin));
    m.insert("min_u".into(), json!(c.min_u));
    m.insert("max_u".into(), json!(c.max_u));
    m.insert("certificate_identity".into(), pass(c.level.identity_ok));
    m.insert("certificate_h_nonnegative".into(), pass(c.level.h_nonnegative));
    m.insert("certificate_norm_bound".into(), pass(c.level.norm_bound_ok));
    m.insert("certificate_positivity".into(), pass(c.positivity_ok));
    m.insert("certificate_weak_residual".into(), pass(c.residual_ok));
    let mut failed = c.failed();
    if !out.converged {
        failed.insert(0, "converged".into());
    }
    failed
}

/// Lowest converged level, else lowest level, else the last error.
fn best_of(each: Vec<kgm_core::Result<SolveOutcome>>) -> Result<SolveOutcome, RunError> {
    let mut best: Option<SolveOutcome> = None;
    let mut err = None;
    for r in each {
        match r {
            Ok(o) => {
                if best.as_ref().is_none_or(|b| (o.converged, -o.level) > (b.converged, -b.level)) {
                    best = Some(o);
                }
            }
            Err(e) => err = Some(e),
        }
    }
    best.ok_or_else(|| err.map(RunError::Core).unwrap_or_else(|| RunError::Config("no seeds".into())))
}

fn geometry_fields(m: &mut Map<String, Value>, g: &GeometryReport) {
    m.insert("geometry_r".into(), json!(g.r));
    m.insert("geometry_b".into(), json!(g.b));
    m.insert("geometry_I_e".into(), json!(g.i_e));
    m.insert("geometry_norm_e".into(), json!(g.norm_e));
    m.insert("geometry_t_e".into(), json!(g.t_e));
    m.insert("geometry_peak_level".into(), json!(g.peak_level));
}

struct Artifacts<'a> {
    cfg: &'a ExperimentConfig,
    dir: &'a Path,
}

impl Artifacts<'_> {
    fn outcome(&self, grid: &DomainGrid, out: &SolveOutcome) -> Result<(), RunError> {
        if self.cfg.output.trace {
            write_trace(&self.dir.join("trace.csv"), &out.trace)?;
        }
        if self.cfg.output.profile {
            write_profile(&self.dir.join("profile.csv"), grid, &out.u, &out.phi)?;
        }
        Ok(())
    }
}

fn run_mpa(problem: &Problem, cfg: &ExperimentConfig, seed_u64: u64, seed: &Field) -> Result<(GeometryReport, SolveOutcome), RunError> {
    let geo = find_e(
        problem,
        seed,
        &GeometryOptions {
            t_max: cfg.solver.t_max,
            sphere_samples: cfg.solver.sphere_samples,
            rng_seed: seed_u64,
            ..GeometryOptions::default()
        },
    )?;
    let out = mountain_pass(
        problem,
        &geo,
        &MountainPassOptions {
            n_path: cfg.solver.n_path,
            polish: solver_options(cfg),
            ..MountainPassOptions::default()
        },
    )?;
    Ok((geo, out))
}

/// Runs `cmd` and writes its artifacts under `opts.out_dir`.
pub fn run(cmd: Command, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary, RunError> {
    std::fs::create_dir_all(&opts.out_dir).map_err(|e| RunError::Io(format!("{}: {e}", opts.out_dir.display())))?;
    let s = setup(cfg, opts)?;
    let mut report = header(cmd, cfg, &s, opts);
    let art = Artifacts {
        cfg,
        dir: &opts.out_dir,
    };
    let failed = match cmd {
        Command::CheckNl => run_check(cfg, &s, &mut report)?,
        Command::Reduce => run_reduce(cfg, &s, opts, &art, &mut report)?,
        Command::Truncate => run_truncate(cfg, &s, opts, &art, &mut report)?,
        Command::Solve | Command::Mpa | Command::Nehari => {
            let method = match cmd {
                Command::Mpa => Method::MountainPass,
                Command::Nehari => Method::Nehari,
                _ => cfg.solver.method,
            };
            let problem = Problem::new(&s.grid, &s.potential, cfg.model.omega, &s.nl)?;
            let seeds = seeds(cfg, &s, opts)?;
            let out = match method {
                Method::Descent => descend(&problem, &seeds[0], &solver_options(cfg))?,
                Method::MountainPass => {
                    let (geo, out) = run_mpa(&problem, cfg, s.seed, &seeds[0])?;
                    geometry_fields(&mut report, &geo);
                    out
                }
                Method::Nehari => {
                    let each = nehari_minimize_each(&problem, &seeds, &nehari_options(cfg));
                    let levels: Vec<Value> = each
                        .iter()
                        .map(|r| r.as_ref().map(|o| json!(o.level)).unwrap_or(Value::Null))
                        .collect();
                    report.insert("seed_levels".into(), Value::Array(levels));
                    best_of(each)?
                }
            };
            art.outcome(&s.grid, &out)?;
            outcome_fields(&mut report, &out)
        }
    };
    report.insert("status".into(), pass(failed.is_empty()));
    report.insert("failed".into(), json!(failed));
    let report_path = opts.out_dir.join("report.json");
    write_report(&report_path, &report)?;
    Ok(RunSummary {
        ok: failed.is_empty(),
        failed,
        report_path,
        report,
    })
}

fn run_check(cfg: &ExperimentConfig, s: &Setup, report: &mut Map<String, Value>) -> Result<Vec<String>, RunError> {
    let (m0, ratio, rungs) = cfg
        .truncation
        .as_ref()
        .map(|t| (t.m0, t.ratio, t.rungs))
        .unwrap_or((4.0, 2.0, 8));
    let h = check_hypotheses(
        &s.nl,
        &CheckOptions {
            s_max: cfg.check.s_max,
            sample_count: cfg.check.sample_count,
            ladder_m0: m0,
            ladder_ratio: ratio,
            ladder_rungs: rungs,
            nonexistence: cfg.check.m0.map(|m| (m, cfg.model.omega)),
        },
    );
    let value = serde_json::to_value(&h).map_err(|e| RunError::Io(e.to_string()))?;
    if let Value::Object(fields) = value {
        for (k, v) in fields {
            report.insert(format!("check_{k}"), v);
        }
    }
    // Verdicts are findings, not failures of the run.
    Ok(Vec::new())
}

fn run_reduce(
    cfg: &ExperimentConfig,
    s: &Setup,
    opts: &RunOptions,
    art: &Artifacts,
    report: &mut Map<String, Value>,
) -> Result<Vec<String>, RunError> {
    let u = seeds(cfg, s, opts)?.swap_remove(0);
    let omega = cfg.model.omega;
    let sol = solve_phi(&s.grid, &u, omega, 1e-10)?;
    let l2sq = s.grid.inner(u.values(), u.values());
    let identity_ok = sol.identity_residual <= 1e-7 * (1.0 + l2sq);
    report.insert("iterations".into(), json!(sol.iterations));
    report.insert("linear_residual".into(), json!(sol.linear_residual));
    report.insert("identity_residual".into(), json!(sol.identity_residual));
    report.insert("phi_min".into(), json!(sol.phi_min));
    report.insert("phi_max".into(), json!(sol.phi_max));
    report.insert("bound_slack".into(), json!(BOUND_SLACK));
    report.insert("u_l2_sq".into(), json!(l2sq));
    report.insert("certificate_bounds".into(), pass(sol.bounds_ok));
    report.insert("certificate_identity".into(), pass(identity_ok));
    if cfg.output.profile {
        write_profile(&art.dir.join("profile.csv"), &s.grid, &u, &sol.phi)?;
    }
    let mut failed = Vec::new();
    if !sol.bounds_ok {
        failed.push("bounds".into());
    }
    if !identity_ok {
        failed.push("identity".into());
    }
    Ok(failed)
}

fn rung_row(r: &RungResult) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("index".into(), json!(r.index));
    m.insert("M".into(), json!(r.m));
    m.insert("lambda0".into(), json!(r.lambda0));
    m.insert("admissible".into(), json!(r.admissible));
    m.insert("accepted".into(), json!(r.accepted));
    m.insert("linf".into(), json!(r.linf));
    m.insert("level".into(), json!(r.outcome.as_ref().map(|o| o.level)));
    m.insert("converged".into(), json!(r.outcome.as_ref().map(|o| o.converged)));
    m.insert("surrogate_residual".into(), json!(r.surrogate_residual));
    m.insert("true_residual".into(), json!(r.true_residual));
    m
}

/// Log-spaced points on `[10⁻⁶ M, 10² M]` for the growth-bound check.
fn growth_samples(m: f64, count: usize) -> Vec<f64> {
    let (lo, hi) = (1e-6 * m, 1e2 * m);
    (0..count)
        .map(|k| lo * (hi / lo).powf(k as f64 / (count - 1) as f64))
        .collect()
}

fn run_truncate(
    cfg: &ExperimentConfig,
    s: &Setup,
    opts: &RunOptions,
    art: &Artifacts,
    report: &mut Map<String, Value>,
) -> Result<Vec<String>, RunError> {
    let t = cfg
        .truncation
        .as_ref()
        .ok_or_else(|| RunError::Config("`truncate` needs a [truncation] section".into()))?;
    let g = Nonlinearity::power(t.g_p)?;
    let f0 = &s.nl;
    let ladder = LadderSpec {
        m0: t.m0,
        ratio: t.ratio,
        rungs: t.rungs,
        q: t.q,
    };
    let problem = Problem::new(&s.grid, &s.potential, cfg.model.omega, f0)?;
    let seeds = seeds(cfg, s, opts)?;
    let nopts = nehari_options(cfg);
    let c0 = nehari_minimize(&problem, &seeds, &nopts)?;
    let c0_linf = linf_norm(&c0.u);
    report.insert("c0".into(), json!(c0.level));
    report.insert("c0_converged".into(), json!(c0.converged));
    report.insert("c0_linf".into(), json!(c0_linf));
    let lambda = match t.lambda {
        LambdaSpec::Value(l) => l,
        LambdaSpec::Auto { cap } => {
            let m_work = ladder
                .sequence()?
                .into_iter()
                .find(|m| *m > c0_linf)
                .ok_or_else(|| RunError::Config(format!("no ladder rung exceeds ||u0||_inf = {c0_linf}")))?;
            report.insert("working_M".into(), json!(m_work));
            cap.min(lambda0_for(&g, m_work)?)
        }
    };
    report.insert("lambda".into(), json!(lambda));
    report.insert("q".into(), json!(t.q));
    let run = run_truncation_pipeline(&problem, f0, &g, lambda, &ladder, &seeds, &nopts)?;
    let rows: Vec<_> = run.rungs.iter().map(rung_row).collect();
    write_jsonl(&art.dir.join("rungs.jsonl"), &rows)?;
    report.insert("M_sequence".into(), json!(run.m_sequence));
    report.insert("lambda0".into(), json!(run.lambda0));
    report.insert("accepted_rung".into(), json!(run.accepted));
    let mut failed = Vec::new();
    let Some(rung) = run.accepted_rung() else {
        failed.push("accepted_rung".into());
        return Ok(failed);
    };
    let out = rung.outcome.as_ref().expect("accepted rungs carry an outcome");
    failed.extend(outcome_fields(report, out));
    art.outcome(&s.grid, out)?;
    report.insert("M".into(), json!(rung.m));
    report.insert("linf".into(), json!(rung.linf));
    report.insert("surrogate_residual".into(), json!(rung.surrogate_residual));
    report.insert("true_residual".into(), json!(rung.true_residual));
    let (sr, tr) = (rung.surrogate_residual.unwrap_or(f64::NAN), rung.true_residual.unwrap_or(f64::NAN));
    let residual_match = (sr - tr).abs() <= 1e-12 * (1.0 + sr.abs());
    let c0_bound = out.report.norm_e_sq <= 4.0 * c0.level * (1.0 + 1e-6);
    let nl = compose_f_lambda_n(f0, &g, lambda, rung.m, t.q)?;
    let growth = growth_samples(rung.m, 10_000)
        .into_iter()
        .all(|x| nl.f(x).map(|v| v.abs() <= 2.0 * x.powf(t.q - 1.0)).unwrap_or(false));
    report.insert("certificate_residual_match".into(), pass(residual_match));
    report.insert("certificate_norm_bound_c0".into(), pass(c0_bound));
    report.insert("certificate_growth_bound".into(), pass(growth));
    if !residual_match {
        failed.push("residual_match".into());
    }
    if !c0_bound {
        failed.push("norm_bound_c0".into());
    }
    if !growth {
        failed.push("growth_bound".into());
    }
    Ok(failed)
}
