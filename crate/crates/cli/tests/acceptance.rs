//! Acceptance suite: runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each. Exits nonzero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use kgm_core::domain::periodic_potential;
use kgm_core::energy::{level_bound_check, nehari_value};
use kgm_core::nonlinearity::{
    check_hypotheses, check_nonexistence, compose_f_lambda_n, lambda0_for, CheckOptions, Verdict,
};
use kgm_core::reduction::solve_phi;
use kgm_core::solver::{
    find_e, gaussian_seeds, mountain_pass, nehari_minimize, nehari_minimize_each, seeds_for, GeometryOptions,
    MountainPassOptions, NehariOptions,
};
use kgm_core::supercritical::{linf_norm, run_truncation_pipeline, LadderSpec};
use kgm_core::{build_grid, DomainGrid, Field, GridKind, Nonlinearity, Problem, SolveOutcome};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict_ {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict_ {
    Verdict_ {
        ok,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Random nonnegative Gaussian bumps with amplitudes in `amp`.
fn random_bumps(grid: &DomainGrid, rng: &mut ChaCha8Rng, amp: (f64, f64)) -> Field {
    let l = grid.extent();
    let k = rng.gen_range(1..=3);
    let bumps: Vec<([f64; 3], f64, f64)> = (0..k)
        .map(|_| {
            let a = rng.gen_range(amp.0..=amp.1);
            match grid.kind() {
                GridKind::RadialBall => ([rng.gen_range(0.0..0.2 * l), 0.0, 0.0], rng.gen_range(0.5..3.0), a),
                GridKind::PeriodicCube => (
                    [rng.gen_range(0.0..l), rng.gen_range(0.0..l), rng.gen_range(0.0..l)],
                    rng.gen_range(0.08..0.25) * l,
                    a,
                ),
            }
        })
        .collect();
    let per = |d: f64| {
        let d = d.rem_euclid(l);
        d.min(l - d)
    };
    let mut u = Field::from_fn(grid, |[x, y, z]| {
        bumps
            .iter()
            .map(|&(c, w, a)| {
                let d2 = match grid.kind() {
                    GridKind::RadialBall => (x - c[0]).powi(2),
                    GridKind::PeriodicCube => per(x - c[0]).powi(2) + per(y - c[1]).powi(2) + per(z - c[2]).powi(2),
                };
                a * (-d2 / (w * w)).exp()
            })
            .sum()
    });
    grid.zero_constrained(u.values_mut());
    u
}

/// Random signed direction: difference of two bump fields.
fn random_direction(grid: &DomainGrid, rng: &mut ChaCha8Rng) -> Field {
    let a = random_bumps(grid, rng, (0.2, 1.0));
    let b = random_bumps(grid, rng, (0.2, 1.0));
    a.axpy(-1.0, &b)
}

fn radial_2000() -> DomainGrid {
    build_grid(GridKind::RadialBall, 20.0, 2000).unwrap()
}

fn cube_16() -> DomainGrid {
    build_grid(GridKind::PeriodicCube, 8.0, 16).unwrap()
}

fn periodic_v(grid: &DomainGrid) -> Field {
    periodic_potential(grid, 2, |[x, y, z]| {
        let t = 2.0 * std::f64::consts::PI;
        1.0 + 0.3 * (t * x).cos() * (t * y).cos() * (t * z).cos()
    })
    .unwrap()
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed < Duration::from_secs(limit_s)
}

/// Criteria 1 and 2 share one corpus.
fn reduction_corpus() -> (Verdict_, Verdict_) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_bound = 0.0f64;
    let mut worst_identity = 0.0f64;
    let mut bounds_ok = true;
    let mut identity_ok = true;
    let mut cases = 0;
    for grid in [build_grid(GridKind::RadialBall, 20.0, 500).unwrap(), cube_16()] {
        for k in 0..200 {
            let u = random_bumps(&grid, &mut rng, (0.0, 10.0));
            let omega = [0.5, 1.0, 2.0][k % 3];
            let sol = solve_phi(&grid, &u, omega, 1e-12).unwrap();
            for p in sol.phi.values() {
                let excess = (p - 1e-10).max(-omega - 1e-10 - p).max(0.0);
                worst_bound = worst_bound.max(excess);
                bounds_ok &= excess == 0.0;
            }
            let l2sq = grid.inner(u.values(), u.values());
            let r = sol.identity_residual / (1.0 + l2sq);
            worst_identity = worst_identity.max(r);
            identity_ok &= r <= 1e-7;
            cases += 1;
        }
    }
    let elapsed = start.elapsed();
    let timed = within(elapsed, 30);
    (
        verdict(
            bounds_ok && timed,
            format!("{cases} fields, worst bound excess {worst_bound:.1e}, {:.1}s", elapsed.as_secs_f64()),
        ),
        verdict(
            identity_ok && timed,
            format!("worst |identity|/(1+|u|^2) = {worst_identity:.2e} (tol 1e-7)"),
        ),
    )
}

fn dense_phi(grid: &DomainGrid, u: &Field, omega: f64) -> Vec<f64> {
    let n = grid.node_count();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        if grid.is_free(i) {
            for (j, v) in grid.neg_laplacian_row(i) {
                a[(i, j)] += v;
            }
        }
    }
    // Rows of −Δ are scaled by the quadrature weight to match the weak form.
    let w = grid.quad_weights();
    let mut b = DVector::<f64>::zeros(n);
    for i in 0..n {
        if grid.is_free(i) {
            let u2 = u.values()[i].powi(2);
            a.row_mut(i).scale_mut(w[i]);
            a[(i, i)] += w[i] * u2;
            b[i] = -omega * w[i] * u2;
        } else {
            a.row_mut(i).fill(0.0);
            a[(i, i)] = 1.0;
        }
    }
    let x = a.lu().solve(&b).expect("nonsingular");
    x.iter().copied().collect()
}

fn criterion_3() -> Verdict_ {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let grid = if k % 5 == 4 {
            build_grid(GridKind::PeriodicCube, rng.gen_range(4.0..10.0), 8).unwrap()
        } else {
            build_grid(GridKind::RadialBall, rng.gen_range(8.0..20.0), rng.gen_range(100..=500)).unwrap()
        };
        let u = random_bumps(&grid, &mut rng, (0.0, 10.0));
        let omega = rng.gen_range(0.2..2.5);
        let cg = solve_phi(&grid, &u, omega, 1e-13).unwrap();
        let direct = dense_phi(&grid, &u, omega);
        let err = cg
            .phi
            .values()
            .iter()
            .zip(&direct)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-9 && within(elapsed, 60),
        format!("50 cases, worst max-norm gap {worst:.2e}, {:.1}s", elapsed.as_secs_f64()),
    )
}

/// Least-squares slope of `log d` against `log h`.
fn fitted_order(hs: &[f64], ds: &[f64]) -> f64 {
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = ds.iter().map(|d| d.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn criterion_4() -> Verdict_ {
    let start = Instant::now();
    let grid = build_grid(GridKind::RadialBall, 15.0, 500).unwrap();
    let v = Field::constant(&grid, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let hs = [0.2, 0.1, 0.05, 0.025];
    let mut worst = f64::INFINITY;
    for nl in [Nonlinearity::power(5.0).unwrap(), Nonlinearity::LogPower] {
        let problem = Problem::new(&grid, &v, 0.5, &nl).unwrap();
        for _ in 0..20 {
            let u = random_bumps(&grid, &mut rng, (0.5, 2.0));
            let dir = random_direction(&grid, &mut rng);
            let exact = problem.derivative(&u, &dir).unwrap();
            let ds: Vec<f64> = hs
                .iter()
                .map(|&h| {
                    let plus = problem.level(u.axpy(h, &dir).values()).unwrap();
                    let minus = problem.level(u.axpy(-h, &dir).values()).unwrap();
                    ((plus - minus) / (2.0 * h) - exact).abs()
                })
                .collect();
            worst = worst.min(fitted_order(&hs, &ds));
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst >= 1.9 && within(elapsed, 120),
        format!("40 pairs, smallest fitted order {worst:.3}, {:.1}s", elapsed.as_secs_f64()),
    )
}

fn criterion_5() -> Verdict_ {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let nl = Nonlinearity::power(5.0).unwrap();
    let mut worst = 0.0f64;
    let mut h_ok = true;
    for (k, grid) in [radial_2000(), cube_16()].into_iter().enumerate() {
        let v = if k == 0 { Field::constant(&grid, 1.0) } else { periodic_v(&grid) };
        for j in 0..50 {
            let omega = [0.3, 0.7, 1.5][j % 3];
            let problem = Problem::new(&grid, &v, omega, &nl).unwrap();
            let u = random_bumps(&grid, &mut rng, (0.0, 4.0));
            let report = problem.report(&u).unwrap();
            let lv = level_bound_check(&report, report.level);
            worst = worst.max(lv.identity_defect);
            h_ok &= report.h_integral >= 0.0;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-8 && h_ok && within(elapsed, 60),
        format!(
            "100 fields, worst relative defect {worst:.2e}, H >= 0: {h_ok}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

struct GroundState {
    geometry_ok: bool,
    geometry_detail: String,
    mpa: Option<SolveOutcome>,
    nehari: Vec<SolveOutcome>,
    elapsed: Duration,
    geometry_elapsed: Duration,
}

fn ground_state() -> GroundState {
    let start = Instant::now();
    let grid = radial_2000();
    let v = Field::constant(&grid, 1.0);
    let nl = Nonlinearity::power(5.0).unwrap();
    let problem = Problem::new(&grid, &v, 0.5, &nl).unwrap();
    let seeds = gaussian_seeds(&grid, 3, 7);
    let geometry = find_e(&problem, &seeds[0], &GeometryOptions::default());
    let geometry_elapsed = start.elapsed();
    let (geometry_ok, geometry_detail) = match &geometry {
        Ok(g) => (
            g.b > 0.0 && g.i_e < 0.0,
            format!("r = {:.3}, b = {:.4}, I(e) = {:.3}", g.r, g.b, g.i_e),
        ),
        Err(e) => (false, format!("find_e failed: {e}")),
    };
    let mpa = geometry
        .ok()
        .and_then(|g| mountain_pass(&problem, &g, &MountainPassOptions::default()).ok());
    let nehari = nehari_minimize_each(&problem, &seeds, &NehariOptions::default())
        .into_iter()
        .filter_map(Result::ok)
        .collect();
    GroundState {
        geometry_ok,
        geometry_detail,
        mpa,
        nehari,
        elapsed: start.elapsed(),
        geometry_elapsed,
    }
}

fn criterion_7(gs: &GroundState) -> Verdict_ {
    let Some(mpa) = &gs.mpa else {
        return verdict(false, "mountain pass failed");
    };
    if gs.nehari.len() != 3 || !gs.nehari.iter().all(|o| o.converged) || !mpa.converged {
        return verdict(false, "a run did not converge");
    }
    let levels: Vec<f64> = gs.nehari.iter().map(|o| o.level).collect();
    let lo = levels.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = levels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / lo;
    let cross = rel(mpa.level, lo);
    verdict(
        cross <= 1e-2 && spread <= 5e-3 && within(gs.elapsed, 600),
        format!(
            "c_mpa = {:.8}, c_nehari = {lo:.8}, gap {cross:.1e}, seed spread {spread:.1e}, {:.1}s",
            mpa.level,
            gs.elapsed.as_secs_f64()
        ),
    )
}

fn criterion_8(gs: &GroundState) -> Verdict_ {
    let runs: Vec<&SolveOutcome> = gs.mpa.iter().chain(gs.nehari.iter()).collect();
    if runs.len() != 4 {
        return verdict(false, "missing runs");
    }
    let mut failed = Vec::new();
    for o in &runs {
        let c = &o.certificates;
        if !(o.converged && c.level.norm_bound_ok && c.residual_ok && c.positivity_ok) {
            failed.push(format!("{}: {:?}", o.method.as_str(), c.failed()));
        }
    }
    let best = runs.iter().min_by(|a, b| a.level.total_cmp(&b.level)).unwrap();
    let c = &best.certificates;
    verdict(
        failed.is_empty(),
        format!(
            "|u|^2 = {:.6} <= 4c = {:.6}, weak residual {:.1e}, min/max u = {:.1e}/{:.3}{}",
            best.report.norm_e_sq,
            4.0 * best.level,
            c.weak_residual,
            c.min_u,
            c.max_u,
            if failed.is_empty() { String::new() } else { format!(", failed {failed:?}") }
        ),
    )
}

fn criterion_9() -> Verdict_ {
    let start = Instant::now();
    let grid = cube_16();
    let v = periodic_v(&grid);
    let nl = Nonlinearity::power(5.0).unwrap();
    let omega = 0.5;
    let problem = Problem::new(&grid, &v, omega, &nl).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let shifts = [[8, 0, 0], [0, 8, 0], [0, 0, 8], [8, 8, 8]];
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let u = random_bumps(&grid, &mut rng, (0.5, 3.0));
        let r0 = problem.report(&u).unwrap();
        let n0 = nehari_value(&grid, &v, omega, &nl, &u).unwrap();
        for s in shifts {
            let su = grid.shift(&u, s).unwrap();
            let r = problem.report(&su).unwrap();
            let n = nehari_value(&grid, &v, omega, &nl, &su).unwrap();
            worst = worst.max(rel(r.level, r0.level)).max(rel(n, n0));
        }
    }
    let seeds = seeds_for(&grid, 1, 9, 8).unwrap();
    let opts = NehariOptions::default();
    let base = nehari_minimize(&problem, &seeds, &opts).unwrap();
    let mut level_gap = 0.0f64;
    let mut converged = base.converged;
    for s in shifts {
        let moved = nehari_minimize(&problem, &[grid.shift(&seeds[0], s).unwrap()], &opts).unwrap();
        converged &= moved.converged;
        level_gap = level_gap.max(rel(moved.level, base.level));
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-10 && level_gap <= 1e-10 && converged && within(elapsed, 300),
        format!(
            "I/nehari gap {worst:.1e}, converged level {:.6} gap {level_gap:.1e}, {:.1}s",
            base.level,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_10() -> Verdict_ {
    let start = Instant::now();
    let opts = CheckOptions::default();
    let mut problems = Vec::new();
    let p5 = check_hypotheses(&Nonlinearity::power(5.0).unwrap(), &opts);
    for (name, c) in [
        ("f1", &p5.f1),
        ("f2", &p5.f2),
        ("f3", &p5.f3),
        ("f4", &p5.f4),
        ("f5", &p5.f5),
        ("f5'", &p5.f5prime),
    ] {
        if c.verdict != Verdict::Pass {
            problems.push(format!("p=5 {name} {:?}", c.verdict));
        }
    }
    let log = check_hypotheses(&Nonlinearity::LogPower, &opts);
    let every_theta_fails = !log.ar.thetas.is_empty()
        && log.ar.thetas.iter().all(|t| t.s0.is_none() && t.witness.is_some());
    if log.ar.verdict != Verdict::Fail || !every_theta_fails {
        problems.push("log-power AR".into());
    }
    for (name, c) in [("f4", &log.f4), ("f5", &log.f5), ("f5'", &log.f5prime)] {
        if c.verdict != Verdict::Pass {
            problems.push(format!("log-power {name}"));
        }
    }
    let p3 = check_hypotheses(&Nonlinearity::power(3.0).unwrap(), &opts);
    let negative_h = p3.f5prime.verdict == Verdict::Fail && p3.f5prime.witness.as_ref().is_some_and(|w| w.defect < 0.0);
    if !negative_h {
        problems.push("p=3 f5'".into());
    }
    let critical = check_nonexistence(&Nonlinearity::power(6.0).unwrap(), 2.0, 1.0);
    if !critical.holds {
        problems.push("critical nonexistence".into());
    }
    let elapsed = start.elapsed();
    verdict(
        problems.is_empty() && within(elapsed, 30),
        format!(
            "{} AR thetas fail for log-power, p=3 H witness {:?}, {:.1}s{}",
            log.ar.thetas.len(),
            p3.f5prime.witness.as_ref().map(|w| (w.s, w.defect)),
            elapsed.as_secs_f64(),
            if problems.is_empty() { String::new() } else { format!(", failed {problems:?}") }
        ),
    )
}

fn criterion_11() -> Verdict_ {
    let start = Instant::now();
    let grid = radial_2000();
    let v = Field::constant(&grid, 1.0);
    let f0 = Nonlinearity::power(5.0).unwrap();
    let g = Nonlinearity::power(7.0).unwrap();
    let problem = Problem::new(&grid, &v, 0.5, &f0).unwrap();
    let seeds = gaussian_seeds(&grid, 3, 11);
    let opts = NehariOptions::default();
    let ladder = LadderSpec {
        m0: 4.0,
        ratio: 2.0,
        rungs: 8,
        q: 5.0,
    };
    let c0 = nehari_minimize(&problem, &seeds, &opts).unwrap();
    let Some(m_work) = ladder.sequence().unwrap().into_iter().find(|m| *m > linf_norm(&c0.u)) else {
        return verdict(false, "no rung above the unperturbed sup norm");
    };
    let lambda = 1e-3f64.min(lambda0_for(&g, m_work).unwrap());
    let run = run_truncation_pipeline(&problem, &f0, &g, lambda, &ladder, &seeds, &opts).unwrap();
    let Some(rung) = run.accepted_rung() else {
        return verdict(false, format!("no rung accepted (lambda = {lambda:.3e})"));
    };
    let out = rung.outcome.as_ref().unwrap();
    let linf = rung.linf.unwrap();
    let (sr, tr) = (rung.surrogate_residual.unwrap(), rung.true_residual.unwrap());
    let residual_match = (sr - tr).abs() <= 1e-12 * (1.0 + sr);
    let norm_ok = out.report.norm_e_sq <= 4.0 * c0.level * (1.0 + 1e-6);
    let nl = compose_f_lambda_n(&f0, &g, lambda, rung.m, 5.0).unwrap();
    let growth_ok = (0..10_000).all(|k| {
        let s = 1e-6 * rung.m * (1e8f64).powf(k as f64 / 9_999.0);
        nl.f(s).unwrap().abs() <= 2.0 * s.powi(4)
    });
    let elapsed = start.elapsed();
    verdict(
        linf < rung.m && residual_match && norm_ok && growth_ok && within(elapsed, 600),
        format!(
            "lambda = {lambda:.3e}, rung {} (M = {}), linf = {linf:.4}, residuals {sr:.2e}/{tr:.2e}, |u|^2 = {:.5} <= 4c0 = {:.5}, growth {growth_ok}, {:.1}s",
            rung.index,
            rung.m,
            out.report.norm_e_sq,
            4.0 * c0.level,
            elapsed.as_secs_f64()
        ),
    )
}

fn strip_timestamp(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with("\"timestamp\""))
        .collect::<Vec<_>>()
        .join("\n")
}

fn criterion_12() -> Verdict_ {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "[domain]\nkind = radial-ball\nextent = 20\nn_points = 2000\n\n[model]\nomega = 0.5\nV0 = 1\n\n\
         [nonlinearity]\nfamily = power\np = 5\n\n[solver]\nmethod = mountain-pass\nseeds = 3\n",
    )
    .unwrap();
    let run = |dir: &Path| {
        Command::new(env!("CARGO_BIN_EXE_kgm"))
            .args(["solve", "--quiet", "--seed", "12", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir)
            .status()
            .map(|s| s.success())
            .unwrap_or(false)
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    if !(run(&a) && run(&b)) {
        return verdict(false, "a run failed");
    }
    let read = |d: &Path, f: &str| std::fs::read_to_string(d.join(f)).unwrap_or_default();
    let report_same = strip_timestamp(&read(&a, "report.json")) == strip_timestamp(&read(&b, "report.json"));
    let files_same = ["trace.csv", "profile.csv"].iter().all(|f| read(&a, f) == read(&b, f));
    let stamped = read(&a, "report.json").contains("\"timestamp\"");
    verdict(
        report_same && files_same && stamped,
        format!("report identical modulo timestamp: {report_same}, trace/profile identical: {files_same}"),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Verdict_)> = Vec::new();
    let (c1, c2) = reduction_corpus();
    results.push((1, "reduction maximum principle", c1));
    results.push((2, "reduction energy identity", c2));
    results.push((3, "reduction dense oracle", criterion_3()));
    results.push((4, "gradient consistency", criterion_4()));
    results.push((5, "algebraic level identity", criterion_5()));
    let gs = ground_state();
    let geometry_ok = gs.geometry_ok && within(gs.geometry_elapsed, 60);
    let detail = format!("{}, {:.1}s", gs.geometry_detail, gs.geometry_elapsed.as_secs_f64());
    results.push((6, "mountain-pass geometry", verdict(geometry_ok, detail)));
    results.push((7, "cross-method level agreement", criterion_7(&gs)));
    results.push((8, "ground-state certificates", criterion_8(&gs)));
    results.push((9, "translation equivariance", criterion_9()));
    results.push((10, "hypothesis checker regressions", criterion_10()));
    results.push((11, "supercritical pipeline", criterion_11()));
    results.push((12, "determinism", criterion_12()));
    let mut all = true;
    for (n, name, v) in &results {
        all &= v.ok;
        println!(
            "{} criterion {n:>2} {name}: {}",
            if v.ok { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
