mod common;

use common::rel;
use kgm_core::nonlinearity::lambda0_for;
use kgm_core::solver::{gaussian_seeds, nehari_minimize, NehariOptions};
use kgm_core::supercritical::{linf_norm, run_truncation_pipeline, LadderSpec};
use kgm_core::{build_grid, Field, GridKind, Nonlinearity, Problem};

#[test]
fn ladder_accepts_and_matches_the_untruncated_problem() {
    let grid = build_grid(GridKind::RadialBall, 15.0, 500).unwrap();
    let v = Field::constant(&grid, 1.0);
    let f0 = Nonlinearity::power(5.0).unwrap();
    let g = Nonlinearity::power(7.0).unwrap();
    let problem = Problem::new(&grid, &v, 0.5, &f0).unwrap();
    let seeds = gaussian_seeds(&grid, 2, 5);
    let opts = NehariOptions::default();
    let ladder = LadderSpec::default();

    let unperturbed = run_truncation_pipeline(&problem, &f0, &g, 0.0, &ladder, &seeds, &opts).unwrap();
    assert_eq!(unperturbed.accepted, Some(0));
    let c0 = nehari_minimize(&problem, &seeds, &opts).unwrap();
    let rung0 = unperturbed.accepted_rung().unwrap();
    assert!(rel(rung0.outcome.as_ref().unwrap().level, c0.level) < 1e-10);

    let m_work = ladder
        .sequence()
        .unwrap()
        .into_iter()
        .find(|m| *m > linf_norm(&c0.u))
        .unwrap();
    let lambda = 1e-3f64.min(lambda0_for(&g, m_work).unwrap());
    let run = run_truncation_pipeline(&problem, &f0, &g, lambda, &ladder, &seeds, &opts).unwrap();
    let rung = run.accepted_rung().expect("some rung accepted");
    let out = rung.outcome.as_ref().unwrap();
    assert!(rung.linf.unwrap() < rung.m);
    assert!(out.certificates.all_pass());
    assert_eq!(rung.true_residual, rung.surrogate_residual);
    assert!(out.level <= c0.level);
    assert!(out.report.norm_e_sq <= 4.0 * c0.level * (1.0 + 1e-6));
    // Rungs below the working one are either inadmissible or rejected.
    for r in &run.rungs[..rung.index] {
        assert!(!r.accepted);
    }
}

#[test]
fn inadmissible_rungs_are_skipped() {
    let grid = build_grid(GridKind::RadialBall, 10.0, 100).unwrap();
    let v = Field::constant(&grid, 1.0);
    let f0 = Nonlinearity::power(5.0).unwrap();
    let g = Nonlinearity::power(7.0).unwrap();
    let problem = Problem::new(&grid, &v, 0.5, &f0).unwrap();
    let ladder = LadderSpec {
        rungs: 2,
        ..LadderSpec::default()
    };
    let seeds = gaussian_seeds(&grid, 1, 0);
    let run = run_truncation_pipeline(&problem, &f0, &g, 1.0, &ladder, &seeds, &NehariOptions::default()).unwrap();
    assert!(run.accepted.is_none());
    assert!(run.rungs.iter().all(|r| !r.admissible && r.outcome.is_none()));
    assert!(run_truncation_pipeline(&problem, &f0, &g, -1.0, &ladder, &seeds, &NehariOptions::default()).is_err());
}
