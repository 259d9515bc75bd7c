use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kgm_core::exec::{set_default_execution, Execution};
use kgm_core::solver::{gaussian_seeds, nehari_minimize, NehariOptions};
use kgm_core::{build_grid, Field, GridKind, Nonlinearity, Problem};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn cube_stencil(c: &mut Criterion) {
    let mut group = c.benchmark_group("cube_stiffness");
    for n in [16, 32, 48] {
        let grid = build_grid(GridKind::PeriodicCube, 8.0, n).unwrap();
        let x: Vec<f64> = (0..grid.node_count()).map(|i| ((i * 7919) % 113) as f64 / 113.0).collect();
        let mut y = vec![0.0; x.len()];
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| grid.apply_stiffness_with(exec, black_box(&x), &mut y))
            });
        }
    }
    group.finish();
}

fn batch_levels(c: &mut Criterion) {
    let grid = build_grid(GridKind::PeriodicCube, 8.0, 16).unwrap();
    let v = Field::constant(&grid, 1.0);
    let nl = Nonlinearity::power(5.0).unwrap();
    let problem = Problem::new(&grid, &v, 0.5, &nl).unwrap();
    let fields: Vec<Vec<f64>> = (1..=32)
        .map(|k| {
            Field::from_fn(&grid, |[x, y, z]| {
                let d2 = (x - 4.0).powi(2) + (y - 4.0).powi(2) + (z - 4.0).powi(2);
                (k as f64 / 16.0) * (-d2 / 2.0).exp()
            })
            .into_values()
        })
        .collect();
    let mut group = c.benchmark_group("path_levels");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            set_default_execution(exec);
            b.iter(|| problem.levels(black_box(&fields)))
        });
    }
    set_default_execution(Execution::Parallel);
    group.finish();
}

fn nehari_seeds(c: &mut Criterion) {
    let grid = build_grid(GridKind::RadialBall, 20.0, 2000).unwrap();
    let v = Field::constant(&grid, 1.0);
    let nl = Nonlinearity::power(5.0).unwrap();
    let problem = Problem::new(&grid, &v, 0.5, &nl).unwrap();
    let seeds = gaussian_seeds(&grid, 4, 0);
    let mut group = c.benchmark_group("nehari_seeds");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            set_default_execution(exec);
            b.iter(|| nehari_minimize(&problem, black_box(&seeds), &NehariOptions::default()).unwrap())
        });
    }
    set_default_execution(Execution::Parallel);
    group.finish();
}

criterion_group!(benches, cube_stencil, batch_levels, nehari_seeds);
criterion_main!(benches);
