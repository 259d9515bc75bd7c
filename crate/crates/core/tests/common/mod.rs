#![allow(dead_code)]

use kgm_core::{DomainGrid, Field, GridKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Sum of Gaussian bumps `(amplitude, width, centre fraction)`; radial
/// bumps sit near the origin, cube bumps use periodic distance.
pub fn bumps(grid: &DomainGrid, spec: &[(f64, f64, f64)]) -> Field {
    let l = grid.extent();
    Field::from_fn(grid, |[x, y, z]| {
        spec.iter()
            .map(|&(amp, width, pos)| match grid.kind() {
                GridKind::RadialBall => amp * (-((x - pos * 0.2 * l) / width).powi(2)).exp(),
                GridKind::PeriodicCube => {
                    let per = |d: f64| {
                        let d = d.rem_euclid(l);
                        d.min(l - d)
                    };
                    let d2 = per(x - pos * l).powi(2) + per(y - 0.5 * l).powi(2) + per(z - 0.3 * l).powi(2);
                    amp * (-d2 / (width * width)).exp()
                }
            })
            .sum()
    })
}

pub fn random_spec(rng: &mut ChaCha8Rng, amp: (f64, f64)) -> Vec<(f64, f64, f64)> {
    let k = rng.gen_range(1..4);
    (0..k)
        .map(|_| {
            (
                rng.gen_range(amp.0..amp.1),
                rng.gen_range(0.6..2.0),
                rng.gen_range(0.0..1.0),
            )
        })
        .collect()
}

pub fn zero_constrained(grid: &DomainGrid, mut u: Field) -> Field {
    grid.zero_constrained(u.values_mut());
    u
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
