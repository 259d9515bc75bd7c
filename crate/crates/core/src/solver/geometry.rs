use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::recenter;
use crate::domain::{DomainGrid, Field, GridKind};
use crate::energy::Problem;
use crate::error::{KgmError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryOptions {
    pub t_max: f64,
    /// Random directions sampled on the sphere `‖u‖_E = r`.
    pub sphere_samples: usize,
    pub rng_seed: u64,
    /// Points of the scan of `t ↦ I(tv)` on `[0, t_e]`.
    pub scan_points: usize,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        Self {
            t_max: 1e6,
            sphere_samples: 32,
            rng_seed: 0,
            scan_points: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryReport {
    pub r: f64,
    /// Sampled infimum of `I` on the sphere of radius `r`.
    pub b: f64,
    pub e: Field,
    pub i_e: f64,
    pub norm_e: f64,
    pub t_e: f64,
    /// Maximiser of the scanned `t ↦ I(tv)` and its level.
    pub t_peak: f64,
    pub peak_level: f64,
}

/// Mountain-pass geometry along the ray through `seed`: a point `e = t_e v`
/// with `I(e) < 0`, a radius `r` and the sampled sphere infimum `b > 0`.
pub fn find_e(problem: &Problem, seed: &Field, opts: &GeometryOptions) -> Result<GeometryReport> {
    let grid = problem.grid();
    grid.check(seed)?;
    if seed.is_zero() || seed.min() < 0.0 {
        return Err(KgmError::InvalidParameter {
            name: "seed",
            reason: "must be nonnegative and nonzero".into(),
        });
    }
    let level = |t: f64| problem.level(seed.scaled(t).values());
    let mut t = 1.0;
    if level(t)? < 0.0 {
        while t > 1e-12 && level(t)? < 0.0 {
            t *= 0.5;
        }
    }
    while level(t)? >= 0.0 {
        t *= 2.0;
        if t > opts.t_max {
            return Err(KgmError::Geometry(format!(
                "I(tv) stayed nonnegative up to t_max = {}",
                opts.t_max
            )));
        }
    }
    let t_e = t;
    let e = seed.scaled(t_e);
    let i_e = level(t_e)?;
    let norm_v = problem.e_sq(seed.values()).sqrt();

    let m = opts.scan_points.max(8);
    let ts: Vec<f64> = (1..m).map(|j| t_e * j as f64 / m as f64).collect();
    let fields: Vec<Vec<f64>> = ts.iter().map(|t| seed.scaled(*t).into_values()).collect();
    let levels = problem.levels(&fields).into_iter().collect::<Result<Vec<_>>>()?;
    let (j, peak_level) = levels
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bj, bv), (j, v)| if v > bv { (j, v) } else { (bj, bv) });
    let t_peak = ts[j];
    let r = 0.5 * t_peak * norm_v;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    let dirs: Vec<Vec<f64>> = (0..opts.sphere_samples.max(32))
        .map(|_| {
            let d = random_direction(grid, &mut rng);
            let s = r / problem.e_sq(d.values()).sqrt();
            d.scaled(s).into_values()
        })
        .collect();
    let sphere = problem.levels(&dirs).into_iter().collect::<Result<Vec<_>>>()?;
    let b = sphere.iter().copied().fold(f64::INFINITY, f64::min);
    if !(b > 0.0) {
        return Err(KgmError::Geometry(format!(
            "sampled sphere infimum b = {b} is not positive at r = {r}"
        )));
    }
    Ok(GeometryReport {
        r,
        b,
        norm_e: t_e * norm_v,
        e,
        i_e,
        t_e,
        t_peak,
        peak_level,
    })
}

fn periodic_gap(a: f64, b: f64, l: f64) -> f64 {
    let d = (a - b).rem_euclid(l);
    d.min(l - d)
}

fn bump(grid: &DomainGrid, center: [f64; 3], width: f64, amp: f64) -> Field {
    let l = grid.extent();
    Field::from_fn(grid, |x| match grid.kind() {
        GridKind::RadialBall => amp * (-((x[0] - center[0]) / width).powi(2)).exp(),
        GridKind::PeriodicCube => {
            let d2: f64 = (0..3).map(|k| periodic_gap(x[k], center[k], l).powi(2)).sum();
            amp * (-d2 / (width * width)).exp()
        }
    })
}

/// A smooth nonnegative random field: a sum of one to three Gaussian bumps.
pub fn random_direction(grid: &DomainGrid, rng: &mut ChaCha8Rng) -> Field {
    let l = grid.extent();
    let count = rng.gen_range(1..=3);
    let mut out = Field::zeros(grid);
    for _ in 0..count {
        let amp = rng.gen_range(0.2..1.0);
        let (center, width) = match grid.kind() {
            GridKind::RadialBall => ([rng.gen_range(0.0..0.1 * l), 0.0, 0.0], rng.gen_range(0.5..2.5)),
            GridKind::PeriodicCube => (
                [rng.gen_range(0.0..l), rng.gen_range(0.0..l), rng.gen_range(0.0..l)],
                rng.gen_range(0.1..0.25) * l,
            ),
        };
        out = out.axpy(1.0, &bump(grid, center, width, amp));
    }
    grid_clean(grid, out)
}

fn grid_clean(grid: &DomainGrid, mut f: Field) -> Field {
    grid.zero_constrained(f.values_mut());
    f
}

/// Radial Gaussians `exp(−r²/σ²)` with widths spread over `[1, 1 + count/2]`
/// and jittered by the seed.
pub fn gaussian_seeds(grid: &DomainGrid, count: usize, rng_seed: u64) -> Vec<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..count)
        .map(|k| {
            let width = (1.0 + 0.5 * k as f64) * rng.gen_range(0.9..1.1);
            grid_clean(grid, bump(grid, [0.0; 3], width, 1.0))
        })
        .collect()
}

/// Seeds for the Nehari minimisation: radial Gaussians, or randomly placed
/// cube bumps recentred with the given lattice period (in nodes).
pub fn seeds_for(grid: &DomainGrid, count: usize, rng_seed: u64, period: usize) -> Result<Vec<Field>> {
    match grid.kind() {
        GridKind::RadialBall => Ok(gaussian_seeds(grid, count, rng_seed)),
        GridKind::PeriodicCube => {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            let l = grid.extent();
            (0..count)
                .map(|_| {
                    let c = [rng.gen_range(0.0..l), rng.gen_range(0.0..l), rng.gen_range(0.0..l)];
                    let w = rng.gen_range(0.12..0.2) * l;
                    Ok(recenter(grid, &bump(grid, c, w, 1.0), period)?.0)
                })
                .collect()
        }
    }
}
