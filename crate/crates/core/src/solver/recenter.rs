use crate::domain::{DomainGrid, Field, GridKind};
use crate::error::{KgmError, Result};

/// Translates a cube field by the lattice shift (a multiple of `period`
/// nodes per axis) that maximises `Σ u²` over the central half of each axis.
///
/// Ties go to the lexicographically smallest shift. Radial fields are
/// returned unchanged with the zero shift.
pub fn recenter(grid: &DomainGrid, u: &Field, period: usize) -> Result<(Field, [usize; 3])> {
    grid.check(u)?;
    if grid.kind() == GridKind::RadialBall {
        return Ok((u.clone(), [0; 3]));
    }
    let n = grid.n_points();
    if period == 0 || !n.is_multiple_of(period) {
        return Err(KgmError::InvalidParameter {
            name: "period",
            reason: format!("must divide the {n} nodes per axis, got {period}"),
        });
    }
    let central = n / 4..n - n / 4;
    let values = u.values();
    let mut best = ([0; 3], f64::NEG_INFINITY);
    for a in (0..n).step_by(period) {
        for b in (0..n).step_by(period) {
            for c in (0..n).step_by(period) {
                let mut mass = 0.0;
                for i in central.clone() {
                    for j in central.clone() {
                        for k in central.clone() {
                            let x = values[grid.cube_node([i + a, j + b, k + c])];
                            mass += x * x;
                        }
                    }
                }
                if mass > best.1 {
                    best = ([a, b, c], mass);
                }
            }
        }
    }
    Ok((grid.shift(u, best.0)?, best.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_grid;

    fn bump_at(grid: &DomainGrid, c: [f64; 3]) -> Field {
        Field::from_fn(grid, |x| {
            let d2: f64 = (0..3).map(|k| (x[k] - c[k]).powi(2)).sum();
            (-d2).exp()
        })
    }

    #[test]
    fn centred_field_is_left_alone() {
        let grid = build_grid(GridKind::PeriodicCube, 8.0, 16).unwrap();
        let u = bump_at(&grid, [4.0, 4.0, 4.0]);
        let (v, s) = recenter(&grid, &u, 1).unwrap();
        assert_eq!(s, [0; 3]);
        assert_eq!(v, u);
    }

    #[test]
    fn shifted_copies_recentre_identically() {
        let grid = build_grid(GridKind::PeriodicCube, 8.0, 16).unwrap();
        let u = bump_at(&grid, [1.0, 6.5, 3.0]);
        let y = grid.shift(&u, [5, 9, 14]).unwrap();
        let (a, _) = recenter(&grid, &u, 1).unwrap();
        let (b, _) = recenter(&grid, &y, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn radial_is_identity_and_bad_period_rejected() {
        let radial = build_grid(GridKind::RadialBall, 5.0, 50).unwrap();
        let u = Field::constant(&radial, 1.0);
        assert_eq!(recenter(&radial, &u, 1).unwrap().1, [0; 3]);
        let cube = build_grid(GridKind::PeriodicCube, 8.0, 16).unwrap();
        assert!(recenter(&cube, &Field::zeros(&cube), 5).is_err());
    }
}
