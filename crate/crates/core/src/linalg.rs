//! Krylov solvers for the grid systems `(K + W diag(c)) x = b`.

use crate::domain::{dot, DomainGrid, GridKind};
use crate::error::{KgmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreconditionerKind {
    Jacobi,
    /// Exact `LDLᵀ` factorisation of the radial tridiagonal matrix.
    Tridiagonal,
}

impl PreconditionerKind {
    pub fn default_for(kind: GridKind) -> Self {
        match kind {
            GridKind::RadialBall => PreconditionerKind::Tridiagonal,
            GridKind::PeriodicCube => PreconditionerKind::Jacobi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// Final residual relative to the right-hand side, in the caller's norm.
    pub relative_residual: f64,
    pub converged: bool,
}

/// `A = K + W diag(c)` on free nodes, identity on constrained ones.
pub struct ShiftedStiffness<'a> {
    grid: &'a DomainGrid,
    mass: Vec<f64>,
}

impl<'a> ShiftedStiffness<'a> {
    /// `coef` is the nodal coefficient `c`; it is multiplied by the energy weights.
    pub fn new(grid: &'a DomainGrid, coef: impl Iterator<Item = f64>) -> Self {
        let mass = grid
            .energy_weights()
            .iter()
            .zip(coef)
            .map(|(w, c)| w * c)
            .collect();
        Self { grid, mass }
    }

    pub fn grid(&self) -> &DomainGrid {
        self.grid
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.grid.apply_stiffness(x, y);
        for (i, (yi, (m, xi))) in y.iter_mut().zip(self.mass.iter().zip(x)).enumerate() {
            if self.grid.is_free(i) {
                *yi += m * xi;
            } else {
                *yi = *xi;
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.grid
            .stiffness_diagonal()
            .iter()
            .zip(&self.mass)
            .enumerate()
            .map(|(i, (k, m))| if self.grid.is_free(i) { k + m } else { 1.0 })
            .collect()
    }

    pub fn preconditioner(&self, kind: PreconditionerKind) -> Preconditioner {
        let diag = self.diagonal();
        match (kind, self.grid.stiffness_offdiagonal()) {
            (PreconditionerKind::Tridiagonal, Some(off)) => {
                Preconditioner::Tridiagonal(TridiagonalFactor::new(&diag, &off))
            }
            _ => Preconditioner::Jacobi(diag.iter().map(|d| 1.0 / d).collect()),
        }
    }

    /// Solves `A x = b` by preconditioned conjugate gradients, starting from `x`.
    ///
    /// The stopping test uses the strong-form residual `W⁻¹(b - Ax)` on free
    /// nodes, relative to `W⁻¹b`.
    pub fn solve(
        &self,
        b: &[f64],
        x: &mut [f64],
        kind: PreconditionerKind,
        tol: f64,
        max_iter: usize,
    ) -> CgReport {
        let pre = self.preconditioner(kind);
        let grid = self.grid;
        let weights = grid.quad_weights();
        let strong = |r: &[f64]| -> f64 {
            r.iter()
                .zip(weights)
                .enumerate()
                .filter(|(i, _)| grid.is_free(*i))
                .map(|(_, (ri, w))| (ri / w).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        pcg(
            |v, out| self.apply(v, out),
            |r, z| pre.apply(r, z),
            strong,
            b,
            x,
            tol,
            max_iter,
        )
    }
}

pub enum Preconditioner {
    Jacobi(Vec<f64>),
    Tridiagonal(TridiagonalFactor),
}

impl Preconditioner {
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Jacobi(inv) => {
                for ((zi, ri), d) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * d;
                }
            }
            Preconditioner::Tridiagonal(f) => f.solve(r, z),
        }
    }
}

/// `LDLᵀ` factors of a symmetric tridiagonal matrix.
pub struct TridiagonalFactor {
    pivots: Vec<f64>,
    lower: Vec<f64>,
}

impl TridiagonalFactor {
    /// `diag` has length `n`, `off` length `n - 1`.
    pub fn new(diag: &[f64], off: &[f64]) -> Self {
        let n = diag.len();
        let mut pivots = Vec::with_capacity(n);
        let mut lower = Vec::with_capacity(n.saturating_sub(1));
        pivots.push(diag[0]);
        for i in 0..n - 1 {
            let l = off[i] / pivots[i];
            lower.push(l);
            pivots.push(diag[i + 1] - l * off[i]);
        }
        Self { pivots, lower }
    }

    pub fn solve(&self, r: &[f64], x: &mut [f64]) {
        let n = self.pivots.len();
        x[0] = r[0];
        for i in 1..n {
            x[i] = r[i] - self.lower[i - 1] * x[i - 1];
        }
        for (xi, d) in x.iter_mut().zip(&self.pivots) {
            *xi /= d;
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.lower[i] * x[i + 1];
        }
    }
}

/// Preconditioned conjugate gradients for an SPD operator.
pub fn pcg<A, M, N>(
    apply: A,
    precondition: M,
    norm: N,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> CgReport
where
    A: Fn(&[f64], &mut [f64]),
    M: Fn(&[f64], &mut [f64]),
    N: Fn(&[f64]) -> f64,
{
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return CgReport {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, a)| bi - a).collect();
    let mut rel = norm(&r) / b_norm;
    if rel <= tol {
        return CgReport {
            iterations: 0,
            relative_residual: rel,
            converged: true,
        };
    }
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return CgReport {
                iterations: it,
                relative_residual: rel,
                converged: false,
            };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = norm(&r) / b_norm;
        if rel <= tol {
            return CgReport {
                iterations: it,
                relative_residual: rel,
                converged: true,
            };
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgReport {
        iterations: max_iter,
        relative_residual: rel,
        converged: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinresReport {
    pub iterations: usize,
    /// Preconditioned residual estimate relative to the initial one.
    pub relative_residual: f64,
}

/// Preconditioned MINRES for a symmetric (possibly indefinite) operator
/// with an SPD preconditioner; solves `A x = b` from `x = 0`.
pub fn minres<A, M>(
    apply: A,
    precondition: M,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, MinresReport)>
where
    A: Fn(&[f64], &mut [f64]) -> Result<()>,
    M: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y = vec![0.0; n];
    precondition(&r1, &mut y)?;
    let beta1_sq = dot(&r1, &y);
    if beta1_sq < 0.0 {
        return Err(KgmError::InvalidParameter {
            name: "preconditioner",
            reason: "not positive definite".into(),
        });
    }
    let beta1 = beta1_sq.sqrt();
    if beta1 == 0.0 {
        return Ok((
            x,
            MinresReport {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut r2 = r1.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = s * y[i];
        }
        apply(&v, &mut y)?;
        if it >= 2 {
            let f = beta / oldb;
            for i in 0..n {
                y[i] -= f * r1[i];
            }
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        for i in 0..n {
            y[i] -= f * r2[i];
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        precondition(&r2, &mut y)?;
        oldb = beta;
        beta = dot(&r2, &y).max(0.0).sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        for i in 0..n {
            let w1 = w2[i];
            w2[i] = w[i];
            w[i] = (v[i] - oldeps * w1 - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }
        if phibar <= tol * beta1 || beta == 0.0 {
            break;
        }
    }
    Ok((
        x,
        MinresReport {
            iterations: it,
            relative_residual: phibar / beta1,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_grid;

    #[test]
    fn tridiagonal_factor_inverts() {
        let diag = [4.0, 5.0, 6.0, 3.0];
        let off = [-1.0, -2.0, -0.5];
        let f = TridiagonalFactor::new(&diag, &off);
        let b = [1.0, -2.0, 0.5, 3.0];
        let mut x = [0.0; 4];
        f.solve(&b, &mut x);
        let ax = [
            diag[0] * x[0] + off[0] * x[1],
            off[0] * x[0] + diag[1] * x[1] + off[1] * x[2],
            off[1] * x[1] + diag[2] * x[2] + off[2] * x[3],
            off[2] * x[2] + diag[3] * x[3],
        ];
        for (a, bb) in ax.iter().zip(&b) {
            assert!((a - bb).abs() < 1e-14);
        }
    }

    #[test]
    fn both_preconditioners_agree() {
        let grid = build_grid(GridKind::RadialBall, 8.0, 120).unwrap();
        let sys = ShiftedStiffness::new(&grid, (0..120).map(|i| 1.0 + (i as f64 * 0.1).sin().powi(2)));
        let mut b: Vec<f64> = (0..120).map(|i| (i as f64 * 0.05).cos()).collect();
        grid.zero_constrained(&mut b);
        let mut x1 = vec![0.0; 120];
        let mut x2 = vec![0.0; 120];
        let r1 = sys.solve(&b, &mut x1, PreconditionerKind::Jacobi, 1e-12, 10_000);
        let r2 = sys.solve(&b, &mut x2, PreconditionerKind::Tridiagonal, 1e-12, 10_000);
        assert!(r1.converged && r2.converged);
        assert!(r2.iterations <= 2);
        let scale = x2.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (a, b) in x1.iter().zip(&x2) {
            assert!((a - b).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn minres_solves_indefinite_diagonal() {
        let d = [3.0, -2.0, 1.5, -0.5, 4.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let (x, rep) = minres(
            |v, out| {
                for i in 0..5 {
                    out[i] = d[i] * v[i];
                }
                Ok(())
            },
            |r, z| {
                z.copy_from_slice(r);
                Ok(())
            },
            &b,
            1e-14,
            50,
        )
        .unwrap();
        assert!(rep.iterations <= 6);
        for i in 0..5 {
            assert!((x[i] - b[i] / d[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn minres_with_spd_preconditioner() {
        // Tridiagonal symmetric indefinite matrix.
        let n = 40;
        let apply = |v: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let mut s = (if i % 3 == 0 { -1.0 } else { 2.5 }) * v[i];
                if i > 0 {
                    s -= v[i - 1];
                }
                if i + 1 < n {
                    s -= v[i + 1];
                }
                out[i] = s;
            }
            Ok(())
        };
        let b: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let (x, _) = minres(
            apply,
            |r, z| {
                for i in 0..n {
                    z[i] = r[i] / 3.0;
                }
                Ok(())
            },
            &b,
            1e-13,
            500,
        )
        .unwrap();
        let mut ax = vec![0.0; n];
        apply(&x, &mut ax).unwrap();
        for i in 0..n {
            assert!((ax[i] - b[i]).abs() < 1e-9);
        }
    }
}
