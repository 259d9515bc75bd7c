//! Computational domains, fields, the discrete Laplacian and quadrature.
//!
//! Two geometries are supported:
//!
//! * a radial ball `[0, R]` with nodes `r_i = i h`, `h = R / (n - 1)`, a
//!   symmetry condition at the origin and a homogeneous Dirichlet node at
//!   `r = R`;
//! * a periodic cube of side `L` with `n` nodes per axis, `h = L / n`.
//!
//! Both are discretised in finite-volume form: the stiffness matrix `K`
//! realises `∫|∇u|²` as `uᵀKu`, the quadrature weights `W` are positive
//! control volumes, and the Laplacian is `Δ = -W⁻¹K`. Symmetry of `Δ` in the
//! weighted inner product and the M-matrix sign pattern of `-Δ` follow from
//! this construction.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{KgmError, Result};
use crate::exec::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    RadialBall,
    PeriodicCube,
}

impl GridKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GridKind::RadialBall => "radial-ball",
            GridKind::PeriodicCube => "periodic-cube",
        }
    }
}

impl std::str::FromStr for GridKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "radial-ball" | "radial" => Ok(GridKind::RadialBall),
            "periodic-cube" | "cube" => Ok(GridKind::PeriodicCube),
            other => Err(format!(
                "unknown grid kind `{other}` (expected radial-ball or periodic-cube)"
            )),
        }
    }
}

/// The parameters a grid was built from; fields carry it to detect mismatches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridShape {
    pub kind: GridKind,
    pub extent: f64,
    pub n_points: usize,
}

impl GridShape {
    pub fn node_count(&self) -> usize {
        match self.kind {
            GridKind::RadialBall => self.n_points,
            GridKind::PeriodicCube => self.n_points.pow(3),
        }
    }
}

/// Stencil of the negative Laplacian in stiffness form.
#[derive(Debug, Clone, PartialEq)]
pub enum Stencil {
    /// Three-point radial stencil; `edges[i]` couples nodes `i` and `i + 1`
    /// with conductance `4π r_{i+1/2}² / h`.
    Radial { edges: Vec<f64> },
    /// Seven-point periodic stencil with uniform conductance `h`.
    Periodic7 { n: usize, conductance: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainGrid {
    shape: GridShape,
    spacing: f64,
    weights: Vec<f64>,
    energy_weights: Vec<f64>,
    stencil: Stencil,
}

/// Builds a grid, rejecting non-positive extents and fewer than 8 nodes per axis.
pub fn build_grid(kind: GridKind, extent: f64, n_points: usize) -> Result<DomainGrid> {
    DomainGrid::new(kind, extent, n_points)
}

impl DomainGrid {
    pub fn new(kind: GridKind, extent: f64, n_points: usize) -> Result<Self> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(KgmError::InvalidGrid(format!(
                "extent must be positive and finite, got {extent}"
            )));
        }
        if n_points < 8 {
            return Err(KgmError::InvalidGrid(format!(
                "n_points must be at least 8, got {n_points}"
            )));
        }
        let shape = GridShape {
            kind,
            extent,
            n_points,
        };
        match kind {
            GridKind::RadialBall => Ok(Self::radial(shape)),
            GridKind::PeriodicCube => Ok(Self::cube(shape)),
        }
    }

    fn radial(shape: GridShape) -> Self {
        let n = shape.n_points;
        let radius = shape.extent;
        let h = radius / (n - 1) as f64;
        let ball = |r: f64| 4.0 / 3.0 * PI * r.powi(3);

        // Control volumes [r_i - h/2, r_i + h/2] clipped to [0, R]; they
        // telescope to the exact ball volume.
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let r = i as f64 * h;
            let lo = (r - 0.5 * h).max(0.0);
            let hi = (r + 0.5 * h).min(radius);
            weights.push(ball(hi) - ball(lo));
        }
        let edges = (0..n - 1)
            .map(|i| {
                let mid = (i as f64 + 0.5) * h;
                4.0 * PI * mid * mid / h
            })
            .collect();
        let mut energy_weights = weights.clone();
        energy_weights[n - 1] = 0.0;
        Self {
            shape,
            spacing: h,
            weights,
            energy_weights,
            stencil: Stencil::Radial { edges },
        }
    }

    fn cube(shape: GridShape) -> Self {
        let n = shape.n_points;
        let h = shape.extent / n as f64;
        let weights = vec![h * h * h; n * n * n];
        Self {
            shape,
            spacing: h,
            energy_weights: weights.clone(),
            weights,
            stencil: Stencil::Periodic7 { n, conductance: h },
        }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn kind(&self) -> GridKind {
        self.shape.kind
    }

    pub fn extent(&self) -> f64 {
        self.shape.extent
    }

    pub fn n_points(&self) -> usize {
        self.shape.n_points
    }

    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Quadrature weights for [`integrate`]; include the Dirichlet node's half cell.
    pub fn quad_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weights used by the variational functionals: zero on constrained nodes.
    pub fn energy_weights(&self) -> &[f64] {
        &self.energy_weights
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    /// Whether node `i` is an unknown (only the radial boundary node is not).
    pub fn is_free(&self, i: usize) -> bool {
        match self.shape.kind {
            GridKind::RadialBall => i + 1 < self.shape.n_points,
            GridKind::PeriodicCube => true,
        }
    }

    /// Zeroes the constrained (Dirichlet) entries of a nodal vector.
    pub fn zero_constrained(&self, values: &mut [f64]) {
        if self.shape.kind == GridKind::RadialBall {
            if let Some(last) = values.last_mut() {
                *last = 0.0;
            }
        }
    }

    /// Radius of node `i` (radial grids) or its distance from the origin corner (cube).
    pub fn radius(&self, i: usize) -> f64 {
        let [x, y, z] = self.coords(i);
        (x * x + y * y + z * z).sqrt()
    }

    /// Cartesian coordinates of node `i`; radial nodes lie on the x axis.
    pub fn coords(&self, i: usize) -> [f64; 3] {
        let h = self.spacing;
        match self.shape.kind {
            GridKind::RadialBall => [i as f64 * h, 0.0, 0.0],
            GridKind::PeriodicCube => {
                let [a, b, c] = self.cube_index(i);
                [a as f64 * h, b as f64 * h, c as f64 * h]
            }
        }
    }

    /// Axis indices `(i, j, k)` of a cube node (row-major, `k` fastest).
    pub fn cube_index(&self, node: usize) -> [usize; 3] {
        let n = self.shape.n_points;
        [node / (n * n), (node / n) % n, node % n]
    }

    pub fn cube_node(&self, idx: [usize; 3]) -> usize {
        let n = self.shape.n_points;
        (idx[0] % n * n + idx[1] % n) * n + idx[2] % n
    }

    /// `y = K x`, the stiffness (negative Laplacian times weights) of `x`.
    pub fn apply_stiffness(&self, x: &[f64], y: &mut [f64]) {
        self.apply_stiffness_with(exec::default_execution(), x, y)
    }

    pub fn apply_stiffness_with(&self, exec: Execution, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.node_count());
        debug_assert_eq!(y.len(), self.node_count());
        match &self.stencil {
            Stencil::Radial { edges } => {
                let n = x.len();
                let free = |j: usize| if j + 1 < n { x[j] } else { 0.0 };
                for i in 0..n - 1 {
                    let mut acc = 0.0;
                    if i > 0 {
                        acc += edges[i - 1] * (x[i] - x[i - 1]);
                    }
                    acc += edges[i] * (x[i] - free(i + 1));
                    y[i] = acc;
                }
                y[n - 1] = 0.0;
            }
            Stencil::Periodic7 { n, conductance } => {
                let n = *n;
                let c = *conductance;
                let plane = n * n;
                exec::fill_chunks(exec, y, plane, |start, out| {
                    let a = start / plane;
                    let am = (a + n - 1) % n;
                    let ap = (a + 1) % n;
                    for (off, yi) in out.iter_mut().enumerate() {
                        let b = off / n;
                        let k = off % n;
                        let bm = (b + n - 1) % n;
                        let bp = (b + 1) % n;
                        let km = (k + n - 1) % n;
                        let kp = (k + 1) % n;
                        let at = |i: usize, j: usize, l: usize| x[(i * n + j) * n + l];
                        let centre = at(a, b, k);
                        let neighbours = at(am, b, k)
                            + at(ap, b, k)
                            + at(a, bm, k)
                            + at(a, bp, k)
                            + at(a, b, km)
                            + at(a, b, kp);
                        *yi = c * (6.0 * centre - neighbours);
                    }
                });
            }
        }
    }

    /// Diagonal of `K` (zero on constrained nodes).
    pub fn stiffness_diagonal(&self) -> Vec<f64> {
        match &self.stencil {
            Stencil::Radial { edges } => {
                let n = self.node_count();
                (0..n)
                    .map(|i| {
                        if i + 1 == n {
                            0.0
                        } else if i == 0 {
                            edges[0]
                        } else {
                            edges[i - 1] + edges[i]
                        }
                    })
                    .collect()
            }
            Stencil::Periodic7 { conductance, .. } => vec![6.0 * conductance; self.node_count()],
        }
    }

    /// Upper off-diagonal of the radial `K` restricted to free nodes
    /// (`off[i]` couples `i` and `i + 1`); `None` on the cube.
    pub fn stiffness_offdiagonal(&self) -> Option<Vec<f64>> {
        match &self.stencil {
            Stencil::Radial { edges } => {
                let n = self.node_count();
                Some(
                    (0..n - 1)
                        .map(|i| if i + 2 < n { -edges[i] } else { 0.0 })
                        .collect(),
                )
            }
            Stencil::Periodic7 { .. } => None,
        }
    }

    /// Row `i` of `-Δ = W⁻¹K` as `(column, value)` pairs over free columns.
    pub fn neg_laplacian_row(&self, i: usize) -> Vec<(usize, f64)> {
        if !self.is_free(i) {
            return Vec::new();
        }
        let w = self.weights[i];
        match &self.stencil {
            Stencil::Radial { edges } => {
                let n = self.node_count();
                let mut row = Vec::with_capacity(3);
                let mut diag = edges[i];
                if i > 0 {
                    diag += edges[i - 1];
                    row.push((i - 1, -edges[i - 1] / w));
                }
                row.push((i, diag / w));
                if i + 2 < n {
                    row.push((i + 1, -edges[i] / w));
                }
                row
            }
            Stencil::Periodic7 { n, conductance } => {
                let [a, b, c] = self.cube_index(i);
                let n = *n;
                let off = -conductance / w;
                let mut row = vec![(i, 6.0 * conductance / w)];
                for (da, db, dc) in [
                    (n - 1, 0, 0),
                    (1, 0, 0),
                    (0, n - 1, 0),
                    (0, 1, 0),
                    (0, 0, n - 1),
                    (0, 0, 1),
                ] {
                    row.push((self.cube_node([a + da, b + db, c + dc]), off));
                }
                row
            }
        }
    }

    /// Discrete Laplacian `Δu = -W⁻¹Ku`, zero on constrained nodes.
    pub fn laplacian(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let mut ku = vec![0.0; self.node_count()];
        self.apply_stiffness(&u.values, &mut ku);
        let values = ku
            .iter()
            .zip(&self.weights)
            .enumerate()
            .map(|(i, (k, w))| if self.is_free(i) { -k / w } else { 0.0 })
            .collect();
        Ok(Field {
            shape: self.shape,
            values,
        })
    }

    /// Weighted inner product `Σ w_i u_i v_i` over all nodes.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(u.iter().zip(v))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    /// `uᵀKu`, the discrete `∫|∇u|²`.
    pub fn dirichlet_form(&self, u: &[f64]) -> f64 {
        let mut ku = vec![0.0; u.len()];
        self.apply_stiffness(u, &mut ku);
        dot(u, &ku)
    }

    pub fn check(&self, field: &Field) -> Result<()> {
        if field.shape != self.shape || field.values.len() != self.node_count() {
            return Err(KgmError::GridMismatch {
                expected: self.node_count(),
                found: field.values.len(),
            });
        }
        Ok(())
    }

    /// Translates a cube field by whole nodes: `out(x) = u(x + shift·h)`.
    /// On radial grids the field is returned unchanged.
    pub fn shift(&self, u: &Field, shift: [usize; 3]) -> Result<Field> {
        self.check(u)?;
        if self.shape.kind == GridKind::RadialBall {
            return Ok(u.clone());
        }
        let n = self.shape.n_points;
        let mut values = vec![0.0; u.values.len()];
        for (node, v) in values.iter_mut().enumerate() {
            let [a, b, c] = self.cube_index(node);
            *v = u.values[self.cube_node([a + shift[0] % n, b + shift[1] % n, c + shift[2] % n])];
        }
        Ok(Field {
            shape: self.shape,
            values,
        })
    }
}

/// A real function sampled at the nodes of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    shape: GridShape,
    values: Vec<f64>,
}

impl Field {
    /// Wraps `values`, checking the node count and that every value is finite.
    pub fn new(grid: &DomainGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(KgmError::GridMismatch {
                expected: grid.node_count(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(KgmError::NonFinite(i));
        }
        Ok(Self {
            shape: grid.shape,
            values,
        })
    }

    pub fn zeros(grid: &DomainGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &DomainGrid, value: f64) -> Self {
        Self {
            shape: grid.shape,
            values: vec![value; grid.node_count()],
        }
    }

    /// Samples `f` at node coordinates.
    pub fn from_fn(grid: &DomainGrid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.node_count()).map(|i| f(grid.coords(i))).collect();
        Self {
            shape: grid.shape,
            values,
        }
    }

    pub(crate) fn from_parts(shape: GridShape, values: Vec<f64>) -> Self {
        Self { shape, values }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, t: f64) -> Field {
        Field {
            shape: self.shape,
            values: self.values.iter().map(|v| t * v).collect(),
        }
    }

    /// `self + t * other`.
    pub fn axpy(&self, t: f64, other: &Field) -> Field {
        Field {
            shape: self.shape,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + t * b)
                .collect(),
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

/// `Σ_i w_i f_i`.
pub fn integrate(grid: &DomainGrid, field: &Field) -> Result<f64> {
    grid.check(field)?;
    Ok(grid
        .quad_weights()
        .iter()
        .zip(field.values())
        .map(|(w, f)| w * f)
        .sum())
}

/// A cube potential with `cells` periods per axis, tabulated once on the unit
/// cell so that whole-period node shifts leave it bit-for-bit unchanged.
///
/// `cell(x)` receives coordinates in `[0, 1)³` relative to the cell.
pub fn periodic_potential(
    grid: &DomainGrid,
    cells: usize,
    cell: impl Fn([f64; 3]) -> f64,
) -> Result<Field> {
    let n = grid.n_points();
    if grid.kind() != GridKind::PeriodicCube || cells == 0 || !n.is_multiple_of(cells) {
        return Err(KgmError::InvalidParameter {
            name: "cells",
            reason: format!("need a cube grid whose {n} nodes per axis split into {cells} cells"),
        });
    }
    let p = n / cells;
    let at = |i: usize| (i % p) as f64 / p as f64;
    let table: Vec<f64> = (0..p * p * p)
        .map(|t| cell([at(t / (p * p)), at(t / p), at(t)]))
        .collect();
    let values = (0..grid.node_count())
        .map(|node| {
            let [a, b, c] = grid.cube_index(node);
            table[((a % p) * p + b % p) * p + c % p]
        })
        .collect();
    Field::new(grid, values)
}

/// Smallest value of a potential, with the node where it occurs.
pub fn potential_floor(v: &Field) -> (f64, usize) {
    v.values()
        .iter()
        .copied()
        .enumerate()
        .fold((f64::INFINITY, 0), |(m, at), (i, x)| {
            if x < m {
                (x, i)
            } else {
                (m, at)
            }
        })
}

/// Rejects potentials that are not bounded below by a positive constant.
pub fn check_potential(grid: &DomainGrid, v: &Field) -> Result<f64> {
    grid.check(v)?;
    let (min, node) = potential_floor(v);
    if !(min > 0.0) {
        return Err(KgmError::NonPositivePotential { min, node });
    }
    Ok(min)
}

/// `‖u‖²_{D^{1,2}} = ∫|∇u|²`.
pub fn norm_d12_sq(grid: &DomainGrid, u: &Field) -> Result<f64> {
    grid.check(u)?;
    Ok(grid.dirichlet_form(u.values()))
}

/// `‖u‖_p = (∫|u|^p)^{1/p}` over the free nodes.
pub fn norm_lp(grid: &DomainGrid, u: &Field, p: f64) -> Result<f64> {
    grid.check(u)?;
    let s: f64 = grid
        .energy_weights()
        .iter()
        .zip(u.values())
        .map(|(w, x)| w * x.abs().powf(p))
        .sum();
    Ok(s.powf(1.0 / p))
}

/// `‖u‖²_E = ∫|∇u|² + ∫V u²`.
pub fn norm_e_sq(grid: &DomainGrid, v: &Field, u: &Field) -> Result<f64> {
    grid.check(u)?;
    check_potential(grid, v)?;
    Ok(e_form(grid, v.values(), u.values()))
}

/// `xᵀ(K + WV)x` without validation.
pub(crate) fn e_form(grid: &DomainGrid, v: &[f64], x: &[f64]) -> f64 {
    let mass: f64 = grid
        .energy_weights()
        .iter()
        .zip(v.iter().zip(x))
        .map(|(w, (p, a))| w * p * a * a)
        .sum();
    grid.dirichlet_form(x) + mass
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
