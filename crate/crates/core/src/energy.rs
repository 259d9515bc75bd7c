//! The reduced functional
//!
//! ```text
//! I(u) = ½‖u‖²_E − ½∫ωφ_u u² − ∫F(u)
//! ```
//!
//! together with its derivative, the Sobolev (Riesz) gradient and the level
//! diagnostics. All integrals use the energy weights, so the discrete `I`
//! equals the two-field functional evaluated at the discrete `φ_u` and the
//! reduced derivative is exact at the discrete level.

use serde::Serialize;

use crate::domain::{check_potential, dot, DomainGrid, Field};
use crate::error::{KgmError, Result};
use crate::exec;
use crate::linalg::{PreconditionerKind, ShiftedStiffness};
use crate::nonlinearity::Nonlinearity;
use crate::reduction::{check_omega, phi_values, ReductionOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySettings {
    /// Relative tolerance of every potential solve.
    pub phi_tol: f64,
    /// Relative tolerance of the Riesz solves `(K + WV) w = g`.
    pub riesz_tol: f64,
}

impl Default for EnergySettings {
    fn default() -> Self {
        Self {
            phi_tol: 1e-12,
            riesz_tol: 1e-12,
        }
    }
}

/// A validated model: grid, potential `V ≥ α > 0`, frequency `ω > 0` and nonlinearity.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    grid: &'a DomainGrid,
    potential: &'a Field,
    omega: f64,
    nl: &'a Nonlinearity,
    alpha: f64,
    settings: EnergySettings,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    #[serde(rename = "I")]
    pub level: f64,
    pub norm_e_sq: f64,
    /// `−½∫ωφ_u u²`.
    pub coupling: f64,
    /// `∫F(u)`.
    pub potential_term: f64,
    /// `I′(u)u`.
    pub nehari: f64,
    /// `(1 + ‖u‖_E)‖∇_E I(u)‖_E`.
    pub cerami: f64,
    /// `‖∇_E I(u)‖_E`, the Riesz realisation of the dual norm of `I′(u)`.
    pub gradient_norm: f64,
    /// `∫[u f(u) − 4F(u)]`.
    pub h_integral: f64,
    /// `∫φ_u²u²`.
    pub quartic_coupling: f64,
}

/// Everything computed from one potential solve.
#[derive(Debug, Clone)]
pub(crate) struct State {
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
    pub level: f64,
    pub norm_e_sq: f64,
    pub coupling: f64,
    pub potential_term: f64,
    pub nehari: f64,
    pub h_integral: f64,
    pub quartic: f64,
    /// The covector `g` with `g·v = I′(u)v`.
    pub grad: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub fn new(
        grid: &'a DomainGrid,
        potential: &'a Field,
        omega: f64,
        nl: &'a Nonlinearity,
    ) -> Result<Self> {
        let alpha = check_potential(grid, potential)?;
        check_omega(omega)?;
        Ok(Self {
            grid,
            potential,
            omega,
            nl,
            alpha,
            settings: EnergySettings::default(),
        })
    }

    pub fn with_settings(mut self, settings: EnergySettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn grid(&self) -> &'a DomainGrid {
        self.grid
    }

    pub fn potential(&self) -> &'a Field {
        self.potential
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn nonlinearity(&self) -> &'a Nonlinearity {
        self.nl
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn settings(&self) -> EnergySettings {
        self.settings
    }

    /// The same model with another nonlinearity.
    pub fn with_nonlinearity<'b>(&self, nl: &'b Nonlinearity) -> Problem<'b>
    where
        'a: 'b,
    {
        Problem {
            grid: self.grid,
            potential: self.potential,
            omega: self.omega,
            nl,
            alpha: self.alpha,
            settings: self.settings,
        }
    }

    fn check_field(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.grid.node_count() {
            return Err(KgmError::GridMismatch {
                expected: self.grid.node_count(),
                found: u.len(),
            });
        }
        if let Some(i) = u.iter().position(|x| !x.is_finite()) {
            return Err(KgmError::NonFinite(i));
        }
        let top = u.iter().copied().fold(0.0, f64::max);
        let max = self.nl.domain_max();
        if top > max {
            return Err(KgmError::OutOfTableRange { s: top, max });
        }
        Ok(())
    }

    pub(crate) fn solve_phi(&self, u: &[f64]) -> Result<Vec<f64>> {
        let opts = ReductionOptions {
            tol: self.settings.phi_tol,
            ..Default::default()
        };
        Ok(phi_values(self.grid, u, self.omega, &opts)?.0)
    }

    /// Evaluates `I`, `I′` and the bookkeeping integrals at `u`.
    pub(crate) fn state(&self, u: &[f64]) -> Result<State> {
        self.check_field(u)?;
        let mut u = u.to_vec();
        self.grid.zero_constrained(&mut u);
        let phi = self.solve_phi(&u)?;
        let n = u.len();
        let mut ku = vec![0.0; n];
        self.grid.apply_stiffness(&u, &mut ku);
        let w = self.grid.energy_weights();
        let v = self.potential.values();
        let om = self.omega;
        let mut grad = vec![0.0; n];
        let (mut mass, mut lin, mut quad, mut big_f, mut uf, mut react) =
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            if !self.grid.is_free(i) {
                continue;
            }
            let (x, p, wi) = (u[i], phi[i], w[i]);
            let fx = self.nl.f_unchecked(x);
            let x2 = x * x;
            mass += wi * v[i] * x2;
            lin += wi * p * x2;
            quad += wi * p * p * x2;
            react += wi * (2.0 * om + p) * p * x2;
            big_f += wi * self.nl.big_f_unchecked(x);
            uf += wi * fx * x;
            grad[i] = ku[i] + wi * (v[i] * x - (2.0 * om + p) * p * x - fx);
        }
        let norm_e_sq = dot(&u, &ku) + mass;
        let coupling = -0.5 * om * lin;
        Ok(State {
            level: 0.5 * norm_e_sq + coupling - big_f,
            norm_e_sq,
            coupling,
            potential_term: big_f,
            nehari: norm_e_sq - react - uf,
            h_integral: uf - 4.0 * big_f,
            quartic: quad,
            grad,
            u,
            phi,
        })
    }

    pub fn level(&self, u: &[f64]) -> Result<f64> {
        Ok(self.state(u)?.level)
    }

    /// Levels of a batch of fields, evaluated in parallel when enabled.
    pub fn levels(&self, fields: &[Vec<f64>]) -> Vec<Result<f64>> {
        exec::map(fields, |u| self.level(u))
    }

    fn riesz_operator(&self) -> ShiftedStiffness<'a> {
        ShiftedStiffness::new(self.grid, self.potential.values().iter().copied())
    }

    /// Solves `(K + WV) w = g`; `w` represents `g` in the `E` inner product.
    pub(crate) fn riesz(&self, g: &[f64]) -> Result<Vec<f64>> {
        let mut w = vec![0.0; g.len()];
        let mut b = g.to_vec();
        self.grid.zero_constrained(&mut b);
        let kind = PreconditionerKind::default_for(self.grid.kind());
        let report = self.riesz_operator().solve(
            &b,
            &mut w,
            kind,
            self.settings.riesz_tol,
            10 * g.len(),
        );
        if !report.converged {
            return Err(KgmError::NoConvergence {
                what: "Riesz solve",
                iterations: report.iterations,
                residual: report.relative_residual,
            });
        }
        Ok(w)
    }

    /// `xᵀ(K + WV)x`.
    pub(crate) fn e_sq(&self, x: &[f64]) -> f64 {
        crate::domain::e_form(self.grid, self.potential.values(), x)
    }

    /// `H v = I″(u)v`, with the constraint derivative `ψ = φ′(u)v` solved exactly.
    ///
    /// Constrained rows act as the identity.
    pub(crate) fn hessian_apply(&self, s: &State, v: &[f64], out: &mut [f64]) -> Result<()> {
        let grid = self.grid;
        let n = v.len();
        let w = grid.energy_weights();
        let om = self.omega;
        let coupling_rhs: Vec<f64> = (0..n)
            .map(|i| {
                if grid.is_free(i) {
                    -2.0 * w[i] * (om + s.phi[i]) * s.u[i] * v[i]
                } else {
                    0.0
                }
            })
            .collect();
        let psi = if coupling_rhs.iter().all(|x| *x == 0.0) {
            vec![0.0; n]
        } else {
            let op = ShiftedStiffness::new(grid, s.u.iter().map(|x| x * x));
            let mut psi = vec![0.0; n];
            let kind = PreconditionerKind::default_for(grid.kind());
            let report = op.solve(&coupling_rhs, &mut psi, kind, self.settings.phi_tol, 10 * n);
            if !report.converged {
                return Err(KgmError::NoConvergence {
                    what: "linearised potential solve",
                    iterations: report.iterations,
                    residual: report.relative_residual,
                });
            }
            psi
        };
        grid.apply_stiffness(v, out);
        let pot = self.potential.values();
        for i in 0..n {
            if !grid.is_free(i) {
                out[i] = v[i];
                continue;
            }
            let p = s.phi[i];
            let x = s.u[i];
            out[i] += w[i]
                * ((pot[i] - (2.0 * om + p) * p - self.nl.df_unchecked(x)) * v[i]
                    - 2.0 * (om + p) * x * psi[i]);
        }
        Ok(())
    }

    pub fn report(&self, u: &Field) -> Result<EnergyReport> {
        self.grid.check(u)?;
        let s = self.state(u.values())?;
        Ok(self.report_from(&s)?.0)
    }

    /// The report and the Riesz gradient of a state.
    pub(crate) fn report_from(&self, s: &State) -> Result<(EnergyReport, Vec<f64>)> {
        let w = self.riesz(&s.grad)?;
        let gnorm = dot(&s.grad, &w).max(0.0).sqrt();
        let report = EnergyReport {
            level: s.level,
            norm_e_sq: s.norm_e_sq,
            coupling: s.coupling,
            potential_term: s.potential_term,
            nehari: s.nehari,
            cerami: (1.0 + s.norm_e_sq.sqrt()) * gnorm,
            gradient_norm: gnorm,
            h_integral: s.h_integral,
            quartic_coupling: s.quartic,
        };
        Ok((report, w))
    }

    /// The strong-form residual `−Δu + Vu − (2ω+φ)φu − f(u)`.
    pub fn gradient_strong(&self, u: &Field) -> Result<Field> {
        self.grid.check(u)?;
        let s = self.state(u.values())?;
        Ok(self.strong_from(&s))
    }

    pub(crate) fn strong_from(&self, s: &State) -> Field {
        let w = self.grid.energy_weights();
        let values = s
            .grad
            .iter()
            .zip(w)
            .map(|(g, wi)| if *wi > 0.0 { g / wi } else { 0.0 })
            .collect();
        Field::from_parts(self.grid.shape(), values)
    }

    /// Riesz representative of a strong-form residual: `(−Δ + V) w = g`.
    pub fn gradient_e(&self, strong: &Field) -> Result<Field> {
        self.grid.check(strong)?;
        let g: Vec<f64> = strong
            .values()
            .iter()
            .zip(self.grid.energy_weights())
            .map(|(r, w)| r * w)
            .collect();
        Ok(Field::from_parts(self.grid.shape(), self.riesz(&g)?))
    }

    /// `I′(u)v`.
    pub fn derivative(&self, u: &Field, v: &Field) -> Result<f64> {
        self.grid.check(u)?;
        self.grid.check(v)?;
        Ok(dot(&self.state(u.values())?.grad, v.values()))
    }
}

pub fn energy(
    grid: &DomainGrid,
    v: &Field,
    omega: f64,
    nl: &Nonlinearity,
    u: &Field,
) -> Result<EnergyReport> {
    Problem::new(grid, v, omega, nl)?.report(u)
}

pub fn gradient_strong(
    grid: &DomainGrid,
    v: &Field,
    omega: f64,
    nl: &Nonlinearity,
    u: &Field,
) -> Result<Field> {
    Problem::new(grid, v, omega, nl)?.gradient_strong(u)
}

/// Riesz representative in `E` of a strong-form residual `g`.
pub fn gradient_e(grid: &DomainGrid, v: &Field, g: &Field) -> Result<Field> {
    check_potential(grid, v)?;
    let nl = Nonlinearity::Zero;
    Problem::new(grid, v, 1.0, &nl)?.gradient_e(g)
}

pub fn nehari_value(
    grid: &DomainGrid,
    v: &Field,
    omega: f64,
    nl: &Nonlinearity,
    u: &Field,
) -> Result<f64> {
    grid.check(u)?;
    Ok(Problem::new(grid, v, omega, nl)?.state(u.values())?.nehari)
}

pub fn cerami_indicator(
    grid: &DomainGrid,
    v: &Field,
    omega: f64,
    nl: &Nonlinearity,
    u: &Field,
) -> Result<f64> {
    Ok(energy(grid, v, omega, nl, u)?.cerami)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelVerdict {
    /// `|4I − I′(u)u − ‖u‖² − ∫φ²u² − ∫H| / scale`.
    pub identity_defect: f64,
    pub identity_ok: bool,
    pub h_nonnegative: bool,
    pub norm_bound_ok: bool,
    /// `4c(1 + 10⁻⁶) − ‖u‖²`.
    pub norm_bound_margin: f64,
    pub failed: Vec<String>,
}

impl LevelVerdict {
    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }
}

/// Checks the exact level identity, the sign of `∫H` and `‖u‖² ≤ 4c`.
pub fn level_bound_check(report: &EnergyReport, c: f64) -> LevelVerdict {
    let lhs = 4.0 * report.level - report.nehari;
    let rhs = report.norm_e_sq + report.quartic_coupling + report.h_integral;
    let scale = 4.0 * report.level.abs()
        + report.nehari.abs()
        + report.norm_e_sq
        + report.quartic_coupling
        + report.h_integral.abs();
    let identity_defect = if scale > 0.0 {
        (lhs - rhs).abs() / scale
    } else {
        0.0
    };
    let identity_ok = identity_defect <= 1e-8;
    let h_nonnegative = report.h_integral >= -1e-10 * (1.0 + scale);
    let norm_bound_margin = 4.0 * c * (1.0 + 1e-6) - report.norm_e_sq;
    let norm_bound_ok = norm_bound_margin >= 0.0;
    let mut failed = Vec::new();
    if !identity_ok {
        failed.push("identity".to_string());
    }
    if !h_nonnegative {
        failed.push("h_nonnegative".to_string());
    }
    if !norm_bound_ok {
        failed.push("norm_bound".to_string());
    }
    LevelVerdict {
        identity_defect,
        identity_ok,
        h_nonnegative,
        norm_bound_ok,
        norm_bound_margin,
        failed,
    }
}
