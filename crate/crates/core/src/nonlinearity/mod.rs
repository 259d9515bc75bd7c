//! Nonlinearities `f`, their primitives `F(s) = ∫₀ˢ f`, and the truncation
//! used for supercritical perturbations.
//!
//! Every family is extended by zero for `s < 0`, so critical points computed
//! from nonnegative data stay nonnegative.

mod hypotheses;
pub mod quadrature;
mod table;

pub use hypotheses::{
    check_hypotheses, check_nonexistence, ArReport, CheckOptions, Condition, GrowthFit, HypothesisReport,
    NonexistenceVerdict, SplitReport, ThetaResult, Verdict, Witness,
};
pub use table::SampledTable;

use crate::error::{KgmError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    /// `f ≡ 0`.
    Zero,
    /// `f(s) = s^{p-1}`.
    Power { p: f64 },
    /// `f(s) = s^{q-1} + λ s^{p-1}`, split as `f₀ = s^{q-1}`, `g = s^{p-1}`.
    SumPowers { q: f64, p: f64, lambda: f64 },
    /// `f(s) = s³(4 ln(1+s) + s/(1+s))`, `F(s) = s⁴ ln(1+s)`.
    LogPower,
    /// `g` below `threshold`, `(g(M)/M^{q-1}) s^{q-1}` above it.
    Truncated {
        base: Box<Nonlinearity>,
        threshold: f64,
        q: f64,
    },
    /// `f₀ + λ g`, with `g` truncated at `threshold` when one is given.
    Composed {
        f0: Box<Nonlinearity>,
        g: Box<Nonlinearity>,
        lambda: f64,
        q: f64,
        threshold: Option<f64>,
    },
    Table(SampledTable),
}

/// The `f₀ + λ g` decomposition of a perturbed nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub f0: Nonlinearity,
    pub g: Nonlinearity,
    pub lambda: f64,
    pub q: f64,
}

#[inline]
fn pow(s: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() < 64.0 {
        s.powi(e as i32)
    } else {
        s.powf(e)
    }
}

impl Nonlinearity {
    pub fn power(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(KgmError::InvalidParameter {
                name: "p",
                reason: format!("power exponent must exceed 1, got {p}"),
            });
        }
        Ok(Nonlinearity::Power { p })
    }

    pub fn sum_powers(q: f64, p: f64, lambda: f64) -> Result<Self> {
        Self::power(q)?;
        Self::power(p)?;
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(KgmError::InvalidParameter {
                name: "lambda",
                reason: format!("must be nonnegative, got {lambda}"),
            });
        }
        Ok(Nonlinearity::SumPowers { q, p, lambda })
    }

    /// `f₀ + λ g` without truncation.
    pub fn perturbed(f0: Nonlinearity, g: Nonlinearity, lambda: f64, q: f64) -> Self {
        Nonlinearity::Composed {
            f0: Box::new(f0),
            g: Box::new(g),
            lambda,
            q,
            threshold: None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Nonlinearity::Zero => "zero".into(),
            Nonlinearity::Power { p } => format!("power(p={p})"),
            Nonlinearity::SumPowers { q, p, lambda } => {
                format!("sum-powers(q={q}, p={p}, lambda={lambda})")
            }
            Nonlinearity::LogPower => "log-power".into(),
            Nonlinearity::Truncated {
                base, threshold, q, ..
            } => format!("truncated({}, M={threshold}, q={q})", base.name()),
            Nonlinearity::Composed {
                f0,
                g,
                lambda,
                q,
                threshold,
            } => match threshold {
                Some(m) => format!(
                    "composed({} + {lambda}*{}, M={m}, q={q})",
                    f0.name(),
                    g.name()
                ),
                None => format!("composed({} + {lambda}*{}, q={q})", f0.name(), g.name()),
            },
            Nonlinearity::Table(t) => format!("sampled-table(s_max={})", t.s_max()),
        }
    }

    /// Largest `s` at which the nonlinearity can be evaluated.
    pub fn domain_max(&self) -> f64 {
        match self {
            Nonlinearity::Table(t) => t.s_max(),
            Nonlinearity::Truncated {
                base, threshold, ..
            } => {
                if base.domain_max() >= *threshold {
                    f64::INFINITY
                } else {
                    base.domain_max()
                }
            }
            Nonlinearity::Composed {
                f0, g, threshold, ..
            } => {
                let gmax = match threshold {
                    Some(m) if g.domain_max() >= *m => f64::INFINITY,
                    _ => g.domain_max(),
                };
                f0.domain_max().min(gmax)
            }
            _ => f64::INFINITY,
        }
    }

    fn check_domain(&self, s: f64) -> Result<()> {
        let max = self.domain_max();
        if s > max {
            return Err(KgmError::OutOfTableRange { s, max });
        }
        Ok(())
    }

    /// `f(s)`.
    pub fn f(&self, s: f64) -> Result<f64> {
        self.check_domain(s)?;
        Ok(self.f_unchecked(s))
    }

    /// `F(s) = ∫₀ˢ f`.
    pub fn big_f(&self, s: f64) -> Result<f64> {
        self.check_domain(s)?;
        Ok(self.big_f_unchecked(s))
    }

    /// `f'(s)`.
    pub fn df(&self, s: f64) -> Result<f64> {
        self.check_domain(s)?;
        Ok(self.df_unchecked(s))
    }

    pub(crate) fn f_unchecked(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Power { p } => pow(s, p - 1.0),
            Nonlinearity::SumPowers { q, p, lambda } => pow(s, q - 1.0) + lambda * pow(s, p - 1.0),
            Nonlinearity::LogPower => s * s * s * (4.0 * s.ln_1p() + s / (1.0 + s)),
            Nonlinearity::Truncated {
                base, threshold, q, ..
            } => {
                if s <= *threshold {
                    base.f_unchecked(s)
                } else {
                    let m = *threshold;
                    base.f_unchecked(m) / pow(m, q - 1.0) * pow(s, q - 1.0)
                }
            }
            Nonlinearity::Composed {
                f0,
                g,
                lambda,
                q,
                threshold,
            } => f0.f_unchecked(s) + lambda * g_part(g, *threshold, *q, s, Part::Value),
            Nonlinearity::Table(t) => t.f_unchecked(s),
        }
    }

    pub(crate) fn big_f_unchecked(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Power { p } => pow(s, *p) / p,
            Nonlinearity::SumPowers { q, p, lambda } => pow(s, *q) / q + lambda * pow(s, *p) / p,
            Nonlinearity::LogPower => s * s * s * s * s.ln_1p(),
            Nonlinearity::Truncated {
                base, threshold, q, ..
            } => {
                if s <= *threshold {
                    base.big_f_unchecked(s)
                } else {
                    let m = *threshold;
                    let slope = base.f_unchecked(m) / pow(m, q - 1.0);
                    base.big_f_unchecked(m) + slope * (pow(s, *q) - pow(m, *q)) / q
                }
            }
            Nonlinearity::Composed {
                f0,
                g,
                lambda,
                q,
                threshold,
            } => f0.big_f_unchecked(s) + lambda * g_part(g, *threshold, *q, s, Part::Primitive),
            Nonlinearity::Table(t) => t.big_f_unchecked(s),
        }
    }

    pub(crate) fn df_unchecked(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Power { p } => (p - 1.0) * pow(s, p - 2.0),
            Nonlinearity::SumPowers { q, p, lambda } => {
                (q - 1.0) * pow(s, q - 2.0) + lambda * (p - 1.0) * pow(s, p - 2.0)
            }
            Nonlinearity::LogPower => {
                let ratio = s / (1.0 + s);
                let inv = 1.0 / (1.0 + s);
                3.0 * s * s * (4.0 * s.ln_1p() + ratio) + s * s * s * (4.0 * inv + inv * inv)
            }
            Nonlinearity::Truncated {
                base, threshold, q, ..
            } => {
                if s <= *threshold {
                    base.df_unchecked(s)
                } else {
                    let m = *threshold;
                    base.f_unchecked(m) / pow(m, q - 1.0) * (q - 1.0) * pow(s, q - 2.0)
                }
            }
            Nonlinearity::Composed {
                f0,
                g,
                lambda,
                q,
                threshold,
            } => f0.df_unchecked(s) + lambda * g_part(g, *threshold, *q, s, Part::Derivative),
            Nonlinearity::Table(t) => t.df_unchecked(s),
        }
    }

    /// The `f₀ + λ g` decomposition, when the family has one.
    pub fn split(&self) -> Option<Split> {
        match self {
            Nonlinearity::SumPowers { q, p, lambda } => Some(Split {
                f0: Nonlinearity::Power { p: *q },
                g: Nonlinearity::Power { p: *p },
                lambda: *lambda,
                q: *q,
            }),
            Nonlinearity::Composed {
                f0, g, lambda, q, ..
            } => Some(Split {
                f0: (**f0).clone(),
                g: (**g).clone(),
                lambda: *lambda,
                q: *q,
            }),
            _ => None,
        }
    }
}

#[derive(Clone, Copy)]
enum Part {
    Value,
    Primitive,
    Derivative,
}

fn g_part(g: &Nonlinearity, threshold: Option<f64>, q: f64, s: f64, part: Part) -> f64 {
    let plain = |s: f64| match part {
        Part::Value => g.f_unchecked(s),
        Part::Primitive => g.big_f_unchecked(s),
        Part::Derivative => g.df_unchecked(s),
    };
    match threshold {
        Some(m) if s > m => {
            let slope = g.f_unchecked(m) / pow(m, q - 1.0);
            match part {
                Part::Value => slope * pow(s, q - 1.0),
                Part::Primitive => g.big_f_unchecked(m) + slope * (pow(s, q) - pow(m, q)) / q,
                Part::Derivative => slope * (q - 1.0) * pow(s, q - 2.0),
            }
        }
        _ => plain(s),
    }
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 4.0 && q < 6.0) {
        return Err(KgmError::InvalidParameter {
            name: "q",
            reason: format!("(F3) requires q in (4, 6), got {q}"),
        });
    }
    Ok(())
}

/// Sample points on `(0, s_max]`: half log-spaced over six decades, half uniform.
pub(crate) fn sample_points(s_max: f64, count: usize) -> Vec<f64> {
    let count = count.max(4);
    let n_log = count / 2;
    let n_lin = count - n_log;
    let lo = s_max * 1e-6;
    let mut pts: Vec<f64> = (0..n_log)
        .map(|k| lo * (s_max / lo).powf(k as f64 / (n_log - 1) as f64))
        .chain((1..=n_lin).map(|k| s_max * k as f64 / n_lin as f64))
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    pts.dedup();
    pts
}

/// The truncation `g_n` of `g` at threshold `M` with subcritical exponent `q`.
pub fn truncate_g(g: &Nonlinearity, threshold: f64, q: f64) -> Result<Nonlinearity> {
    check_q(q)?;
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(KgmError::InvalidParameter {
            name: "M",
            reason: format!("truncation threshold must be positive, got {threshold}"),
        });
    }
    if g.domain_max() < threshold {
        return Err(KgmError::OutOfTableRange {
            s: threshold,
            max: g.domain_max(),
        });
    }
    if g.f_unchecked(0.0) != 0.0 {
        return Err(KgmError::InvalidParameter {
            name: "g",
            reason: "g(0) must vanish".into(),
        });
    }
    if let Some(s) = sample_points(threshold, 1000)
        .into_iter()
        .find(|s| g.f_unchecked(*s) < 0.0)
    {
        return Err(KgmError::InvalidParameter {
            name: "g",
            reason: format!("g must be nonnegative; g({s}) < 0"),
        });
    }
    Ok(Nonlinearity::Truncated {
        base: Box::new(g.clone()),
        threshold,
        q,
    })
}

/// `f_{λ,n} = f₀ + λ g_n`; `f₀` must satisfy `|f₀(s)| ≤ |s|^{q-1}` on samples.
pub fn compose_f_lambda_n(
    f0: &Nonlinearity,
    g: &Nonlinearity,
    lambda: f64,
    threshold: f64,
    q: f64,
) -> Result<Nonlinearity> {
    truncate_g(g, threshold, q)?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(KgmError::InvalidParameter {
            name: "lambda",
            reason: format!("must be nonnegative, got {lambda}"),
        });
    }
    let range = f0.domain_max().min((10.0 * threshold).max(10.0));
    for s in sample_points(range, 10_000) {
        let bound = pow(s, q - 1.0);
        if f0.f_unchecked(s).abs() > bound * (1.0 + 1e-12) {
            return Err(KgmError::InvalidParameter {
                name: "f0",
                reason: format!("(F3) normalisation |f0(s)| <= s^(q-1) fails at s = {s}"),
            });
        }
    }
    Ok(Nonlinearity::Composed {
        f0: Box::new(f0.clone()),
        g: Box::new(g.clone()),
        lambda,
        q,
        threshold: Some(threshold),
    })
}

/// `λ₀ = 1 / (g(M) M)`.
pub fn lambda0_for(g: &Nonlinearity, threshold: f64) -> Result<f64> {
    let gm = g.f(threshold)?;
    if !(gm > 0.0) {
        return Err(KgmError::InvalidParameter {
            name: "g",
            reason: format!("g(M) = {gm} at M = {threshold}; lambda0 is unconstrained"),
        });
    }
    Ok(1.0 / (gm * threshold))
}

#[cfg(test)]
mod tests {
    use super::quadrature::adaptive_simpson;
    use super::*;

    fn families() -> Vec<Nonlinearity> {
        let s6 = Nonlinearity::power(7.0).unwrap();
        vec![
            Nonlinearity::power(5.0).unwrap(),
            Nonlinearity::power(3.0).unwrap(),
            Nonlinearity::power(4.5).unwrap(),
            Nonlinearity::sum_powers(5.0, 7.0, 0.3).unwrap(),
            Nonlinearity::LogPower,
            truncate_g(&s6, 2.0, 5.0).unwrap(),
            compose_f_lambda_n(&Nonlinearity::power(5.0).unwrap(), &s6, 1e-3, 1.5, 5.0).unwrap(),
        ]
    }

    #[test]
    fn power_closed_forms() {
        let f = Nonlinearity::power(5.0).unwrap();
        assert_eq!(f.f(2.0).unwrap(), 16.0);
        assert!((f.big_f(2.0).unwrap() - 32.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn log_power_primitive() {
        let f = Nonlinearity::LogPower;
        assert!((f.big_f(1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_at_origin_and_negative_extension() {
        for nl in families() {
            assert_eq!(nl.f(0.0).unwrap(), 0.0, "{}", nl.name());
            assert_eq!(nl.big_f(0.0).unwrap(), 0.0);
            assert_eq!(nl.f(-1.5).unwrap(), 0.0);
            assert_eq!(nl.big_f(-1.5).unwrap(), 0.0);
        }
    }

    #[test]
    fn primitive_matches_quadrature_of_f() {
        for nl in families() {
            for s in [0.3, 1.0, 1.7, 2.5, 4.0] {
                let quad = adaptive_simpson(&|x| nl.f(x).unwrap(), 0.0, s, 1e-11);
                let closed = nl.big_f(s).unwrap();
                assert!(
                    (quad - closed).abs() <= 1e-9 * closed.abs().max(1.0),
                    "{} at {s}: {quad} vs {closed}",
                    nl.name()
                );
            }
        }
    }

    #[test]
    fn derivative_matches_central_differences() {
        for nl in families() {
            for s in [0.4, 1.1, 2.3, 3.7] {
                let h = 1e-5;
                let fd = (nl.f(s + h).unwrap() - nl.f(s - h).unwrap()) / (2.0 * h);
                let df = nl.df(s).unwrap();
                assert!((fd - df).abs() <= 1e-6 * df.abs().max(1.0), "{}", nl.name());
            }
        }
    }

    #[test]
    fn truncation_piecewise_values() {
        let g = Nonlinearity::Power { p: 7.0 };
        let gn = truncate_g(&g, 2.0, 5.0).unwrap();
        assert!((gn.f(3.0).unwrap() - 324.0).abs() < 1e-12);
        for s in [0.0, 0.5, 1.0, 1.99, 2.0] {
            assert_eq!(gn.f(s).unwrap(), g.f(s).unwrap());
        }
        assert_eq!(gn.f(-1.0).unwrap(), 0.0);
    }

    #[test]
    fn truncation_rejects_bad_exponent() {
        let g = Nonlinearity::Power { p: 7.0 };
        assert!(truncate_g(&g, 2.0, 6.5).is_err());
        assert!(truncate_g(&g, 2.0, 4.0).is_err());
        assert!(truncate_g(&g, 0.0, 5.0).is_err());
    }

    #[test]
    fn lambda0_rule() {
        let g = Nonlinearity::Power { p: 7.0 };
        assert!((lambda0_for(&g, 2.0).unwrap() - 1.0 / 128.0).abs() < 1e-18);
        assert!(lambda0_for(&Nonlinearity::Zero, 2.0).is_err());
    }

    #[test]
    fn zero_lambda_recovers_f0() {
        let f0 = Nonlinearity::Power { p: 5.0 };
        let c = compose_f_lambda_n(&f0, &Nonlinearity::Power { p: 7.0 }, 0.0, 3.0, 5.0).unwrap();
        for s in sample_points(20.0, 200) {
            assert_eq!(c.f(s).unwrap(), f0.f(s).unwrap());
        }
    }

    #[test]
    fn growth_bound_below_lambda0() {
        let f0 = Nonlinearity::Power { p: 5.0 };
        let g = Nonlinearity::Power { p: 7.0 };
        for m in [1.0, 2.0, 4.0, 8.0] {
            let lambda = lambda0_for(&g, m).unwrap();
            let f = compose_f_lambda_n(&f0, &g, lambda, m, 5.0).unwrap();
            for s in sample_points(100.0 * m, 10_000) {
                assert!(f.f(s).unwrap().abs() <= 2.0 * s.powi(4) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn compose_checks_normalisation() {
        let f0 = Nonlinearity::sum_powers(5.0, 5.5, 1.0).unwrap();
        let g = Nonlinearity::Power { p: 7.0 };
        assert!(compose_f_lambda_n(&f0, &g, 1e-3, 2.0, 5.0).is_err());
    }
}
