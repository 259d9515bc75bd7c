//! Sampling-based checkers for the structural conditions on `f`.
//!
//! A sampler cannot prove a limit or a global inequality, so limit
//! conditions are judged by trends and every FAIL carries a witness.

use serde::Serialize;

use super::{sample_points, Nonlinearity};

const REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Undecided,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Undecided => "UNDECIDED",
        }
    }
}

/// A point at which a sampled inequality fails; `defect < 0` measures by how much.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl Condition {
    fn pass() -> Self {
        Self {
            verdict: Verdict::Pass,
            witness: None,
        }
    }

    fn fail(w: Witness) -> Self {
        Self {
            verdict: Verdict::Fail,
            witness: Some(w),
        }
    }

    fn undecided(w: Option<Witness>) -> Self {
        Self {
            verdict: Verdict::Undecided,
            witness: w,
        }
    }

    fn from_witness(w: Option<Witness>) -> Self {
        w.map_or_else(Self::pass, Self::fail)
    }
}

/// Fitted constants of `|f(s)| ≤ C(s + s^{p-1})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthFit {
    pub c: f64,
    pub p: f64,
    pub top_decade_growth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaResult {
    pub theta: f64,
    /// Smallest `s₀` from which `0 < θF ≤ sf` held on every sample.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArReport {
    pub verdict: Verdict,
    pub thetas: Vec<ThetaResult>,
    /// Largest `s` inspected, including the witness search past the sample range.
    pub search_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitReport {
    pub q: f64,
    pub lambda: f64,
    #[serde(rename = "F1")]
    pub big_f1: Condition,
    #[serde(rename = "F2")]
    pub big_f2: Condition,
    #[serde(rename = "F3")]
    pub big_f3: Condition,
    #[serde(rename = "F4")]
    pub big_f4: Condition,
    #[serde(rename = "F5")]
    pub big_f5: Condition,
    #[serde(rename = "F6")]
    pub big_f6: Condition,
    /// The prefix of the ladder `M_n` on which the monotone-ratio bound was verified.
    pub f6_verified: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonexistenceVerdict {
    pub holds: bool,
    pub m0: f64,
    pub omega: f64,
    pub sample_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub nonlinearity: String,
    pub sample_range: [f64; 2],
    pub sample_count: usize,
    pub f1: Condition,
    pub f2: Condition,
    pub f3: Condition,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f3_fit: Option<GrowthFit>,
    pub f4: Condition,
    pub f5: Condition,
    pub f5prime: Condition,
    #[serde(rename = "AR")]
    pub ar: ArReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonexistence: Option<NonexistenceVerdict>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOptions {
    pub s_max: f64,
    pub sample_count: usize,
    pub ladder_m0: f64,
    pub ladder_ratio: f64,
    pub ladder_rungs: usize,
    /// `(m₀, ω)` for the nonexistence disjunction.
    pub nonexistence: Option<(f64, f64)>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            s_max: 1e3,
            sample_count: 4000,
            ladder_m0: 4.0,
            ladder_ratio: 2.0,
            ladder_rungs: 8,
            nonexistence: None,
        }
    }
}

fn ar_thetas() -> Vec<f64> {
    std::iter::once(4.01)
        .chain((1..=60).map(|k| 4.0 + k as f64 / 10.0))
        .collect()
}

fn ar_s0_grid() -> Vec<f64> {
    (0..=16).map(|k| 10f64.powf(-2.0 + k as f64 / 4.0)).collect()
}

pub fn check_hypotheses(nl: &Nonlinearity, opts: &CheckOptions) -> HypothesisReport {
    let s_max = opts.s_max.min(nl.domain_max());
    let count = opts.sample_count.max(1000);
    let samples = sample_points(s_max, count);
    let f = |s: f64| nl.f_unchecked(s);
    let big_f = |s: f64| nl.big_f_unchecked(s);

    let f1 = if f(0.0) == 0.0 {
        Condition::pass()
    } else {
        Condition::fail(Witness {
            s: 0.0,
            theta: None,
            defect: -f(0.0).abs(),
        })
    };
    let (f3, f3_fit) = growth_fit(&f, s_max, &samples);
    let split = nl.split().map(|sp| check_split(&sp, opts, s_max, &samples));
    let nonexistence = opts
        .nonexistence
        .map(|(m0, omega)| check_nonexistence(nl, m0, omega));

    HypothesisReport {
        nonlinearity: nl.name(),
        sample_range: [0.0, s_max],
        sample_count: samples.len(),
        f1,
        f2: vanishing_slope(&f, s_max),
        f3,
        f3_fit,
        f4: quartic_blowup(&big_f, s_max),
        f5: cubic_ratio_increasing(&f, &samples),
        f5prime: h_nonnegative(&f, &big_f, &samples),
        ar: ambrosetti_rabinowitz(&f, &big_f, &samples),
        split,
        nonexistence,
    }
}

/// `f(s)/s → 0` as `s → 0⁺`, judged over the lowest sampled decade.
fn vanishing_slope(f: &dyn Fn(f64) -> f64, s_max: f64) -> Condition {
    let lo = s_max * 1e-6;
    let pts: Vec<f64> = (0..=20).map(|k| lo * 10f64.powf(k as f64 / 20.0)).collect();
    let ratio: Vec<f64> = pts.iter().map(|s| (f(*s) / s).abs()).collect();
    if ratio.iter().all(|r| *r == 0.0) {
        return Condition::pass();
    }
    let (r_lo, r_hi) = (ratio[0], ratio[20]);
    let monotone = ratio.windows(2).all(|w| w[0] <= w[1] * (1.0 + REL_TOL));
    if monotone && r_lo <= 0.5 * r_hi {
        Condition::pass()
    } else if r_lo >= r_hi * (1.0 - 1e-9) {
        Condition::fail(Witness {
            s: pts[0],
            theta: None,
            defect: -r_lo,
        })
    } else {
        Condition::undecided(None)
    }
}

/// Smallest `p ∈ (4, 6)` on the grid `4 + k/50` whose ratio `|f|/(s + s^{p-1})`
/// stops growing over the top decade, and the fitted `C` for it.
fn growth_fit(
    f: &dyn Fn(f64) -> f64,
    s_max: f64,
    samples: &[f64],
) -> (Condition, Option<GrowthFit>) {
    let ratio = |s: f64, p: f64| f(s).abs() / (s + s.powf(p - 1.0));
    let mut last_growth = f64::NAN;
    for k in 1..100 {
        let p = 4.0 + k as f64 / 50.0;
        let top = ratio(s_max, p);
        let below = ratio(s_max / 10.0, p);
        let growth = if below == 0.0 {
            if top == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            top / below
        };
        last_growth = growth;
        if growth <= 1.0 + 1e-3 {
            let c = samples
                .iter()
                .map(|s| ratio(*s, p))
                .fold(0.0, f64::max)
                .max(f64::MIN_POSITIVE);
            return (
                Condition::pass(),
                Some(GrowthFit {
                    c,
                    p,
                    top_decade_growth: growth,
                }),
            );
        }
    }
    (
        Condition::fail(Witness {
            s: s_max,
            theta: None,
            defect: 1.0 + 1e-3 - last_growth,
        }),
        None,
    )
}

/// `F(s)/s⁴ → ∞`, judged by the increments of `F/s⁴` over the last two decades.
fn quartic_blowup(big_f: &dyn Fn(f64) -> f64, s_max: f64) -> Condition {
    let q = |s: f64| big_f(s) / s.powi(4);
    let (a, b, c) = (q(s_max / 100.0), q(s_max / 10.0), q(s_max));
    let d1 = b - a;
    let d2 = c - b;
    if !(d1.is_finite() && d2.is_finite()) {
        return Condition::undecided(None);
    }
    if d2 > 0.0 && d2 >= 0.5 * d1 {
        Condition::pass()
    } else if d2 <= 0.0 {
        Condition::fail(Witness {
            s: s_max,
            theta: None,
            defect: d2,
        })
    } else {
        Condition::undecided(Some(Witness {
            s: s_max,
            theta: None,
            defect: d2 - 0.5 * d1,
        }))
    }
}

fn cubic_ratio_increasing(f: &dyn Fn(f64) -> f64, samples: &[f64]) -> Condition {
    let ratio: Vec<f64> = samples.iter().map(|s| f(*s) / s.powi(3)).collect();
    let witness = (1..samples.len())
        .find(|&k| ratio[k] < ratio[k - 1] - REL_TOL * ratio[k - 1].abs())
        .map(|k| Witness {
            s: samples[k],
            theta: None,
            defect: ratio[k] - ratio[k - 1],
        });
    Condition::from_witness(witness)
}

/// `H(s) = s f(s) − 4F(s) ≥ 0`, reporting the most negative sample.
fn h_nonnegative(
    f: &dyn Fn(f64) -> f64,
    big_f: &dyn Fn(f64) -> f64,
    samples: &[f64],
) -> Condition {
    let mut worst: Option<Witness> = None;
    for &s in samples {
        let sf = s * f(s);
        let ff = 4.0 * big_f(s);
        let h = sf - ff;
        if h < -REL_TOL * (sf.abs() + ff.abs()) && worst.is_none_or(|w| h < w.defect) {
            worst = Some(Witness {
                s,
                theta: None,
                defect: h,
            });
        }
    }
    Condition::from_witness(worst)
}

/// Sample points for AR: the regular samples plus a decade-stepped extension
/// beyond `s_max` until values overflow or `s > 1e200`.
fn ar_points(f: &dyn Fn(f64) -> f64, big_f: &dyn Fn(f64) -> f64, samples: &[f64]) -> Vec<f64> {
    let mut pts = samples.to_vec();
    let mut s = *samples.last().expect("non-empty samples");
    loop {
        s *= 10f64.powf(0.25);
        if s > 1e200 || !(s * f(s)).is_finite() || !big_f(s).is_finite() {
            break;
        }
        pts.push(s);
    }
    pts
}

fn ambrosetti_rabinowitz(
    f: &dyn Fn(f64) -> f64,
    big_f: &dyn Fn(f64) -> f64,
    samples: &[f64],
) -> ArReport {
    let pts = ar_points(f, big_f, samples);
    let values: Vec<(f64, f64)> = pts.iter().map(|s| (s * f(*s), big_f(*s))).collect();
    let s0_grid = ar_s0_grid();
    let thetas: Vec<ThetaResult> = ar_thetas()
        .into_iter()
        .map(|theta| {
            // First violation at or beyond each s₀; the largest s₀ gives the reported witness.
            let violation = |s0: f64| {
                pts.iter().zip(&values).find_map(|(&s, &(sf, ff))| {
                    let tf = theta * ff;
                    let ok = tf > 0.0 && tf <= sf + REL_TOL * sf.abs();
                    (s >= s0 && !ok).then_some(Witness {
                        s,
                        theta: Some(theta),
                        defect: sf - tf,
                    })
                })
            };
            let s0 = s0_grid.iter().copied().find(|s0| violation(*s0).is_none());
            let witness = match s0 {
                Some(_) => None,
                None => violation(*s0_grid.last().expect("non-empty grid")),
            };
            ThetaResult {
                theta,
                s0,
                witness,
            }
        })
        .collect();
    let verdict = if thetas.iter().any(|t| t.s0.is_some()) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    ArReport {
        verdict,
        thetas,
        search_max: *pts.last().expect("non-empty"),
    }
}

fn check_split(
    sp: &super::Split,
    opts: &CheckOptions,
    s_max: f64,
    samples: &[f64],
) -> SplitReport {
    let f0 = |s: f64| sp.f0.f_unchecked(s);
    let g = |s: f64| sp.g.f_unchecked(s);
    let big_f0 = |s: f64| sp.f0.big_f_unchecked(s);
    let big_g = |s: f64| sp.g.big_f_unchecked(s);
    let q = sp.q;

    let f1_witness = if f0(0.0) != 0.0 || g(0.0) != 0.0 {
        Some(Witness {
            s: 0.0,
            theta: None,
            defect: -(f0(0.0).abs() + g(0.0).abs()),
        })
    } else {
        samples.iter().find(|s| g(**s) < 0.0).map(|&s| Witness {
            s,
            theta: None,
            defect: g(s),
        })
    };

    let f2a = vanishing_slope(&f0, s_max);
    let f2b = vanishing_slope(&g, s_max);
    let big_f2 = [f2a, f2b]
        .into_iter()
        .max_by_key(|c| match c.verdict {
            Verdict::Pass => 0,
            Verdict::Undecided => 1,
            Verdict::Fail => 2,
        })
        .expect("two conditions");

    let big_f3 = if q > 4.0 && q < 6.0 {
        Condition::from_witness(samples.iter().find_map(|&s| {
            let bound = s.powf(q - 1.0);
            let v = f0(s).abs();
            (v > bound * (1.0 + REL_TOL)).then_some(Witness {
                s,
                theta: None,
                defect: bound - v,
            })
        }))
    } else {
        Condition::fail(Witness {
            s: 0.0,
            theta: None,
            defect: 0.0,
        })
    };

    let h0 = h_nonnegative(&f0, &big_f0, samples);
    let hg = h_nonnegative(&g, &big_g, samples);
    let big_f5 = if h0.verdict == Verdict::Fail { h0 } else { hg };

    let mut verified = Vec::new();
    let mut f6_witness = None;
    let g_max = sp.g.domain_max();
    let mut m = opts.ladder_m0;
    for _ in 0..opts.ladder_rungs {
        if m > g_max {
            break;
        }
        let cap = g(m) / m.powf(q - 1.0);
        let bad = sample_points(m, samples.len()).into_iter().find_map(|s| {
            let r = g(s) / s.powf(q - 1.0);
            (r > cap * (1.0 + REL_TOL) + f64::MIN_POSITIVE).then_some(Witness {
                s,
                theta: None,
                defect: cap - r,
            })
        });
        if bad.is_some() {
            f6_witness = bad;
            break;
        }
        verified.push(m);
        m *= opts.ladder_ratio;
    }
    let big_f6 = if verified.len() == opts.ladder_rungs {
        Condition::pass()
    } else {
        Condition::undecided(f6_witness)
    };

    SplitReport {
        q,
        lambda: sp.lambda,
        big_f1: Condition::from_witness(f1_witness),
        big_f2,
        big_f3,
        big_f4: quartic_blowup(&big_f0, s_max),
        big_f5,
        big_f6,
        f6_verified: verified,
    }
}

/// The sampled disjunction `sf + 2(m₀² − ω²)s² ≥ 6F` or `2F ≥ sf` on `(0, 10³]`.
///
/// Negative `s` needs no sampling: the zero extension gives `2F = sf = 0` there.
pub fn check_nonexistence(nl: &Nonlinearity, m0: f64, omega: f64) -> NonexistenceVerdict {
    let pts = sample_points(1e3f64.min(nl.domain_max()), 10_000);
    let quad = 2.0 * (m0 * m0 - omega * omega);
    let witness = pts.iter().find_map(|&s| {
        let sf = s * nl.f_unchecked(s);
        let ff = nl.big_f_unchecked(s);
        let lhs1 = sf + quad * s * s;
        let tol = REL_TOL * (sf.abs() + 6.0 * ff.abs() + (quad * s * s).abs());
        let first = lhs1 - 6.0 * ff;
        let second = 2.0 * ff - sf;
        (first < -tol && second < -tol).then_some(Witness {
            s,
            theta: None,
            defect: first.max(second),
        })
    });
    NonexistenceVerdict {
        holds: witness.is_none(),
        m0,
        omega,
        sample_count: pts.len(),
        witness,
    }
}
