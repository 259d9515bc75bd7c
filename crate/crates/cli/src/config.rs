//! Experiment configuration: `[section]` headers, `key = value` lines and
//! `#` comments.

use std::collections::BTreeMap;
use std::path::PathBuf;

use kgm_core::solver::{Merit, Method};
use kgm_core::GridKind;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("`{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

type Res<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq)]
pub struct DomainConfig {
    pub kind: GridKind,
    pub extent: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Constant { v0: f64 },
    /// `V₀(1 + a cos 2πx cos 2πy cos 2πz)` in unit-cell coordinates, repeated
    /// `cells` times per axis.
    Periodic { v0: f64, amplitude: f64, cells: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub omega: f64,
    pub potential: PotentialSpec,
    /// Declared lower bound for `V`; checked against the sampled potential.
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NonlinearitySpec {
    Zero,
    Power { p: f64 },
    SumPowers { q: f64, p: f64, lambda: f64 },
    LogPower,
    /// Two-column `s,f` CSV.
    Table { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub stop_tol: f64,
    pub max_iter: usize,
    pub merit: Merit,
    /// Number of random seed profiles.
    pub seeds: usize,
    pub seed: u64,
    pub u0: Option<PathBuf>,
    pub n_path: usize,
    pub t_max: f64,
    pub sphere_samples: usize,
    /// Lattice period (in nodes) for recentring cube seeds; defaults to the
    /// potential's cell size.
    pub period: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSpec {
    Value(f64),
    /// `min(cap, λ₀(M_n))` at the first rung above `‖u₀‖_∞` of the
    /// unperturbed solution.
    Auto { cap: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationConfig {
    pub m0: f64,
    pub ratio: f64,
    pub rungs: usize,
    pub q: f64,
    /// `g(s) = s^{g_p − 1}`.
    pub g_p: f64,
    pub lambda: LambdaSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckConfig {
    pub s_max: f64,
    pub sample_count: usize,
    /// Mass for the nonexistence test; `ω` comes from the model section.
    pub m0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub profile: bool,
    pub trace: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub model: ModelConfig,
    pub nonlinearity: NonlinearitySpec,
    pub solver: SolverConfig,
    pub truncation: Option<TruncationConfig>,
    pub check: CheckConfig,
    pub output: OutputConfig,
}

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

struct Section<'a> {
    name: &'a str,
    entries: BTreeMap<String, Entry>,
}

impl<'a> Section<'a> {
    fn key(&self, k: &str) -> String {
        format!("{}.{}", self.name, k)
    }

    fn raw(&mut self, k: &str) -> Option<(String, usize)> {
        self.entries.get_mut(k).map(|e| {
            e.used = true;
            (e.value.clone(), e.line)
        })
    }

    fn invalid(&self, k: &str, reason: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            key: self.key(k),
            reason: reason.into(),
        }
    }

    fn string(&mut self, k: &str) -> Option<String> {
        self.raw(k).map(|(v, _)| v)
    }

    fn required_string(&mut self, k: &str) -> Res<String> {
        self.string(k).ok_or_else(|| ConfigError::Missing(self.key(k)))
    }

    fn parse<T: std::str::FromStr>(&mut self, k: &str, what: &str) -> Res<Option<T>> {
        match self.raw(k) {
            None => Ok(None),
            Some((v, _)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| self.invalid(k, format!("expected {what}, got `{v}`"))),
        }
    }

    fn real(&mut self, k: &str) -> Res<Option<f64>> {
        let v = self.parse::<f64>(k, "a real number")?;
        match v {
            Some(x) if !x.is_finite() => Err(self.invalid(k, "must be finite")),
            _ => Ok(v),
        }
    }

    fn required_real(&mut self, k: &str) -> Res<f64> {
        self.real(k)?.ok_or_else(|| ConfigError::Missing(self.key(k)))
    }

    fn positive(&mut self, k: &str, default: f64) -> Res<f64> {
        let v = self.real(k)?.unwrap_or(default);
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.invalid(k, format!("must be > 0, got {v}")))
        }
    }

    fn count(&mut self, k: &str, default: usize, min: usize) -> Res<usize> {
        let v = self.parse::<usize>(k, "a nonnegative integer")?.unwrap_or(default);
        if v < min {
            return Err(self.invalid(k, format!("must be at least {min}, got {v}")));
        }
        Ok(v)
    }

    fn flag(&mut self, k: &str, default: bool) -> Res<bool> {
        Ok(self.parse::<bool>(k, "true or false")?.unwrap_or(default))
    }

    fn finish(self) -> Res<()> {
        match self.entries.iter().find(|(_, e)| !e.used) {
            Some((k, _)) => Err(ConfigError::UnknownKey(self.key(k))),
            None => Ok(()),
        }
    }
}

const SECTIONS: [&str; 7] = ["domain", "model", "nonlinearity", "solver", "truncation", "check", "output"];

fn split_sections(text: &str) -> Res<BTreeMap<String, BTreeMap<String, Entry>>> {
    let mut sections: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax {
                    line,
                    reason: format!("malformed section header `{content}`"),
                })?
                .trim()
                .to_string();
            if !SECTIONS.contains(&name.as_str()) {
                return Err(ConfigError::UnknownKey(name));
            }
            if sections.contains_key(&name) {
                return Err(ConfigError::Syntax {
                    line,
                    reason: format!("section [{name}] appears twice"),
                });
            }
            sections.insert(name.clone(), BTreeMap::new());
            current = Some(name);
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            reason: format!("expected `key = value`, got `{content}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        let section = current.as_ref().ok_or_else(|| ConfigError::Syntax {
            line,
            reason: format!("key `{k}` appears before any section header"),
        })?;
        let entries = sections.get_mut(section).expect("section registered");
        if k.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                reason: "empty key".into(),
            });
        }
        let previous = entries.insert(
            k.to_string(),
            Entry {
                value: v.to_string(),
                line,
                used: false,
            },
        );
        if let Some(p) = previous {
            return Err(ConfigError::Syntax {
                line,
                reason: format!("`{section}.{k}` already set on line {}", p.line),
            });
        }
    }
    Ok(sections)
}

/// Parses and validates a configuration, filling defaults.
pub fn parse_config(text: &str) -> Res<ExperimentConfig> {
    let mut sections = split_sections(text)?;
    let mut take = |name: &'static str, required: bool| -> Res<Option<Section<'static>>> {
        match sections.remove(name) {
            Some(entries) => Ok(Some(Section { name, entries })),
            None if required => Err(ConfigError::Missing(format!("[{name}]"))),
            None => Ok(None),
        }
    };
    let mut domain = take("domain", true)?.expect("required");
    let mut model = take("model", true)?.expect("required");
    let mut nl = take("nonlinearity", true)?.expect("required");
    let mut solver = take("solver", true)?.expect("required");
    let truncation = take("truncation", false)?;
    let check = take("check", false)?;
    let output = take("output", false)?;

    let domain_cfg = parse_domain(&mut domain)?;
    domain.finish()?;
    let model_cfg = parse_model(&mut model, &domain_cfg)?;
    model.finish()?;
    let nl_cfg = parse_nonlinearity(&mut nl)?;
    nl.finish()?;
    let solver_cfg = parse_solver(&mut solver, &domain_cfg, &model_cfg)?;
    solver.finish()?;
    let truncation_cfg = match truncation {
        Some(mut s) => {
            let t = parse_truncation(&mut s)?;
            s.finish()?;
            Some(t)
        }
        None => None,
    };
    let mut check = check.unwrap_or(Section {
        name: "check",
        entries: BTreeMap::new(),
    });
    let check_cfg = CheckConfig {
        s_max: check.positive("s_max", 1e3)?,
        sample_count: check.count("sample_count", 4000, 1000)?,
        m0: check.real("m0")?,
    };
    check.finish()?;
    let mut output = output.unwrap_or(Section {
        name: "output",
        entries: BTreeMap::new(),
    });
    let output_cfg = OutputConfig {
        dir: PathBuf::from(output.string("dir").unwrap_or_else(|| "out".into())),
        profile: output.flag("profile", true)?,
        trace: output.flag("trace", true)?,
    };
    output.finish()?;
    Ok(ExperimentConfig {
        domain: domain_cfg,
        model: model_cfg,
        nonlinearity: nl_cfg,
        solver: solver_cfg,
        truncation: truncation_cfg,
        check: check_cfg,
        output: output_cfg,
    })
}

fn parse_domain(s: &mut Section) -> Res<DomainConfig> {
    let kind = match s.required_string("kind")?.as_str() {
        "radial-ball" => GridKind::RadialBall,
        "periodic-cube" => GridKind::PeriodicCube,
        other => {
            return Err(s.invalid(
                "kind",
                format!("expected radial-ball or periodic-cube, got `{other}`"),
            ))
        }
    };
    let extent = s.required_real("extent")?;
    if extent <= 0.0 {
        return Err(s.invalid("extent", format!("must be > 0, got {extent}")));
    }
    let n_points = s
        .parse::<usize>("n_points", "an integer")?
        .ok_or_else(|| ConfigError::Missing(s.key("n_points")))?;
    if n_points < 8 {
        return Err(s.invalid("n_points", format!("must be at least 8, got {n_points}")));
    }
    if kind == GridKind::PeriodicCube && n_points % 2 != 0 {
        return Err(s.invalid("n_points", "must be even on a periodic cube"));
    }
    Ok(DomainConfig { kind, extent, n_points })
}

fn parse_model(s: &mut Section, domain: &DomainConfig) -> Res<ModelConfig> {
    let omega = s.required_real("omega")?;
    if omega <= 0.0 {
        return Err(s.invalid("omega", format!("must be > 0, got {omega}")));
    }
    let v0 = match (s.real("V0")?, s.real("m0")?) {
        (Some(_), Some(_)) => return Err(s.invalid("m0", "give either V0 or m0, not both")),
        (None, None) => return Err(ConfigError::Missing(s.key("V0"))),
        (Some(v0), None) => {
            if v0 <= 0.0 {
                return Err(s.invalid("V0", format!("must be > 0, got {v0}")));
            }
            v0
        }
        (None, Some(m0)) => {
            if m0.abs() <= omega {
                return Err(s.invalid(
                    "m0",
                    format!("V0 = m0^2 - omega^2 needs |omega| < |m0|, got m0 = {m0}, omega = {omega}"),
                ));
            }
            m0 * m0 - omega * omega
        }
    };
    let potential = match s.string("V").as_deref().unwrap_or("constant") {
        "constant" => PotentialSpec::Constant { v0 },
        "periodic" => {
            if domain.kind != GridKind::PeriodicCube {
                return Err(s.invalid("V", "a periodic potential needs a periodic-cube domain"));
            }
            let amplitude = s.real("amplitude")?.unwrap_or(0.3);
            if !(0.0..1.0).contains(&amplitude.abs()) {
                return Err(s.invalid("amplitude", format!("|amplitude| must be < 1, got {amplitude}")));
            }
            let cells = s.count("cells", 1, 1)?;
            if !domain.n_points.is_multiple_of(cells) {
                return Err(s.invalid(
                    "cells",
                    format!("must divide domain.n_points = {}, got {cells}", domain.n_points),
                ));
            }
            PotentialSpec::Periodic { v0, amplitude, cells }
        }
        other => return Err(s.invalid("V", format!("expected constant or periodic, got `{other}`"))),
    };
    let alpha = s.real("alpha")?;
    if let Some(a) = alpha {
        let min_v = match potential {
            PotentialSpec::Constant { v0 } => v0,
            PotentialSpec::Periodic { v0, amplitude, .. } => v0 * (1.0 - amplitude.abs()),
        };
        if a <= 0.0 || a > min_v {
            return Err(s.invalid("alpha", format!("need 0 < alpha <= min V = {min_v}, got {a}")));
        }
    }
    Ok(ModelConfig { omega, potential, alpha })
}

fn parse_nonlinearity(s: &mut Section) -> Res<NonlinearitySpec> {
    let family = s.required_string("family")?;
    let spec = match family.as_str() {
        "zero" => NonlinearitySpec::Zero,
        "power" => {
            let p = s.required_real("p")?;
            if p <= 1.0 {
                return Err(s.invalid("p", format!("must be > 1, got {p}")));
            }
            NonlinearitySpec::Power { p }
        }
        "sum-powers" => {
            let q = s.required_real("q")?;
            let p = s.required_real("p")?;
            let lambda = s.required_real("lambda")?;
            if q <= 1.0 {
                return Err(s.invalid("q", format!("must be > 1, got {q}")));
            }
            if p <= 1.0 {
                return Err(s.invalid("p", format!("must be > 1, got {p}")));
            }
            if lambda < 0.0 {
                return Err(s.invalid("lambda", format!("must be >= 0, got {lambda}")));
            }
            NonlinearitySpec::SumPowers { q, p, lambda }
        }
        "log-power" => NonlinearitySpec::LogPower,
        "table" => NonlinearitySpec::Table {
            path: PathBuf::from(s.required_string("path")?),
        },
        other => {
            return Err(s.invalid(
                "family",
                format!("expected zero, power, sum-powers, log-power or table, got `{other}`"),
            ))
        }
    };
    Ok(spec)
}

fn parse_solver(s: &mut Section, domain: &DomainConfig, model: &ModelConfig) -> Res<SolverConfig> {
    let method = match s.required_string("method")?.as_str() {
        "descent" => Method::Descent,
        "mountain-pass" => Method::MountainPass,
        "nehari" => Method::Nehari,
        other => {
            return Err(s.invalid(
                "method",
                format!("expected one of descent, mountain-pass, nehari, got `{other}`"),
            ))
        }
    };
    let merit = match s.string("merit").as_deref().unwrap_or("residual") {
        "residual" => Merit::Residual,
        "energy" => Merit::Energy,
        other => return Err(s.invalid("merit", format!("expected residual or energy, got `{other}`"))),
    };
    let default_period = match model.potential {
        PotentialSpec::Periodic { cells, .. } => Some(domain.n_points / cells),
        PotentialSpec::Constant { .. } => None,
    };
    let period = match s.parse::<usize>("period", "a positive integer")? {
        Some(p) if p == 0 || !domain.n_points.is_multiple_of(p) => {
            return Err(s.invalid("period", format!("must divide domain.n_points = {}", domain.n_points)))
        }
        Some(p) => Some(p),
        None => default_period,
    };
    Ok(SolverConfig {
        method,
        stop_tol: s.positive("stop_tol", 1e-6)?,
        max_iter: s.count("max_iter", 200, 1)?,
        merit,
        seeds: s.count("seeds", 3, 1)?,
        seed: s.parse::<u64>("seed", "an unsigned 64-bit integer")?.unwrap_or(0),
        u0: s.string("u0").map(PathBuf::from),
        n_path: s.count("n_path", 64, 8)?,
        t_max: s.positive("t_max", 1e6)?,
        sphere_samples: s.count("sphere_samples", 32, 1)?,
        period,
    })
}

fn parse_truncation(s: &mut Section) -> Res<TruncationConfig> {
    let q = s.real("q")?.unwrap_or(5.0);
    if !(q > 4.0 && q < 6.0) {
        return Err(s.invalid("q", format!("(F3) requires q in (4, 6), got {q}")));
    }
    let ratio = s.real("ratio")?.unwrap_or(2.0);
    if ratio <= 1.0 {
        return Err(s.invalid("ratio", format!("must be > 1, got {ratio}")));
    }
    let g_p = s.real("g_p")?.unwrap_or(7.0);
    if g_p <= 1.0 {
        return Err(s.invalid("g_p", format!("must be > 1, got {g_p}")));
    }
    let cap = s.positive("lambda_cap", 1e-3)?;
    let lambda = match s.required_string("lambda")?.as_str() {
        "auto" => LambdaSpec::Auto { cap },
        v => match v.parse::<f64>() {
            Ok(x) if x.is_finite() && x >= 0.0 => LambdaSpec::Value(x),
            _ => return Err(s.invalid("lambda", format!("expected auto or a nonnegative number, got `{v}`"))),
        },
    };
    Ok(TruncationConfig {
        m0: s.positive("M0", 4.0)?,
        ratio,
        rungs: s.count("rungs", 8, 1)?,
        q,
        g_p,
        lambda,
    })
}
