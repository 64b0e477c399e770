//! Experiment configuration, read from TOML (or JSON when the file ends in `.json`).

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use proxlab_core::metric::{ProbeSpec, DEFAULT_TRUNCATION};
use proxlab_core::ConvexFunction;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ConfigError;
use crate::function::{build_all, FunctionSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Jsonl,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Jsonl => "jsonl",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
    pub functions: BTreeMap<String, FunctionSpec>,
    pub experiments: Vec<Experiment>,
}

/// How shells of the metric are sampled. Random and auto modes take the experiment seed unless
/// one is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProbeCfg {
    Mesh {
        h: f64,
    },
    Random {
        samples_per_radius: usize,
        seed: Option<u64>,
    },
    #[default]
    Auto,
}

impl ProbeCfg {
    pub fn resolve(&self, seed: u64) -> ProbeSpec {
        match *self {
            ProbeCfg::Mesh { h } => ProbeSpec::Mesh { h },
            ProbeCfg::Random { samples_per_radius, seed: s } => ProbeSpec::Random {
                samples_per_radius,
                seed: s.unwrap_or(seed),
            },
            ProbeCfg::Auto => ProbeSpec::Auto { seed },
        }
    }

    fn validate(&self) -> Result<(), String> {
        match *self {
            ProbeCfg::Mesh { h } if !(h > 0.0 && h.is_finite()) => Err(format!("mesh h must be positive, got {h}")),
            ProbeCfg::Random { samples_per_radius: 0, .. } => Err("samples_per_radius must be positive".into()),
            _ => Ok(()),
        }
    }
}

fn truncation() -> usize {
    DEFAULT_TRUNCATION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    MetricTable(MetricTable),
    PerturbationSweep(PerturbationSweep),
    Dynamics(Dynamics),
    Checks(Checks),
    Stability(Stability),
}

impl Experiment {
    pub fn id(&self) -> &str {
        match self {
            Experiment::MetricTable(e) => &e.id,
            Experiment::PerturbationSweep(e) => &e.id,
            Experiment::Dynamics(e) => &e.id,
            Experiment::Checks(e) => &e.id,
            Experiment::Stability(e) => &e.id,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::MetricTable(_) => "metric-table",
            Experiment::PerturbationSweep(_) => "perturbation-sweep",
            Experiment::Dynamics(_) => "dynamics",
            Experiment::Checks(_) => "checks",
            Experiment::Stability(_) => "stability",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Experiment::MetricTable(e) => e.seed,
            Experiment::PerturbationSweep(e) => e.seed,
            Experiment::Dynamics(e) => e.seed,
            Experiment::Checks(e) => e.seed,
            Experiment::Stability(e) => e.seed,
        }
    }

    fn function_names(&self) -> Vec<&str> {
        match self {
            Experiment::MetricTable(e) => e.functions.iter().map(String::as_str).collect(),
            Experiment::PerturbationSweep(e) => vec![&e.function],
            Experiment::Dynamics(e) => vec![&e.function],
            Experiment::Checks(e) => e.functions.iter().map(String::as_str).collect(),
            Experiment::Stability(e) => std::iter::once(e.function.as_str()).chain(e.perturbed.as_deref()).collect(),
        }
    }
}

/// Pairwise distance enclosures; with three or more functions an axiom record follows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricTable {
    pub id: String,
    pub functions: Vec<String>,
    #[serde(default = "truncation")]
    pub truncation: usize,
    #[serde(default)]
    pub probe: ProbeCfg,
    pub seed: Option<u64>,
}

fn sigma_ladder() -> Vec<f64> {
    (1..=10).map(|k| 0.5f64.powi(k)).collect()
}

fn eps_list() -> Vec<f64> {
    vec![0.1, 0.01]
}

fn identity_samples() -> usize {
    1_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSweep {
    pub id: String,
    pub function: String,
    #[serde(default = "sigma_ladder")]
    pub sigmas: Vec<f64>,
    #[serde(default = "eps_list")]
    pub eps: Vec<f64>,
    #[serde(default = "truncation")]
    pub truncation: usize,
    #[serde(default)]
    pub probe: ProbeCfg,
    /// Points used for the `P_1 g = (1 - σ) P_1 f` check.
    #[serde(default = "identity_samples")]
    pub identity_samples: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expect {
    SuperRegular,
    NotSuperRegular,
    Inconclusive,
}

fn unit() -> f64 {
    1.0
}
fn starts() -> usize {
    proxlab_core::dynamics::DEFAULT_STARTS
}
fn dyn_iters() -> usize {
    proxlab_core::dynamics::DEFAULT_MAX_ITERS
}
fn dyn_tol() -> f64 {
    proxlab_core::dynamics::DEFAULT_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dynamics {
    pub id: String,
    pub function: String,
    #[serde(default = "unit")]
    pub radius: f64,
    #[serde(default = "starts")]
    pub starts: usize,
    #[serde(default = "dyn_iters")]
    pub max_iters: usize,
    #[serde(default = "dyn_tol")]
    pub tol: f64,
    /// Expected verdict; without it the record carries no pass/fail.
    pub expect: Option<Expect>,
    /// Largest allowed distance from `x_T` to the known minimizer.
    pub minimizer_tol: Option<f64>,
    /// Smallest allowed spread of the limits.
    pub min_spread: Option<f64>,
    pub seed: Option<u64>,
}

fn pairs() -> usize {
    10_000
}
fn cycles() -> usize {
    1_000
}
fn max_cycle() -> usize {
    proxlab_core::checks::DEFAULT_MAX_CYCLE
}
fn k_list() -> Vec<u64> {
    (0..6).map(|j| 4u64.pow(j)).collect()
}
fn graph_points() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Graphical {
    #[serde(default = "k_list")]
    pub k: Vec<u64>,
    #[serde(default = "graph_points")]
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    pub id: String,
    #[serde(default)]
    pub functions: Vec<String>,
    #[serde(default = "unit")]
    pub lambda: f64,
    #[serde(default = "pairs")]
    pub pairs: usize,
    #[serde(default = "cycles")]
    pub cycles: usize,
    #[serde(default = "max_cycle")]
    pub max_cycle_len: usize,
    /// Step sizes for the resolvent identity; nodes without a direct solve are skipped.
    #[serde(default)]
    pub resolvent_lambdas: Vec<f64>,
    #[serde(default = "identity_samples")]
    pub resolvent_samples: usize,
    pub graphical: Option<Graphical>,
    /// Adds the quarter-turn rotation resolvent, expected to fail the cycle inequality.
    #[serde(default)]
    pub rotation: bool,
    pub seed: Option<u64>,
}

fn two() -> f64 {
    2.0
}
fn stab_eps() -> f64 {
    1e-2
}
fn stab_iters() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stability {
    pub id: String,
    pub function: String,
    /// Perturb `function` by this `σ` ...
    pub sigma: Option<f64>,
    /// ... or compare against another named function.
    pub perturbed: Option<String>,
    #[serde(default = "two")]
    pub radius: f64,
    #[serde(default = "stab_eps")]
    pub eps: f64,
    #[serde(default = "stab_iters")]
    pub max_iters: usize,
    #[serde(default = "starts")]
    pub starts: usize,
    #[serde(default = "truncation")]
    pub truncation: usize,
    #[serde(default)]
    pub probe: ProbeCfg,
    pub seed: Option<u64>,
}

/// A parsed config with every function built and every experiment checked.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub functions: BTreeMap<String, ConvexFunction>,
    pub source: Option<PathBuf>,
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg = if json { Self::from_json(&text)? } else { Self::from_toml(&text)? };
        cfg.source = Some(path.to_path_buf());
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::from_config(config)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::from_config(config)
    }

    pub fn from_config(config: ExperimentConfig) -> Result<Self, ConfigError> {
        let functions = build_all(&config.functions)?;
        validate(&config, &functions)?;
        Ok(LoadedConfig { config, functions, source: None })
    }

    /// An experiment's own seed, else the run seed, else the config seed.
    pub fn seed_for(&self, e: &Experiment, run_seed: Option<u64>) -> u64 {
        e.seed().or(run_seed).unwrap_or(self.config.seed)
    }

    /// SHA-256 of the canonical JSON form of the config and the effective seed.
    pub fn hash(&self, run_seed: Option<u64>) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.config).expect("config serializes"));
        h.update(run_seed.unwrap_or(self.config.seed).to_le_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn invalid(id: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid(format!("experiment `{id}`: {msg}"))
}

fn positive(id: &str, name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(id, format!("{name} must be positive, got {v}")))
    }
}

fn nonzero(id: &str, name: &str, v: usize) -> Result<(), ConfigError> {
    if v > 0 {
        Ok(())
    } else {
        Err(invalid(id, format!("{name} must be at least 1")))
    }
}

fn validate(cfg: &ExperimentConfig, fs: &BTreeMap<String, ConvexFunction>) -> Result<(), ConfigError> {
    let mut ids = BTreeSet::new();
    for e in &cfg.experiments {
        let id = e.id();
        if !ids.insert(id) {
            return Err(ConfigError::Invalid(format!("duplicate experiment id `{id}`")));
        }
        for name in e.function_names() {
            if !fs.contains_key(name) {
                return Err(invalid(id, format!("unknown function `{name}`")));
            }
        }
        match e {
            Experiment::MetricTable(m) => {
                nonzero(id, "truncation", m.truncation)?;
                m.probe.validate().map_err(|s| invalid(id, s))?;
                let dims: BTreeSet<usize> = m.functions.iter().map(|n| fs[n].dim()).collect();
                if dims.len() > 1 {
                    return Err(invalid(id, "functions must share one dimension"));
                }
                if m.functions.is_empty() {
                    return Err(invalid(id, "no functions listed"));
                }
            }
            Experiment::PerturbationSweep(p) => {
                nonzero(id, "truncation", p.truncation)?;
                nonzero(id, "identity_samples", p.identity_samples)?;
                p.probe.validate().map_err(|s| invalid(id, s))?;
                if p.sigmas.is_empty() || p.sigmas.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
                    return Err(invalid(id, "sigmas must be a nonempty list inside (0, 1)"));
                }
                if p.eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
                    return Err(invalid(id, "eps values must lie in (0, 1]"));
                }
            }
            Experiment::Dynamics(d) => {
                positive(id, "radius", d.radius)?;
                positive(id, "tol", d.tol)?;
                nonzero(id, "max_iters", d.max_iters)?;
                if d.starts < 2 {
                    return Err(invalid(id, "starts must be at least 2"));
                }
                if fs[&d.function].dim() > 16 {
                    return Err(invalid(id, "start sets support dimension up to 16"));
                }
            }
            Experiment::Checks(c) => {
                positive(id, "lambda", c.lambda)?;
                nonzero(id, "pairs", c.pairs)?;
                nonzero(id, "cycles", c.cycles)?;
                nonzero(id, "resolvent_samples", c.resolvent_samples)?;
                if c.max_cycle_len < 2 {
                    return Err(invalid(id, "max_cycle_len must be at least 2"));
                }
                for l in &c.resolvent_lambdas {
                    positive(id, "resolvent lambda", *l)?;
                }
                if let Some(g) = &c.graphical {
                    nonzero(id, "graphical.points", g.points)?;
                    if g.k.is_empty() || g.k.contains(&0) || g.k.windows(2).any(|w| w[1] < w[0]) {
                        return Err(invalid(id, "graphical.k must be nondecreasing positive integers"));
                    }
                }
                if c.functions.is_empty() && !c.rotation {
                    return Err(invalid(id, "nothing to check"));
                }
            }
            Experiment::Stability(s) => {
                positive(id, "radius", s.radius)?;
                positive(id, "eps", s.eps)?;
                nonzero(id, "max_iters", s.max_iters)?;
                nonzero(id, "truncation", s.truncation)?;
                s.probe.validate().map_err(|m| invalid(id, m))?;
                if s.starts < 2 {
                    return Err(invalid(id, "starts must be at least 2"));
                }
                match (s.sigma, &s.perturbed) {
                    (Some(sig), None) if sig > 0.0 && sig < 1.0 => {}
                    (Some(sig), None) => return Err(invalid(id, format!("sigma must lie in (0, 1), got {sig}"))),
                    (None, Some(p)) => {
                        if fs[p].dim() != fs[&s.function].dim() {
                            return Err(invalid(id, "perturbed function has a different dimension"));
                        }
                    }
                    _ => return Err(invalid(id, "give exactly one of `sigma` and `perturbed`")),
                }
            }
        }
    }
    Ok(())
}
