//! Declarative function descriptions.
//!
//! ```toml
//! [functions.q]
//! type = "quadratic"
//! Q = [[1.0, 0.0], [0.0, 2.0]]
//! b = [0.0, 0.0]
//!
//! [functions.g]
//! type = "perturbed"
//! base = "q"
//! sigma = 0.1
//! ```

use std::collections::BTreeMap;

use proxlab_core::ConvexFunction;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

fn one() -> f64 {
    1.0
}

fn one_dim() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    Zero {
        #[serde(default = "one_dim")]
        dim: usize,
    },
    Quadratic {
        #[serde(rename = "Q")]
        q: Vec<Vec<f64>>,
        #[serde(default)]
        b: Option<Vec<f64>>,
        #[serde(default)]
        c: f64,
    },
    HalfSqNorm {
        #[serde(default = "one_dim")]
        dim: usize,
    },
    AbsSum {
        #[serde(default = "one_dim")]
        dim: usize,
        #[serde(default = "one")]
        weight: f64,
    },
    EuclNorm {
        #[serde(default = "one_dim")]
        dim: usize,
        #[serde(default = "one")]
        weight: f64,
    },
    IndicatorBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    IndicatorBall {
        center: Vec<f64>,
        radius: f64,
    },
    Huber {
        #[serde(default = "one_dim")]
        dim: usize,
        #[serde(default = "one")]
        delta: f64,
    },
    Perturbed {
        base: FunctionRef,
        sigma: f64,
    },
    Shifted {
        base: FunctionRef,
        c: f64,
    },
    Regularized {
        base: FunctionRef,
        mu: f64,
    },
}

/// Either the name of another entry of the `functions` table or an inline description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionRef {
    Name(String),
    Inline(Box<FunctionSpec>),
}

/// Builds every named function, resolving references between entries.
pub fn build_all(specs: &BTreeMap<String, FunctionSpec>) -> Result<BTreeMap<String, ConvexFunction>, ConfigError> {
    let mut done = BTreeMap::new();
    for name in specs.keys() {
        let mut stack = Vec::new();
        resolve(name, specs, &mut done, &mut stack)?;
    }
    Ok(done)
}

fn resolve(
    name: &str,
    specs: &BTreeMap<String, FunctionSpec>,
    done: &mut BTreeMap<String, ConvexFunction>,
    stack: &mut Vec<String>,
) -> Result<ConvexFunction, ConfigError> {
    if let Some(f) = done.get(name) {
        return Ok(f.clone());
    }
    if stack.iter().any(|s| s == name) {
        stack.push(name.to_string());
        return Err(ConfigError::Invalid(format!("cyclic function reference: {}", stack.join(" -> "))));
    }
    let spec = specs
        .get(name)
        .ok_or_else(|| ConfigError::Invalid(format!("unknown function `{name}`")))?;
    stack.push(name.to_string());
    let f = build(spec, specs, done, stack)
        .map_err(|e| ConfigError::Invalid(format!("function `{name}`: {e}")))?;
    stack.pop();
    done.insert(name.to_string(), f.clone());
    Ok(f)
}

fn base(
    r: &FunctionRef,
    specs: &BTreeMap<String, FunctionSpec>,
    done: &mut BTreeMap<String, ConvexFunction>,
    stack: &mut Vec<String>,
) -> Result<ConvexFunction, ConfigError> {
    match r {
        FunctionRef::Name(n) => resolve(n, specs, done, stack),
        FunctionRef::Inline(s) => build(s, specs, done, stack),
    }
}

fn build(
    spec: &FunctionSpec,
    specs: &BTreeMap<String, FunctionSpec>,
    done: &mut BTreeMap<String, ConvexFunction>,
    stack: &mut Vec<String>,
) -> Result<ConvexFunction, ConfigError> {
    let f = match spec {
        FunctionSpec::Zero { dim } => ConvexFunction::zero(*dim),
        FunctionSpec::Quadratic { q, b, c } => {
            let b = b.clone().unwrap_or_else(|| vec![0.0; q.len()]);
            ConvexFunction::quadratic(q.clone(), b, *c)
        }
        FunctionSpec::HalfSqNorm { dim } => ConvexFunction::half_sq_norm(*dim),
        FunctionSpec::AbsSum { dim, weight } => ConvexFunction::abs_sum(*dim, *weight),
        FunctionSpec::EuclNorm { dim, weight } => ConvexFunction::eucl_norm(*dim, *weight),
        FunctionSpec::IndicatorBox { lo, hi } => ConvexFunction::indicator_box(lo.clone(), hi.clone()),
        FunctionSpec::IndicatorBall { center, radius } => ConvexFunction::indicator_ball(center.clone(), *radius),
        FunctionSpec::Huber { dim, delta } => ConvexFunction::huber(*dim, *delta),
        FunctionSpec::Perturbed { base: b, sigma } => ConvexFunction::perturbed(base(b, specs, done, stack)?, *sigma),
        FunctionSpec::Shifted { base: b, c } => ConvexFunction::shifted(base(b, specs, done, stack)?, *c),
        FunctionSpec::Regularized { base: b, mu } => ConvexFunction::regularized(base(b, specs, done, stack)?, *mu),
    };
    f.map_err(|e| ConfigError::Invalid(e.to_string()))
}

/// One line of `proxlab list`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub params: &'static str,
    pub prox: &'static str,
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry { name: "zero", params: "dim", prox: "closed form: identity" },
    CatalogEntry { name: "quadratic", params: "Q (PSD), b, c", prox: "closed form: (I + lQ)^-1 (x - l b)" },
    CatalogEntry { name: "half-sq-norm", params: "dim", prox: "closed form: x / (1 + l)" },
    CatalogEntry { name: "abs-sum", params: "dim, weight", prox: "closed form: soft threshold" },
    CatalogEntry { name: "eucl-norm", params: "dim, weight", prox: "closed form: block shrinkage" },
    CatalogEntry { name: "indicator-box", params: "lo, hi", prox: "closed form: clamp" },
    CatalogEntry { name: "indicator-ball", params: "center, radius", prox: "closed form: projection" },
    CatalogEntry { name: "huber", params: "dim, delta", prox: "closed form: per coordinate" },
    CatalogEntry {
        name: "perturbed",
        params: "base, sigma in (0, 1)",
        prox: "closed form at l = 1: (1 - sigma) * prox of base; numeric otherwise",
    },
    CatalogEntry { name: "shifted", params: "base, c", prox: "same as base" },
    CatalogEntry { name: "regularized", params: "base, mu > 0", prox: "prox of base at l / (1 + l mu), when available" },
];

/// Entries whose name contains `filter`; an empty filter keeps everything.
pub fn list_catalog(filter: &str) -> Vec<&'static CatalogEntry> {
    CATALOG.iter().filter(|e| e.name.contains(filter)).collect()
}
