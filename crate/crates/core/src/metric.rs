//! The distance between subdifferentials, measured through unit proxes:
//!
//! `d(∂f, ∂g) = Σ_i 2^{-i} a(sup_{||x|| <= i} ||P_1 f(x) - P_1 g(x)||)`, `a(t) = t / (1 + t)`.
//!
//! The same number is the distance between the classes `f + R`, `g + R` and between the
//! operators `P_1 f`, `P_1 g`; the three entry points share one implementation.
//!
//! Each shell sup is enclosed in an interval. On a mesh with covering radius `h` the difference
//! map `x ↦ T1 x - T2 x` is `L`-Lipschitz (`L = 2` for two nonexpansive maps), so the sup lies in
//! `[max over mesh, max over mesh + L h]`. Truncating after `N` shells costs at most `2^{-N}`.

use serde::Serialize;

use crate::catalog::{ConvexFunction, Node};
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::operator::VectorMap;
use crate::prox::prox_operator;
use crate::{par, sampling};

pub const DEFAULT_TRUNCATION: usize = 20;
pub const DEFAULT_MESH_1D: f64 = 1e-3;
pub const DEFAULT_MESH_2D: f64 = 0.05;
pub const DEFAULT_SAMPLES_PER_RADIUS: usize = 4096;
/// Lipschitz constant of the difference of two nonexpansive maps.
pub const NONEXPANSIVE_DIFF_LIPSCHITZ: f64 = 2.0;
/// Mesh sizes below this many points per shell are refused.
pub const MAX_MESH_POINTS: usize = 50_000_000;

/// `a(t) = t / (1 + t)`, with `a(+inf) = 1`.
pub fn gauge(t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::InvalidParameter(format!("gauge needs t >= 0, got {t}")));
    }
    Ok(gauge_unchecked(t))
}

fn gauge_unchecked(t: f64) -> f64 {
    if t.is_infinite() {
        1.0
    } else {
        t / (1.0 + t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ProbeMode {
    /// Every point of the ball is within `h` of a sample.
    Mesh { h: f64 },
    /// `samples_per_radius * i` uniform samples in `B_i(0)`; no upper certificate.
    Random { samples_per_radius: usize, seed: u64 },
}

/// How to probe each shell of the metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProbeSpec {
    Mesh { h: f64 },
    Random { samples_per_radius: usize, seed: u64 },
    /// Mesh for `n <= 2` (h = 1e-3 in 1-D, 0.05 in 2-D), seeded random sampling otherwise.
    Auto { seed: u64 },
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec::Auto { seed: 0 }
    }
}

impl ProbeSpec {
    pub fn resolve(&self, dim: usize) -> ProbeMode {
        match *self {
            ProbeSpec::Mesh { h } => ProbeMode::Mesh { h },
            ProbeSpec::Random { samples_per_radius, seed } => ProbeMode::Random { samples_per_radius, seed },
            ProbeSpec::Auto { seed } => match dim {
                1 => ProbeMode::Mesh { h: DEFAULT_MESH_1D },
                2 => ProbeMode::Mesh { h: DEFAULT_MESH_2D },
                _ => ProbeMode::Random {
                    samples_per_radius: DEFAULT_SAMPLES_PER_RADIUS,
                    seed,
                },
            },
        }
    }
}

/// Sample set for the ball `B_i(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallProbe {
    pub radius_index: usize,
    pub mode: ProbeMode,
    pub points: Vec<Vec<f64>>,
}

impl BallProbe {
    pub fn new(dim: usize, radius_index: usize, mode: ProbeMode) -> Result<Self> {
        if radius_index == 0 {
            return Err(Error::InvalidParameter("shell index starts at 1".into()));
        }
        let points = match mode {
            ProbeMode::Mesh { h } => mesh_points(dim, radius_index as f64, h)?,
            ProbeMode::Random { samples_per_radius, seed } => {
                let r = radius_index as f64;
                let shell_seed = seed ^ (radius_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                sampling::chunked(shell_seed, samples_per_radius * radius_index, |rng| {
                    sampling::uniform_in_ball(rng, dim, r)
                })
            }
        };
        Ok(BallProbe { radius_index, mode, points })
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.len())
    }
}

/// Cubic grid of spacing `2h/√n` over `[-r, r]^n`; grid points within `r + h` of the origin are
/// kept, those outside the ball are projected onto it. Projection onto the ball is
/// nonexpansive, so every point of `B_r(0)` stays within `h` of the set.
pub(crate) fn mesh_points(dim: usize, r: f64, h: f64) -> Result<Vec<Vec<f64>>> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("mesh size must be positive, got {h}")));
    }
    let step = 2.0 * h / (dim as f64).sqrt();
    let per_axis = (2.0 * r / step).ceil() as usize + 1;
    let total = (per_axis as f64).powi(dim as i32);
    if total > MAX_MESH_POINTS as f64 {
        return Err(Error::InvalidParameter(format!(
            "mesh with h={h} on a ball of radius {r} in R^{dim} needs {total:.0} points"
        )));
    }
    let axis: Vec<f64> = (0..per_axis).map(|k| (-r + k as f64 * step).min(r)).collect();
    let origin = vec![0.0; dim];
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        let p: Vec<f64> = idx.iter().map(|&k| axis[k]).collect();
        let n = linalg::norm(&p);
        if n <= r {
            out.push(p);
        } else if n <= r + h {
            out.push(linalg::project_ball(&p, &origin, r));
        }
        let mut j = 0;
        loop {
            if j == dim {
                return Ok(out);
            }
            idx[j] += 1;
            if idx[j] < per_axis {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// Enclosure of one shell sup.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellInterval {
    pub radius: usize,
    pub lower: f64,
    /// `+inf` when the probe gives no upper certificate.
    pub upper: f64,
    pub heuristic: bool,
    /// Sample attaining the largest difference.
    pub argmax: Vec<f64>,
}

/// Encloses `sup_{x ∈ B_i(0)} ||T1 x - T2 x||`. `lipschitz` bounds the Lipschitz constant of
/// `T1 - T2`; use [`NONEXPANSIVE_DIFF_LIPSCHITZ`] for two nonexpansive maps.
pub fn shell_sup<A, B>(t1: &A, t2: &B, probe: &BallProbe, lipschitz: f64) -> Result<ShellInterval>
where
    A: VectorMap + ?Sized,
    B: VectorMap + ?Sized,
{
    check_dim(t1.dim(), t2.dim())?;
    if let Some(p) = probe.points.first() {
        check_dim(t1.dim(), p.len())?;
    }
    let vals = par::map_slice(&probe.points, |x| {
        let (a, ea) = t1.apply_certified(x);
        let (b, eb) = t2.apply_certified(x);
        let d = linalg::dist(&a, &b);
        (d - ea - eb, d + ea + eb)
    });
    let mut lower = 0.0f64;
    let mut top = 0.0f64;
    let mut arg = 0usize;
    for (k, (lo, hi)) in vals.iter().enumerate() {
        if *hi > top {
            top = *hi;
            arg = k;
        }
        lower = lower.max(*lo);
    }
    let argmax = probe.points.get(arg).cloned().unwrap_or_default();
    Ok(match probe.mode {
        ProbeMode::Mesh { h } => ShellInterval {
            radius: probe.radius_index,
            lower,
            upper: top + lipschitz * h,
            heuristic: false,
            argmax,
        },
        ProbeMode::Random { .. } => ShellInterval {
            radius: probe.radius_index,
            lower,
            upper: f64::INFINITY,
            heuristic: true,
            argmax,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricEstimate {
    pub lower: f64,
    pub upper: f64,
    pub truncation: usize,
    pub mode: ProbeMode,
    pub seed: Option<u64>,
    /// Lipschitz constant used for the mesh error of `T1 - T2`.
    pub lipschitz: f64,
    pub heuristic: bool,
    pub shells: Vec<ShellInterval>,
}

impl MetricEstimate {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// `ρ(T1, T2)` for two nonexpansive maps; the other entry points route here.
pub fn operator_metric<A, B>(
    t1: &A,
    t2: &B,
    truncation: usize,
    probe: &ProbeSpec,
    lipschitz: f64,
) -> Result<MetricEstimate>
where
    A: VectorMap + ?Sized,
    B: VectorMap + ?Sized,
{
    check_dim(t1.dim(), t2.dim())?;
    if truncation == 0 {
        return Err(Error::InvalidParameter("truncation N must be at least 1".into()));
    }
    let mode = probe.resolve(t1.dim());
    let mut shells = Vec::with_capacity(truncation);
    for i in 1..=truncation {
        let ball = BallProbe::new(t1.dim(), i, mode)?;
        shells.push(shell_sup(t1, t2, &ball, lipschitz)?);
    }
    let mut lower = 0.0;
    let mut upper = 0.0;
    let mut w = 1.0;
    for s in &shells {
        w *= 0.5;
        lower += w * gauge_unchecked(s.lower);
        upper += w * gauge_unchecked(s.upper);
    }
    upper += w;
    let seed = match mode {
        ProbeMode::Random { seed, .. } => Some(seed),
        ProbeMode::Mesh { .. } => None,
    };
    Ok(MetricEstimate {
        lower,
        upper: upper.min(1.0),
        truncation,
        mode,
        seed,
        lipschitz,
        heuristic: shells.iter().any(|s| s.heuristic),
        shells,
    })
}

/// Structural Lipschitz bound for `P_1 f - P_1 g`: `σ` when one function is the perturbation of
/// the other (the difference is `σ P_1 f`), else 2.
pub fn difference_lipschitz(f: &ConvexFunction, g: &ConvexFunction) -> f64 {
    let (a, b) = (f.normalized(), g.normalized());
    match (a.node(), b.node()) {
        (Node::Perturbed { base, sigma }, _) if **base == b => *sigma,
        (_, Node::Perturbed { base, sigma }) if **base == a => *sigma,
        _ => NONEXPANSIVE_DIFF_LIPSCHITZ,
    }
}

/// `d(∂f, ∂g)`.
pub fn metric(
    f: &ConvexFunction,
    g: &ConvexFunction,
    truncation: usize,
    probe: &ProbeSpec,
) -> Result<MetricEstimate> {
    check_dim(f.dim(), g.dim())?;
    let tf = prox_operator(f, 1.0)?;
    let tg = prox_operator(g, 1.0)?;
    operator_metric(&tf, &tg, truncation, probe, difference_lipschitz(f, g))
}

/// `d̃(f + R, g + R)`: identical to [`metric`] on any representatives.
pub fn class_metric(
    f: &ConvexFunction,
    g: &ConvexFunction,
    truncation: usize,
    probe: &ProbeSpec,
) -> Result<MetricEstimate> {
    metric(&f.normalized(), &g.normalized(), truncation, probe)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub functions: Vec<String>,
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
    /// `min(lower, 1 - upper)` over all pairs.
    pub bounds_margin: f64,
    /// Largest diagonal lower bound (must be 0).
    pub diagonal_max: f64,
    /// Largest `|lower(f,g) - lower(g,f)| + |upper(f,g) - upper(g,f)|`.
    pub symmetry_gap: f64,
    /// `min upper(f,h) + upper(h,g) - lower(f,g)` over all triples.
    pub triangle_margin: f64,
    pub worst_margin: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const AXIOM_TOL: f64 = 1e-6;

/// All ordered pairs `d(sample[i], sample[j])`, row-major.
pub fn metric_table(
    sample: &[ConvexFunction],
    truncation: usize,
    probe: &ProbeSpec,
) -> Result<Vec<Vec<MetricEstimate>>> {
    sample
        .iter()
        .map(|f| sample.iter().map(|g| metric(f, g, truncation, probe)).collect())
        .collect()
}

/// Checks nonnegativity and the unit bound, zero diagonal, symmetry and the triangle inequality
/// on every pair/triple of `sample`, using the enclosures.
pub fn verify_metric_axioms(
    sample: &[ConvexFunction],
    truncation: usize,
    probe: &ProbeSpec,
) -> Result<AxiomReport> {
    if sample.len() < 3 {
        return Err(Error::InvalidParameter("axiom check needs at least 3 functions".into()));
    }
    let table = metric_table(sample, truncation, probe)?;
    let labels: Vec<String> = sample.iter().map(|f| f.label()).collect();
    Ok(axiom_report(labels, &table))
}

/// Axiom margins of a precomputed square table of enclosures.
pub fn axiom_report(functions: Vec<String>, table: &[Vec<MetricEstimate>]) -> AxiomReport {
    let k = table.len();
    let lower: Vec<Vec<f64>> = table.iter().map(|r| r.iter().map(|e| e.lower).collect()).collect();
    let upper: Vec<Vec<f64>> = table.iter().map(|r| r.iter().map(|e| e.upper).collect()).collect();
    let mut bounds_margin = f64::INFINITY;
    let mut diagonal_max = 0.0f64;
    let mut symmetry_gap = 0.0f64;
    let mut triangle_margin = f64::INFINITY;
    for i in 0..k {
        diagonal_max = diagonal_max.max(lower[i][i]);
        for j in 0..k {
            bounds_margin = bounds_margin.min(lower[i][j]).min(1.0 - upper[i][j]);
            symmetry_gap = symmetry_gap
                .max((lower[i][j] - lower[j][i]).abs() + (upper[i][j] - upper[j][i]).abs());
            for (via, row) in upper[i].iter().zip(&upper) {
                triangle_margin = triangle_margin.min(via + row[j] - lower[i][j]);
            }
        }
    }
    let worst_margin = bounds_margin
        .min(0.0 - diagonal_max)
        .min(0.0 - symmetry_gap)
        .min(triangle_margin);
    AxiomReport {
        functions,
        lower,
        upper,
        bounds_margin,
        diagonal_max,
        symmetry_gap,
        triangle_margin,
        worst_margin,
        tolerance: AXIOM_TOL,
        passed: worst_margin >= -AXIOM_TOL,
    }
}
