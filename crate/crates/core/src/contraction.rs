//! Contractions arbitrarily close to a given prox.
//!
//! For `f` and `σ ∈ (0, 1)` the function
//! `g(x) = σ/(1-σ) ||x||^2/2 + (1-σ) f(x/(1-σ))` satisfies `P_1 g = (1-σ) P_1 f`, a contraction,
//! and `∂g = σ/(1-σ) Id + ∂f ∘ (Id/(1-σ))` is strongly monotone. If `||P_1 f|| <= M` on the ball
//! of radius `N`, every shell sup up to `N` is at most `σ M`, so `d(∂f, ∂g) <= σ M + 2^{-N}`.

use serde::Serialize;

use crate::catalog::ConvexFunction;
use crate::error::{Error, Result};
use crate::linalg;
use crate::metric::{self, MetricEstimate, ProbeSpec};
use crate::operator::VectorMap;
use crate::par;
use crate::prox::prox_operator;

/// Upper limit on the chosen `σ`.
pub const SIGMA_CAP: f64 = 0.5;
const SIGMA_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub f: ConvexFunction,
    pub sigma: f64,
}

impl PerturbationSpec {
    pub fn new(f: ConvexFunction, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(Error::InvalidParameter(format!("sigma must lie in (0, 1), got {sigma}")));
        }
        Ok(PerturbationSpec { f, sigma })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionPlan {
    #[serde(skip)]
    pub f: ConvexFunction,
    #[serde(skip)]
    pub g: ConvexFunction,
    pub function: String,
    pub sigma: f64,
    /// Lipschitz constant `1 - σ` of `P_1 g`.
    pub contraction_factor: f64,
    pub m_bound: Option<f64>,
    pub target_eps: Option<f64>,
    pub realized: Option<MetricEstimate>,
}

impl ContractionPlan {
    /// `realized.upper < target_eps`, when both are present.
    pub fn achieved(&self) -> Option<bool> {
        match (&self.realized, self.target_eps) {
            (Some(m), Some(eps)) => Some(m.upper < eps),
            _ => None,
        }
    }
}

pub fn perturb(spec: &PerturbationSpec) -> ContractionPlan {
    let g = ConvexFunction::perturbed(spec.f.clone(), spec.sigma)
        .expect("PerturbationSpec holds a valid sigma");
    ContractionPlan {
        function: spec.f.label(),
        f: spec.f.clone(),
        g,
        sigma: spec.sigma,
        contraction_factor: 1.0 - spec.sigma,
        m_bound: None,
        target_eps: None,
        realized: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundProbe {
    /// `||P_1 f(0)|| + radius`, valid because `P_1 f` is nonexpansive.
    Coarse,
    /// Mesh of covering radius `h`; the result is `min(coarse, max over mesh + h)`.
    Mesh { h: f64 },
}

/// Certified upper bound on `sup_{||x|| <= radius} ||P_1 f(x)||`.
pub fn m_bound(f: &ConvexFunction, radius: f64, probe: &BoundProbe) -> Result<f64> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    let t = prox_operator(f, 1.0)?;
    let (p0, e0) = t.apply_certified(&vec![0.0; f.dim()]);
    let coarse = linalg::norm(&p0) + e0 + radius;
    match *probe {
        BoundProbe::Coarse => Ok(coarse),
        BoundProbe::Mesh { h } => {
            let pts = metric::mesh_points(f.dim(), radius, h)?;
            let top = par::map_slice(&pts, |x| {
                let (y, e) = t.apply_certified(x);
                linalg::norm(&y) + e
            })
            .into_iter()
            .fold(0.0, f64::max);
            Ok(coarse.min(top + h))
        }
    }
}

/// Picks `σ = min(1/2, ε / (2M))` with `M` the coarse bound on the ball of radius `truncation`,
/// builds `g`, and measures the realized distance.
pub fn choose_sigma(
    f: &ConvexFunction,
    eps: f64,
    truncation: usize,
    probe: &ProbeSpec,
) -> Result<ContractionPlan> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1], got {eps}")));
    }
    if truncation == 0 {
        return Err(Error::InvalidParameter("truncation N must be at least 1".into()));
    }
    let m = m_bound(f, truncation as f64, &BoundProbe::Coarse)?;
    let sigma = if m == 0.0 {
        SIGMA_CAP
    } else {
        SIGMA_CAP.min(eps / (2.0 * m + SIGMA_GUARD))
    };
    let mut plan = perturb(&PerturbationSpec::new(f.clone(), sigma)?);
    plan.m_bound = Some(m);
    plan.target_eps = Some(eps);
    plan.realized = Some(metric::metric(f, &plan.g, truncation, probe)?);
    Ok(plan)
}
