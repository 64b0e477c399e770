//! Proximal mappings `P_λ f(x) = argmin_y f(y) + ||y - x||^2 / (2λ)` and Moreau envelopes.
//!
//! Every catalog node has a closed form except `Perturbed` at `λ != 1` (and anything built on
//! top of it), which goes through a forward-backward solver. The prox objective is
//! `1/λ`-strongly convex, so any subgradient `g` of it at `y` gives `||y - y*|| <= λ ||g||`;
//! that bound is both the stopping rule and the reported accuracy.

use std::fmt;

use serde::Serialize;

use crate::catalog::{ConvexFunction, Node};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, norm};
use crate::operator::VectorMap;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, Copy)]
pub struct ProxQuery<'a> {
    pub f: &'a ConvexFunction,
    pub lambda: f64,
    pub x: &'a [f64],
}

impl<'a> ProxQuery<'a> {
    pub fn new(f: &'a ConvexFunction, lambda: f64, x: &'a [f64]) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        check_dim(f.dim(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("prox-center must be finite".into()));
        }
        Ok(ProxQuery { f, lambda, x })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProxMethod {
    ClosedForm,
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    pub y: Vec<f64>,
    /// `e_λ f(x)`
    pub envelope: f64,
    pub method: ProxMethod,
    /// Guaranteed bound on the distance to the exact prox point (0 for closed forms).
    pub accuracy: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Skip the closed form and always run the solver.
    pub force_numeric: bool,
}

impl Default for ProxOptions {
    fn default() -> Self {
        ProxOptions {
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            force_numeric: false,
        }
    }
}

pub fn prox(q: ProxQuery<'_>) -> Result<ProxResult> {
    prox_with(q, &ProxOptions::default())
}

pub fn prox_with(q: ProxQuery<'_>, opts: &ProxOptions) -> Result<ProxResult> {
    if !opts.force_numeric {
        if let Some(y) = closed_form(q.f, q.lambda, q.x) {
            let envelope = q.f.value(&y) + linalg::dist(&y, q.x).powi(2) / (2.0 * q.lambda);
            return Ok(ProxResult {
                y,
                envelope,
                method: ProxMethod::ClosedForm,
                accuracy: 0.0,
                iterations: 0,
            });
        }
    }
    forward_backward(q.f, q.lambda, q.x, opts)
}

/// `e_λ f(x)`.
pub fn moreau(q: ProxQuery<'_>) -> Result<f64> {
    prox(q).map(|r| r.envelope)
}

/// `dist(0, ∂[f + ||· - x||^2/(2λ)](y))`: zero exactly at the prox point.
pub fn optimality_residual(f: &ConvexFunction, lambda: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let s = f.subdifferential(y)?;
    let shift = linalg::scale(&linalg::sub(y, x), 1.0 / lambda);
    Ok(s.translate(&shift).dist_to_zero())
}

/// Whether `P_λ f` has a closed form in this crate.
pub fn has_closed_form(f: &ConvexFunction, lambda: f64) -> bool {
    closed_form(f, lambda, &vec![0.0; f.dim()]).is_some()
}

/// Best available prox point; nonconvergence falls back to the solver's best iterate.
pub(crate) fn closed_or_numeric(f: &ConvexFunction, lambda: f64, x: &[f64]) -> Vec<f64> {
    closed_form(f, lambda, x).unwrap_or_else(|| {
        match forward_backward(f, lambda, x, &ProxOptions::default()) {
            Ok(r) => r.y,
            Err(Error::NonConvergence { best, .. }) => best,
            Err(e) => panic!("prox of a validated function failed: {e}"),
        }
    })
}

pub(crate) fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn closed_form(f: &ConvexFunction, lambda: f64, x: &[f64]) -> Option<Vec<f64>> {
    Some(match f.node() {
        Node::Zero => x.to_vec(),
        Node::Quadratic(q) => {
            let v = linalg::axpy(x, -lambda, q.linear());
            q.shifted_inverse_apply(lambda, &v)
        }
        Node::Perturbed { base, sigma } => {
            if lambda != 1.0 {
                return None;
            }
            linalg::scale(&closed_form(base, 1.0, x)?, 1.0 - sigma)
        }
        Node::Shifted { base, .. } => closed_form(base, lambda, x)?,
        Node::Regularized { base, mu } => {
            let k = 1.0 + lambda * mu;
            closed_form(base, lambda / k, &linalg::scale(x, 1.0 / k))?
        }
        _ => leaf_prox(f, lambda, x),
    })
}

// Forward-backward splitting. Each node splits into a smooth part s (gradient, Lipschitz
// constant, strong convexity modulus) and a part h whose prox is available at any step.

fn smooth_grad(f: &ConvexFunction, y: &[f64]) -> Vec<f64> {
    match f.node() {
        Node::Quadratic(q) => q.gradient(y),
        Node::Huber { delta } => y.iter().map(|t| t.clamp(-delta, *delta)).collect(),
        Node::Shifted { base, .. } => smooth_grad(base, y),
        Node::Regularized { base, mu } => linalg::axpy(&smooth_grad(base, y), *mu, y),
        Node::Perturbed { base, sigma } => {
            let s = 1.0 - sigma;
            linalg::axpy(&smooth_grad(base, &linalg::scale(y, 1.0 / s)), sigma / s, y)
        }
        _ => vec![0.0; y.len()],
    }
}

/// `(L, mu)` of the smooth part.
fn smooth_bounds(f: &ConvexFunction) -> (f64, f64) {
    match f.node() {
        Node::Quadratic(q) => (q.max_eigenvalue(), q.min_eigenvalue()),
        Node::Huber { .. } => (1.0, 0.0),
        Node::Shifted { base, .. } => smooth_bounds(base),
        Node::Regularized { base, mu } => {
            let (l, m) = smooth_bounds(base);
            (l + mu, m + mu)
        }
        Node::Perturbed { base, sigma } => {
            let s = 1.0 - sigma;
            let (l, m) = smooth_bounds(base);
            (sigma / s + l / s, sigma / s + m / s)
        }
        _ => (0.0, 0.0),
    }
}

/// Closed-form prox of `t * f` for the leaf nodes.
fn leaf_prox(f: &ConvexFunction, t: f64, v: &[f64]) -> Vec<f64> {
    match f.node() {
        Node::AbsSum { weight } => v.iter().map(|x| soft_threshold(*x, t * weight)).collect(),
        Node::EuclNorm { weight } => {
            let r = norm(v);
            let k = t * weight;
            if r <= k {
                vec![0.0; v.len()]
            } else {
                linalg::scale(v, 1.0 - k / r)
            }
        }
        Node::IndicatorBox { lo, hi } => v
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(x, (l, h))| x.clamp(*l, *h))
            .collect(),
        Node::IndicatorBall { center, radius } => linalg::project_ball(v, center, *radius),
        Node::Huber { delta } => v
            .iter()
            .map(|x| {
                if x.abs() <= delta * (1.0 + t) {
                    x / (1.0 + t)
                } else {
                    x - t * delta * x.signum()
                }
            })
            .collect(),
        _ => unreachable!("not a leaf node"),
    }
}

/// Prox of `t * h` at `v`, `h` being the nonsmooth part of `f` in the forward-backward split.
fn split_prox(f: &ConvexFunction, t: f64, v: &[f64]) -> Vec<f64> {
    match f.node() {
        Node::Zero | Node::Quadratic(_) | Node::Huber { .. } => v.to_vec(),
        Node::Shifted { base, .. } | Node::Regularized { base, .. } => split_prox(base, t, v),
        Node::Perturbed { base, sigma } => {
            // h(y) = (1-σ) h_b(y/(1-σ))  ⟹  prox_{t h}(v) = (1-σ) prox_{t/(1-σ) h_b}(v/(1-σ))
            let s = 1.0 - sigma;
            linalg::scale(&split_prox(base, t / s, &linalg::scale(v, 1.0 / s)), s)
        }
        _ => leaf_prox(f, t, v),
    }
}

fn forward_backward(f: &ConvexFunction, lambda: f64, x: &[f64], opts: &ProxOptions) -> Result<ProxResult> {
    let (lf, mf) = smooth_bounds(f);
    let l = lf + 1.0 / lambda;
    let mu = mf + 1.0 / lambda;
    let step = 1.0 / l;
    let grad = |y: &[f64]| linalg::axpy(&smooth_grad(f, y), 1.0 / lambda, &linalg::sub(y, x));

    let mut y = x.to_vec();
    let mut g_y = grad(&y);
    let mut best = (f64::INFINITY, y.clone());
    for it in 1..=opts.max_iters {
        let fwd = linalg::axpy(&y, -step, &g_y);
        let next = split_prox(f, step, &fwd);
        let g_next = grad(&next);
        // (y - y+)/t - ∇S(y) + ∇S(y+) ∈ ∂φ(y+)
        let cert: Vec<f64> = (0..y.len())
            .map(|j| (y[j] - next[j]) / step - g_y[j] + g_next[j])
            .collect();
        let accuracy = lambda * norm(&cert);
        if accuracy < best.0 {
            best = (accuracy, next.clone());
        }
        if accuracy <= opts.tol {
            let envelope = f.value(&next) + linalg::dist(&next, x).powi(2) / (2.0 * lambda);
            return Ok(ProxResult {
                y: next,
                envelope,
                method: ProxMethod::Numeric,
                accuracy,
                iterations: it,
            });
        }
        debug_assert!(mu > 0.0);
        y = next;
        g_y = g_next;
    }
    Err(Error::NonConvergence {
        best: best.1,
        accuracy: best.0,
        iterations: opts.max_iters,
    })
}

/// `P_λ f` as a reusable map.
#[derive(Clone)]
pub struct ProxOperator {
    f: ConvexFunction,
    lambda: f64,
    opts: ProxOptions,
}

pub fn prox_operator(f: &ConvexFunction, lambda: f64) -> Result<ProxOperator> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    Ok(ProxOperator {
        f: f.clone(),
        lambda,
        opts: ProxOptions::default(),
    })
}

impl ProxOperator {
    pub fn with_options(mut self, opts: ProxOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn function(&self) -> &ConvexFunction {
        &self.f
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eval(&self, x: &[f64]) -> Result<ProxResult> {
        prox_with(ProxQuery::new(&self.f, self.lambda, x)?, &self.opts)
    }
}

impl fmt::Debug for ProxOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P_{}[{}]", self.lambda, self.f.label())
    }
}

impl VectorMap for ProxOperator {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    /// Falls back to the best solver iterate if certification fails.
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.apply_certified(x).0
    }

    fn apply_certified(&self, x: &[f64]) -> (Vec<f64>, f64) {
        match self.eval(x) {
            Ok(r) => (r.y, r.accuracy),
            Err(Error::NonConvergence { best, accuracy, .. }) => (best, accuracy),
            Err(e) => panic!("prox operator applied to invalid input: {e}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(f: &ConvexFunction, lambda: f64, x: &[f64]) -> ProxResult {
        prox(ProxQuery::new(f, lambda, x).unwrap()).unwrap()
    }

    fn numeric(f: &ConvexFunction, lambda: f64, x: &[f64]) -> ProxResult {
        let opts = ProxOptions { force_numeric: true, ..Default::default() };
        prox_with(ProxQuery::new(f, lambda, x).unwrap(), &opts).unwrap()
    }

    #[test]
    fn zero_prox_is_identity() {
        let r = p(&ConvexFunction::zero(2).unwrap(), 1.0, &[3.0, -4.0]);
        assert_eq!(r.y, vec![3.0, -4.0]);
        assert_eq!(r.method, ProxMethod::ClosedForm);
        assert_eq!(r.envelope, 0.0);
    }

    #[test]
    fn soft_threshold_example() {
        let r = p(&ConvexFunction::abs_sum(1, 1.0).unwrap(), 1.0, &[3.0]);
        assert_eq!(r.y, vec![2.0]);
        assert_eq!(r.envelope, 2.5);
    }

    #[test]
    fn quadratic_example() {
        let f = ConvexFunction::half_sq_norm(1).unwrap();
        assert!((p(&f, 1.0, &[8.0]).y[0] - 4.0).abs() < 1e-15);
        for x in [-2.0, 1.0, 5.0] {
            assert!((p(&f, 1.0, &[x]).envelope - x * x / 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn perturbed_unit_prox_scales_base() {
        let g = ConvexFunction::perturbed(ConvexFunction::zero(1).unwrap(), 0.5).unwrap();
        let r = p(&g, 1.0, &[6.0]);
        assert_eq!(r.y, vec![3.0]);
        assert_eq!(r.method, ProxMethod::ClosedForm);
        let n = numeric(&g, 1.0, &[6.0]);
        assert!((n.y[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn perturbed_off_unit_parameter_goes_numeric() {
        let g = ConvexFunction::perturbed(ConvexFunction::abs_sum(1, 1.0).unwrap(), 0.1).unwrap();
        let r = p(&g, 2.0, &[3.0]);
        assert_eq!(r.method, ProxMethod::Numeric);
        assert!(r.accuracy <= DEFAULT_TOL);
        // objective: (1/9) y^2/2 + |y| + (y - 3)^2 / 4; for y > 0 stationarity gives
        // y/9 + 1 + (y - 3)/2 = 0  ⟹  y = 9/11
        assert!((r.y[0] - 9.0 / 11.0).abs() < 1e-9);
        assert!(!has_closed_form(&g, 2.0));
        assert!(has_closed_form(&g, 1.0));
    }

    #[test]
    fn regularized_prox_closed_form() {
        let f = ConvexFunction::regularized(ConvexFunction::zero(1).unwrap(), 0.25).unwrap();
        // argmin y^2/8 + (y - x)^2/2  ⟹  y = x / 1.25
        assert!((p(&f, 1.0, &[5.0]).y[0] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn nonconvergence_carries_best_iterate() {
        let q = ConvexFunction::quadratic(vec![vec![10.0, 0.0], vec![0.0, 0.1]], vec![1.0, 1.0], 0.0)
            .unwrap();
        let g = ConvexFunction::perturbed(q, 0.3).unwrap();
        let opts = ProxOptions { tol: 0.0, max_iters: 3, force_numeric: true };
        match prox_with(ProxQuery::new(&g, 2.0, &[4.0, -1.0]).unwrap(), &opts) {
            Err(Error::NonConvergence { best, iterations, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(best.len(), 2);
            }
            other => panic!("expected nonconvergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_queries() {
        let f = ConvexFunction::zero(2).unwrap();
        assert!(ProxQuery::new(&f, 0.0, &[1.0, 2.0]).is_err());
        assert!(ProxQuery::new(&f, 1.0, &[1.0]).is_err());
        assert!(prox_operator(&f, -1.0).is_err());
    }

    #[test]
    fn operator_examples() {
        let t = prox_operator(&ConvexFunction::abs_sum(1, 1.0).unwrap(), 1.0).unwrap();
        let d = (t.apply(&[3.0])[0] - t.apply(&[1.5])[0]).abs();
        assert_eq!(d, 1.5);
        assert!(d <= 3.0 - 1.5);
        let h = prox_operator(&ConvexFunction::half_sq_norm(1).unwrap(), 1.0).unwrap();
        assert_eq!(h.apply(&[3.0]), vec![1.5]);
    }

    #[test]
    fn closed_forms_are_optimal() {
        for f in crate::catalog::standard_2d() {
            for lambda in [0.5, 1.0, 2.0] {
                for x in [[0.3, -2.0], [4.0, 1.0], [-0.2, 0.1]] {
                    let r = p(&f, lambda, &x);
                    let res = optimality_residual(&f, lambda, &x, &r.y).unwrap();
                    let bound = if r.method == ProxMethod::ClosedForm { 1e-9 } else { r.accuracy / lambda + 1e-9 };
                    assert!(res <= bound, "{} λ={lambda} x={x:?}: residual {res}", f.label());
                }
            }
        }
    }
}
