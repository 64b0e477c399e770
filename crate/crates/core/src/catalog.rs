//! Catalog of proper, lsc, convex functions on R^n.
//!
//! Every value is built through a validating constructor, so a `ConvexFunction` that exists is
//! convex. Nodes compose: `Perturbed` is the strongly convex function whose unit prox is
//! `(1 - sigma)` times the prox of its base, `Shifted` adds a constant (same equivalence class),
//! and `Regularized` adds `mu/2 ||x||^2`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, norm};

/// Smallest eigenvalue accepted for the Hessian of a quadratic.
pub const PSD_FLOOR: f64 = -1e-12;
/// Relative slack used when testing membership in an indicator's set.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexFunction {
    node: Node,
    dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Zero,
    Quadratic(Quadratic),
    /// `w * sum_j |x_j|`
    AbsSum { weight: f64 },
    /// `w * ||x||`
    EuclNorm { weight: f64 },
    IndicatorBox { lo: Vec<f64>, hi: Vec<f64> },
    IndicatorBall { center: Vec<f64>, radius: f64 },
    /// `sum_j h(x_j)`, `h(t) = t^2/2` for `|t| <= delta`, `delta (|t| - delta/2)` otherwise.
    Huber { delta: f64 },
    /// `sigma/(1-sigma) ||x||^2/2 + (1-sigma) base(x/(1-sigma))`
    Perturbed { base: Box<ConvexFunction>, sigma: f64 },
    /// `base(x) + constant`
    Shifted { base: Box<ConvexFunction>, constant: f64 },
    /// `base(x) + mu/2 ||x||^2`
    Regularized { base: Box<ConvexFunction>, mu: f64 },
}

/// `x ↦ ½ xᵀQx + bᵀx + c` with `Q` symmetric PSD. The eigendecomposition is kept so proxes at
/// any parameter are a diagonal scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    q: DMatrix<f64>,
    b: Vec<f64>,
    c: f64,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl Quadratic {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn linear(&self) -> &[f64] {
        &self.b
    }
    pub fn constant(&self) -> f64 {
        self.c
    }
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let qx = &self.q * DVector::from_column_slice(x);
        qx.iter().zip(&self.b).map(|(a, b)| a + b).collect()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let qx = &self.q * DVector::from_column_slice(x);
        0.5 * linalg::dot(qx.as_slice(), x) + linalg::dot(&self.b, x) + self.c
    }

    /// `(I + lambda Q)^{-1} v` through the eigenbasis.
    pub(crate) fn shifted_inverse_apply(&self, lambda: f64, v: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(v);
        let mut coords = self.eigenvectors.transpose() * v;
        for (z, d) in coords.iter_mut().zip(&self.eigenvalues) {
            *z /= 1.0 + lambda * d;
        }
        (&self.eigenvectors * coords).as_slice().to_vec()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite_vec(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must have finite entries")))
    }
}

fn nonzero_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::InvalidParameter("dimension must be at least 1".into()))
    } else {
        Ok(())
    }
}

impl ConvexFunction {
    pub fn zero(dim: usize) -> Result<Self> {
        nonzero_dim(dim)?;
        Ok(ConvexFunction { node: Node::Zero, dim })
    }

    /// `½ xᵀQx + bᵀx + c`. `q` is given row-major and must be symmetric PSD.
    pub fn quadratic(q: Vec<Vec<f64>>, b: Vec<f64>, c: f64) -> Result<Self> {
        let n = q.len();
        nonzero_dim(n)?;
        if q.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidParameter("Q must be square".into()));
        }
        check_dim(n, b.len())?;
        finite_vec("b", &b)?;
        if !c.is_finite() {
            return Err(Error::InvalidParameter("c must be finite".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| q[i][j]);
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("Q must have finite entries".into()));
        }
        let scale = m.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if (&m - m.transpose()).iter().any(|v| v.abs() > 1e-12 * scale) {
            return Err(Error::InvalidParameter("Q must be symmetric".into()));
        }
        let sym = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < PSD_FLOOR {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        Ok(ConvexFunction {
            node: Node::Quadratic(Quadratic {
                q: sym,
                b,
                c,
                eigenvalues: eig.eigenvalues.iter().cloned().collect(),
                eigenvectors: eig.eigenvectors,
            }),
            dim: n,
        })
    }

    /// `½ ||x||^2`, i.e. `Quadratic(I, 0, 0)`.
    pub fn half_sq_norm(dim: usize) -> Result<Self> {
        nonzero_dim(dim)?;
        let q = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::quadratic(q, vec![0.0; dim], 0.0)
    }

    pub fn abs_sum(dim: usize, weight: f64) -> Result<Self> {
        nonzero_dim(dim)?;
        positive("weight", weight)?;
        Ok(ConvexFunction { node: Node::AbsSum { weight }, dim })
    }

    pub fn eucl_norm(dim: usize, weight: f64) -> Result<Self> {
        nonzero_dim(dim)?;
        positive("weight", weight)?;
        Ok(ConvexFunction { node: Node::EuclNorm { weight }, dim })
    }

    pub fn indicator_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        nonzero_dim(lo.len())?;
        check_dim(lo.len(), hi.len())?;
        finite_vec("lo", &lo)?;
        finite_vec("hi", &hi)?;
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::InvalidParameter("box requires lo <= hi".into()));
        }
        let dim = lo.len();
        Ok(ConvexFunction { node: Node::IndicatorBox { lo, hi }, dim })
    }

    pub fn indicator_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        nonzero_dim(center.len())?;
        finite_vec("center", &center)?;
        positive("radius", radius)?;
        let dim = center.len();
        Ok(ConvexFunction { node: Node::IndicatorBall { center, radius }, dim })
    }

    pub fn huber(dim: usize, delta: f64) -> Result<Self> {
        nonzero_dim(dim)?;
        positive("delta", delta)?;
        Ok(ConvexFunction { node: Node::Huber { delta }, dim })
    }

    pub fn perturbed(base: ConvexFunction, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(Error::InvalidParameter(format!("sigma must lie in (0, 1), got {sigma}")));
        }
        let dim = base.dim;
        Ok(ConvexFunction { node: Node::Perturbed { base: Box::new(base), sigma }, dim })
    }

    pub fn shifted(base: ConvexFunction, constant: f64) -> Result<Self> {
        if !constant.is_finite() {
            return Err(Error::InvalidParameter("shift must be finite".into()));
        }
        let dim = base.dim;
        Ok(ConvexFunction { node: Node::Shifted { base: Box::new(base), constant }, dim })
    }

    pub fn regularized(base: ConvexFunction, mu: f64) -> Result<Self> {
        positive("mu", mu)?;
        let dim = base.dim;
        Ok(ConvexFunction { node: Node::Regularized { base: Box::new(base), mu }, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    /// Short name of the outermost node.
    pub fn kind(&self) -> &'static str {
        match &self.node {
            Node::Zero => "zero",
            Node::Quadratic(_) => "quadratic",
            Node::AbsSum { .. } => "abs-sum",
            Node::EuclNorm { .. } => "eucl-norm",
            Node::IndicatorBox { .. } => "indicator-box",
            Node::IndicatorBall { .. } => "indicator-ball",
            Node::Huber { .. } => "huber",
            Node::Perturbed { .. } => "perturbed",
            Node::Shifted { .. } => "shifted",
            Node::Regularized { .. } => "regularized",
        }
    }

    /// Human-readable one-line description.
    pub fn label(&self) -> String {
        match &self.node {
            Node::Zero => format!("zero[n={}]", self.dim),
            Node::Quadratic(q) => format!(
                "quadratic[n={}, eig=[{}]]",
                self.dim,
                q.eigenvalues.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(", ")
            ),
            Node::AbsSum { weight } => format!("abs-sum[n={}, w={weight}]", self.dim),
            Node::EuclNorm { weight } => format!("eucl-norm[n={}, w={weight}]", self.dim),
            Node::IndicatorBox { lo, hi } => format!("indicator-box[{lo:?}, {hi:?}]"),
            Node::IndicatorBall { center, radius } => {
                format!("indicator-ball[c={center:?}, r={radius}]")
            }
            Node::Huber { delta } => format!("huber[n={}, delta={delta}]", self.dim),
            Node::Perturbed { base, sigma } => format!("perturbed[{}, sigma={sigma}]", base.label()),
            Node::Shifted { base, constant } => format!("shifted[{}, c={constant}]", base.label()),
            Node::Regularized { base, mu } => format!("regularized[{}, mu={mu}]", base.label()),
        }
    }

    /// The representative of the equivalence class `f + R`: every additive constant is dropped,
    /// including those buried inside composite nodes.
    pub fn normalized(&self) -> ConvexFunction {
        let node = match &self.node {
            Node::Shifted { base, .. } => return base.normalized(),
            Node::Quadratic(q) if q.c != 0.0 => Node::Quadratic(Quadratic { c: 0.0, ..q.clone() }),
            Node::Perturbed { base, sigma } => Node::Perturbed {
                base: Box::new(base.normalized()),
                sigma: *sigma,
            },
            Node::Regularized { base, mu } => Node::Regularized {
                base: Box::new(base.normalized()),
                mu: *mu,
            },
            other => other.clone(),
        };
        ConvexFunction { node, dim: self.dim }
    }

    /// True when the two functions differ by an additive constant (structurally).
    pub fn same_class(&self, other: &ConvexFunction) -> bool {
        self.normalized() == other.normalized()
    }

    /// `f(x)`, with `+inf` outside the domain of indicator nodes.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.value(x))
    }

    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        match &self.node {
            Node::Zero => 0.0,
            Node::Quadratic(q) => q.value(x),
            Node::AbsSum { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            Node::EuclNorm { weight } => weight * norm(x),
            Node::IndicatorBox { lo, hi } => {
                if in_box(x, lo, hi) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Node::IndicatorBall { center, radius } => {
                if linalg::dist(x, center) <= radius * (1.0 + MEMBERSHIP_TOL) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Node::Huber { delta } => x.iter().map(|t| huber(*t, *delta)).sum(),
            Node::Perturbed { base, sigma } => {
                let s = 1.0 - sigma;
                sigma / s * linalg::norm_sq(x) / 2.0 + s * base.value(&linalg::scale(x, 1.0 / s))
            }
            Node::Shifted { base, constant } => base.value(x) + constant,
            Node::Regularized { base, mu } => base.value(x) + mu / 2.0 * linalg::norm_sq(x),
        }
    }

    /// Exact description of `∂f(x)`.
    pub fn subdifferential(&self, x: &[f64]) -> Result<Subdifferential> {
        check_dim(self.dim, x.len())?;
        Ok(self.subdiff(x))
    }

    fn subdiff(&self, x: &[f64]) -> Subdifferential {
        let n = self.dim;
        match &self.node {
            Node::Zero => Subdifferential::point(vec![0.0; n]),
            Node::Quadratic(q) => Subdifferential::point(q.gradient(x)),
            Node::AbsSum { weight } => {
                let w = *weight;
                let lo = x.iter().map(|v| if *v > 0.0 { w } else { -w }).collect();
                let hi = x.iter().map(|v| if *v < 0.0 { -w } else { w }).collect();
                Subdifferential::boxed(vec![0.0; n], lo, hi)
            }
            Node::EuclNorm { weight } => {
                let r = norm(x);
                if r > 0.0 {
                    Subdifferential::point(linalg::scale(x, weight / r))
                } else {
                    Subdifferential::Set {
                        offset: vec![0.0; n],
                        shape: SubgradientShape::Ball { radius: *weight },
                    }
                }
            }
            Node::IndicatorBox { lo, hi } => {
                if !in_box(x, lo, hi) {
                    return Subdifferential::Empty {
                        reason: "point lies outside the box".into(),
                    };
                }
                let mut clo = vec![0.0; n];
                let mut chi = vec![0.0; n];
                for j in 0..n {
                    if x[j] <= lo[j] {
                        clo[j] = f64::NEG_INFINITY;
                    }
                    if x[j] >= hi[j] {
                        chi[j] = f64::INFINITY;
                    }
                }
                Subdifferential::boxed(vec![0.0; n], clo, chi)
            }
            Node::IndicatorBall { center, radius } => {
                let d = linalg::sub(x, center);
                let r = norm(&d);
                if r > radius * (1.0 + MEMBERSHIP_TOL) {
                    Subdifferential::Empty {
                        reason: "point lies outside the ball".into(),
                    }
                } else if r >= radius * (1.0 - MEMBERSHIP_TOL) {
                    Subdifferential::Set {
                        offset: vec![0.0; n],
                        shape: SubgradientShape::Ray { direction: d },
                    }
                } else {
                    Subdifferential::point(vec![0.0; n])
                }
            }
            Node::Huber { delta } => {
                Subdifferential::point(x.iter().map(|t| t.clamp(-delta, *delta)).collect())
            }
            Node::Perturbed { base, sigma } => {
                let s = 1.0 - sigma;
                base.subdiff(&linalg::scale(x, 1.0 / s))
                    .translate(&linalg::scale(x, sigma / s))
            }
            Node::Shifted { base, .. } => base.subdiff(x),
            Node::Regularized { base, mu } => base.subdiff(x).translate(&linalg::scale(x, *mu)),
        }
    }

    /// Exact minimizer structure read off the node.
    pub fn minimizer_info(&self) -> MinimizerInfo {
        let n = self.dim;
        match &self.node {
            Node::Zero => MinimizerInfo::set(MinimizerSet::Everything, 0.0),
            Node::Quadratic(q) => quadratic_minimizers(q),
            Node::AbsSum { .. } | Node::EuclNorm { .. } | Node::Huber { .. } => {
                MinimizerInfo::unique(vec![0.0; n], 0.0)
            }
            Node::IndicatorBox { lo, hi } => {
                if lo == hi {
                    MinimizerInfo::unique(lo.clone(), 0.0)
                } else {
                    MinimizerInfo::set(MinimizerSet::Box { lo: lo.clone(), hi: hi.clone() }, 0.0)
                }
            }
            Node::IndicatorBall { center, radius } => MinimizerInfo::set(
                MinimizerSet::Ball { center: center.clone(), radius: *radius },
                0.0,
            ),
            Node::Shifted { base, constant } => {
                let mut info = base.minimizer_info();
                info.optimal_value = info.optimal_value.map(|v| v + constant);
                info
            }
            Node::Regularized { base, mu } => {
                // 0 ∈ mu x + ∂base(x)  ⟺  x = P_{1/mu} base(0)
                let p = crate::prox::closed_or_numeric(base, 1.0 / mu, &vec![0.0; n]);
                let v = self.value(&p);
                MinimizerInfo::unique(p, v)
            }
            Node::Perturbed { base, sigma } => {
                // argmin = Fix((1 - sigma) P_1 base), a Banach iteration.
                let s = 1.0 - sigma;
                let mut x = vec![0.0; n];
                for _ in 0..2_000_000 {
                    let next = linalg::scale(&crate::prox::closed_or_numeric(base, 1.0, &x), s);
                    let step = linalg::dist(&next, &x);
                    x = next;
                    if step * s / sigma <= 1e-13 * (1.0 + norm(&x)) {
                        break;
                    }
                }
                let v = self.value(&x);
                MinimizerInfo::unique(x, v)
            }
        }
    }

    /// Random element of `∂f(x)`, with unbounded directions truncated at length `span`.
    pub fn sample_subgradient<R: Rng>(&self, x: &[f64], span: f64, rng: &mut R) -> Option<Vec<f64>> {
        self.subdiff(x).sample(span, rng)
    }
}

fn in_box(x: &[f64], lo: &[f64], hi: &[f64]) -> bool {
    x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| *v >= *l && *v <= *h)
}

pub(crate) fn huber(t: f64, delta: f64) -> f64 {
    let a = t.abs();
    if a <= delta {
        0.5 * t * t
    } else {
        delta * (a - 0.5 * delta)
    }
}

fn quadratic_minimizers(q: &Quadratic) -> MinimizerInfo {
    let n = q.b.len();
    let top = q.max_eigenvalue().max(1.0);
    let tol = 1e-12 * top;
    let bscale = 1e-12 * (1.0 + norm(&q.b));
    let v = &q.eigenvectors;
    let bt = v.transpose() * DVector::from_column_slice(&q.b);
    let mut coords = DVector::zeros(n);
    let mut null_dirs = Vec::new();
    for k in 0..n {
        let d = q.eigenvalues[k];
        if d > tol {
            coords[k] = -bt[k] / d;
        } else if bt[k].abs() > bscale {
            return MinimizerInfo {
                kind: MinimizerKind::Empty,
                optimal_value: None,
            };
        } else {
            null_dirs.push(v.column(k).iter().cloned().collect::<Vec<f64>>());
        }
    }
    let p: Vec<f64> = (v * coords).iter().cloned().collect();
    let val = q.value(&p);
    if null_dirs.is_empty() {
        MinimizerInfo::unique(p, val)
    } else {
        MinimizerInfo::set(MinimizerSet::Affine { point: p, directions: null_dirs }, val)
    }
}

/// `offset + S` where `S` is one of a few closed convex shapes.
#[derive(Debug, Clone, PartialEq)]
pub enum Subdifferential {
    Set { offset: Vec<f64>, shape: SubgradientShape },
    Empty { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SubgradientShape {
    Point,
    /// Coordinate intervals; bounds may be infinite.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Centered Euclidean ball.
    Ball { radius: f64 },
    /// `{ t * direction : t >= 0 }`
    Ray { direction: Vec<f64> },
}

impl Subdifferential {
    pub fn point(v: Vec<f64>) -> Self {
        Subdifferential::Set { offset: v, shape: SubgradientShape::Point }
    }

    fn boxed(offset: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        if lo == hi {
            Subdifferential::point(linalg::add(&offset, &lo))
        } else {
            Subdifferential::Set { offset, shape: SubgradientShape::Box { lo, hi } }
        }
    }

    pub(crate) fn translate(self, by: &[f64]) -> Self {
        match self {
            Subdifferential::Set { offset, shape } => Subdifferential::Set {
                offset: linalg::add(&offset, by),
                shape,
            },
            empty => empty,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Subdifferential::Empty { .. })
    }

    pub fn singleton(&self) -> Option<&[f64]> {
        match self {
            Subdifferential::Set { offset, shape: SubgradientShape::Point } => Some(offset),
            _ => None,
        }
    }

    /// The element of least norm, `None` for the empty set.
    pub fn min_norm_element(&self) -> Option<Vec<f64>> {
        let Subdifferential::Set { offset, shape } = self else {
            return None;
        };
        let s: Vec<f64> = match shape {
            SubgradientShape::Point => return Some(offset.clone()),
            SubgradientShape::Box { lo, hi } => offset
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(o, (l, h))| (-o).clamp(*l, *h))
                .collect(),
            SubgradientShape::Ball { radius } => {
                linalg::project_ball(&linalg::scale(offset, -1.0), &vec![0.0; offset.len()], *radius)
            }
            SubgradientShape::Ray { direction } => {
                let dd = linalg::norm_sq(direction);
                if dd == 0.0 {
                    vec![0.0; offset.len()]
                } else {
                    let t = (-linalg::dot(offset, direction) / dd).max(0.0);
                    linalg::scale(direction, t)
                }
            }
        };
        Some(linalg::add(offset, &s))
    }

    /// `dist(0, set)`, `+inf` when empty.
    pub fn dist_to_zero(&self) -> f64 {
        self.min_norm_element().map(|v| norm(&v)).unwrap_or(f64::INFINITY)
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        let Subdifferential::Set { offset, shape } = self else {
            return false;
        };
        let w = linalg::sub(v, offset);
        match shape {
            SubgradientShape::Point => norm(&w) <= tol,
            SubgradientShape::Box { lo, hi } => w
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(x, (l, h))| *x >= l - tol && *x <= h + tol),
            SubgradientShape::Ball { radius } => norm(&w) <= radius + tol,
            SubgradientShape::Ray { direction } => {
                let dd = linalg::norm_sq(direction);
                if dd == 0.0 {
                    return norm(&w) <= tol;
                }
                let t = linalg::dot(&w, direction) / dd;
                t >= -tol && linalg::dist(&w, &linalg::scale(direction, t)) <= tol
            }
        }
    }

    /// Random element; unbounded pieces are truncated to length `span`.
    pub fn sample<R: Rng>(&self, span: f64, rng: &mut R) -> Option<Vec<f64>> {
        let Subdifferential::Set { offset, shape } = self else {
            return None;
        };
        let s: Vec<f64> = match shape {
            SubgradientShape::Point => return Some(offset.clone()),
            SubgradientShape::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| {
                    let (a, b) = match (l.is_finite(), h.is_finite()) {
                        (true, true) => (*l, *h),
                        (true, false) => (*l, l + span),
                        (false, true) => (h - span, *h),
                        (false, false) => (-span, span),
                    };
                    a + (b - a) * rng.gen::<f64>()
                })
                .collect(),
            SubgradientShape::Ball { radius } => {
                crate::sampling::uniform_in_ball(rng, offset.len(), *radius)
            }
            SubgradientShape::Ray { direction } => {
                let dn = norm(direction);
                let t = if dn > 0.0 { span * rng.gen::<f64>() / dn } else { 0.0 };
                linalg::scale(direction, t)
            }
        };
        Some(linalg::add(offset, &s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MinimizerSet {
    Everything,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    /// `point + span(directions)`
    Affine { point: Vec<f64>, directions: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum MinimizerKind {
    Unique(Vec<f64>),
    Set(MinimizerSet),
    /// Unbounded below.
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizerInfo {
    pub kind: MinimizerKind,
    /// `None` when the function is unbounded below.
    pub optimal_value: Option<f64>,
}

impl MinimizerInfo {
    fn unique(p: Vec<f64>, v: f64) -> Self {
        MinimizerInfo { kind: MinimizerKind::Unique(p), optimal_value: Some(v) }
    }
    fn set(s: MinimizerSet, v: f64) -> Self {
        MinimizerInfo { kind: MinimizerKind::Set(s), optimal_value: Some(v) }
    }
    pub fn unique_point(&self) -> Option<&[f64]> {
        match &self.kind {
            MinimizerKind::Unique(p) => Some(p),
            _ => None,
        }
    }
}

/// Six one-dimensional functions used by the acceptance runs and the property suites.
pub fn standard_1d() -> Vec<ConvexFunction> {
    vec![
        ConvexFunction::zero(1).unwrap(),
        ConvexFunction::half_sq_norm(1).unwrap(),
        ConvexFunction::abs_sum(1, 1.0).unwrap(),
        ConvexFunction::huber(1, 1.0).unwrap(),
        ConvexFunction::indicator_box(vec![-1.0], vec![1.0]).unwrap(),
        ConvexFunction::indicator_ball(vec![0.5], 1.0).unwrap(),
    ]
}

/// Two-dimensional sample covering every node type, including composites.
pub fn standard_2d() -> Vec<ConvexFunction> {
    let abs = ConvexFunction::abs_sum(2, 1.0).unwrap();
    vec![
        ConvexFunction::zero(2).unwrap(),
        ConvexFunction::quadratic(vec![vec![2.0, 0.5], vec![0.5, 1.0]], vec![0.5, -1.0], 0.0)
            .unwrap(),
        ConvexFunction::quadratic(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![0.0, 0.0], 0.0)
            .unwrap(),
        abs.clone(),
        ConvexFunction::eucl_norm(2, 1.5).unwrap(),
        ConvexFunction::indicator_box(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap(),
        ConvexFunction::indicator_ball(vec![0.5, -0.5], 1.0).unwrap(),
        ConvexFunction::huber(2, 0.5).unwrap(),
        ConvexFunction::perturbed(abs.clone(), 0.3).unwrap(),
        ConvexFunction::shifted(ConvexFunction::eucl_norm(2, 1.0).unwrap(), -3.0).unwrap(),
        ConvexFunction::regularized(abs, 0.25).unwrap(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluate_examples() {
        let x = [3.0, -4.0];
        assert_eq!(ConvexFunction::zero(2).unwrap().evaluate(&x).unwrap(), 0.0);
        assert_eq!(ConvexFunction::abs_sum(2, 1.0).unwrap().evaluate(&x).unwrap(), 7.0);
        let g = ConvexFunction::perturbed(ConvexFunction::zero(2).unwrap(), 0.5).unwrap();
        // ||x|| = 2
        let v = g.evaluate(&[2.0_f64.sqrt(), 2.0_f64.sqrt()]).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let f = ConvexFunction::abs_sum(2, 1.0).unwrap();
        assert_eq!(
            f.evaluate(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        );
        assert!(f.subdifferential(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn constructor_validation() {
        assert!(matches!(
            ConvexFunction::quadratic(vec![vec![1.0, 0.0], vec![0.0, -1e-6]], vec![0.0; 2], 0.0),
            Err(Error::NotPsd { .. })
        ));
        assert!(ConvexFunction::quadratic(vec![vec![1.0, 0.0], vec![0.0, -1e-13]], vec![0.0; 2], 0.0).is_ok());
        assert!(ConvexFunction::quadratic(vec![vec![1.0, 2.0], vec![0.0, 1.0]], vec![0.0; 2], 0.0).is_err());
        let z = ConvexFunction::zero(1).unwrap();
        assert!(ConvexFunction::perturbed(z.clone(), 0.0).is_err());
        assert!(ConvexFunction::perturbed(z.clone(), 1.0).is_err());
        assert!(ConvexFunction::indicator_box(vec![1.0], vec![0.0]).is_err());
        assert!(ConvexFunction::indicator_ball(vec![0.0], 0.0).is_err());
        assert!(ConvexFunction::abs_sum(1, -1.0).is_err());
        assert!(ConvexFunction::zero(0).is_err());
    }

    #[test]
    fn indicator_values() {
        let b = ConvexFunction::indicator_box(vec![-1.0], vec![1.0]).unwrap();
        assert_eq!(b.evaluate(&[0.3]).unwrap(), 0.0);
        assert_eq!(b.evaluate(&[1.3]).unwrap(), f64::INFINITY);
        let ball = ConvexFunction::indicator_ball(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(ball.evaluate(&[0.6, 0.8]).unwrap(), 0.0);
        assert_eq!(ball.evaluate(&[0.7, 0.8]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn abs_subdifferential_at_origin_is_unit_interval() {
        let f = ConvexFunction::abs_sum(1, 1.0).unwrap();
        let s = f.subdifferential(&[0.0]).unwrap();
        assert_eq!(
            s,
            Subdifferential::Set {
                offset: vec![0.0],
                shape: SubgradientShape::Box { lo: vec![-1.0], hi: vec![1.0] }
            }
        );
        assert_eq!(f.subdifferential(&[2.0]).unwrap().singleton(), Some(&[1.0][..]));
    }

    #[test]
    fn quadratic_subdifferential_is_gradient() {
        let f = ConvexFunction::quadratic(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![1.0, -1.0], 4.0)
            .unwrap();
        let s = f.subdifferential(&[1.0, 2.0]).unwrap();
        assert_eq!(s.singleton().unwrap(), &[2.0 + 2.0 + 1.0, 1.0 + 6.0 - 1.0]);
    }

    #[test]
    fn box_normal_cone_at_upper_face() {
        let f = ConvexFunction::indicator_box(vec![-1.0], vec![1.0]).unwrap();
        let s = f.subdifferential(&[1.0]).unwrap();
        assert!(s.contains(&[0.0], 0.0));
        assert!(s.contains(&[1e6], 0.0));
        assert!(!s.contains(&[-1e-3], 0.0));
        // subgradient inequality: 0 >= 0 + v (y - 1) for y in [-1, 1], v >= 0
        for v in [0.0, 0.5, 7.0] {
            for k in 0..=20 {
                let y = -1.0 + 0.1 * k as f64;
                assert!(f.value(&[y]) >= f.value(&[1.0]) + v * (y - 1.0));
            }
        }
        assert!(f.subdifferential(&[1.5]).unwrap().is_empty());
    }

    #[test]
    fn ball_normal_cone_on_boundary() {
        let f = ConvexFunction::indicator_ball(vec![0.0, 0.0], 1.0).unwrap();
        let s = f.subdifferential(&[0.6, 0.8]).unwrap();
        assert!(s.contains(&[1.2, 1.6], 1e-12));
        assert!(!s.contains(&[-0.6, -0.8], 1e-12));
        assert_eq!(f.subdifferential(&[0.1, 0.1]).unwrap().singleton(), Some(&[0.0, 0.0][..]));
    }

    #[test]
    fn perturbed_subdifferential_translates_base() {
        let f = ConvexFunction::abs_sum(1, 1.0).unwrap();
        let g = ConvexFunction::perturbed(f, 0.5).unwrap();
        // σ/(1-σ) x + ∂|·|(x/(1-σ)) at x = 1: 1 + 1
        assert_eq!(g.subdifferential(&[1.0]).unwrap().singleton(), Some(&[2.0][..]));
        let s0 = g.subdifferential(&[0.0]).unwrap();
        assert!(s0.contains(&[1.0], 0.0) && s0.contains(&[-1.0], 0.0));
    }

    #[test]
    fn minimizer_examples() {
        assert_eq!(
            ConvexFunction::zero(3).unwrap().minimizer_info().kind,
            MinimizerKind::Set(MinimizerSet::Everything)
        );
        assert_eq!(
            ConvexFunction::half_sq_norm(2).unwrap().minimizer_info().unique_point(),
            Some(&[0.0, 0.0][..])
        );
        assert_eq!(
            ConvexFunction::abs_sum(1, 1.0).unwrap().minimizer_info().unique_point(),
            Some(&[0.0][..])
        );
        let q = ConvexFunction::quadratic(vec![vec![1.0]], vec![-2.0], 0.0).unwrap();
        let p = q.minimizer_info();
        assert!((p.unique_point().unwrap()[0] - 2.0).abs() < 1e-14);
        assert!((p.optimal_value.unwrap() + 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_quadratic_minimizers() {
        let flat = ConvexFunction::quadratic(vec![vec![1.0, 0.0], vec![0.0, 0.0]], vec![-1.0, 0.0], 0.0)
            .unwrap();
        match flat.minimizer_info().kind {
            MinimizerKind::Set(MinimizerSet::Affine { point, directions }) => {
                assert!((point[0] - 1.0).abs() < 1e-12 && point[1].abs() < 1e-12);
                assert_eq!(directions.len(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        let unbounded =
            ConvexFunction::quadratic(vec![vec![1.0, 0.0], vec![0.0, 0.0]], vec![0.0, 1.0], 0.0).unwrap();
        assert_eq!(unbounded.minimizer_info().kind, MinimizerKind::Empty);
        assert_eq!(unbounded.minimizer_info().optimal_value, None);
    }

    #[test]
    fn minimizers_have_zero_subgradient() {
        for f in standard_2d() {
            if let Some(p) = f.minimizer_info().unique_point() {
                let d = f.subdifferential(p).unwrap().dist_to_zero();
                assert!(d < 1e-9, "{}: dist {d}", f.label());
            }
        }
    }

    #[test]
    fn normalization_drops_constants() {
        let f = ConvexFunction::quadratic(vec![vec![1.0]], vec![1.0], 3.0).unwrap();
        let g = ConvexFunction::shifted(f.clone(), 17.0).unwrap();
        assert!(f.same_class(&g));
        let pf = ConvexFunction::perturbed(f.clone(), 0.1).unwrap();
        let pg = ConvexFunction::perturbed(g, 0.1).unwrap();
        assert!(pf.same_class(&pg));
        assert!(!pf.same_class(&f));
    }

    #[test]
    fn min_norm_elements() {
        let s = Subdifferential::Set {
            offset: vec![2.0],
            shape: SubgradientShape::Box { lo: vec![-1.0], hi: vec![1.0] },
        };
        assert_eq!(s.min_norm_element(), Some(vec![1.0]));
        let r = Subdifferential::Set {
            offset: vec![-1.0, 0.0],
            shape: SubgradientShape::Ray { direction: vec![1.0, 1.0] },
        };
        let m = r.min_norm_element().unwrap();
        assert!((m[0] + 0.5).abs() < 1e-15 && (m[1] - 0.5).abs() < 1e-15);
        assert_eq!(
            Subdifferential::Empty { reason: String::new() }.dist_to_zero(),
            f64::INFINITY
        );
    }
}
