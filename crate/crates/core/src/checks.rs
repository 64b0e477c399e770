//! Randomized falsification of operator characterizations.
//!
//! Each check draws seeded samples from `B_10(0)`, evaluates a margin per sample and keeps the
//! worst one together with the inputs that produced it. Re-running with the same seed
//! reproduces the witness exactly.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::catalog::{ConvexFunction, Node};
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::metric::{self, ProbeSpec};
use crate::operator::{AffineMap, VectorMap};
use crate::prox::prox_operator;
use crate::{par, sampling};

pub const SAMPLE_RADIUS: f64 = 10.0;
pub const MARGIN_TOL: f64 = 1e-9;
pub const RESOLVENT_TOL: f64 = 1e-8;
pub const GRAPHICAL_TOL: f64 = 1e-2;
pub const DEFAULT_MAX_CYCLE: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "description", rename_all = "kebab-case")]
pub enum Provenance {
    ProxOf(String),
    ResolventOf(String),
    External(String),
}

#[derive(Clone)]
pub struct OperatorUnderTest {
    map: Arc<dyn VectorMap>,
    pub provenance: Provenance,
}

impl OperatorUnderTest {
    pub fn new(map: impl VectorMap + 'static, provenance: Provenance) -> Self {
        OperatorUnderTest { map: Arc::new(map), provenance }
    }

    pub fn prox(f: &ConvexFunction, lambda: f64) -> Result<Self> {
        Ok(Self::new(prox_operator(f, lambda)?, Provenance::ProxOf(f.label())))
    }

    pub fn affine(map: AffineMap, description: impl Into<String>) -> Self {
        Self::new(map, Provenance::ResolventOf(description.into()))
    }

    /// `(I + R)^{-1}` for the quarter-turn rotation `R` of the plane: the resolvent of a
    /// monotone operator that is not cyclically monotone.
    pub fn rotation_resolvent() -> Self {
        Self::affine(
            AffineMap::rotation_resolvent(std::f64::consts::FRAC_PI_2),
            "(I + R)^-1, R = rotation by 90 degrees",
        )
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.map.apply(x)
    }

    pub fn label(&self) -> String {
        match &self.provenance {
            Provenance::ProxOf(s) => format!("prox of {s}"),
            Provenance::ResolventOf(s) => format!("resolvent {s}"),
            Provenance::External(s) => s.clone(),
        }
    }
}

impl fmt::Debug for OperatorUnderTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorUnderTest")
            .field("dim", &self.dim())
            .field("provenance", &self.provenance)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub property: String,
    pub subject: String,
    pub samples: usize,
    /// Worst sampled margin; see each check for its pass rule.
    pub worst_margin: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Inputs achieving the worst margin.
    pub witness: Vec<Vec<f64>>,
    pub seed: u64,
    /// Per-step values for sequence probes.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<CheckReport>,
}

/// Smallest margin, ties resolved to the lowest index.
fn worst(margins: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, m) in margins.iter().enumerate() {
        if *m < best.1 {
            best = (k, *m);
        }
    }
    best
}

/// Worst `⟨x - y, Tx - Ty⟩ - ||Tx - Ty||^2` over `samples` pairs; passes at `>= -1e-9`.
pub fn check_firmly_nonexpansive(t: &OperatorUnderTest, samples: usize, seed: u64) -> Result<CheckReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let n = t.dim();
    let pairs = sampling::chunked(seed, samples, |rng| {
        (
            sampling::uniform_in_ball(rng, n, SAMPLE_RADIUS),
            sampling::uniform_in_ball(rng, n, SAMPLE_RADIUS),
        )
    });
    let margins = par::map_slice(&pairs, |(x, y)| {
        let d = linalg::sub(x, y);
        let td = linalg::sub(&t.apply(x), &t.apply(y));
        linalg::dot(&d, &td) - linalg::norm_sq(&td)
    });
    let (k, m) = worst(&margins);
    Ok(CheckReport {
        property: "firmly-nonexpansive".into(),
        subject: t.label(),
        samples,
        worst_margin: m,
        tolerance: MARGIN_TOL,
        passed: m >= -MARGIN_TOL,
        witness: vec![pairs[k].0.clone(), pairs[k].1.clone()],
        seed,
        series: Vec::new(),
        parts: Vec::new(),
    })
}

/// Worst `Σ_i ⟨x_i - T x_i, T x_i - T x_{i+1}⟩` over random closed cycles of length
/// `2..=max_cycle_len`; passes at `>= -1e-9`.
pub fn check_cycle_inequality(
    t: &OperatorUnderTest,
    max_cycle_len: usize,
    trials: usize,
    seed: u64,
) -> Result<CheckReport> {
    if max_cycle_len < 2 {
        return Err(Error::InvalidParameter("cycles need at least 2 points".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let n = t.dim();
    let cycles = sampling::chunked(seed, trials, |rng| {
        let m = rng.gen_range(2..=max_cycle_len);
        (0..m)
            .map(|_| sampling::uniform_in_ball(rng, n, SAMPLE_RADIUS))
            .collect::<Vec<_>>()
    });
    let sums = par::map_slice(&cycles, |xs| {
        let txs: Vec<Vec<f64>> = xs.iter().map(|x| t.apply(x)).collect();
        let m = xs.len();
        (0..m)
            .map(|i| {
                let a = linalg::sub(&xs[i], &txs[i]);
                let b = linalg::sub(&txs[i], &txs[(i + 1) % m]);
                linalg::dot(&a, &b)
            })
            .sum::<f64>()
    });
    let (k, m) = worst(&sums);
    Ok(CheckReport {
        property: "cycle-inequality".into(),
        subject: t.label(),
        samples: trials,
        worst_margin: m,
        tolerance: MARGIN_TOL,
        passed: m >= -MARGIN_TOL,
        witness: cycles[k].clone(),
        seed,
        series: Vec::new(),
        parts: Vec::new(),
    })
}

/// Solves `y + λ ∂f(y) ∋ x` directly for the nodes whose subdifferential inclusion can be
/// inverted by hand: zero, quadratics (linear solve), separable absolute values and boxes
/// (case analysis per coordinate). Shifts are transparent.
pub fn resolvent(f: &ConvexFunction, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(f.dim(), x.len())?;
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    match f.node() {
        Node::Zero => Ok(x.to_vec()),
        Node::Quadratic(q) => {
            let n = f.dim();
            let a = DMatrix::identity(n, n) + q.matrix() * lambda;
            let rhs = DVector::from_iterator(n, x.iter().zip(q.linear()).map(|(xi, bi)| xi - lambda * bi));
            a.lu()
                .solve(&rhs)
                .map(|y| y.iter().cloned().collect())
                .ok_or_else(|| Error::Unsupported("singular resolvent system".into()))
        }
        Node::AbsSum { weight } => {
            let k = lambda * weight;
            Ok(x
                .iter()
                .map(|&xi| {
                    // y > 0: y + k = x;  y < 0: y - k = x;  y = 0: x ∈ [-k, k]
                    if xi - k > 0.0 {
                        xi - k
                    } else if xi + k < 0.0 {
                        xi + k
                    } else {
                        0.0
                    }
                })
                .collect())
        }
        Node::IndicatorBox { lo, hi } => Ok(x
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(&xi, (&l, &h))| {
                // interior: normal cone {0}; at lo: (-inf, 0]; at hi: [0, inf)
                if xi < l {
                    l
                } else if xi > h {
                    h
                } else {
                    xi
                }
            })
            .collect()),
        Node::Shifted { base, .. } => resolvent(base, lambda, x),
        _ => Err(Error::Unsupported(format!(
            "no direct resolvent solve for {}",
            f.kind()
        ))),
    }
}

/// `J_{λ∂f}` as a map, for the supported nodes of [`resolvent`].
#[derive(Debug, Clone)]
pub struct ResolventOperator {
    f: ConvexFunction,
    lambda: f64,
}

pub fn resolvent_operator(f: &ConvexFunction, lambda: f64) -> Result<ResolventOperator> {
    resolvent(f, lambda, &vec![0.0; f.dim()])?;
    Ok(ResolventOperator { f: f.clone(), lambda })
}

impl VectorMap for ResolventOperator {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        resolvent(&self.f, self.lambda, x).expect("support checked at construction")
    }
}

/// Worst `||J_{λ∂f}(x) - P_λ f(x)||` over samples; passes at `<= 1e-8`.
pub fn check_resolvent_identity(f: &ConvexFunction, lambda: f64, samples: usize, seed: u64) -> Result<CheckReport> {
    let j = resolvent_operator(f, lambda)?;
    let p = prox_operator(f, lambda)?;
    let n = f.dim();
    let xs = sampling::chunked(seed, samples.max(1), |rng| sampling::uniform_in_ball(rng, n, SAMPLE_RADIUS));
    let gaps = par::map_slice(&xs, |x| linalg::dist(&j.apply(x), &p.apply(x)));
    let mut k = 0;
    for (i, g) in gaps.iter().enumerate() {
        if *g > gaps[k] {
            k = i;
        }
    }
    Ok(CheckReport {
        property: format!("resolvent-identity(lambda={lambda})"),
        subject: f.label(),
        samples: xs.len(),
        worst_margin: gaps[k],
        tolerance: RESOLVENT_TOL,
        passed: gaps[k] <= RESOLVENT_TOL,
        witness: vec![xs[k].clone()],
        seed,
        series: Vec::new(),
        parts: Vec::new(),
    })
}

/// Builds `f_k = f + (1/k) ||·||^2/2` and records `gap_k = max_x ||P_1 f_k(x) - P_1 f(x)||`
/// over sampled points. Passes when the gaps never increase and the last is `<= 1e-2`;
/// `worst_margin` is the smaller of `1e-2 - gap_last` and the smallest step decrease.
pub fn graphical_convergence_probe(
    f: &ConvexFunction,
    k_list: &[u64],
    points: usize,
    seed: u64,
) -> Result<CheckReport> {
    if k_list.is_empty() || k_list.contains(&0) || k_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("k-list must be nondecreasing positive integers".into()));
    }
    let n = f.dim();
    let xs = sampling::chunked(seed, points.max(1), |rng| sampling::uniform_in_ball(rng, n, SAMPLE_RADIUS));
    let base = prox_operator(f, 1.0)?;
    let targets = par::map_slice(&xs, |x| base.apply(x));
    let mut gaps = Vec::with_capacity(k_list.len());
    let mut witness = Vec::new();
    for &k in k_list {
        let fk = ConvexFunction::regularized(f.clone(), 1.0 / k as f64)?;
        let tk = prox_operator(&fk, 1.0)?;
        let d = par::map_range(xs.len(), |i| linalg::dist(&tk.apply(&xs[i]), &targets[i]));
        let (arg, gap) = d
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
        gaps.push(gap);
        witness.push(xs[arg].clone());
    }
    let steps = gaps
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::INFINITY, f64::min);
    let last = *gaps.last().expect("nonempty");
    let margin = (GRAPHICAL_TOL - last).min(steps);
    Ok(CheckReport {
        property: "graphical-convergence".into(),
        subject: f.label(),
        samples: xs.len(),
        worst_margin: margin,
        tolerance: GRAPHICAL_TOL,
        passed: steps >= 0.0 && last <= GRAPHICAL_TOL,
        witness,
        seed,
        series: gaps,
        parts: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyParams {
    pub truncation: usize,
    pub probe: ProbeSpec,
    pub pair_samples: usize,
    pub cycle_trials: usize,
    pub max_cycle_len: usize,
    pub seed: u64,
}

impl Default for CauchyParams {
    fn default() -> Self {
        CauchyParams {
            truncation: 10,
            probe: ProbeSpec::default(),
            pair_samples: 10_000,
            cycle_trials: 1_000,
            max_cycle_len: DEFAULT_MAX_CYCLE,
            seed: 0,
        }
    }
}

/// Measures `d(f_k, f_last)` along the sequence (upper enclosures must not increase beyond
/// the enclosure width) and checks that the prox of the last member is still a firmly
/// nonexpansive cyclic resolvent.
pub fn cauchy_limit_probe(seq: &[ConvexFunction], params: &CauchyParams) -> Result<CheckReport> {
    if seq.len() < 3 {
        return Err(Error::InvalidParameter("sequence needs at least 3 members".into()));
    }
    let last = seq.last().expect("nonempty");
    let est = seq[..seq.len() - 1]
        .iter()
        .map(|f| metric::metric(f, last, params.truncation, &params.probe))
        .collect::<Result<Vec<_>>>()?;
    let mut step_margin = f64::INFINITY;
    let mut at = 0;
    for (i, w) in est.windows(2).enumerate() {
        let slack = w[1].width();
        let m = w[0].upper - w[1].upper + slack;
        if m < step_margin {
            step_margin = m;
            at = i + 1;
        }
    }
    let limit = OperatorUnderTest::prox(last, 1.0)?;
    let firm = check_firmly_nonexpansive(&limit, params.pair_samples, params.seed)?;
    let cyc = check_cycle_inequality(&limit, params.max_cycle_len, params.cycle_trials, params.seed)?;
    let monotone = step_margin >= 0.0;
    let worst_margin = step_margin.min(firm.worst_margin).min(cyc.worst_margin);
    Ok(CheckReport {
        property: "cauchy-limit".into(),
        subject: last.label(),
        samples: seq.len(),
        worst_margin,
        tolerance: MARGIN_TOL,
        passed: monotone && firm.passed && cyc.passed,
        witness: if step_margin.is_finite() { vec![vec![at as f64]] } else { Vec::new() },
        seed: params.seed,
        series: est.iter().map(|e| e.upper).collect(),
        parts: vec![firm, cyc],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_firmly_nonexpansive_with_zero_margin() {
        let id = OperatorUnderTest::affine(AffineMap::identity(2), "identity");
        let r = check_firmly_nonexpansive(&id, 500, 1).unwrap();
        assert_eq!(r.worst_margin, 0.0);
        assert!(r.passed);
        let c = check_cycle_inequality(&id, 6, 200, 1).unwrap();
        assert_eq!(c.worst_margin, 0.0);
    }

    #[test]
    fn half_identity_margin_is_quarter_square() {
        let half = OperatorUnderTest::affine(AffineMap::scaled_identity(2, 0.5), "x/2");
        let r = check_firmly_nonexpansive(&half, 300, 2).unwrap();
        let d = linalg::dist(&r.witness[0], &r.witness[1]);
        assert!((r.worst_margin - 0.25 * d * d).abs() < 1e-12);
        assert!(r.worst_margin > 0.0);
    }

    #[test]
    fn negative_identity_fails() {
        let neg = OperatorUnderTest::affine(AffineMap::scaled_identity(1, -1.0), "-x");
        let r = check_firmly_nonexpansive(&neg, 100, 3).unwrap();
        assert!(!r.passed);
        let d = linalg::dist(&r.witness[0], &r.witness[1]);
        assert!((r.worst_margin + 2.0 * d * d).abs() < 1e-9);
    }

    #[test]
    fn reports_reproduce() {
        let rot = OperatorUnderTest::rotation_resolvent();
        let a = check_cycle_inequality(&rot, 6, 500, 11).unwrap();
        let b = check_cycle_inequality(&rot, 6, 500, 11).unwrap();
        assert_eq!(a, b);
        assert!(!a.passed);
        assert!(a.witness.len() >= 3);
    }

    #[test]
    fn resolvent_solves_match_closed_forms() {
        let abs = ConvexFunction::abs_sum(1, 1.0).unwrap();
        assert_eq!(resolvent(&abs, 2.0, &[3.0]).unwrap(), vec![1.0]);
        assert_eq!(resolvent(&abs, 2.0, &[-1.5]).unwrap(), vec![0.0]);
        let q = ConvexFunction::quadratic(vec![vec![2.0, 1.0], vec![1.0, 2.0]], vec![1.0, 0.0], 0.0).unwrap();
        let y = resolvent(&q, 0.5, &[1.0, 1.0]).unwrap();
        // (I + Q/2) y = x - b/2  →  [[2, .5], [.5, 2]] y = [.5, 1]
        assert!((2.0 * y[0] + 0.5 * y[1] - 0.5).abs() < 1e-14);
        assert!((0.5 * y[0] + 2.0 * y[1] - 1.0).abs() < 1e-14);
        assert!(matches!(
            resolvent(&ConvexFunction::huber(1, 1.0).unwrap(), 1.0, &[0.0]),
            Err(Error::Unsupported(_))
        ));
        assert!(check_resolvent_identity(&ConvexFunction::eucl_norm(2, 1.0).unwrap(), 1.0, 10, 0).is_err());
    }

    #[test]
    fn graphical_gaps_for_zero() {
        let f = ConvexFunction::zero(1).unwrap();
        let r = graphical_convergence_probe(&f, &[1, 4, 16], 50, 4).unwrap();
        // P_1 f_k(x) = x/(1 + 1/k), gap = |x| / (k + 1)
        for (gap, k) in r.series.iter().zip([1.0, 4.0, 16.0]) {
            let x = r.witness[0][0].abs();
            assert!((gap - x / (k + 1.0)).abs() < 1e-12);
        }
        let same = graphical_convergence_probe(&f, &[1, 1, 1], 50, 4).unwrap();
        assert_eq!(same.series[0], same.series[1]);
        assert_eq!(same.series[1], same.series[2]);
        assert!(graphical_convergence_probe(&f, &[4, 1], 5, 0).is_err());
        assert!(graphical_convergence_probe(&f, &[0, 1], 5, 0).is_err());
    }

    #[test]
    fn cauchy_probe_on_constant_sequence() {
        let f = ConvexFunction::abs_sum(1, 1.0).unwrap();
        let p = CauchyParams { pair_samples: 200, cycle_trials: 100, truncation: 5, ..Default::default() };
        let r = cauchy_limit_probe(&[f.clone(), f.clone(), f.clone()], &p).unwrap();
        assert!(r.passed);
        assert_eq!(r.series[0], r.series[1]);
        assert!(cauchy_limit_probe(&[f.clone(), f], &p).is_err());
    }
}
