//! Proximal point dynamics `x_{k+1} = P_1 f(x_k)`.
//!
//! The fixed points of `P_1 f` are the minimizers of `f`. When the minimizer is unique the
//! orbits from every bounded ball collapse onto it uniformly (the map is super-regular); when
//! it is not, orbits stall at different fixed points. The probes here collect that evidence
//! from finitely many seeded starts, so their verdicts are tri-state.

use serde::Serialize;

use crate::catalog::ConvexFunction;
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::metric::{self, MetricEstimate, ProbeSpec};
use crate::operator::VectorMap;
use crate::prox::prox_operator;
use crate::{par, sampling};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const SPREAD_FACTOR: f64 = 10.0;
pub const DEFAULT_STARTS: usize = 64;
pub const DEFAULT_MAX_ITERS: usize = 10_000;
/// Orbits inside the probes run to `tol * INNER_TOL_FACTOR` so that limits agree to `tol`.
const INNER_TOL_FACTOR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationTrace {
    pub start: Vec<f64>,
    /// `x_0, x_1, ..., x_k`
    pub points: Vec<Vec<f64>>,
    /// `||x_{k+1} - x_k||`
    pub residuals: Vec<f64>,
    /// Last iterate, set once a residual drops to `tol`.
    pub limit: Option<Vec<f64>>,
    pub iterations: usize,
}

/// Runs `x ↦ T x` from `x0` until a step is at most `tol` or `max_iters` steps were taken.
pub fn iterate_map<T: VectorMap + ?Sized>(t: &T, x0: &[f64], max_iters: usize, tol: f64) -> Result<IterationTrace> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    check_dim(t.dim(), x0.len())?;
    let mut points = vec![x0.to_vec()];
    let mut residuals = Vec::new();
    let mut limit = None;
    for _ in 0..max_iters {
        let x = points.last().expect("nonempty");
        let next = t.apply(x);
        let r = linalg::dist(&next, x);
        residuals.push(r);
        points.push(next);
        if r <= tol {
            limit = points.last().cloned();
            break;
        }
    }
    Ok(IterationTrace {
        start: x0.to_vec(),
        iterations: residuals.len(),
        points,
        residuals,
        limit,
    })
}

/// Proximal point iteration for `f`.
pub fn iterate(f: &ConvexFunction, x0: &[f64], max_iters: usize, tol: f64) -> Result<IterationTrace> {
    let t = prox_operator(f, 1.0)?;
    iterate_map(&t, x0, max_iters, tol)
}

/// Final iterate and hitting time, without keeping the orbit.
fn orbit_limit<T: VectorMap + ?Sized>(t: &T, x0: &[f64], max_iters: usize, tol: f64) -> (Vec<f64>, f64, Option<usize>) {
    let mut x = x0.to_vec();
    let mut r = f64::INFINITY;
    for k in 1..=max_iters {
        let next = t.apply(&x);
        r = linalg::dist(&next, &x);
        x = next;
        if r <= tol {
            return (x, r, Some(k));
        }
    }
    (x, r, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    SuperRegularEvidence,
    NotSuperRegularEvidence,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeParams {
    pub starts: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for ProbeParams {
    fn default() -> Self {
        ProbeParams {
            starts: DEFAULT_STARTS,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuperRegularityReport {
    pub function: String,
    pub radius: f64,
    pub tol: f64,
    pub starts: Vec<Vec<f64>>,
    pub limits: Vec<Vec<f64>>,
    pub final_residuals: Vec<f64>,
    pub hitting_times: Vec<Option<usize>>,
    /// Largest pairwise distance between the limits.
    pub spread: f64,
    pub verdict: Verdict,
    pub x_t: Option<Vec<f64>>,
    /// `||P_1 f(x_T) - x_T||`
    pub fixed_point_residual: Option<f64>,
    /// `dist(0, ∂f(x_T))`
    pub subgradient_residual: Option<f64>,
    /// Distance from `x_T` to the known unique minimizer, when the catalog knows it.
    pub minimizer_error: Option<f64>,
}

fn spread(points: &[Vec<f64>]) -> f64 {
    let mut s = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            s = s.max(linalg::dist(a, b));
        }
    }
    s
}

/// Iterates the unit prox from seeded starts in `B_s(0)` and classifies the limits:
/// all converged with spread `<= tol` is evidence of a unique fixed point, all converged with
/// spread `>= 10 tol` is evidence against, anything else is inconclusive.
pub fn super_regularity_probe(f: &ConvexFunction, s: f64, params: &ProbeParams) -> Result<SuperRegularityReport> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!("ball radius must be positive, got {s}")));
    }
    if params.starts < 2 {
        return Err(Error::InvalidParameter("need at least 2 starts".into()));
    }
    if params.tol.is_nan() || params.tol <= 0.0 {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let t = prox_operator(f, 1.0)?;
    let starts = sampling::ball_starts(f.dim(), s, params.starts, params.seed);
    let inner = params.tol * INNER_TOL_FACTOR;
    let runs = par::map_slice(&starts, |x0| orbit_limit(&t, x0, params.max_iters, inner));
    let limits: Vec<Vec<f64>> = runs.iter().map(|r| r.0.clone()).collect();
    let final_residuals: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let hitting_times: Vec<Option<usize>> = runs.iter().map(|r| r.2).collect();
    let all_converged = hitting_times.iter().all(Option::is_some);
    let spread = spread(&limits);

    let verdict = if all_converged && spread <= params.tol {
        Verdict::SuperRegularEvidence
    } else if all_converged && spread >= SPREAD_FACTOR * params.tol {
        Verdict::NotSuperRegularEvidence
    } else {
        Verdict::Inconclusive
    };

    let (mut x_t, mut fixed_point_residual, mut subgradient_residual, mut minimizer_error) = (None, None, None, None);
    if verdict == Verdict::SuperRegularEvidence {
        let n = limits.len() as f64;
        let mean: Vec<f64> = (0..f.dim())
            .map(|j| limits.iter().map(|p| p[j]).sum::<f64>() / n)
            .collect();
        fixed_point_residual = Some(linalg::dist(&t.apply(&mean), &mean));
        subgradient_residual = Some(f.subdifferential(&mean)?.dist_to_zero());
        minimizer_error = f.minimizer_info().unique_point().map(|p| linalg::dist(p, &mean));
        x_t = Some(mean);
    }

    Ok(SuperRegularityReport {
        function: f.label(),
        radius: s,
        tol: params.tol,
        starts,
        limits,
        final_residuals,
        hitting_times,
        spread,
        verdict,
        x_t,
        fixed_point_residual,
        subgradient_residual,
        minimizer_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityParams {
    pub regularity: ProbeParams,
    pub truncation: usize,
    pub probe: ProbeSpec,
}

impl Default for StabilityParams {
    fn default() -> Self {
        StabilityParams {
            regularity: ProbeParams::default(),
            truncation: metric::DEFAULT_TRUNCATION,
            probe: ProbeSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityProbe {
    pub function: String,
    pub perturbed: String,
    pub radius: f64,
    pub eps: f64,
    pub max_iters: usize,
    pub starts: usize,
    /// Fixed point of `P_1 f` from the regularity probe.
    pub x_t: Option<Vec<f64>>,
    pub regularity: Verdict,
    /// Enclosure of the distance between `P_1 f` and `P_1 g`.
    pub delta: Option<MetricEstimate>,
    /// Smallest `n0` with `||T̄^n x - x_T|| < eps` for all starts and `n0 <= n <= max_iters`.
    pub n0: Option<usize>,
    /// `max_{start, n >= n0} ||T̄^n x - x_T||`, or the error at `max_iters` when no `n0` exists.
    pub worst_error: Option<f64>,
    pub achieved: bool,
}

/// `max over starts of ||T̄^n x - x_T||` for `n = 1..=max_iters`.
fn error_profile<T: VectorMap + ?Sized>(tbar: &T, starts: &[Vec<f64>], x_t: &[f64], max_iters: usize) -> Vec<f64> {
    let per_start = par::map_slice(starts, |x0| {
        let mut x = x0.clone();
        (0..max_iters)
            .map(|_| {
                x = tbar.apply(&x);
                linalg::dist(&x, x_t)
            })
            .collect::<Vec<f64>>()
    });
    (0..max_iters)
        .map(|n| per_start.iter().map(|e| e[n]).fold(0.0, f64::max))
        .collect()
}

/// Checks that orbits of `T̄ = P_1 g` from `B_s(0)` end up within `eps` of the fixed point of
/// `P_1 f`, and reports the distance between the two maps alongside.
pub fn stability_probe(
    f: &ConvexFunction,
    g: &ConvexFunction,
    s: f64,
    eps: f64,
    max_iters: usize,
    params: &StabilityParams,
) -> Result<StabilityProbe> {
    check_dim(f.dim(), g.dim())?;
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
    }
    let reg = super_regularity_probe(f, s, &params.regularity)?;
    let mut out = StabilityProbe {
        function: f.label(),
        perturbed: g.label(),
        radius: s,
        eps,
        max_iters,
        starts: params.regularity.starts,
        x_t: reg.x_t.clone(),
        regularity: reg.verdict,
        delta: None,
        n0: None,
        worst_error: None,
        achieved: false,
    };
    let Some(x_t) = reg.x_t else {
        return Ok(out);
    };
    out.delta = Some(metric::metric(f, g, params.truncation, &params.probe)?);
    let tbar = prox_operator(g, 1.0)?;
    let profile = error_profile(&tbar, &reg.starts, &x_t, max_iters);
    let mut suffix = vec![0.0; max_iters + 1];
    for n in (0..max_iters).rev() {
        suffix[n] = profile[n].max(suffix[n + 1]);
    }
    match (0..max_iters).find(|&n| suffix[n] < eps) {
        Some(n) => {
            out.n0 = Some(n + 1);
            out.worst_error = Some(suffix[n]);
            out.achieved = true;
        }
        None => out.worst_error = profile.last().copied(),
    }
    Ok(out)
}

/// `max over the probe starts of ||P_1 g^n x - x_T||` at a single `n`.
pub fn worst_error_at(g: &ConvexFunction, starts: &[Vec<f64>], x_t: &[f64], n: usize) -> Result<f64> {
    let t = prox_operator(g, 1.0)?;
    Ok(error_profile(&t, starts, x_t, n).last().copied().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_orbit_halves() {
        let f = ConvexFunction::half_sq_norm(1).unwrap();
        let tr = iterate(&f, &[8.0], 200, 1e-12).unwrap();
        assert_eq!(tr.points[1..4], [vec![4.0], vec![2.0], vec![1.0]]);
        assert!(tr.limit.unwrap()[0].abs() < 1e-11);
    }

    #[test]
    fn abs_orbit_reaches_zero_in_three_steps() {
        let f = ConvexFunction::abs_sum(1, 1.0).unwrap();
        let tr = iterate(&f, &[2.5], 100, 1e-8).unwrap();
        assert_eq!(tr.points, vec![vec![2.5], vec![1.5], vec![0.5], vec![0.0], vec![0.0]]);
        assert_eq!(tr.limit, Some(vec![0.0]));
        assert_eq!(tr.residuals, vec![1.0, 1.0, 0.5, 0.0]);
    }

    #[test]
    fn zero_orbit_is_constant() {
        let f = ConvexFunction::zero(2).unwrap();
        let tr = iterate(&f, &[3.0, -1.0], 10, 1e-8).unwrap();
        assert_eq!(tr.iterations, 1);
        assert_eq!(tr.limit, Some(vec![3.0, -1.0]));
    }

    #[test]
    fn budget_exhaustion_is_not_an_error() {
        let f = ConvexFunction::half_sq_norm(1).unwrap();
        let tr = iterate(&f, &[8.0], 5, 1e-12).unwrap();
        assert_eq!(tr.iterations, 5);
        assert!(tr.limit.is_none());
        assert!(iterate(&f, &[8.0], 5, 0.0).is_err());
    }

    #[test]
    fn verdicts() {
        let p = ProbeParams::default();
        let q = ConvexFunction::quadratic(vec![vec![1.0]], vec![-2.0], 0.0).unwrap();
        let r = super_regularity_probe(&q, 1.0, &p).unwrap();
        assert_eq!(r.verdict, Verdict::SuperRegularEvidence);
        assert!((r.x_t.unwrap()[0] - 2.0).abs() < 1e-7);
        assert!(r.fixed_point_residual.unwrap() <= 2.0 * p.tol);

        let z = super_regularity_probe(&ConvexFunction::zero(1).unwrap(), 1.0, &p).unwrap();
        assert_eq!(z.verdict, Verdict::NotSuperRegularEvidence);
        assert_eq!(z.spread, 2.0);
        assert!(z.x_t.is_none());

        let a = super_regularity_probe(&ConvexFunction::abs_sum(1, 1.0).unwrap(), 3.0, &p).unwrap();
        assert_eq!(a.verdict, Verdict::SuperRegularEvidence);
        assert_eq!(a.x_t, Some(vec![0.0]));
    }

    #[test]
    fn tiny_budget_is_inconclusive() {
        let p = ProbeParams { max_iters: 3, ..Default::default() };
        let r = super_regularity_probe(&ConvexFunction::half_sq_norm(1).unwrap(), 1.0, &p).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn probe_argument_checks() {
        let f = ConvexFunction::zero(1).unwrap();
        assert!(super_regularity_probe(&f, 0.0, &ProbeParams::default()).is_err());
        let one = ProbeParams { starts: 1, ..Default::default() };
        assert!(super_regularity_probe(&f, 1.0, &one).is_err());
    }

    #[test]
    fn stability_with_identical_maps() {
        let f = ConvexFunction::abs_sum(1, 1.0).unwrap();
        let s = stability_probe(&f, &f, 2.0, 1e-3, 20, &StabilityParams::default()).unwrap();
        assert!(s.achieved);
        // orbits from [-2, 2] reach 0 after at most 2 soft-threshold steps
        assert_eq!(s.n0, Some(2));
        assert_eq!(s.worst_error, Some(0.0));
        assert_eq!(s.delta.unwrap().lower, 0.0);
    }

    #[test]
    fn stability_without_fixed_point_reports_failure() {
        let f = ConvexFunction::zero(1).unwrap();
        let g = ConvexFunction::perturbed(f.clone(), 0.1).unwrap();
        let s = stability_probe(&f, &g, 1.0, 1e-2, 10, &StabilityParams::default()).unwrap();
        assert!(!s.achieved);
        assert!(s.x_t.is_none() && s.n0.is_none());
    }
}
