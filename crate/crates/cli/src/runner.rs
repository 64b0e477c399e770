//! Executes the experiments of a loaded config and collects report records.

use std::collections::BTreeMap;

use proxlab_core::checks::{
    check_cycle_inequality, check_firmly_nonexpansive, check_resolvent_identity, graphical_convergence_probe,
    CheckReport, OperatorUnderTest, SAMPLE_RADIUS,
};
use proxlab_core::contraction::{choose_sigma, m_bound, perturb, BoundProbe, PerturbationSpec};
use proxlab_core::dynamics::{self, stability_probe, super_regularity_probe, ProbeParams, StabilityParams, Verdict};
use proxlab_core::metric::{self, axiom_report, MetricEstimate};
use proxlab_core::prox::has_closed_form;
use proxlab_core::{linalg, par, prox_operator, sampling, ConvexFunction, Error, VectorMap};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Checks, Dynamics, Expect, Experiment, LoadedConfig, MetricTable, PerturbationSweep, Stability};
use crate::report::{timestamp, Record, Summary, VERSIONS};

/// `||P_1 g - (1 - σ) P_1 f||` allowance when `P_1 g` has a closed form, and when it does not.
pub const IDENTITY_TOL_CLOSED: f64 = 1e-8;
pub const IDENTITY_TOL_NUMERIC: f64 = 1e-5;
/// A cycle-inequality margin below this counts as a detected violation.
pub const VIOLATION_MARGIN: f64 = -1e-3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Overrides the config seed for experiments without their own.
    pub seed: Option<u64>,
    /// Run experiments concurrently; output order is unchanged.
    pub parallel: bool,
    /// Unix time stamped on every record; defaults to `SOURCE_DATE_EPOCH`, then the clock.
    pub timestamp: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub records: Vec<Record>,
}

impl RunOutcome {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.passed == Some(false)).count()
    }

    /// 0 when every pass-type record passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        i32::from(self.failures() > 0)
    }
}

struct Entry {
    passed: Option<bool>,
    summary: Summary,
    payload: Value,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn summary(subject: impl Into<String>, quantity: impl Into<String>) -> Summary {
    Summary { subject: subject.into(), quantity: quantity.into(), ..Default::default() }
}

fn interval(mut s: Summary, e: &MetricEstimate) -> Summary {
    s.lower = Some(e.lower);
    s.upper = Some(e.upper);
    s
}

fn check_entry(r: &CheckReport) -> Entry {
    let mut s = summary(&r.subject, &r.property);
    s.value = Some(r.worst_margin);
    Entry { passed: Some(r.passed), summary: s, payload: to_value(r) }
}

pub fn run(cfg: &LoadedConfig, opts: &RunOptions) -> RunOutcome {
    let hash = cfg.hash(opts.seed);
    let stamp = timestamp(opts.timestamp);
    let one = |e: &Experiment| {
        let seed = cfg.seed_for(e, opts.seed);
        let mut entries = Vec::new();
        if let Err(err) = run_experiment(e, &cfg.functions, seed, &mut entries) {
            entries.push(Entry {
                passed: Some(false),
                summary: summary(e.id(), "error"),
                payload: json!({ "error": err.to_string() }),
            });
        }
        entries
            .into_iter()
            .enumerate()
            .map(|(k, en)| Record {
                experiment: e.id().to_string(),
                kind: e.kind(),
                probe: k,
                timestamp: stamp.clone(),
                config_hash: hash.clone(),
                seed,
                passed: en.passed,
                summary: en.summary,
                payload: en.payload,
                versions: VERSIONS,
            })
            .collect::<Vec<_>>()
    };
    let exps = &cfg.config.experiments;
    let per_experiment: Vec<Vec<Record>> = if opts.parallel {
        par::map_slice(exps, one)
    } else {
        exps.iter().map(one).collect()
    };
    RunOutcome { records: per_experiment.into_iter().flatten().collect() }
}

type Functions = BTreeMap<String, ConvexFunction>;

fn run_experiment(e: &Experiment, fs: &Functions, seed: u64, out: &mut Vec<Entry>) -> Result<(), Error> {
    match e {
        Experiment::MetricTable(m) => metric_table(m, fs, seed, out),
        Experiment::PerturbationSweep(p) => sweep(p, fs, seed, out),
        Experiment::Dynamics(d) => dynamics(d, fs, seed, out),
        Experiment::Checks(c) => checks(c, fs, seed, out),
        Experiment::Stability(s) => stability(s, fs, seed, out),
    }
}

fn metric_table(m: &MetricTable, fs: &Functions, seed: u64, out: &mut Vec<Entry>) -> Result<(), Error> {
    let funcs: Vec<ConvexFunction> = m.functions.iter().map(|n| fs[n].clone()).collect();
    let table = metric::metric_table(&funcs, m.truncation, &m.probe.resolve(seed))?;
    for (i, row) in table.iter().enumerate() {
        for (j, est) in row.iter().enumerate() {
            let (f, g) = (&m.functions[i], &m.functions[j]);
            out.push(Entry {
                passed: None,
                summary: interval(summary(format!("{f} | {g}"), "distance"), est),
                payload: json!({ "row": i, "col": j, "f": f, "g": g, "estimate": est }),
            });
        }
    }
    if funcs.len() >= 3 {
        let rep = axiom_report(m.functions.clone(), &table);
        let mut s = summary(m.functions.join(", "), "metric-axioms");
        s.value = Some(rep.worst_margin);
        out.push(Entry { passed: Some(rep.passed), summary: s, payload: to_value(&rep) });
    }
    Ok(())
}

fn sweep(p: &PerturbationSweep, fs: &Functions, seed: u64, out: &mut Vec<Entry>) -> Result<(), Error> {
    let f = &fs[&p.function];
    let probe = p.probe.resolve(seed);
    let m = m_bound(f, p.truncation as f64, &BoundProbe::Coarse)?;
    let tf = prox_operator(f, 1.0)?;
    let xs = sampling::chunked(seed, p.identity_samples, |rng| {
        sampling::uniform_in_ball(rng, f.dim(), SAMPLE_RADIUS)
    });
    let base = par::map_slice(&xs, |x| tf.apply(x));
    let mut column = Vec::with_capacity(p.sigmas.len());
    for &sigma in &p.sigmas {
        let plan = perturb(&PerturbationSpec::new(f.clone(), sigma)?);
        let tg = prox_operator(&plan.g, 1.0)?;
        let closed = has_closed_form(&plan.g, 1.0);
        let tol = if closed { IDENTITY_TOL_CLOSED } else { IDENTITY_TOL_NUMERIC };
        let gap = par::map_range(xs.len(), |k| linalg::dist(&tg.apply(&xs[k]), &linalg::scale(&base[k], 1.0 - sigma)))
            .into_iter()
            .fold(0.0, f64::max);
        let est = metric::metric(f, &plan.g, p.truncation, &probe)?;
        let rows: Vec<Value> = p
            .eps
            .iter()
            .map(|&eps| {
                let below = sigma < eps / (2.0 * m);
                json!({ "eps": eps, "sigma_below_bound": below, "upper_below_eps": est.upper < eps })
            })
            .collect();
        let bound_ok = p.eps.iter().all(|&eps| sigma >= eps / (2.0 * m) || est.upper < eps);
        let mut s = interval(summary(f.label(), "distance"), &est);
        s.value = Some(sigma);
        out.push(Entry {
            passed: Some(gap <= tol && bound_ok),
            summary: s,
            payload: json!({
                "sigma": sigma,
                "m_bound": m,
                "contraction_factor": plan.contraction_factor,
                "identity_path": if closed { "closed-form" } else { "numeric" },
                "identity_gap": gap,
                "identity_tol": tol,
                "bound_rows": rows,
                "realized": est,
            }),
        });
        column.push((sigma, est.upper));
    }
    let mut sorted = column.clone();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let monotone = sorted.windows(2).all(|w| w[1].1 <= w[0].1);
    out.push(Entry {
        passed: Some(monotone),
        summary: summary(f.label(), "distance-decreases-with-sigma"),
        payload: json!({
            "sigmas": sorted.iter().map(|c| c.0).collect::<Vec<_>>(),
            "uppers": sorted.iter().map(|c| c.1).collect::<Vec<_>>(),
        }),
    });
    for &eps in &p.eps {
        let plan = choose_sigma(f, eps, p.truncation, &probe)?;
        let mut s = summary(f.label(), "chosen-sigma");
        s.value = Some(plan.sigma);
        if let Some(r) = &plan.realized {
            s = interval(s, r);
        }
        out.push(Entry { passed: plan.achieved(), summary: s, payload: to_value(&plan) });
    }
    Ok(())
}

fn expected(e: Expect) -> Verdict {
    match e {
        Expect::SuperRegular => Verdict::SuperRegularEvidence,
        Expect::NotSuperRegular => Verdict::NotSuperRegularEvidence,
        Expect::Inconclusive => Verdict::Inconclusive,
    }
}

fn dynamics(d: &Dynamics, fs: &Functions, seed: u64, out: &mut Vec<Entry>) -> Result<(), Error> {
    let f = &fs[&d.function];
    let params = ProbeParams { starts: d.starts, max_iters: d.max_iters, tol: d.tol, seed };
    let rep = super_regularity_probe(f, d.radius, &params)?;
    let mut conds = Vec::new();
    if let Some(e) = d.expect {
        conds.push(rep.verdict == expected(e));
    }
    if let Some(t) = d.minimizer_tol {
        conds.push(rep.minimizer_error.is_some_and(|err| err <= t));
    }
    if let Some(m) = d.min_spread {
        conds.push(rep.spread >= m);
    }
    let iterations = rep.hitting_times.iter().flatten().max().copied();
    let unconverged = rep.hitting_times.iter().filter(|t| t.is_none()).count();
    let mut s = summary(&d.function, "spread");
    s.value = Some(rep.spread);
    out.push(Entry {
        passed: if conds.is_empty() { None } else { Some(conds.iter().all(|c| *c)) },
        summary: s,
        payload: json!({
            "function": rep.function,
            "verdict": rep.verdict,
            "expect": d.expect,
            "radius": rep.radius,
            "tol": rep.tol,
            "starts": rep.starts.len(),
            "spread": rep.spread,
            "x_t": rep.x_t,
            "iterations": iterations,
            "unconverged": unconverged,
            "fixed_point_residual": rep.fixed_point_residual,
            "subgradient_residual": rep.subgradient_residual,
            "minimizer_error": rep.minimizer_error,
        }),
    });
    Ok(())
}

fn checks(c: &Checks, fs: &Functions, seed: u64, out: &mut Vec<Entry>) -> Result<(), Error> {
    for name in &c.functions {
        let f = &fs[name];
        let t = OperatorUnderTest::prox(f, c.lambda)?;
        out.push(check_entry(&check_firmly_nonexpansive(&t, c.pairs, seed)?));
        out.push(check_entry(&check_cycle_inequality(&t, c.max_cycle_len, c.cycles, seed)?));
        for &lambda in &c.resolvent_lambdas {
            match check_resolvent_identity(f, lambda, c.resolvent_samples, seed) {
                Ok(r) => out.push(check_entry(&r)),
                Err(Error::Unsupported(why)) => out.push(Entry {
                    passed: None,
                    summary: summary(f.label(), format!("resolvent-identity(lambda={lambda})")),
                    payload: json!({ "skipped": why, "lambda": lambda }),
                }),
                Err(e) => return Err(e),
            }
        }
        if let Some(g) = &c.graphical {
            out.push(check_entry(&graphical_convergence_probe(f, &g.k, g.points, seed)?));
        }
    }
    if c.rotation {
        let rot = OperatorUnderTest::rotation_resolvent();
        out.push(check_entry(&check_firmly_nonexpansive(&rot, c.pairs, seed)?));
        let cyc = check_cycle_inequality(&rot, c.max_cycle_len, c.cycles, seed)?;
        let mut e = check_entry(&cyc);
        e.passed = Some(cyc.worst_margin < VIOLATION_MARGIN);
        e.summary.quantity = "cycle-inequality-violation".into();
        e.payload = json!({ "expected": "violation", "threshold": VIOLATION_MARGIN, "report": cyc });
        out.push(e);
    }
    Ok(())
}

fn stability(s: &Stability, fs: &Functions, seed: u64, out: &mut Vec<Entry>) -> Result<(), Error> {
    let f = &fs[&s.function];
    let g = match (&s.perturbed, s.sigma) {
        (Some(name), _) => fs[name].clone(),
        (None, Some(sigma)) => ConvexFunction::perturbed(f.clone(), sigma)?,
        (None, None) => unreachable!("rejected by validation"),
    };
    let params = StabilityParams {
        regularity: ProbeParams {
            starts: s.starts,
            max_iters: dynamics::DEFAULT_MAX_ITERS,
            tol: dynamics::DEFAULT_TOL,
            seed,
        },
        truncation: s.truncation,
        probe: s.probe.resolve(seed),
    };
    let rep = stability_probe(f, &g, s.radius, s.eps, s.max_iters, &params)?;
    let mut sm = summary(format!("{} | {}", rep.function, rep.perturbed), "worst-error");
    sm.value = rep.worst_error;
    if let Some(d) = &rep.delta {
        sm = interval(sm, d);
    }
    out.push(Entry { passed: Some(rep.achieved), summary: sm, payload: to_value(&rep) });
    Ok(())
}
