//! Property suites behind the `check` command. Each check produces one
//! named outcome; reports are sorted by name so they are byte-stable.

use std::fmt::Write as _;

use crate::diagnostics::{
    check_cocoercive, check_descent_lemma, check_firmly_nonexpansive, check_monotone, fit_rate, DescentLemma,
    FitWindow, RateModel, Sampler,
};
use crate::error::{Error, Result};
use crate::fault::Fault;
use crate::optimize::{run_agd, run_gd, run_subgradient};
use crate::problem::VectorField;
use crate::registry::lookup;
use crate::set::ConstraintSet;
use crate::trace::{Metric, RunTrace};
use crate::vi::{resolvent, run_eg_with_fault, run_forward, run_ppm, ResolventBackend};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Monotone,
    Resolvent,
    Descent,
    Rates,
    All,
}

impl Suite {
    pub const NAMES: &'static [&'static str] = &["monotone", "resolvent", "descent", "rates", "all"];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "monotone" => Some(Self::Monotone),
            "resolvent" => Some(Self::Resolvent),
            "descent" => Some(Self::Descent),
            "rates" => Some(Self::Rates),
            "all" => Some(Self::All),
            _ => None,
        }
    }

    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Smallest margin by which the checked inequality held; negative when
    /// it failed.
    pub worst_slack: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuiteReport {
    pub checks: Vec<CheckOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{tag} {} worst_slack={:.6e}", c.name, c.worst_slack);
        }
        let _ = writeln!(
            out,
            "summary: {} checks, {} passed, {} failed (sampled evidence only)",
            self.checks.len(),
            self.checks.len() - self.failures(),
            self.failures()
        );
        out
    }

    fn push(&mut self, name: impl Into<String>, worst_slack: f64) {
        self.checks.push(CheckOutcome { name: name.into(), passed: worst_slack >= 0.0, worst_slack });
    }
}

/// Smooth convex instances.
const CONVEX: &[&str] = &["gaussian", "quadratic-cond100", "quadratic-dense50", "quadratic-identity"];
const SMOOTH: &[&str] = &[
    "gaussian",
    "quadratic-cond100",
    "quadratic-dense50",
    "quadratic-identity",
    "strict-saddle-d10",
    "strict-saddle-d2",
];
const FIELDS: &[&str] = &["rotation", "strongmono-affine"];

pub fn run_suite(suite: Suite, samples: usize, seed: u64, fault: Option<Fault>) -> Result<SuiteReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let mut report = SuiteReport::default();
    if suite.includes(Suite::Monotone) {
        monotone_suite(&mut report, samples, seed)?;
    }
    if suite.includes(Suite::Resolvent) {
        resolvent_suite(&mut report, samples, seed)?;
    }
    if suite.includes(Suite::Descent) {
        descent_suite(&mut report, fault)?;
    }
    if suite.includes(Suite::Rates) {
        rates_suite(&mut report, fault)?;
    }
    report.checks.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(report)
}

fn sampler_for(f: &VectorField, samples: usize, seed: u64) -> Result<Sampler> {
    Sampler::cube(f.dim(), 5.0, samples, seed)
}

fn monotone_suite(report: &mut SuiteReport, samples: usize, seed: u64) -> Result<()> {
    for name in CONVEX.iter().chain(FIELDS) {
        let inst = lookup(name)?;
        let f = inst.field()?;
        let s = sampler_for(f, samples, seed)?;
        let m = check_monotone(f, &s)?;
        let scale = 1e-10 * (1.0 + m.lipschitz_hat);
        report.push(format!("monotone/{name}"), if m.monotone() { m.mu_hat + scale } else { m.mu_hat.min(-scale) });
        let c = f.constants();
        if let Some(mu) = c.strong_monotonicity.filter(|&mu| mu > 0.0) {
            report.push(format!("monotone/{name}/mu-certified"), m.mu_hat - mu + 1e-9);
        }
        report.push(format!("monotone/{name}/mu-below-l"), m.lipschitz_hat - m.mu_hat + 1e-9);
        if let Some(l) = c.lipschitz {
            report.push(format!("monotone/{name}/lipschitz-declared"), l - m.lipschitz_hat + 1e-9);
        }
        if let Some(alpha) = c.cocoercivity {
            let r = check_cocoercive(f, &s)?;
            let slack = if r.cocoercive() { alpha - r.alpha_hat + 1e-9 } else { -1.0 };
            report.push(format!("cocoercive/{name}"), slack);
        }
    }
    Ok(())
}

fn resolvent_suite(report: &mut SuiteReport, samples: usize, seed: u64) -> Result<()> {
    let step = 0.25;
    let tol = 1e-12;
    let order = 20;
    for name in FIELDS {
        let inst = lookup(name)?;
        let f = inst.field()?;
        let s = sampler_for(f, samples, seed)?;
        let backends = [
            ("exact", ResolventBackend::ExactAffine),
            ("picard", ResolventBackend::FixedPointIter { tol, max_inner: 1000 }),
            ("series", ResolventBackend::TruncatedSeries { order: 60 }),
        ];
        for (label, backend) in backends {
            let r = check_firmly_nonexpansive(f.dim(), |x| resolvent(f, step, backend, x), &s)?;
            report.push(format!("resolvent/{name}/{label}/firm"), r.min_slack.min(r.min_reflected_slack) + 1e-8);
        }
        let l = f.constants().lipschitz.expect("registry fields declare L");
        let affine = f.affine().expect("registry fields are affine");
        let q = step * l;
        let mut worst = f64::INFINITY;
        for i in 0..s.count() {
            let (x, _) = s.pair(i);
            let exact = resolvent(f, step, ResolventBackend::ExactAffine, &x)?;
            let picard = resolvent(f, step, ResolventBackend::FixedPointIter { tol, max_inner: 1000 }, &x)?;
            let series = resolvent(f, step, ResolventBackend::TruncatedSeries { order }, &x)?;
            let base = x.axpy(-step, &affine.offset).norm();
            let series_bound = (1e-10f64).max(q.powi(order as i32 + 1) / (1.0 - q) * base);
            let picard_bound = (1e-10f64).max(tol / (1.0 - q));
            worst = worst.min(series_bound - series.dist(&exact)).min(picard_bound - picard.dist(&exact));
        }
        report.push(format!("resolvent/{name}/backends-agree"), worst);
    }
    Ok(())
}

fn descent_suite(report: &mut SuiteReport, fault: Option<Fault>) -> Result<()> {
    for name in SMOOTH {
        let inst = lookup(name)?;
        let p = inst.objective()?;
        let t = run_gd(p, &inst.start, 1000, None)?;
        let r = check_descent_lemma(&t, DescentLemma::GdSmooth { problem: p })?;
        report.push(format!("descent/gd-smooth/{name}"), r.min_slack() + 1e-9);
    }
    for name in FIELDS {
        let inst = lookup(name)?;
        let f = inst.field()?;
        for step in [0.1, 1.0, 10.0] {
            let t = run_ppm(f, &inst.start, 100, step, ResolventBackend::ExactAffine)?;
            let r = check_descent_lemma(&t, DescentLemma::PpmMonotone)?;
            report.push(format!("descent/ppm-monotone/{name}/eta={step}"), r.min_slack() + 1e-9);
        }
    }
    let inst = lookup("strongmono-affine")?;
    let f = inst.field()?;
    let t = run_eg_with_fault(f, &inst.start, 100, None, fault)?;
    let r = check_descent_lemma(&t, DescentLemma::EgStronglyMonotone { field: f })?;
    report.push("descent/eg-strongly-monotone/strongmono-affine", r.min_slack() + 1e-9);
    Ok(())
}

/// Per-step ratios ||z_{k+1} - z*||² / ||z_k - z*||², stopping once the
/// distance falls below `floor` where rounding would dominate.
pub fn squared_distance_ratios(trace: &RunTrace, floor: f64) -> Vec<f64> {
    let d: Vec<f64> = trace.records().iter().map_while(|r| r.dist_err).collect();
    d.windows(2).take_while(|w| w[0] >= floor).map(|w| (w[1] / w[0]).powi(2)).collect()
}

fn min_margin(ratios: &[f64], bound: f64) -> f64 {
    ratios.iter().map(|r| bound - r).fold(f64::INFINITY, f64::min)
}

fn rates_suite(report: &mut SuiteReport, fault: Option<Fault>) -> Result<()> {
    let abs = lookup("abs")?;
    let p = abs.objective()?;
    let t = run_subgradient(p, &abs.start, 10_000, None)?;
    let avg = t.last().average.as_ref().and_then(|a| a.f_err).expect("average recorded");
    report.push("rates/subgradient-average/abs", 0.01 + 1e-9 - avg);

    let q = lookup("quadratic-cond100")?;
    let p = q.objective()?;
    let (mu, l) = (1.0, 100.0);
    let x_star = &p.optimum().expect("known").x;
    let r0 = q.start.dist(x_star).powi(2);
    let gd = run_gd(p, &q.start, 10_000, None)?;
    let worst = [100usize, 1000, 10_000]
        .iter()
        .map(|&k| r0 * l / (2.0 * k as f64) - gd.records()[k].f_err.expect("known"))
        .fold(f64::INFINITY, f64::min);
    report.push("rates/gd-sublinear/quadratic-cond100", worst);

    let step = 2.0 / (l + mu);
    let t = run_gd(p, &q.start, 200, Some(step))?;
    let bound = 1.0 - 2.0 * step * mu * l / (mu + l);
    report.push(
        "rates/gd-strongly-convex/quadratic-cond100",
        min_margin(&squared_distance_ratios(&t, 1e-4), bound) + 1e-9,
    );

    let agd = run_agd(p, &q.start, 10_000, None)?;
    let fit = fit_rate(&agd, Metric::FErr, RateModel::Power, FitWindow::between(100, 10_000))?;
    report.push("rates/agd-slope/quadratic-cond100", -1.8 - fit.estimate);

    let sm = lookup("strongmono-affine")?;
    let f = sm.field()?;
    let t = run_forward(f, &ConstraintSet::WholeSpace, &sm.start, 50, None)?;
    report.push("rates/forward/strongmono-affine", min_margin(&squared_distance_ratios(&t, 1e-4), 0.75) + 1e-9);
    let t = run_eg_with_fault(f, &sm.start, 100, None, fault)?;
    let (mu, l) = (1.0, 2.0);
    report.push(
        "rates/eg/strongmono-affine",
        min_margin(&squared_distance_ratios(&t, 1e-4), 1.0 - mu / (4.0 * l)) + 1e-9,
    );

    let rot = lookup("rotation")?;
    let f = rot.field()?;
    let t = run_forward(f, &ConstraintSet::WholeSpace, &rot.start, 100, Some(0.1))?;
    let growth = t.records().windows(2).map(|w| w[1].x.norm() - w[0].x.norm()).fold(f64::INFINITY, f64::min);
    report.push("rates/forward-diverges/rotation", growth);
    let eta = 0.1;
    let t = run_eg_with_fault(f, &rot.start, 100, Some(eta), fault)?;
    let want = 1.0 - eta * eta + eta.powi(4);
    let dev = squared_distance_ratios(&t, 1e-4).iter().map(|r| (r - want).abs()).fold(0.0, f64::max);
    report.push("rates/eg-factor/rotation", 1e-10 - dev);
    for eta in [0.1, 1.0, 10.0] {
        let t = run_ppm(f, &rot.start, 20, eta, ResolventBackend::ExactAffine)?;
        let want = 1.0 / (1.0 + eta * eta);
        let dev =
            squared_distance_ratios(&t, 1e-100).iter().map(|r| (r.sqrt() - want.sqrt()).abs()).fold(0.0, f64::max);
        report.push(format!("rates/ppm-factor/rotation/eta={eta}"), 1e-10 - dev);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_suites() {
        for n in Suite::NAMES {
            assert!(Suite::parse(n).is_some());
        }
        assert_eq!(Suite::parse("bogus"), None);
    }

    #[test]
    fn all_suites_pass_and_are_deterministic() {
        let a = run_suite(Suite::All, 200, 42, None).unwrap();
        assert!(a.passed(), "{}", a.render());
        let b = run_suite(Suite::All, 200, 42, None).unwrap();
        assert_eq!(a.render(), b.render());
        assert!(a.checks.windows(2).all(|w| w[0].name < w[1].name));
    }

    #[test]
    fn eg_sign_fault_fails_descent() {
        let r = run_suite(Suite::Descent, 10, 0, Some(Fault::EgMidpointSign)).unwrap();
        assert!(!r.passed());
        let failed: Vec<_> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        assert_eq!(failed, vec!["descent/eg-strongly-monotone/strongmono-affine"]);
    }
}
