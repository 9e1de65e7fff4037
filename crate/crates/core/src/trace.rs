//! Per-iteration run records shared by every discrete algorithm.

use crate::point::Point;
use crate::problem::{ScalarProblem, VectorField};

/// Running average of the iterates seen before a record, and its
/// objective value (subgradient method only).
#[derive(Clone, Debug, PartialEq)]
pub struct Average {
    pub x: Point,
    pub value: f64,
    pub f_err: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub k: usize,
    /// Accumulated time: k times the step size.
    pub t: f64,
    pub x: Point,
    /// ||x - x*|| when the optimum or fixed point is known.
    pub dist_err: Option<f64>,
    /// f(x) - f* when the optimum is known.
    pub f_err: Option<f64>,
    /// ||∇f(x)|| (or a subgradient norm) for objectives, ||F(x)|| for fields.
    pub grad_norm: Option<f64>,
    pub average: Option<Average>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub algorithm: String,
    pub problem: String,
    pub step: f64,
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    DistErr,
    FErr,
    GradNorm,
    /// f at the running average iterate, minus f*.
    AverageFErr,
}

/// Immutable record of one run. Records are sorted by `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    config: RunConfig,
    records: Vec<Record>,
    perturbations: Vec<usize>,
    lemma_slack: Vec<f64>,
}

impl RunTrace {
    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> &Record {
        self.records.last().expect("a trace always holds the initial record")
    }

    /// Iteration indices at which a perturbation was injected.
    pub fn perturbations(&self) -> &[usize] {
        &self.perturbations
    }

    /// Per-step slack of the proximal point descent lemma:
    /// ||z_k - z*||² - ||z_{k+1} - z*||² - η²||F(z_{k+1})||².
    pub fn lemma_slack(&self) -> &[f64] {
        &self.lemma_slack
    }

    pub fn metric(&self, m: Metric) -> Vec<(usize, Option<f64>)> {
        self.records
            .iter()
            .map(|r| {
                let v = match m {
                    Metric::DistErr => r.dist_err,
                    Metric::FErr => r.f_err,
                    Metric::GradNorm => r.grad_norm,
                    Metric::AverageFErr => r.average.as_ref().and_then(|a| a.f_err),
                };
                (r.k, v)
            })
            .collect()
    }

    pub fn iterates(&self) -> impl Iterator<Item = &Point> {
        self.records.iter().map(|r| &r.x)
    }
}

pub(crate) struct TraceBuilder {
    trace: RunTrace,
}

impl TraceBuilder {
    pub fn new(algorithm: &str, problem: &str, step: f64, seed: Option<u64>) -> Self {
        Self {
            trace: RunTrace {
                config: RunConfig { algorithm: algorithm.to_string(), problem: problem.to_string(), step, seed },
                records: Vec::new(),
                perturbations: Vec::new(),
                lemma_slack: Vec::new(),
            },
        }
    }

    pub fn push(&mut self, record: Record) {
        debug_assert!(self.trace.records.last().is_none_or(|r| r.k < record.k));
        self.trace.records.push(record);
    }

    pub fn perturbation(&mut self, k: usize) {
        self.trace.perturbations.push(k);
    }

    pub fn slack(&mut self, s: f64) {
        self.trace.lemma_slack.push(s);
    }

    pub fn finish(self) -> RunTrace {
        self.trace
    }
}

pub(crate) fn scalar_record(p: &ScalarProblem, k: usize, step: f64, x: &Point) -> Record {
    let grad_norm = if p.has_subgradient() { p.subgradient(x).ok().map(|g| g.norm()) } else { None };
    Record {
        k,
        t: k as f64 * step,
        x: x.clone(),
        dist_err: p.optimum().map(|o| x.dist(&o.x)),
        f_err: p.excess(x),
        grad_norm,
        average: None,
    }
}

pub(crate) fn field_record(f: &VectorField, k: usize, step: f64, z: &Point) -> Record {
    Record {
        k,
        t: k as f64 * step,
        x: z.clone(),
        dist_err: f.fixed_point().map(|s| z.dist(s)),
        f_err: None,
        grad_norm: Some(f.eval(z).norm()),
        average: None,
    }
}
