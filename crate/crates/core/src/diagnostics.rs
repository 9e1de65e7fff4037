//! Empirical property checks on sampled pairs, convergence-rate fits, and
//! per-step descent lemma slack. Sampling gives one-sided evidence: a
//! violation falsifies a property, a clean report does not prove it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::point::{dot, Point};
use crate::problem::{ScalarProblem, VectorField};
use crate::set::BoxSet;
use crate::trace::{Metric, RunTrace};

/// Pairs closer than this are redrawn.
pub const MIN_PAIR_DISTANCE: f64 = 1e-8;

/// Draws point pairs uniformly from a box. Pair i comes from its own
/// ChaCha stream, so reports do not depend on evaluation order.
#[derive(Clone, Debug, PartialEq)]
pub struct Sampler {
    region: BoxSet,
    count: usize,
    seed: u64,
}

impl Sampler {
    pub fn new(region: BoxSet, count: usize, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidParameter("sampler needs at least one pair".into()));
        }
        Ok(Self { region, count, seed })
    }

    /// The cube [-half_width, half_width]^dim.
    pub fn cube(dim: usize, half_width: f64, count: usize, seed: u64) -> Result<Self> {
        let lo = Point::new(vec![-half_width; dim])?;
        let hi = Point::new(vec![half_width; dim])?;
        let crate::set::ConstraintSet::Box(b) = crate::set::ConstraintSet::boxed(lo, hi)? else {
            unreachable!("boxed returns a box");
        };
        Self::new(b, count, seed)
    }

    pub fn dim(&self) -> usize {
        self.region.lower().dim()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn pair(&self, i: usize) -> (Point, Point) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64);
        loop {
            let x = self.draw(&mut rng);
            let y = self.draw(&mut rng);
            if x.dist(&y) >= MIN_PAIR_DISTANCE {
                return (x, y);
            }
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        (0..self.count).map(|i| self.pair(i))
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Point {
        let (lo, hi) = (self.region.lower(), self.region.upper());
        Point::from_vec(
            (0..lo.dim()).map(|j| if lo[j] == hi[j] { lo[j] } else { rng.random_range(lo[j]..=hi[j]) }).collect(),
        )
    }
}

fn check_sampler_dim(f: &VectorField, s: &Sampler) -> Result<()> {
    crate::error::ensure_dim(f.dim(), s.dim())
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneReport {
    pub pairs: usize,
    /// Minimum of ⟨F(x) - F(y), x - y⟩ / ||x - y||²; an empirical upper
    /// bound on the strong monotonicity modulus.
    pub mu_hat: f64,
    /// Maximum of ||F(x) - F(y)|| / ||x - y||; an empirical lower bound
    /// on the Lipschitz constant.
    pub lipschitz_hat: f64,
    pub violations: usize,
}

impl MonotoneReport {
    pub fn monotone(&self) -> bool {
        self.violations == 0
    }
}

/// Relative tolerance under which a normalized quantity counts as zero.
const REL_TOL: f64 = 1e-10;

pub fn check_monotone(f: &VectorField, sampler: &Sampler) -> Result<MonotoneReport> {
    check_sampler_dim(f, sampler)?;
    let mut report = MonotoneReport { pairs: 0, mu_hat: f64::INFINITY, lipschitz_hat: 0.0, violations: 0 };
    for (x, y) in sampler.pairs() {
        let dz = &x - &y;
        let df = &f.eval(&x) - &f.eval(&y);
        let d2 = dz.norm_sq();
        let ratio = dot(&df, &dz) / d2;
        if ratio < -REL_TOL {
            report.violations += 1;
        }
        report.mu_hat = report.mu_hat.min(ratio);
        report.lipschitz_hat = report.lipschitz_hat.max((df.norm_sq() / d2).sqrt());
        report.pairs += 1;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CocoerciveReport {
    pub pairs: usize,
    /// Maximum of ||F(x) - F(y)||² / ⟨F(x) - F(y), x - y⟩ over pairs with a
    /// positive denominator.
    pub alpha_hat: f64,
    /// Pairs whose inner product is not positive while F moved.
    pub violations: usize,
}

impl CocoerciveReport {
    pub fn cocoercive(&self) -> bool {
        self.violations == 0
    }
}

pub fn check_cocoercive(f: &VectorField, sampler: &Sampler) -> Result<CocoerciveReport> {
    check_sampler_dim(f, sampler)?;
    let mut report = CocoerciveReport { pairs: 0, alpha_hat: 0.0, violations: 0 };
    for (x, y) in sampler.pairs() {
        let dz = &x - &y;
        let df = &f.eval(&x) - &f.eval(&y);
        let d2 = dz.norm_sq();
        let num = df.norm_sq();
        let den = dot(&df, &dz);
        report.pairs += 1;
        if den <= REL_TOL * d2 {
            if num > REL_TOL * d2 {
                report.violations += 1;
            }
            continue;
        }
        report.alpha_hat = report.alpha_hat.max(num / den);
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FirmReport {
    pub pairs: usize,
    /// Minimum of ||x - y||² - ||Bx - By||² - ||(I - B)x - (I - B)y||².
    pub min_slack: f64,
    /// Minimum of ||x - y||² - ||(2B - I)x - (2B - I)y||².
    pub min_reflected_slack: f64,
    pub violations: usize,
}

impl FirmReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.min_slack >= -tol && self.min_reflected_slack >= -tol
    }
}

/// Checks firm non-expansivity of `b` and non-expansivity of 2B - I.
/// A pair violates when either slack is below -1e-10 ||x - y||².
pub fn check_firmly_nonexpansive(
    dim: usize,
    b: impl Fn(&Point) -> Result<Point>,
    sampler: &Sampler,
) -> Result<FirmReport> {
    crate::error::ensure_dim(dim, sampler.dim())?;
    let mut report =
        FirmReport { pairs: 0, min_slack: f64::INFINITY, min_reflected_slack: f64::INFINITY, violations: 0 };
    for (x, y) in sampler.pairs() {
        let (bx, by) = (b(&x)?, b(&y)?);
        let dz = &x - &y;
        let db = &bx - &by;
        let rest = &dz - &db;
        let d2 = dz.norm_sq();
        let slack = d2 - db.norm_sq() - rest.norm_sq();
        let reflected = d2 - (&db.scaled(2.0) - &dz).norm_sq();
        if slack.min(reflected) < -REL_TOL * d2 {
            report.violations += 1;
        }
        report.min_slack = report.min_slack.min(slack);
        report.min_reflected_slack = report.min_reflected_slack.min(reflected);
        report.pairs += 1;
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateModel {
    /// err ≈ C k^s
    Power,
    /// err ≈ C r^k
    Linear,
}

/// Which records enter a fit. Without explicit bounds the first 10% of
/// iterations are dropped as burn-in.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FitWindow {
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
}

impl FitWindow {
    pub fn between(k_min: usize, k_max: usize) -> Self {
        Self { k_min: Some(k_min), k_max: Some(k_max) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub model: RateModel,
    /// Exponent s for power fits, ratio r for linear fits.
    pub estimate: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares fit of log err against log k (power) or k (linear).
pub fn fit_series(points: &[(usize, f64)], model: RateModel) -> Result<RateFit> {
    let pts: Vec<(usize, f64)> = points.iter().copied().filter(|&(k, _)| model == RateModel::Linear || k > 0).collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientData(format!("rate fit needs at least 10 points, got {}", pts.len())));
    }
    if let Some(&(k, e)) = pts.iter().find(|(_, e)| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidParameter(format!("rate fit needs positive errors, got {e} at k={k}")));
    }
    let xs: Vec<f64> =
        pts.iter().map(|&(k, _)| if model == RateModel::Power { (k as f64).ln() } else { k as f64 }).collect();
    let ys: Vec<f64> = pts.iter().map(|&(_, e)| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    let estimate = if model == RateModel::Power { slope } else { slope.exp() };
    Ok(RateFit { model, estimate, intercept, residual, points: pts.len() })
}

/// Fits a rate model to one metric of a trace.
pub fn fit_rate(trace: &RunTrace, metric: Metric, model: RateModel, window: FitWindow) -> Result<RateFit> {
    let last = trace.last().k;
    let k_min = window.k_min.unwrap_or(last.div_ceil(10));
    let k_max = window.k_max.unwrap_or(last);
    let mut pts = Vec::new();
    for (k, v) in trace.metric(metric) {
        if k < k_min || k > k_max {
            continue;
        }
        match v {
            Some(v) => pts.push((k, v)),
            None => return Err(Error::InsufficientData(format!("metric {metric:?} absent at k={k}"))),
        }
    }
    fit_series(&pts, model)
}

/// Per-step descent inequality to verify along a trace.
#[derive(Clone, Copy, Debug)]
pub enum DescentLemma<'a> {
    /// f(x_{k+1}) ≤ f(x_k) - ||∇f(x_k)||²/(2L) for gradient descent.
    GdSmooth { problem: &'a ScalarProblem },
    /// ||z_{k+1} - z*||² ≤ ||z_k - z*||² - η²||F(z_{k+1})||² for the
    /// proximal point method, read from the slack the run recorded.
    PpmMonotone,
    /// ||z_{k+1} - z*||² ≤ (1 - ημ)||z_k - z*||² + (η²L² - 1 + 2ημ)||z_k - z̃_k||²
    /// for extragradient, with z̃_k = z_k - ηF(z_k).
    EgStronglyMonotone { field: &'a VectorField },
}

impl DescentLemma<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Self::GdSmooth { .. } => "gd-smooth",
            Self::PpmMonotone => "ppm-monotone",
            Self::EgStronglyMonotone { .. } => "eg-strongly-monotone",
        }
    }

    fn algorithm(&self) -> &'static str {
        match self {
            Self::GdSmooth { .. } => "gd",
            Self::PpmMonotone => "ppm",
            Self::EgStronglyMonotone { .. } => "eg",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescentReport {
    /// Right side minus left side of the inequality, per step.
    pub slack: Vec<f64>,
}

impl DescentReport {
    /// Largest violation, zero when every step satisfies the lemma.
    pub fn max_violation(&self) -> f64 {
        self.slack.iter().fold(0.0, |m, &s| m.max(-s))
    }

    pub fn min_slack(&self) -> f64 {
        self.slack.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn check_descent_lemma(trace: &RunTrace, lemma: DescentLemma<'_>) -> Result<DescentReport> {
    let alg = &trace.config().algorithm;
    if alg != lemma.algorithm() {
        return Err(Error::MismatchedLemma { lemma: lemma.name(), found: alg.clone() });
    }
    let xs: Vec<&Point> = trace.iterates().collect();
    let slack = match lemma {
        DescentLemma::GdSmooth { problem } => {
            let l = problem.require_constant(problem.constants().smoothness, "smoothness (L)")?;
            let level = |x: &Point| problem.excess(x).unwrap_or_else(|| problem.value(x));
            let mut out = Vec::with_capacity(xs.len().saturating_sub(1));
            for w in xs.windows(2) {
                let g = problem.gradient(w[0])?;
                out.push(level(w[0]) - g.norm_sq() / (2.0 * l) - level(w[1]));
            }
            out
        }
        DescentLemma::PpmMonotone => {
            if trace.lemma_slack().len() + 1 != xs.len() {
                return Err(Error::UnknownOptimum(format!(
                    "`{}` run has no recorded slack; the field declares no fixed point",
                    trace.config().problem
                )));
            }
            trace.lemma_slack().to_vec()
        }
        DescentLemma::EgStronglyMonotone { field } => {
            let c = field.constants();
            let mu = field.require_constant(c.strong_monotonicity, "strong monotonicity (mu)")?;
            let l = field.require_constant(c.lipschitz, "Lipschitz (L)")?;
            let star = field.fixed_point().ok_or_else(|| Error::UnknownOptimum(field.name().to_string()))?;
            let eta = trace.config().step;
            let coef = eta * eta * l * l - 1.0 + 2.0 * eta * mu;
            xs.windows(2)
                .map(|w| {
                    let gap = eta * eta * field.eval(w[0]).norm_sq();
                    let rhs = (1.0 - eta * mu) * (w[0] - star).norm_sq() + coef * gap;
                    rhs - (w[1] - star).norm_sq()
                })
                .collect()
        }
    };
    Ok(DescentReport { slack })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::run_gd;
    use crate::problems::{affine_field, quadratic, rotation, strongly_monotone_affine};
    use crate::vi::{resolvent, run_eg, run_eg_with_fault, run_ppm, ResolventBackend};
    use nalgebra::DMatrix;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v))
    }

    fn cond100() -> ScalarProblem {
        quadratic(diag(&[1.0, 100.0]), Point::new(vec![1.0, 100.0]).unwrap()).unwrap()
    }

    fn sampler(n: usize) -> Sampler {
        Sampler::cube(2, 5.0, n, 42).unwrap()
    }

    #[test]
    fn sampler_is_deterministic_and_order_free() {
        let s = sampler(10);
        let all: Vec<_> = s.pairs().collect();
        assert_eq!(all[7], s.pair(7));
        assert_eq!(all, sampler(10).pairs().collect::<Vec<_>>());
        assert_ne!(all[0], Sampler::cube(2, 5.0, 10, 43).unwrap().pair(0));
        assert!(all.iter().all(|(x, y)| x.dist(y) >= MIN_PAIR_DISTANCE));
        assert!(Sampler::cube(2, 1.0, 0, 0).is_err());
    }

    #[test]
    fn monotone_examples() {
        let (_, rot) = rotation().unwrap();
        let r = check_monotone(&rot, &sampler(1000)).unwrap();
        assert!(r.mu_hat.abs() <= 1e-12 && r.monotone());
        let g = VectorField::gradient_field(&cond100()).unwrap();
        let r = check_monotone(&g, &sampler(10_000)).unwrap();
        assert!(r.monotone());
        assert!(r.mu_hat >= 1.0 - 1e-12 && r.mu_hat < 1.01, "{}", r.mu_hat);
        assert!(r.mu_hat <= r.lipschitz_hat + 1e-9 && r.lipschitz_hat <= 100.0 + 1e-9);
        let neg = affine_field(-DMatrix::identity(2, 2), Point::zeros(2)).unwrap();
        assert!(!check_monotone(&neg, &sampler(10)).unwrap().monotone());
    }

    #[test]
    fn cocoercive_examples() {
        let g = VectorField::gradient_field(&cond100()).unwrap();
        let r = check_cocoercive(&g, &sampler(1000)).unwrap();
        assert!(r.cocoercive() && r.alpha_hat <= 100.0 + 1e-9);
        let (_, rot) = rotation().unwrap();
        assert!(!check_cocoercive(&rot, &sampler(100)).unwrap().cocoercive());
        let c = affine_field(DMatrix::identity(2, 2) * 3.0, Point::zeros(2)).unwrap();
        let r = check_cocoercive(&c, &sampler(100)).unwrap();
        assert!((r.alpha_hat - 3.0).abs() < 1e-12);
    }

    #[test]
    fn firm_examples() {
        let s = sampler(500);
        let half = check_firmly_nonexpansive(2, |x| Ok(x.scaled(0.5)), &s).unwrap();
        for (x, y) in s.pairs() {
            assert!(half.min_slack <= 0.5 * x.dist(&y).powi(2) + 1e-12);
        }
        assert!(half.holds(0.0) && half.violations == 0);
        let id = check_firmly_nonexpansive(2, |x| Ok(x.clone()), &s).unwrap();
        assert!(id.min_slack.abs() < 1e-12 && id.min_reflected_slack.abs() < 1e-12);
        let double = check_firmly_nonexpansive(2, |x| Ok(x.scaled(2.0)), &s).unwrap();
        assert!(double.violations == s.count() && !double.holds(1e-8));
    }

    #[test]
    fn resolvent_of_identity_is_half() {
        let f = affine_field(DMatrix::identity(2, 2), Point::zeros(2)).unwrap();
        let s = sampler(200);
        let r = check_firmly_nonexpansive(2, |x| resolvent(&f, 1.0, ResolventBackend::ExactAffine, x), &s).unwrap();
        let want = s.pairs().map(|(x, y)| 0.5 * x.dist(&y).powi(2)).fold(f64::INFINITY, f64::min);
        assert!((r.min_slack - want).abs() < 1e-12);
    }

    #[test]
    fn exact_fits() {
        let geo: Vec<(usize, f64)> = (0..50).map(|k| (k, 3.0 * 0.9f64.powi(k as i32))).collect();
        let f = fit_series(&geo, RateModel::Linear).unwrap();
        assert!((f.estimate - 0.9).abs() < 1e-10 && f.residual < 1e-12);
        let pow: Vec<(usize, f64)> = (1..50).map(|k| (k, 2.0 * (k as f64).powf(-1.5))).collect();
        let f = fit_series(&pow, RateModel::Power).unwrap();
        assert!((f.estimate + 1.5).abs() < 1e-8 && (f.intercept - 2.0f64.ln()).abs() < 1e-8);
        assert!(fit_series(&pow[..5], RateModel::Power).is_err());
        let mut bad = pow.clone();
        bad[20].1 = 0.0;
        assert!(fit_series(&bad, RateModel::Power).is_err());
    }

    #[test]
    fn gd_linear_ratio_envelope() {
        let f = cond100();
        let (mu, l) = (1.0, 100.0);
        let eta = 1.0 / l;
        let t = run_gd(&f, &Point::new(vec![5.0, 5.0]).unwrap(), 500, Some(eta)).unwrap();
        let fit = fit_rate(&t, Metric::FErr, RateModel::Linear, FitWindow::default()).unwrap();
        let bound = 1.0 - 2.0 * eta * mu * l / (mu + l);
        assert!(fit.estimate >= bound - 0.01 && fit.estimate < 1.0, "{}", fit.estimate);
    }

    #[test]
    fn gd_descent_lemma() {
        let f = cond100();
        let x0 = Point::new(vec![5.0, 5.0]).unwrap();
        let ok = run_gd(&f, &x0, 200, None).unwrap();
        let r = check_descent_lemma(&ok, DescentLemma::GdSmooth { problem: &f }).unwrap();
        assert!(r.max_violation() <= 1e-9 && r.slack.len() == 200);
        let big = run_gd(&f, &x0, 5, Some(10.0 / 100.0)).unwrap();
        assert!(check_descent_lemma(&big, DescentLemma::GdSmooth { problem: &f }).unwrap().max_violation() > 1.0);
        assert!(matches!(check_descent_lemma(&ok, DescentLemma::PpmMonotone), Err(Error::MismatchedLemma { .. })));
    }

    #[test]
    fn ppm_and_eg_lemmas() {
        let f = strongly_monotone_affine(1.0, 2.0, Point::new(vec![1.0, -1.0]).unwrap()).unwrap();
        let z0 = Point::new(vec![4.0, 3.0]).unwrap();
        let ppm = run_ppm(&f, &z0, 30, 1.0, ResolventBackend::ExactAffine).unwrap();
        assert!(check_descent_lemma(&ppm, DescentLemma::PpmMonotone).unwrap().max_violation() <= 1e-9);
        let eg = run_eg(&f, &z0, 30, None).unwrap();
        let lemma = DescentLemma::EgStronglyMonotone { field: &f };
        assert!(check_descent_lemma(&eg, lemma).unwrap().max_violation() <= 1e-9);
        let bad = run_eg_with_fault(&f, &z0, 30, None, Some(crate::fault::Fault::EgMidpointSign)).unwrap();
        assert!(check_descent_lemma(&bad, lemma).unwrap().max_violation() > 1e-3);
    }
}
