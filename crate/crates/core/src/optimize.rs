//! Discrete-time minimization: subgradient method, gradient descent,
//! Nesterov's accelerated method, and perturbed gradient descent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::point::Point;
use crate::problem::ScalarProblem;
use crate::trace::{scalar_record, Average, RunTrace, TraceBuilder};

fn check_step(step: f64) -> Result<f64> {
    if step > 0.0 && step.is_finite() {
        Ok(step)
    } else {
        Err(Error::InvalidParameter(format!("step size must be positive, got {step}")))
    }
}

fn default_inverse_smoothness(p: &ScalarProblem, step: Option<f64>) -> Result<f64> {
    match step {
        Some(s) => check_step(s),
        None => {
            let l = p.require_constant(p.constants().smoothness, "smoothness (L)")?;
            check_step(1.0 / l)
        }
    }
}

/// Subgradient method with a constant step, x_{k+1} = x_k - η g_k.
///
/// Without an explicit step, uses η = R / (G √T). Record `k ≥ 1` carries
/// the average of the first `k` iterates and the objective there.
pub fn run_subgradient(p: &ScalarProblem, x0: &Point, iters: usize, step: Option<f64>) -> Result<RunTrace> {
    p.check_dim(x0)?;
    if !p.has_subgradient() {
        return Err(Error::MissingOracle { problem: p.name().into(), oracle: "subgradient" });
    }
    let step = match step {
        Some(s) => check_step(s)?,
        None => {
            let c = p.constants();
            let r = p.require_constant(c.initial_distance, "initial distance (R)")?;
            let g = p.require_constant(c.subgradient_bound, "subgradient bound (G)")?;
            if iters == 0 {
                return Err(Error::InvalidParameter("default step needs at least one iteration".into()));
            }
            check_step(r / (g * (iters as f64).sqrt()))?
        }
    };
    let mut tb = TraceBuilder::new("subgradient", p.name(), step, None);
    tb.push(scalar_record(p, 0, step, x0));
    let mut x = x0.clone();
    let mut sum = vec![0.0; x.dim()];
    for k in 0..iters {
        let g = p.subgradient(&x)?;
        for (s, v) in sum.iter_mut().zip(x.as_slice()) {
            *s += v;
        }
        x = x.axpy(-step, &g).ensure_finite(|| format!("subgradient iterate {}", k + 1))?;
        let n = (k + 1) as f64;
        let avg = Point::from_vec(sum.iter().map(|s| s / n).collect());
        let mut rec = scalar_record(p, k + 1, step, &x);
        rec.average = Some(Average { value: p.value(&avg), f_err: p.excess(&avg), x: avg });
        tb.push(rec);
    }
    Ok(tb.finish())
}

/// Gradient descent, x_{k+1} = x_k - η∇f(x_k), with η = 1/L by default.
pub fn run_gd(p: &ScalarProblem, x0: &Point, iters: usize, step: Option<f64>) -> Result<RunTrace> {
    p.check_dim(x0)?;
    let step = default_inverse_smoothness(p, step)?;
    let mut tb = TraceBuilder::new("gd", p.name(), step, None);
    tb.push(scalar_record(p, 0, step, x0));
    let mut x = x0.clone();
    for k in 0..iters {
        let g = p.gradient(&x)?;
        x = x.axpy(-step, &g).ensure_finite(|| format!("gd iterate {}", k + 1))?;
        tb.push(scalar_record(p, k + 1, step, &x));
    }
    Ok(tb.finish())
}

/// Momentum weight λ_k = (k - 1)/(k + 2) of Nesterov's method, k ≥ 1.
pub fn nesterov_weight(k: usize) -> f64 {
    (k as f64 - 1.0) / (k as f64 + 2.0)
}

/// Nesterov's accelerated method in two-sequence form:
///
/// ```text
/// y_{k+1} = x_k - η∇f(x_k)
/// x_{k+1} = (1 - λ_k) y_{k+1} + λ_k y_k,   λ_k = (k-1)/(k+2)
/// ```
///
/// Indexing starts at k = 1 with y_1 = x_1 = x0, so the first step is a
/// plain gradient step. Record `j` holds x_{j+1}.
pub fn run_agd(p: &ScalarProblem, x0: &Point, iters: usize, step: Option<f64>) -> Result<RunTrace> {
    p.check_dim(x0)?;
    let step = default_inverse_smoothness(p, step)?;
    let mut tb = TraceBuilder::new("agd", p.name(), step, None);
    tb.push(scalar_record(p, 0, step, x0));
    let mut x = x0.clone();
    let mut y = x0.clone();
    for k in 1..=iters {
        let lambda = nesterov_weight(k);
        let y_next = x.axpy(-step, &p.gradient(&x)?);
        x = y_next.scaled(1.0 - lambda).axpy(lambda, &y).ensure_finite(|| format!("agd iterate {k}"))?;
        y = y_next;
        tb.push(scalar_record(p, k, step, &x));
    }
    Ok(tb.finish())
}

/// Hyperparameters of perturbed gradient descent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PgdConfig {
    /// Step size; 1/L when absent.
    pub step: Option<f64>,
    /// Radius r of the uniform-ball perturbation. Zero disables perturbations.
    pub radius: f64,
    /// Perturb only when ||∇f(x)|| ≤ this threshold.
    pub grad_threshold: f64,
    /// Minimum number of iterations between perturbations.
    pub cooldown: usize,
    pub seed: u64,
}

impl PgdConfig {
    /// Defaults tied to a target accuracy ε: r = ε, g_thres = ε and
    /// t_thres = ⌈L / √(ρε)⌉.
    pub fn from_epsilon(p: &ScalarProblem, epsilon: f64, seed: u64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        let c = p.constants();
        let l = p.require_constant(c.smoothness, "smoothness (L)")?;
        let rho = p.require_constant(c.hessian_lipschitz, "Hessian Lipschitz (rho)")?;
        let cooldown = if rho > 0.0 { (l / (rho * epsilon).sqrt()).ceil() as usize } else { 1 };
        Ok(Self { step: None, radius: epsilon, grad_threshold: epsilon, cooldown, seed })
    }
}

/// Uniform sample from the ball of radius `r` in R^d: Gaussian direction,
/// radius r·u^{1/d}.
pub fn sample_uniform_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, r: f64) -> Point {
    let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let u: f64 = rng.random();
    let scale = r * u.powf(1.0 / dim as f64) / norm;
    Point::from_vec(g.into_iter().map(|v| v * scale).collect())
}

/// Perturbed gradient descent.
///
/// Takes gradient steps; when the gradient norm is at most the threshold
/// and at least `cooldown` iterations have passed since the last
/// perturbation, adds uniform-ball noise first. Perturbation iterations
/// are listed in [`RunTrace::perturbations`].
pub fn run_pgd(p: &ScalarProblem, x0: &Point, iters: usize, cfg: &PgdConfig) -> Result<RunTrace> {
    p.check_dim(x0)?;
    p.require_constant(p.constants().hessian_lipschitz, "Hessian Lipschitz (rho)")?;
    if !(cfg.radius >= 0.0 && cfg.radius.is_finite()) {
        return Err(Error::InvalidParameter(format!("perturbation radius must be nonnegative, got {}", cfg.radius)));
    }
    let step = default_inverse_smoothness(p, cfg.step)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tb = TraceBuilder::new("pgd", p.name(), step, Some(cfg.seed));
    tb.push(scalar_record(p, 0, step, x0));
    let mut x = x0.clone();
    let mut last: Option<usize> = None;
    for k in 0..iters {
        let mut g = p.gradient(&x)?;
        let cooled = last.is_none_or(|l| k - l >= cfg.cooldown);
        if cfg.radius > 0.0 && g.norm() <= cfg.grad_threshold && cooled {
            x = &x + &sample_uniform_ball(&mut rng, x.dim(), cfg.radius);
            g = p.gradient(&x)?;
            last = Some(k);
            tb.perturbation(k);
        }
        x = x.axpy(-step, &g).ensure_finite(|| format!("pgd iterate {}", k + 1))?;
        tb.push(scalar_record(p, k + 1, step, &x));
    }
    Ok(tb.finish())
}
