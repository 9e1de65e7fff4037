//! Fixed-point algorithms for variational inequalities: projected forward
//! iteration, proximal point with pluggable resolvents, extragradient,
//! optimistic GDA, and lookahead.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_dim, Error, Result};
use crate::fault::Fault;
use crate::point::{dot, Point};
use crate::problem::VectorField;
use crate::set::{project, ConstraintSet};
use crate::trace::{field_record, RunTrace, TraceBuilder};

/// How the backward operator B = (I + ηF)⁻¹ is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ResolventBackend {
    /// Direct solve of (I + ηM) y = x - ηq; affine fields only.
    ExactAffine,
    /// Picard iteration y ← x - ηF(y), a contraction when ηL < 1.
    FixedPointIter { tol: f64, max_inner: usize },
    /// Σ_{j=0}^{m} (-ηM)^j (x - ηq); affine fields only.
    TruncatedSeries { order: usize },
}

impl ResolventBackend {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::FixedPointIter { tol, max_inner } if !(tol > 0.0) || max_inner == 0 => Err(Error::InvalidParameter(
                format!("picard backend needs tol > 0 and max_inner >= 1, got {tol}, {max_inner}"),
            )),
            Self::TruncatedSeries { order: 0 } => {
                Err(Error::InvalidParameter("series backend needs order >= 1".into()))
            }
            _ => Ok(()),
        }
    }
}

fn check_step(step: f64) -> Result<f64> {
    if step > 0.0 && step.is_finite() {
        Ok(step)
    } else {
        Err(Error::InvalidParameter(format!("step size must be positive, got {step}")))
    }
}

/// Evaluates y = (I + ηF)⁻¹ x, i.e. solves y + ηF(y) = x.
pub fn resolvent(f: &VectorField, step: f64, backend: ResolventBackend, x: &Point) -> Result<Point> {
    f.check_dim(x)?;
    check_step(step)?;
    backend.validate()?;
    match backend {
        ResolventBackend::ExactAffine => {
            let a = affine_of(f, "exact affine resolvent")?;
            let n = x.dim();
            let lhs = DMatrix::identity(n, n) + &a.matrix * step;
            let rhs = DVector::from_iterator(n, (0..n).map(|i| x[i] - step * a.offset[i]));
            let y = lhs.lu().solve(&rhs).ok_or(Error::Singular)?;
            Point::from_vec(y.iter().copied().collect()).ensure_finite(|| "resolvent".into())
        }
        ResolventBackend::FixedPointIter { tol, max_inner } => {
            let mut y = x.clone();
            let mut residual = f64::INFINITY;
            for _ in 0..max_inner {
                let fy = f.eval(&y);
                residual = y.axpy(step, &fy).dist(x);
                if residual <= tol {
                    return Ok(y);
                }
                y = x.axpy(-step, &fy);
                if !y.is_finite() {
                    break;
                }
            }
            if y.is_finite() {
                residual = y.axpy(step, &f.eval(&y)).dist(x);
                if residual <= tol {
                    return Ok(y);
                }
            }
            Err(Error::ResolventNotConverged { iterations: max_inner, residual })
        }
        ResolventBackend::TruncatedSeries { order } => {
            let a = affine_of(f, "series resolvent")?;
            let base = x.axpy(-step, &a.offset);
            let mut term = base.clone();
            let mut sum = base;
            for _ in 0..order {
                term = Point::from_vec(a.linear(&term)).scaled(-step);
                sum = &sum + &term;
            }
            sum.ensure_finite(|| "series resolvent".into())
        }
    }
}

fn affine_of<'a>(f: &'a VectorField, what: &str) -> Result<&'a crate::problem::AffineMap> {
    f.affine().ok_or_else(|| Error::Unsupported(format!("{what} needs an affine field, `{}` is not", f.name())))
}

/// Projected forward iteration z_{k+1} = Π(z_k - ηF(z_k)); η = μ/L² by default.
pub fn run_forward(
    f: &VectorField,
    set: &ConstraintSet,
    z0: &Point,
    iters: usize,
    step: Option<f64>,
) -> Result<RunTrace> {
    f.check_dim(z0)?;
    if let Some(d) = set.dim() {
        ensure_dim(f.dim(), d)?;
    }
    let step = match step {
        Some(s) => check_step(s)?,
        None => {
            let c = f.constants();
            let mu = f.require_constant(c.strong_monotonicity, "strong monotonicity (mu)")?;
            let l = f.require_constant(c.lipschitz, "Lipschitz (L)")?;
            if !(mu > 0.0) {
                return Err(Error::InvalidParameter("default forward step needs mu > 0".into()));
            }
            check_step(mu / (l * l))?
        }
    };
    let mut tb = TraceBuilder::new("forward", f.name(), step, None);
    tb.push(field_record(f, 0, step, z0));
    let mut z = z0.clone();
    for k in 0..iters {
        z = project(set, &z.axpy(-step, &f.eval(&z)))?.ensure_finite(|| format!("forward iterate {}", k + 1))?;
        tb.push(field_record(f, k + 1, step, &z));
    }
    Ok(tb.finish())
}

/// Proximal point method z_{k+1} = (I + ηF)⁻¹ z_k.
///
/// When the field declares a fixed point, the trace records the descent
/// lemma slack ||z_k - z*||² - ||z_{k+1} - z*||² - η²||F(z_{k+1})||² per step.
pub fn run_ppm(f: &VectorField, z0: &Point, iters: usize, step: f64, backend: ResolventBackend) -> Result<RunTrace> {
    f.check_dim(z0)?;
    check_step(step)?;
    backend.validate()?;
    let mut tb = TraceBuilder::new("ppm", f.name(), step, None);
    tb.push(field_record(f, 0, step, z0));
    let mut z = z0.clone();
    for k in 0..iters {
        let next = resolvent(f, step, backend, &z)?;
        if let Some(s) = f.fixed_point() {
            let fz = f.eval(&next);
            let before = (&z - s).norm_sq();
            let after = (&next - s).norm_sq();
            tb.slack(before - after - step * step * dot(&fz, &fz));
        }
        z = next;
        tb.push(field_record(f, k + 1, step, &z));
    }
    Ok(tb.finish())
}

/// Extragradient: z̃_k = z_k - ηF(z_k), z_{k+1} = z_k - ηF(z̃_k).
/// Default step η = 1/(2(L + μ)).
pub fn run_eg(f: &VectorField, z0: &Point, iters: usize, step: Option<f64>) -> Result<RunTrace> {
    run_eg_with_fault(f, z0, iters, step, None)
}

#[doc(hidden)]
pub fn run_eg_with_fault(
    f: &VectorField,
    z0: &Point,
    iters: usize,
    step: Option<f64>,
    fault: Option<Fault>,
) -> Result<RunTrace> {
    f.check_dim(z0)?;
    let step = match step {
        Some(s) => check_step(s)?,
        None => {
            let c = f.constants();
            let mu = f.require_constant(c.strong_monotonicity, "strong monotonicity (mu)")?;
            let l = f.require_constant(c.lipschitz, "Lipschitz (L)")?;
            check_step(1.0 / (2.0 * (l + mu)))?
        }
    };
    let sign = if fault == Some(Fault::EgMidpointSign) { 1.0 } else { -1.0 };
    let mut tb = TraceBuilder::new("eg", f.name(), step, None);
    tb.push(field_record(f, 0, step, z0));
    let mut z = z0.clone();
    for k in 0..iters {
        let mid = z.axpy(sign * step, &f.eval(&z));
        z = z.axpy(-step, &f.eval(&mid)).ensure_finite(|| format!("eg iterate {}", k + 1))?;
        tb.push(field_record(f, k + 1, step, &z));
    }
    Ok(tb.finish())
}

/// Optimistic GDA: z_{k+1} = z_k - 2ηF(z_k) + ηF(z_{k-1}) with z_{-1} = z_0,
/// so the first step is a plain GDA step.
pub fn run_ogda(f: &VectorField, z0: &Point, iters: usize, step: f64) -> Result<RunTrace> {
    f.check_dim(z0)?;
    check_step(step)?;
    let mut tb = TraceBuilder::new("ogda", f.name(), step, None);
    tb.push(field_record(f, 0, step, z0));
    let mut z = z0.clone();
    let mut f_prev = f.eval(z0);
    for k in 0..iters {
        let fz = f.eval(&z);
        z = z.axpy(-2.0 * step, &fz).axpy(step, &f_prev).ensure_finite(|| format!("ogda iterate {}", k + 1))?;
        f_prev = fz;
        tb.push(field_record(f, k + 1, step, &z));
    }
    Ok(tb.finish())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LookaheadConfig {
    /// Number ℓ of inner GDA steps.
    pub inner_steps: usize,
    /// Averaging weight α ∈ (0, 1].
    pub alpha: f64,
}

/// Lookahead over GDA: z̃ is reached by ℓ GDA steps from z_k, then
/// z_{k+1} = z_k + α(z̃ - z_k). Record times are kη, the clock of the
/// high-resolution limit.
pub fn run_lookahead(f: &VectorField, z0: &Point, iters: usize, step: f64, cfg: LookaheadConfig) -> Result<RunTrace> {
    f.check_dim(z0)?;
    check_step(step)?;
    if cfg.inner_steps == 0 || !(cfg.alpha > 0.0 && cfg.alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "lookahead needs inner_steps >= 1 and alpha in (0, 1], got {} and {}",
            cfg.inner_steps, cfg.alpha
        )));
    }
    let mut tb = TraceBuilder::new("la", f.name(), step, None);
    tb.push(field_record(f, 0, step, z0));
    let mut z = z0.clone();
    for k in 0..iters {
        let mut inner = z.clone();
        for _ in 0..cfg.inner_steps {
            inner = inner.axpy(-step, &f.eval(&inner));
        }
        z = z.axpy(cfg.alpha, &(&inner - &z)).ensure_finite(|| format!("lookahead iterate {}", k + 1))?;
        tb.push(field_record(f, k + 1, step, &z));
    }
    Ok(tb.finish())
}

/// Natural-map residual ||x - Π(x - F(x))||; zero exactly at VI solutions.
pub fn vi_residual(f: &VectorField, set: &ConstraintSet, x: &Point) -> Result<f64> {
    f.check_dim(x)?;
    let p = project(set, &(x - &f.eval(x)))?;
    Ok(x.dist(&p))
}
