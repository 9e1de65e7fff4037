//! Langevin Markov chains: the unadjusted (overdamped) chain and an
//! Euler–Maruyama discretization of the underdamped diffusion.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fault::Fault;
use crate::point::Point;
use crate::problem::ScalarProblem;

/// Chain states stored row-major: row i holds the state after i steps.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleTrace {
    chain: String,
    dim: usize,
    step: f64,
    seed: Option<u64>,
    xs: Vec<f64>,
    vs: Option<Vec<f64>>,
}

impl SampleTrace {
    fn new(chain: &str, dim: usize, step: f64, seed: Option<u64>, capacity: usize, with_velocity: bool) -> Self {
        Self {
            chain: chain.to_string(),
            dim,
            step,
            seed,
            xs: Vec::with_capacity(capacity * dim),
            vs: with_velocity.then(|| Vec::with_capacity(capacity * dim)),
        }
    }

    pub fn chain(&self) -> &str {
        &self.chain
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Number of stored states, including the initial one.
    pub fn len(&self) -> usize {
        self.xs.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn v(&self, i: usize) -> Option<&[f64]> {
        self.vs.as_ref().map(|vs| &vs[i * self.dim..(i + 1) * self.dim])
    }

    pub fn has_velocity(&self) -> bool {
        self.vs.is_some()
    }

    /// Indices 0, k, 2k, ...
    pub fn thinned(&self, every: usize) -> impl Iterator<Item = usize> {
        (0..self.len()).step_by(every.max(1))
    }

    /// Per-coordinate mean of x over states `burn_in..`.
    pub fn mean(&self, burn_in: usize) -> Result<Vec<f64>> {
        moments(&self.xs, self.dim, burn_in).map(|m| m.0)
    }

    /// Per-coordinate unbiased variance of x over states `burn_in..`.
    pub fn variance(&self, burn_in: usize) -> Result<Vec<f64>> {
        moments(&self.xs, self.dim, burn_in).map(|m| m.1)
    }

    pub fn velocity_variance(&self, burn_in: usize) -> Result<Vec<f64>> {
        let vs =
            self.vs.as_ref().ok_or_else(|| Error::Unsupported(format!("`{}` chain has no velocity", self.chain)))?;
        moments(vs, self.dim, burn_in).map(|m| m.1)
    }

    /// Batch-means standard error of the mean of each x coordinate, which
    /// accounts for autocorrelation along the chain.
    pub fn mean_standard_error(&self, burn_in: usize, batches: usize) -> Result<Vec<f64>> {
        let n = self.len().saturating_sub(burn_in);
        if batches < 2 || n < 2 * batches {
            return Err(Error::InsufficientData(format!("{n} states cannot form {batches} batches of at least two")));
        }
        let size = n / batches;
        let mut means = Vec::with_capacity(batches * self.dim);
        for b in 0..batches {
            let start = (burn_in + b * size) * self.dim;
            let slice = &self.xs[start..start + size * self.dim];
            means.extend(moments(slice, self.dim, 0)?.0);
        }
        let (_, var) = moments(&means, self.dim, 0)?;
        Ok(var.iter().map(|v| (v / batches as f64).sqrt()).collect())
    }

    fn push(&mut self, x: &[f64], v: Option<&[f64]>) {
        self.xs.extend_from_slice(x);
        if let (Some(vs), Some(v)) = (self.vs.as_mut(), v) {
            vs.extend_from_slice(v);
        }
    }
}

fn moments(data: &[f64], dim: usize, burn_in: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows = data.len() / dim;
    if rows < burn_in + 2 {
        return Err(Error::InsufficientData(format!("{rows} states leave fewer than two after burn-in {burn_in}")));
    }
    let n = (rows - burn_in) as f64;
    let mut mean = vec![0.0; dim];
    for row in data[burn_in * dim..].chunks_exact(dim) {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for row in data[burn_in * dim..].chunks_exact(dim) {
        for ((s, x), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (x - m) * (x - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= n - 1.0);
    Ok((mean, var))
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")))
    }
}

fn require_gradient(u: &ScalarProblem) -> Result<()> {
    if u.has_gradient() {
        Ok(())
    } else {
        Err(Error::MissingOracle { problem: u.name().to_string(), oracle: "gradient" })
    }
}

/// Unadjusted Langevin chain x_{k+1} = x_k - δ∇U(x_k) + √(2δ) ξ_k.
pub fn run_ula(u: &ScalarProblem, x0: &Point, n: usize, step: f64, seed: u64) -> Result<SampleTrace> {
    ula(u, x0, n, step, Some(seed), None)
}

/// The ULA recursion with ξ fixed at zero, i.e. gradient descent with
/// step δ.
pub fn run_ula_noiseless(u: &ScalarProblem, x0: &Point, n: usize, step: f64) -> Result<SampleTrace> {
    ula(u, x0, n, step, None, None)
}

#[doc(hidden)]
pub fn run_ula_with_fault(
    u: &ScalarProblem,
    x0: &Point,
    n: usize,
    step: f64,
    seed: u64,
    fault: Option<Fault>,
) -> Result<SampleTrace> {
    ula(u, x0, n, step, Some(seed), fault)
}

fn ula(
    u: &ScalarProblem,
    x0: &Point,
    n: usize,
    step: f64,
    seed: Option<u64>,
    fault: Option<Fault>,
) -> Result<SampleTrace> {
    require_gradient(u)?;
    u.check_dim(x0)?;
    check_positive("step", step)?;
    let drift = if fault == Some(Fault::UlaDropDelta) { 1.0 } else { step };
    let noise = (2.0 * step).sqrt();
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let name = if seed.is_some() { "ula" } else { "ula-noiseless" };
    let mut tr = SampleTrace::new(name, x0.dim(), step, seed, n + 1, false);
    let mut x = x0.clone();
    tr.push(x.as_slice(), None);
    for k in 0..n {
        let mut next = x.axpy(-drift, &u.gradient(&x)?).into_vec();
        if let Some(rng) = rng.as_mut() {
            for c in next.iter_mut() {
                let xi: f64 = StandardNormal.sample(rng);
                *c += noise * xi;
            }
        }
        x = Point::from_vec(next).ensure_finite(|| format!("ula state {}", k + 1))?;
        tr.push(x.as_slice(), None);
    }
    Ok(tr)
}

/// Euler–Maruyama chain for dx = v dt, dv = -γv dt - λ∇U(x) dt + √(2γλ) dB,
/// whose stationary density is proportional to exp(-U(x) - ||v||²/(2λ)).
#[allow(clippy::too_many_arguments)]
pub fn run_underdamped(
    u: &ScalarProblem,
    x0: &Point,
    v0: &Point,
    n: usize,
    step: f64,
    friction: f64,
    temperature: f64,
    seed: u64,
) -> Result<SampleTrace> {
    require_gradient(u)?;
    u.check_dim(x0)?;
    u.check_dim(v0)?;
    check_positive("step", step)?;
    check_positive("temperature scale", temperature)?;
    if !(friction >= 0.0 && friction.is_finite()) {
        return Err(Error::InvalidParameter(format!("friction must be nonnegative, got {friction}")));
    }
    let noise = (2.0 * friction * temperature * step).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tr = SampleTrace::new("underdamped", x0.dim(), step, Some(seed), n + 1, true);
    let (mut x, mut v) = (x0.clone(), v0.clone());
    tr.push(x.as_slice(), Some(v.as_slice()));
    for k in 0..n {
        let g = u.gradient(&x)?;
        let mut next_v = v.scaled(1.0 - step * friction).axpy(-step * temperature, &g).into_vec();
        if noise > 0.0 {
            for c in next_v.iter_mut() {
                let xi: f64 = StandardNormal.sample(&mut rng);
                *c += noise * xi;
            }
        }
        x = x.axpy(step, &v).ensure_finite(|| format!("underdamped position {}", k + 1))?;
        v = Point::from_vec(next_v).ensure_finite(|| format!("underdamped velocity {}", k + 1))?;
        tr.push(x.as_slice(), Some(v.as_slice()));
    }
    Ok(tr)
}
