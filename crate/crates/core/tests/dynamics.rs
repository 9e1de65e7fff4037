//! Invariants of the continuous-time dynamics, Langevin chains, and
//! property checkers.

use nalgebra::DMatrix;
use proptest::prelude::*;
use vieq::diagnostics::{check_monotone, fit_series, RateModel, Sampler};
use vieq::ode::{bregman_el, integrate, lyapunov, nesterov_ode, Integrator, ScalingFunctions};
use vieq::problems::{affine_field, quadratic};
use vieq::registry::lookup;
use vieq::sample::run_ula;
use vieq::{Error, Point, ScalarProblem};

fn euclid(d: usize) -> ScalarProblem {
    quadratic(DMatrix::identity(d, d), Point::zeros(d)).unwrap()
}

fn max_relative_rise(p: &ScalarProblem, pw: f64, t1: f64, dt: f64) -> f64 {
    let h = euclid(p.dim());
    let sc = ScalingFunctions::polynomial(pw, 0.25).unwrap();
    let d = bregman_el(p, &h, &sc).unwrap();
    let x0 = Point::new(vec![3.0; p.dim()]).unwrap();
    let tr = integrate(&d, Integrator::Rk4, 0.1, t1, dt, &x0, Some(&Point::zeros(p.dim()))).unwrap();
    let e: Vec<f64> =
        tr.samples.iter().map(|s| lyapunov(p, &h, &sc, s.t, &s.x, s.v.as_ref().unwrap()).unwrap()).collect();
    e.windows(2).map(|w| (w[1] - w[0]) / (1.0 + w[0].abs())).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn lyapunov_nonincreasing_for_p2_and_p4() {
    for name in ["quadratic-cond100", "quadratic-identity"] {
        let p = lookup(name).unwrap().objective.unwrap();
        for (pw, dt) in [(2.0, 1e-3), (4.0, 2e-4)] {
            let rise = max_relative_rise(&p, pw, 10.0, dt);
            assert!(rise <= 1e-6, "{name} p={pw}: {rise}");
        }
    }
}

#[test]
fn nesterov_leapfrog_agrees_with_rk4() {
    let p = lookup("quadratic-cond100").unwrap().objective.unwrap();
    let d = nesterov_ode(&p).unwrap();
    let x0 = Point::new(vec![5.0, 5.0]).unwrap();
    let v0 = Point::zeros(2);
    let a = integrate(&d, Integrator::Rk4, 0.1, 20.0, 1e-3, &x0, Some(&v0)).unwrap();
    let b = integrate(&d, Integrator::Leapfrog, 0.1, 20.0, 1e-3, &x0, Some(&v0)).unwrap();
    assert_eq!(a.samples.len(), b.samples.len());
    assert!(a.last().x.dist(&b.last().x) < 1e-4);
    assert!(p.excess(&a.last().x).unwrap() < 1e-2 * p.excess(&x0).unwrap());
}

#[test]
fn singular_start_is_rejected() {
    let p = lookup("quadratic-identity").unwrap().objective.unwrap();
    let d = bregman_el(&p, &euclid(2), &ScalingFunctions::polynomial(3.0, 1.0).unwrap()).unwrap();
    let x0 = Point::zeros(2);
    let r = integrate(&d, Integrator::Rk4, 0.0, 1.0, 0.1, &x0, Some(&x0));
    assert!(matches!(r, Err(Error::SingularTime { .. })));
}

#[test]
fn ula_standard_error_scales_as_inverse_sqrt_n() {
    let u = lookup("gaussian").unwrap().objective.unwrap();
    let x0 = Point::zeros(1);
    let ns = [4096usize, 8192, 16_384, 32_768, 65_536];
    let mut pts = Vec::new();
    for &n in &ns {
        let means: Vec<f64> =
            (0..100u64).map(|s| run_ula(&u, &x0, n, 0.1, 1000 + s).unwrap().mean(0).unwrap()[0]).collect();
        let m = means.iter().sum::<f64>() / means.len() as f64;
        let sd = (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64).sqrt();
        pts.push((n, sd));
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = pts.iter().map(|&(n, sd)| ((n as f64).ln(), sd.ln())).unzip();
    let (mx, my) = (lx.iter().sum::<f64>() / 5.0, ly.iter().sum::<f64>() / 5.0);
    let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope + 0.5).abs() <= 0.1, "{slope}");
}

#[test]
fn convex_zoo_gradients_are_monotone() {
    for name in ["gaussian", "quadratic-cond100", "quadratic-dense50", "quadratic-identity"] {
        let f = lookup(name).unwrap().field.unwrap();
        let s = Sampler::cube(f.dim(), 5.0, 10_000, 3).unwrap();
        let r = check_monotone(&f, &s).unwrap();
        assert_eq!(r.violations, 0, "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mu_hat_never_exceeds_l_hat(entries in prop::collection::vec(-3.0f64..3.0, 9), seed in any::<u64>()) {
        let f = affine_field(DMatrix::from_row_slice(3, 3, &entries), Point::zeros(3)).unwrap();
        let r = check_monotone(&f, &Sampler::cube(3, 2.0, 200, seed).unwrap()).unwrap();
        prop_assert!(r.mu_hat <= r.lipschitz_hat + 1e-9);
    }

    #[test]
    fn exact_sequences_are_recovered(c in 0.1f64..10.0, s in -4.0f64..-0.1, r in 0.1f64..0.99) {
        let pow: Vec<(usize, f64)> = (1..40).map(|k| (k, c * (k as f64).powf(s))).collect();
        let fit = fit_series(&pow, RateModel::Power).unwrap();
        prop_assert!((fit.estimate - s).abs() <= 1e-8);
        let geo: Vec<(usize, f64)> = (0..40).map(|k| (k, c * r.powi(k as i32))).collect();
        let fit = fit_series(&geo, RateModel::Linear).unwrap();
        prop_assert!((fit.estimate - r).abs() <= 1e-8);
    }
}
