//! Problem, optimizer, and VI invariants checked against finite
//! differences, closed forms, and randomized inputs.

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vieq::optimize::{run_gd, run_pgd, PgdConfig};
use vieq::problems::{affine_field, bilinear_game, game_field, quadratic};
use vieq::registry::{lookup, NAMES};
use vieq::vi::{resolvent, run_eg, run_ppm, ResolventBackend};
use vieq::{Point, ScalarProblem, VectorField};

fn rand_point(rng: &mut ChaCha8Rng, d: usize, r: f64) -> Point {
    Point::new((0..d).map(|_| rng.random_range(-r..r)).collect()).unwrap()
}

fn fd_gradient(p: &ScalarProblem, x: &Point) -> Vec<f64> {
    (0..x.dim())
        .map(|i| {
            let h = 1e-5 * (1.0 + x[i].abs());
            let mut e = vec![0.0; x.dim()];
            e[i] = h;
            let e = Point::new(e).unwrap();
            (p.value(&(x + &e)) - p.value(&(x - &e))) / (2.0 * h)
        })
        .collect()
}

fn fd_jvp(f: &VectorField, x: &Point, v: &Point) -> Point {
    let h = 1e-5 * (1.0 + x.norm()) / v.norm().max(1e-300);
    (&f.eval(&x.axpy(h, v)) - &f.eval(&x.axpy(-h, v))).scaled(0.5 / h)
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1.0)
}

/// A three-player game with quadratic costs coupling each player to the
/// next; block dims 1, 2, 1.
fn three_player() -> VectorField {
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[2.0, 0.5, -0.3, 0.2, 0.5, 3.0, 0.4, 0.0, -0.3, 0.4, 1.5, 0.6, 0.2, 0.0, 0.6, 2.5],
    );
    let costs = (0..3)
        .map(|i| {
            let shift = Point::new((0..4).map(|j| (i + j) as f64 * 0.1).collect()).unwrap();
            quadratic(a.clone() * (1.0 + i as f64), shift).unwrap()
        })
        .collect();
    game_field(costs, vec![1, 2, 1]).unwrap()
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for name in NAMES {
        let inst = lookup(name).unwrap();
        let Some(p) = inst.objective.as_ref().filter(|p| p.has_gradient()) else { continue };
        for _ in 0..100 {
            let x = rand_point(&mut rng, p.dim(), 3.0);
            let g = p.gradient(&x).unwrap();
            let e = rel_err(g.as_slice(), &fd_gradient(p, &x));
            assert!(e <= 1e-6, "{name}: {e}");
        }
    }
}

#[test]
fn jacobian_products_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut fields: Vec<(String, VectorField)> = NAMES
        .iter()
        .filter_map(|n| lookup(n).unwrap().field.map(|f| (n.to_string(), f)))
        .filter(|(_, f)| f.has_jvp())
        .collect();
    fields.push(("three-player".into(), three_player()));
    let (_, bil) = bilinear_game(DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 0.3, 0.0, 1.5])).unwrap();
    fields.push(("bilinear-2x3".into(), bil));
    assert!(fields.len() >= 8);
    for (name, f) in &fields {
        for _ in 0..100 {
            let x = rand_point(&mut rng, f.dim(), 3.0);
            let v = rand_point(&mut rng, f.dim(), 1.0);
            let e = rel_err(f.jvp(&x, &v).unwrap().as_slice(), fd_jvp(f, &x, &v).as_slice());
            assert!(e <= 1e-6, "{name}: {e}");
        }
    }
}

#[test]
fn three_player_field_stacks_own_block_gradients() {
    let f = three_player();
    let x = Point::new(vec![0.3, -1.0, 0.7, 2.0]).unwrap();
    let fx = f.eval(&x);
    // Player 2 owns coordinates 1..3; its cost is the i = 1 quadratic.
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[2.0, 0.5, -0.3, 0.2, 0.5, 3.0, 0.4, 0.0, -0.3, 0.4, 1.5, 0.6, 0.2, 0.0, 0.6, 2.5],
    ) * 2.0;
    let shift = [0.1, 0.2, 0.3, 0.4];
    for (row, coord) in [(1usize, 1usize), (2, 2)] {
        let ax: f64 = (0..4).map(|j| a[(row, j)] * x[j]).sum();
        assert!((fx[coord] - (ax - shift[row])).abs() < 1e-12);
    }
}

#[test]
fn declared_optima_are_stationary() {
    for name in NAMES {
        let inst = lookup(name).unwrap();
        if let Some(p) = &inst.objective {
            if let (Some(opt), true) = (p.optimum(), p.has_gradient()) {
                assert!(p.gradient(&opt.x).unwrap().norm() <= 1e-10, "{name}");
            }
        }
        if let Some(f) = &inst.field {
            if let Some(z) = f.fixed_point() {
                assert!(f.eval(z).norm() <= 1e-10, "{name}");
            }
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let inst = lookup("strict-saddle-d10").unwrap();
    let p = inst.objective().unwrap();
    let cfg = PgdConfig::from_epsilon(p, 1e-3, 5).unwrap();
    assert_eq!(run_pgd(p, &inst.start, 2000, &cfg).unwrap(), run_pgd(p, &inst.start, 2000, &cfg).unwrap());
    let f = lookup("strongmono-affine").unwrap();
    let a = run_eg(f.field().unwrap(), &f.start, 100, None).unwrap();
    assert_eq!(a, run_eg(f.field().unwrap(), &f.start, 100, None).unwrap());
}

#[test]
fn eg_step_approximates_ppm_step_to_third_order() {
    let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.5, -1.5, 0.5]);
    let f = affine_field(m, Point::new(vec![0.3, -0.2]).unwrap()).unwrap();
    let l = f.constants().lipschitz.unwrap();
    let z0 = Point::new(vec![2.0, -1.0]).unwrap();
    let gap = |eta: f64| {
        let eg = run_eg(&f, &z0, 1, Some(eta)).unwrap().last().x.clone();
        let ppm = run_ppm(&f, &z0, 1, eta, ResolventBackend::ExactAffine).unwrap().last().x.clone();
        eg.dist(&ppm)
    };
    let (e1, e2, e3) = (0.1 / l, 0.05 / l, 0.025 / l);
    let c = gap(e1) / e1.powi(3);
    let c2 = gap(e2) / e2.powi(3);
    assert!((c2 / c - 1.0).abs() < 0.2, "{c} {c2}");
    assert!(gap(e3) <= 1.2 * c * e3.powi(3));
}

fn spd(entries: &[f64], d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_row_slice(d, d, entries);
    &a * a.transpose() + DMatrix::identity(d, d) * 0.1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bilinear_field_is_exactly_monotone(
        a in prop::collection::vec(-3.0f64..3.0, 6),
        z in prop::collection::vec(-5.0f64..5.0, 5),
        w in prop::collection::vec(-5.0f64..5.0, 5),
    ) {
        let (_, f) = bilinear_game(DMatrix::from_row_slice(2, 3, &a)).unwrap();
        let (z, w) = (Point::new(z).unwrap(), Point::new(w).unwrap());
        let ip = vieq::inner(&(&f.eval(&z) - &f.eval(&w)), &(&z - &w)).unwrap();
        prop_assert!(ip.abs() <= 1e-12 * (1.0 + (&z - &w).norm_sq()));
    }

    #[test]
    fn forward_operator_is_expansive(
        eta in 0.01f64..5.0,
        x in prop::collection::vec(-5.0f64..5.0, 2),
        y in prop::collection::vec(-5.0f64..5.0, 2),
        which in 0usize..2,
    ) {
        let name = ["rotation", "strongmono-affine"][which];
        let f = lookup(name).unwrap().field.unwrap();
        let (x, y) = (Point::new(x).unwrap(), Point::new(y).unwrap());
        let lhs = (&x.axpy(eta, &f.eval(&x)) - &y.axpy(eta, &f.eval(&y))).norm_sq();
        let rhs = (&x - &y).norm_sq() + eta * eta * (&f.eval(&x) - &f.eval(&y)).norm_sq();
        prop_assert!(lhs >= rhs - 1e-9);
    }

    #[test]
    fn pgd_without_perturbation_is_gd(
        x0 in prop::collection::vec(-2.0f64..2.0, 10),
        seed in any::<u64>(),
    ) {
        let p = lookup("strict-saddle-d10").unwrap().objective.unwrap();
        let x0 = Point::new(x0).unwrap();
        let cfg = PgdConfig { radius: 0.0, ..PgdConfig::from_epsilon(&p, 1e-3, seed).unwrap() };
        let a = run_pgd(&p, &x0, 300, &cfg).unwrap();
        let b = run_gd(&p, &x0, 300, None).unwrap();
        for (ra, rb) in a.records().iter().zip(b.records()) {
            prop_assert_eq!(&ra.x, &rb.x);
        }
        prop_assert!(a.perturbations().is_empty());
    }

    #[test]
    fn gd_strongly_convex_per_step_contraction(
        entries in prop::collection::vec(-2.0f64..2.0, 9),
        b in prop::collection::vec(-3.0f64..3.0, 3),
        x0 in prop::collection::vec(-3.0f64..3.0, 3),
        frac in 0.1f64..1.0,
    ) {
        let p = quadratic(spd(&entries, 3), Point::new(b).unwrap()).unwrap();
        let (l, mu) = (p.constants().smoothness.unwrap(), p.constants().strong_convexity.unwrap());
        let eta = frac * 2.0 / (l + mu);
        let bound = 1.0 - 2.0 * eta * mu * l / (mu + l);
        let star = p.optimum().unwrap().x.clone();
        let t = run_gd(&p, &Point::new(x0).unwrap(), 30, Some(eta)).unwrap();
        let d: Vec<f64> = t.iterates().map(|x| (x - &star).norm_sq()).collect();
        for w in d.windows(2).take_while(|w| w[0] > 1e-12) {
            prop_assert!(w[1] <= bound * w[0] * (1.0 + 1e-9) + 1e-15);
        }
    }

    #[test]
    fn resolvent_backends_agree(
        eta in 0.01f64..0.4,
        x in prop::collection::vec(-5.0f64..5.0, 2),
        which in 0usize..2,
    ) {
        let name = ["rotation", "strongmono-affine"][which];
        let f = lookup(name).unwrap().field.unwrap();
        let x = Point::new(x).unwrap();
        let tol = 1e-12;
        let exact = resolvent(&f, eta, ResolventBackend::ExactAffine, &x).unwrap();
        let picard = resolvent(&f, eta, ResolventBackend::FixedPointIter { tol, max_inner: 2000 }, &x).unwrap();
        let series = resolvent(&f, eta, ResolventBackend::TruncatedSeries { order: 80 }, &x).unwrap();
        prop_assert!(exact.dist(&picard) <= 10.0 * tol);
        let l = f.constants().lipschitz.unwrap();
        let base = x.axpy(-eta, &f.affine().unwrap().offset).norm();
        let tail = (eta * l).powi(81) * base / (1.0 - eta * l);
        prop_assert!(exact.dist(&series) <= (10.0 * tol).max(tail));
    }
}
