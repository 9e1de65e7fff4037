//! Test problems with analytically known optima, fixed points, and
//! regularity constants.

use nalgebra::DMatrix;

use crate::error::{ensure_dim, Error, Result};
use crate::point::{dot, Point};
use crate::problem::{AffineMap, FieldConstants, ScalarConstants, ScalarProblem, VectorField};

const SYM_TOL: f64 = 1e-12;

fn mat_vec(m: &DMatrix<f64>, v: &Point) -> Point {
    Point::from_vec((0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum()).collect())
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

/// f(x) = ½ xᵀQx - bᵀx for symmetric positive semidefinite Q.
///
/// L and μ are the extreme eigenvalues of Q. The optimum is Q⁺b whenever
/// Qx = b is solvable.
pub fn quadratic(q: DMatrix<f64>, b: Point) -> Result<ScalarProblem> {
    let d = b.dim();
    if q.nrows() != d || q.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: q.nrows() });
    }
    let scale = max_abs(&q).max(1.0);
    if max_abs(&(&q - q.transpose())) > SYM_TOL * scale {
        return Err(Error::NotSymmetric);
    }
    let eig = q.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    if lmin < -1e-10 * scale {
        return Err(Error::InvalidParameter(format!(
            "quadratic needs a positive semidefinite matrix, smallest eigenvalue is {lmin}"
        )));
    }
    let lmin = lmin.max(0.0);

    // Pseudo-inverse solve through the eigendecomposition.
    let bv = nalgebra::DVector::from_column_slice(b.as_slice());
    let coeffs = eig.eigenvectors.transpose() * &bv;
    let cutoff = 1e-12 * lmax.max(1.0);
    let mut y = nalgebra::DVector::zeros(d);
    for i in 0..d {
        if eig.eigenvalues[i] > cutoff {
            y[i] = coeffs[i] / eig.eigenvalues[i];
        }
    }
    let xstar = &eig.eigenvectors * y;
    let residual = (&q * &xstar - &bv).norm();
    let optimum = (residual <= 1e-9 * (1.0 + bv.norm())).then(|| {
        let x = Point::from_vec(xstar.iter().copied().collect());
        let value = -0.5 * dot(&b, &x);
        (x, value)
    });

    let identity = q == DMatrix::identity(d, d);
    let (qv, qg, qh, qe) = (q.clone(), q.clone(), q.clone(), q.clone());
    let (bv_, bg) = (b.clone(), b.clone());
    let mut builder = ScalarProblem::builder("quadratic", d, move |x| 0.5 * dot(x, &mat_vec(&qv, x)) - dot(&bv_, x))
        .gradient(move |x| &mat_vec(&qg, x) - &bg)
        .hvp(move |_, v| mat_vec(&qh, v))
        .constants(ScalarConstants {
            smoothness: Some(lmax),
            strong_convexity: Some(lmin),
            hessian_lipschitz: Some(0.0),
            ..ScalarConstants::default()
        });
    if identity {
        builder = builder.identity_hessian();
    }
    if let Some((x, value)) = optimum {
        let xs = x.clone();
        builder = builder
            .excess(move |x| {
                let e = x - &xs;
                0.5 * dot(&e, &mat_vec(&qe, &e))
            })
            .optimum(x, value);
    }
    builder.build()
}

/// f(x) = |x| on the real line. The subgradient at the kink is 0.
pub fn abs_value() -> Result<ScalarProblem> {
    ScalarProblem::builder("abs", 1, |x| x[0].abs())
        .subgradient(|x| {
            let g = if x[0] > 0.0 {
                1.0
            } else if x[0] < 0.0 {
                -1.0
            } else {
                0.0
            };
            Point::from_vec(vec![g])
        })
        .constants(ScalarConstants {
            subgradient_bound: Some(1.0),
            initial_distance: Some(1.0),
            ..ScalarConstants::default()
        })
        .optimum(Point::zeros(1), 0.0)
        .build()
}

/// f(x) = ½ xᵀ diag(λ, 1, …, 1) x + ¼ x₁⁴ with λ < 0.
///
/// The origin is a strict saddle with λ_min(∇²f(0)) = λ. The minima sit at
/// x₁ = ±√(-λ), x_{2..d} = 0 with value -λ²/4. L and ρ are declared for the
/// box |x₁| ≤ 2√(-λ), which contains both minima.
pub fn strict_saddle(d: usize, lambda_neg: f64) -> Result<ScalarProblem> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("strict saddle needs d >= 2, got {d}")));
    }
    if !(lambda_neg < 0.0) {
        return Err(Error::InvalidParameter(format!("strict saddle needs a negative curvature, got {lambda_neg}")));
    }
    let lam = lambda_neg;
    let half_width = 2.0 * (-lam).sqrt();
    let smoothness = (lam + 3.0 * half_width * half_width).max(1.0).max(-lam);
    let rho = 6.0 * half_width;
    let mut xstar = vec![0.0; d];
    xstar[0] = (-lam).sqrt();
    ScalarProblem::builder(format!("strict-saddle-d{d}"), d, move |x| {
        let x1 = x[0];
        let rest: f64 = x.as_slice()[1..].iter().map(|v| v * v).sum();
        0.5 * lam * x1 * x1 + 0.5 * rest + 0.25 * x1.powi(4)
    })
    .gradient(move |x| {
        let mut g = x.as_slice().to_vec();
        g[0] = lam * x[0] + x[0].powi(3);
        Point::from_vec(g)
    })
    .hvp(move |x, v| {
        let mut out = v.as_slice().to_vec();
        out[0] = (lam + 3.0 * x[0] * x[0]) * v[0];
        Point::from_vec(out)
    })
    .constants(ScalarConstants {
        smoothness: Some(smoothness),
        hessian_lipschitz: Some(rho),
        ..ScalarConstants::default()
    })
    .optimum(Point::from_vec(xstar), -lam * lam / 4.0)
    .build()
}

/// Zero-sum bilinear game f(x₁, x₂) = x₁ᵀ A x₂ over z = (x₁, x₂).
///
/// Returns the objective (with its full gradient) and the game field
/// F(z) = (A x₂, -Aᵀ x₁), whose fixed point is the origin.
pub fn bilinear_game(a: DMatrix<f64>) -> Result<(ScalarProblem, VectorField)> {
    let (d1, d2) = (a.nrows(), a.ncols());
    if d1 == 0 || d2 == 0 {
        return Err(Error::InvalidParameter("game matrix must be nonempty".into()));
    }
    let n = d1 + d2;
    let mut h = DMatrix::zeros(n, n);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..d1 {
        for j in 0..d2 {
            h[(i, d1 + j)] = a[(i, j)];
            h[(d1 + j, i)] = a[(i, j)];
            m[(i, d1 + j)] = a[(i, j)];
            m[(d1 + j, i)] = -a[(i, j)];
        }
    }
    let (hv, hg, hh) = (h.clone(), h.clone(), h);
    let f = ScalarProblem::builder("bilinear", n, move |z| 0.5 * dot(z, &mat_vec(&hv, z)))
        .gradient(move |z| mat_vec(&hg, z))
        .hvp(move |_, v| mat_vec(&hh, v))
        .build()?;
    let lipschitz = a.clone().svd(false, false).singular_values.max();
    let field = VectorField::affine_builder("bilinear-game", AffineMap { matrix: m, offset: Point::zeros(n) })?
        .constants(FieldConstants { lipschitz: Some(lipschitz), strong_monotonicity: Some(0.0), cocoercivity: None })
        .fixed_point(Point::zeros(n))
        .build()?;
    Ok((f, field))
}

/// F(z) = M z + q.
///
/// Declares L = σ_max(M), μ = λ_min(sym(M)) when it is nonnegative, and
/// the co-coercivity constant sup ||Mv||²/⟨Mv, v⟩ when sym(M) is positive
/// definite. The fixed point is -M⁻¹q when M is invertible.
pub fn affine_field(m: DMatrix<f64>, q: Point) -> Result<VectorField> {
    let d = q.dim();
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: m.nrows() });
    }
    let lipschitz = m.clone().svd(false, false).singular_values.max();
    let sym = (&m + m.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let mu = eig.eigenvalues.min();
    let tol = 1e-12 * lipschitz.max(1.0);
    let strong_monotonicity = if mu >= -tol { Some(mu.max(0.0)) } else { None };
    let cocoercivity = if mu > tol {
        // sup_v vᵀMᵀMv / vᵀSv = λ_max(S^{-1/2} MᵀM S^{-1/2})
        let inv_sqrt = {
            let mut diag = eig.eigenvalues.clone();
            diag.iter_mut().for_each(|l| *l = 1.0 / l.sqrt());
            &eig.eigenvectors * DMatrix::from_diagonal(&diag) * eig.eigenvectors.transpose()
        };
        let g = &inv_sqrt * m.transpose() * &m * &inv_sqrt;
        let g = (&g + g.transpose()) * 0.5;
        Some(g.symmetric_eigen().eigenvalues.max())
    } else {
        None
    };
    let fixed_point = m.clone().lu().solve(&nalgebra::DVector::from_column_slice(q.as_slice()));
    let mut b = VectorField::affine_builder("affine", AffineMap { matrix: m, offset: q })?.constants(FieldConstants {
        lipschitz: Some(lipschitz),
        strong_monotonicity,
        cocoercivity,
    });
    if let Some(sol) = fixed_point {
        let z = Point::from_vec(sol.iter().map(|v| -v).collect());
        if z.is_finite() {
            b = b.fixed_point(z);
        }
    }
    b.build()
}

/// Stacks the own-block gradients ∇_{x_i} g_i(x) of N players into one
/// field on R^{Σ d_i}. Each cost is a function of the full joint vector.
pub fn game_field(costs: Vec<ScalarProblem>, dims: Vec<usize>) -> Result<VectorField> {
    if costs.is_empty() || costs.len() != dims.len() {
        return Err(Error::InvalidParameter(format!("{} costs for {} blocks", costs.len(), dims.len())));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidParameter("every block needs a positive dimension".into()));
    }
    let total: usize = dims.iter().sum();
    for c in &costs {
        ensure_dim(total, c.dim())?;
        if !c.has_gradient() {
            return Err(Error::MissingOracle { problem: c.name().to_string(), oracle: "gradient" });
        }
    }
    let offsets: Vec<usize> = dims
        .iter()
        .scan(0, |acc, d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    let with_hvp = costs.iter().all(|c| c.has_hvp());
    let (ce, oe, de) = (costs.clone(), offsets.clone(), dims.clone());
    let mut b = VectorField::builder(format!("game-{}", costs.len()), total, move |x| {
        let mut out = Vec::with_capacity(x.dim());
        for ((c, &o), &d) in ce.iter().zip(&oe).zip(&de) {
            let g = c.gradient(x).expect("gradient oracle checked at construction");
            out.extend_from_slice(&g.as_slice()[o..o + d]);
        }
        Point::from_vec(out)
    });
    if with_hvp {
        b = b.jvp(move |x, v| {
            let mut out = Vec::with_capacity(x.dim());
            for ((c, &o), &d) in costs.iter().zip(&offsets).zip(&dims) {
                let h = c.hvp(x, v).expect("hvp oracle checked at construction");
                out.extend_from_slice(&h.as_slice()[o..o + d]);
            }
            Point::from_vec(out)
        });
    }
    b.build()
}

/// The rotation field F(x₁, x₂) = (x₂, -x₁): the bilinear game with A = [1].
pub fn rotation() -> Result<(ScalarProblem, VectorField)> {
    bilinear_game(DMatrix::from_element(1, 1, 1.0))
}

/// F(z) = μ(z - z*) + ω R (z - z*) with R the planar rotation generator,
/// so the field is μ-strongly monotone with L = √(μ² + ω²). The registry
/// instance uses μ = 1, L = 2, z* = (1, -1).
pub fn strongly_monotone_affine(mu: f64, lipschitz: f64, fixed_point: Point) -> Result<VectorField> {
    if !(mu > 0.0 && lipschitz >= mu) {
        return Err(Error::InvalidParameter(format!("need 0 < mu <= L, got mu={mu}, L={lipschitz}")));
    }
    ensure_dim(2, fixed_point.dim())?;
    let omega = (lipschitz * lipschitz - mu * mu).sqrt();
    let m = DMatrix::from_row_slice(2, 2, &[mu, omega, -omega, mu]);
    let mz = mat_vec(&m, &fixed_point);
    affine_field(m, -&mz)
}

/// Quadratic with eigenvalues (i/n)⁴, i = 1..n, and the start weighted as
/// (i/n)^{-1/2}. Its spectrum is dense near zero, so over a wide range of
/// times the worst-case sublinear rates are the observed rates.
pub fn dense_spectrum_quadratic(n: usize) -> Result<(ScalarProblem, Point)> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one eigenvalue".into()));
    }
    let u: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, u.iter().map(|v| v.powi(4))));
    let start = Point::from_vec(u.iter().map(|v| v.powf(-0.5)).collect());
    Ok((quadratic(q, Point::zeros(n))?, start))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v))
    }

    #[test]
    fn quadratic_identity() {
        let f = quadratic(DMatrix::identity(2, 2), Point::zeros(2)).unwrap();
        assert_eq!(f.value(&p(&[1.0, 1.0])), 1.0);
        assert_eq!(f.optimum().unwrap().x, Point::zeros(2));
        assert_eq!(f.constants().smoothness, Some(1.0));
        assert_eq!(f.constants().strong_convexity, Some(1.0));
        assert!(f.has_identity_hessian());
    }

    #[test]
    fn quadratic_condition_100() {
        let f = quadratic(diag(&[1.0, 100.0]), p(&[1.0, 100.0])).unwrap();
        assert_eq!(f.constants().smoothness, Some(100.0));
        assert_eq!(f.constants().strong_convexity, Some(1.0));
        let o = f.optimum().unwrap();
        assert!(o.x.dist(&p(&[1.0, 1.0])) < 1e-14);
        assert!((o.value - (-50.5)).abs() < 1e-12);
    }

    #[test]
    fn quadratic_rejects_nonsymmetric() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert_eq!(quadratic(q, Point::zeros(2)).unwrap_err(), Error::NotSymmetric);
    }

    #[test]
    fn quadratic_singular_without_solution_has_no_optimum() {
        let f = quadratic(diag(&[1.0, 0.0]), p(&[1.0, 1.0])).unwrap();
        assert!(f.optimum().is_none());
        let g = quadratic(diag(&[2.0, 0.0]), p(&[1.0, 0.0])).unwrap();
        assert!(g.optimum().unwrap().x.dist(&p(&[0.5, 0.0])) < 1e-14);
    }

    #[test]
    fn abs_subgradient_cases() {
        let f = abs_value().unwrap();
        assert_eq!(f.subgradient(&p(&[3.0])).unwrap()[0], 1.0);
        assert_eq!(f.subgradient(&p(&[-3.0])).unwrap()[0], -1.0);
        assert_eq!(f.subgradient(&p(&[0.0])).unwrap()[0], 0.0);
        assert!(!f.has_gradient());
    }

    #[test]
    fn strict_saddle_structure() {
        let f = strict_saddle(2, -1.0).unwrap();
        assert_eq!(f.gradient(&Point::zeros(2)).unwrap(), Point::zeros(2));
        let h = f.hessian(&Point::zeros(2)).unwrap();
        assert_eq!(h.symmetric_eigen().eigenvalues.min(), -1.0);
        for s in [1.0, -1.0] {
            let m = p(&[s, 0.0]);
            assert_eq!(f.gradient(&m).unwrap().norm(), 0.0);
            assert_eq!(f.value(&m), -0.25);
        }
        assert_eq!(f.gradient(&p(&[0.0, 1.0])).unwrap(), p(&[0.0, 1.0]));
        assert!(strict_saddle(1, -1.0).is_err());
        assert!(strict_saddle(2, 0.0).is_err());
    }

    #[test]
    fn scalar_bilinear_is_rotation() {
        let (_, f) = rotation().unwrap();
        assert_eq!(f.eval(&p(&[0.3, 0.7])), p(&[0.7, -0.3]));
        assert_eq!(f.eval(&Point::zeros(2)), Point::zeros(2));
        assert_eq!(f.constants().strong_monotonicity, Some(0.0));
        assert!((f.constants().lipschitz.unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn affine_examples() {
        let (mu, omega) = (0.5, 2.0);
        let m = DMatrix::from_row_slice(2, 2, &[mu, omega, -omega, mu]);
        let f = affine_field(m, Point::zeros(2)).unwrap();
        let c = f.constants();
        assert!((c.strong_monotonicity.unwrap() - mu).abs() < 1e-12);
        assert!((c.lipschitz.unwrap() - (mu * mu + omega * omega).sqrt()).abs() < 1e-12);
        assert!((c.cocoercivity.unwrap() - (mu * mu + omega * omega) / mu).abs() < 1e-10);

        let g = affine_field(DMatrix::identity(2, 2), p(&[-1.0, 0.0])).unwrap();
        assert!(g.fixed_point().unwrap().dist(&p(&[1.0, 0.0])) < 1e-15);

        let r = affine_field(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]), Point::zeros(2)).unwrap();
        assert_eq!(r.constants().strong_monotonicity, Some(0.0));
        assert_eq!(r.constants().cocoercivity, None);
    }

    #[test]
    fn strongly_monotone_registry_instance() {
        let f = strongly_monotone_affine(1.0, 2.0, p(&[1.0, -1.0])).unwrap();
        let c = f.constants();
        assert!((c.strong_monotonicity.unwrap() - 1.0).abs() < 1e-12);
        assert!((c.lipschitz.unwrap() - 2.0).abs() < 1e-12);
        assert!(f.fixed_point().unwrap().dist(&p(&[1.0, -1.0])) < 1e-12);
    }

    #[test]
    fn two_player_zero_sum_game_matches_bilinear_field() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 0.0, 3.0, -1.0]);
        let (f, field) = bilinear_game(a).unwrap();
        let game = game_field(vec![f.clone(), f.negated()], vec![2, 3]).unwrap();
        for z in [p(&[1.0, 2.0, 3.0, 4.0, 5.0]), p(&[-0.3, 0.1, 2.2, -1.0, 0.0])] {
            assert!(game.eval(&z).dist(&field.eval(&z)) < 1e-14);
            let v = p(&[0.5, -1.0, 2.0, 0.0, 1.0]);
            assert!(game.jvp(&z, &v).unwrap().dist(&field.jvp(&z, &v).unwrap()) < 1e-14);
        }
    }

    #[test]
    fn single_player_game_is_gradient_field() {
        let f = quadratic(diag(&[2.0, 3.0]), p(&[1.0, 1.0])).unwrap();
        let game = game_field(vec![f.clone()], vec![2]).unwrap();
        let z = p(&[0.4, -1.1]);
        assert_eq!(game.eval(&z), f.gradient(&z).unwrap());
    }

    #[test]
    fn game_field_rejects_inconsistent_blocks() {
        let f = quadratic(DMatrix::identity(3, 3), Point::zeros(3)).unwrap();
        assert!(game_field(vec![f.clone(), f.clone()], vec![1, 1]).is_err());
        assert!(game_field(vec![f.clone()], vec![1, 2]).is_err());
        assert!(game_field(vec![], vec![]).is_err());
    }

    #[test]
    fn dense_spectrum_constants() {
        let (f, x0) = dense_spectrum_quadratic(50).unwrap();
        assert_eq!(f.dim(), 50);
        assert!((f.constants().smoothness.unwrap() - 1.0).abs() < 1e-14);
        assert!((f.constants().strong_convexity.unwrap() - 0.02f64.powi(4)).abs() < 1e-18);
        assert!((x0[49] - 1.0).abs() < 1e-15);
    }
}
