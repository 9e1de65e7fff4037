//! Problem abstractions shared by every algorithm: scalar objectives with
//! first- and second-order oracles, and vector fields (operators) for
//! variational inequalities.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{ensure_dim, Error, Result};
use crate::point::{dot, Point};

pub type ValueFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type MapFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
/// `(x, v) -> A(x) v` for a Hessian or Jacobian `A`.
pub type ApplyFn = Arc<dyn Fn(&Point, &Point) -> Point + Send + Sync>;

/// Regularity constants a scalar problem may declare. They are trusted
/// inputs: diagnostics can falsify them but never infer them.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScalarConstants {
    /// L: gradient Lipschitz constant.
    pub smoothness: Option<f64>,
    /// μ: strong convexity modulus.
    pub strong_convexity: Option<f64>,
    /// ρ: Hessian Lipschitz constant.
    pub hessian_lipschitz: Option<f64>,
    /// G: bound on subgradient norms.
    pub subgradient_bound: Option<f64>,
    /// R: bound on the initial distance to the optimum.
    pub initial_distance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimum {
    pub x: Point,
    pub value: f64,
}

#[derive(Clone)]
pub struct ScalarProblem {
    name: String,
    dim: usize,
    value: ValueFn,
    excess: Option<ValueFn>,
    gradient: Option<MapFn>,
    subgradient: Option<MapFn>,
    hvp: Option<ApplyFn>,
    identity_hessian: bool,
    constants: ScalarConstants,
    optimum: Option<Optimum>,
}

impl fmt::Debug for ScalarProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("constants", &self.constants)
            .field("optimum", &self.optimum)
            .finish_non_exhaustive()
    }
}

impl ScalarProblem {
    pub fn builder(
        name: impl Into<String>,
        dim: usize,
        value: impl Fn(&Point) -> f64 + Send + Sync + 'static,
    ) -> ScalarProblemBuilder {
        ScalarProblemBuilder {
            problem: ScalarProblem {
                name: name.into(),
                dim,
                value: Arc::new(value),
                excess: None,
                gradient: None,
                subgradient: None,
                hvp: None,
                identity_hessian: false,
                constants: ScalarConstants::default(),
                optimum: None,
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constants(&self) -> &ScalarConstants {
        &self.constants
    }

    pub fn optimum(&self) -> Option<&Optimum> {
        self.optimum.as_ref()
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn has_subgradient(&self) -> bool {
        self.subgradient.is_some() || self.gradient.is_some()
    }

    pub fn has_hvp(&self) -> bool {
        self.hvp.is_some() || self.identity_hessian
    }

    /// True when the Hessian is the identity everywhere (h = ½||x||² + affine).
    pub fn has_identity_hessian(&self) -> bool {
        self.identity_hessian
    }

    pub fn check_dim(&self, x: &Point) -> Result<()> {
        ensure_dim(self.dim, x.dim())
    }

    pub fn value(&self, x: &Point) -> f64 {
        (self.value)(x)
    }

    /// f(x) - f* when the optimum is known. Uses the problem's own excess
    /// oracle when it has one, which avoids cancellation near the optimum.
    pub fn excess(&self, x: &Point) -> Option<f64> {
        if let Some(e) = &self.excess {
            return Some(e(x));
        }
        self.optimum.as_ref().map(|o| self.value(x) - o.value)
    }

    pub fn gradient(&self, x: &Point) -> Result<Point> {
        self.check_dim(x)?;
        match &self.gradient {
            Some(g) => Ok(g(x)),
            None => Err(self.missing("gradient")),
        }
    }

    /// A deterministic element of the subdifferential. Falls back to the
    /// gradient for differentiable problems.
    pub fn subgradient(&self, x: &Point) -> Result<Point> {
        self.check_dim(x)?;
        match (&self.subgradient, &self.gradient) {
            (Some(s), _) => Ok(s(x)),
            (None, Some(g)) => Ok(g(x)),
            (None, None) => Err(self.missing("subgradient")),
        }
    }

    pub fn hvp(&self, x: &Point, v: &Point) -> Result<Point> {
        self.check_dim(x)?;
        self.check_dim(v)?;
        match &self.hvp {
            Some(h) => Ok(h(x, v)),
            None if self.identity_hessian => Ok(v.clone()),
            None => Err(self.missing("hessian-vector")),
        }
    }

    /// Dense Hessian assembled column by column from the Hessian-vector oracle.
    pub fn hessian(&self, x: &Point) -> Result<DMatrix<f64>> {
        let d = self.dim;
        let mut h = DMatrix::zeros(d, d);
        let mut e = vec![0.0; d];
        for j in 0..d {
            e[j] = 1.0;
            let col = self.hvp(x, &Point::from_vec(e.clone()))?;
            for i in 0..d {
                h[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        Ok(h)
    }

    /// The problem with value, oracles, and declared constants negated in
    /// the sense of -f. Convexity constants do not carry over.
    pub fn negated(&self) -> ScalarProblem {
        let value = self.value.clone();
        let mut b = ScalarProblem::builder(format!("-{}", self.name), self.dim, move |x| -value(x));
        if let Some(g) = self.gradient.clone() {
            b = b.gradient(move |x| -&g(x));
        }
        if let Some(h) = self.hvp.clone() {
            b = b.hvp(move |x, v| -&h(x, v));
        }
        b.constants(ScalarConstants { smoothness: self.constants.smoothness, ..ScalarConstants::default() })
            .build()
            .expect("negation preserves validity")
    }

    pub(crate) fn require_constant(&self, c: Option<f64>, constant: &'static str) -> Result<f64> {
        c.ok_or_else(|| Error::MissingConstant { problem: self.name.clone(), constant })
    }

    fn missing(&self, oracle: &'static str) -> Error {
        Error::MissingOracle { problem: self.name.clone(), oracle }
    }
}

pub struct ScalarProblemBuilder {
    problem: ScalarProblem,
}

impl ScalarProblemBuilder {
    pub fn gradient(mut self, g: impl Fn(&Point) -> Point + Send + Sync + 'static) -> Self {
        self.problem.gradient = Some(Arc::new(g));
        self
    }

    pub fn subgradient(mut self, g: impl Fn(&Point) -> Point + Send + Sync + 'static) -> Self {
        self.problem.subgradient = Some(Arc::new(g));
        self
    }

    pub fn hvp(mut self, h: impl Fn(&Point, &Point) -> Point + Send + Sync + 'static) -> Self {
        self.problem.hvp = Some(Arc::new(h));
        self
    }

    pub fn identity_hessian(mut self) -> Self {
        self.problem.identity_hessian = true;
        self
    }

    pub fn excess(mut self, e: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        self.problem.excess = Some(Arc::new(e));
        self
    }

    pub fn constants(mut self, c: ScalarConstants) -> Self {
        self.problem.constants = c;
        self
    }

    pub fn optimum(mut self, x: Point, value: f64) -> Self {
        self.problem.optimum = Some(Optimum { x, value });
        self
    }

    pub fn build(self) -> Result<ScalarProblem> {
        let p = self.problem;
        if p.dim == 0 {
            return Err(Error::InvalidParameter("problem dimension must be positive".into()));
        }
        let c = &p.constants;
        for (name, v) in [
            ("L", c.smoothness),
            ("mu", c.strong_convexity),
            ("rho", c.hessian_lipschitz),
            ("G", c.subgradient_bound),
            ("R", c.initial_distance),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::InvalidParameter(format!("constant {name} = {v} must be a nonnegative real")));
                }
            }
        }
        if let Some(o) = &p.optimum {
            ensure_dim(p.dim, o.x.dim())?;
        }
        Ok(p)
    }
}

/// Constants a vector field may declare.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldConstants {
    /// L: Lipschitz constant of F.
    pub lipschitz: Option<f64>,
    /// μ: strong monotonicity modulus.
    pub strong_monotonicity: Option<f64>,
    /// α: co-coercivity constant, ⟨F(x)-F(y), x-y⟩ ≥ (1/α)||F(x)-F(y)||².
    pub cocoercivity: Option<f64>,
}

/// F(z) = M z + q.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    pub matrix: DMatrix<f64>,
    pub offset: Point,
}

impl AffineMap {
    pub fn apply(&self, z: &Point) -> Point {
        let mut out = self.linear(z);
        for (o, b) in out.iter_mut().zip(self.offset.as_slice()) {
            *o += b;
        }
        Point::from_vec(out)
    }

    pub(crate) fn linear(&self, v: &Point) -> Vec<f64> {
        let n = self.matrix.nrows();
        (0..n).map(|i| (0..v.dim()).map(|j| self.matrix[(i, j)] * v[j]).sum()).collect()
    }
}

#[derive(Clone)]
pub struct VectorField {
    name: String,
    dim: usize,
    eval: MapFn,
    jvp: Option<ApplyFn>,
    constants: FieldConstants,
    fixed_point: Option<Point>,
    affine: Option<AffineMap>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("constants", &self.constants)
            .field("fixed_point", &self.fixed_point)
            .field("affine", &self.affine.is_some())
            .finish_non_exhaustive()
    }
}

impl VectorField {
    pub fn builder(
        name: impl Into<String>,
        dim: usize,
        eval: impl Fn(&Point) -> Point + Send + Sync + 'static,
    ) -> VectorFieldBuilder {
        VectorFieldBuilder {
            field: VectorField {
                name: name.into(),
                dim,
                eval: Arc::new(eval),
                jvp: None,
                constants: FieldConstants::default(),
                fixed_point: None,
                affine: None,
            },
        }
    }

    /// F(z) = M z + q with an exact Jacobian-vector oracle. Constants are
    /// left for the caller to declare.
    pub fn affine_builder(name: impl Into<String>, map: AffineMap) -> Result<VectorFieldBuilder> {
        let d = map.offset.dim();
        if map.matrix.nrows() != d || map.matrix.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: map.matrix.nrows() });
        }
        let eval_map = map.clone();
        let jvp_map = map.clone();
        let mut b = VectorField::builder(name, d, move |z| eval_map.apply(z))
            .jvp(move |_, v| Point::from_vec(jvp_map.linear(v)));
        b.field.affine = Some(map);
        Ok(b)
    }

    /// The gradient field ∇f of a differentiable scalar problem. A smooth
    /// convex f gives an L-co-coercive, μ-strongly monotone field.
    pub fn gradient_field(p: &ScalarProblem) -> Result<VectorField> {
        if !p.has_gradient() {
            return Err(p.missing("gradient"));
        }
        let g = p.clone();
        let mut b = VectorField::builder(format!("grad({})", p.name()), p.dim(), move |x| {
            g.gradient(x).expect("gradient oracle checked at construction")
        });
        if p.has_hvp() {
            let h = p.clone();
            b = b.jvp(move |x, v| h.hvp(x, v).expect("hvp oracle checked at construction"));
        }
        let c = p.constants();
        let convex = c.strong_convexity.is_some();
        b = b.constants(FieldConstants {
            lipschitz: c.smoothness,
            strong_monotonicity: c.strong_convexity,
            cocoercivity: if convex { c.smoothness } else { None },
        });
        if let Some(o) = p.optimum() {
            b = b.fixed_point(o.x.clone());
        }
        b.build()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constants(&self) -> &FieldConstants {
        &self.constants
    }

    pub fn fixed_point(&self) -> Option<&Point> {
        self.fixed_point.as_ref()
    }

    pub fn affine(&self) -> Option<&AffineMap> {
        self.affine.as_ref()
    }

    pub fn has_jvp(&self) -> bool {
        self.jvp.is_some()
    }

    pub fn check_dim(&self, x: &Point) -> Result<()> {
        ensure_dim(self.dim, x.dim())
    }

    /// F(x). Panics on a dimension mismatch; algorithms validate first.
    pub fn eval(&self, x: &Point) -> Point {
        debug_assert_eq!(x.dim(), self.dim);
        (self.eval)(x)
    }

    pub fn jvp(&self, x: &Point, v: &Point) -> Result<Point> {
        self.check_dim(x)?;
        self.check_dim(v)?;
        match &self.jvp {
            Some(j) => Ok(j(x, v)),
            None => Err(Error::MissingOracle { problem: self.name.clone(), oracle: "jacobian-vector" }),
        }
    }

    /// `F` with every output multiplied by `c`.
    pub fn scaled(&self, c: f64) -> VectorField {
        let f = self.clone();
        let mut b = VectorField::builder(format!("{}*{c}", self.name), self.dim, move |x| f.eval(x).scaled(c));
        if let Some(j) = self.jvp.clone() {
            b = b.jvp(move |x, v| j(x, v).scaled(c));
        }
        b.field.affine = self.affine.as_ref().map(|a| AffineMap { matrix: &a.matrix * c, offset: a.offset.scaled(c) });
        b.build().expect("scaling preserves validity")
    }

    pub(crate) fn require_constant(&self, c: Option<f64>, constant: &'static str) -> Result<f64> {
        c.ok_or_else(|| Error::MissingConstant { problem: self.name.clone(), constant })
    }
}

pub struct VectorFieldBuilder {
    field: VectorField,
}

impl VectorFieldBuilder {
    pub fn jvp(mut self, j: impl Fn(&Point, &Point) -> Point + Send + Sync + 'static) -> Self {
        self.field.jvp = Some(Arc::new(j));
        self
    }

    pub fn constants(mut self, c: FieldConstants) -> Self {
        self.field.constants = c;
        self
    }

    pub fn fixed_point(mut self, z: Point) -> Self {
        self.field.fixed_point = Some(z);
        self
    }

    pub fn build(self) -> Result<VectorField> {
        let f = self.field;
        if f.dim == 0 {
            return Err(Error::InvalidParameter("field dimension must be positive".into()));
        }
        if let Some(z) = &f.fixed_point {
            ensure_dim(f.dim, z.dim())?;
            let r = f.eval(z).norm();
            if !(r <= 1e-10 * (1.0 + z.norm())) {
                return Err(Error::FixedPointResidual(r));
            }
        }
        Ok(f)
    }
}

/// D_h(y, x) = h(y) - h(x) - ⟨∇h(x), y - x⟩.
pub fn bregman_divergence(h: &ScalarProblem, y: &Point, x: &Point) -> Result<f64> {
    h.check_dim(y)?;
    let g = h.gradient(x)?;
    Ok(h.value(y) - h.value(x) - dot(&g, &(y - x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    fn half_norm_sq(d: usize) -> ScalarProblem {
        ScalarProblem::builder("half-norm", d, |x| 0.5 * x.norm_sq())
            .gradient(|x| x.clone())
            .identity_hessian()
            .build()
            .unwrap()
    }

    fn neg_entropy() -> ScalarProblem {
        ScalarProblem::builder("neg-entropy", 2, |x| x.as_slice().iter().map(|v| v * v.ln()).sum())
            .gradient(|x| Point::from_vec(x.as_slice().iter().map(|v| v.ln() + 1.0).collect()))
            .build()
            .unwrap()
    }

    #[test]
    fn bregman_examples() {
        let h = half_norm_sq(2);
        assert_eq!(bregman_divergence(&h, &p(&[1.0, 0.0]), &Point::zeros(2)).unwrap(), 0.5);
        let y = p(&[0.3, -1.2]);
        assert_eq!(bregman_divergence(&h, &y, &y).unwrap(), 0.0);
        // negative entropy: D = Σ y log(y/x) - y + x, which is e - 2 here
        let e = std::f64::consts::E;
        let d = bregman_divergence(&neg_entropy(), &p(&[1.0, 1.0]), &p(&[e, 1.0])).unwrap();
        let oracle = (1.0 * (1.0 / e).ln() - 1.0 + e) + (0.0 - 1.0 + 1.0);
        assert!((d - oracle).abs() < 1e-14);
    }

    #[test]
    fn bregman_needs_gradient() {
        let h = ScalarProblem::builder("no-grad", 1, |x| x[0].abs()).build().unwrap();
        assert!(matches!(bregman_divergence(&h, &p(&[1.0]), &p(&[2.0])), Err(Error::MissingOracle { .. })));
    }

    #[test]
    fn fixed_point_residual_checked() {
        let f = VectorField::builder("shift", 1, |z| Point::from_vec(vec![z[0] - 1.0])).fixed_point(p(&[0.0])).build();
        assert!(matches!(f, Err(Error::FixedPointResidual(_))));
    }

    #[test]
    fn negative_constants_rejected() {
        let r = ScalarProblem::builder("bad", 1, |x| x[0])
            .constants(ScalarConstants { smoothness: Some(-1.0), ..Default::default() })
            .build();
        assert!(r.is_err());
    }

    proptest! {
        #[test]
        fn bregman_nonnegative_for_convex(
            y in prop::collection::vec(0.01..10.0f64, 2),
            x in prop::collection::vec(0.01..10.0f64, 2),
        ) {
            let (y, x) = (p(&y), p(&x));
            prop_assert!(bregman_divergence(&neg_entropy(), &y, &x).unwrap() >= -1e-12);
            prop_assert!(bregman_divergence(&half_norm_sq(2), &y, &x).unwrap() >= -1e-12);
        }
    }
}
