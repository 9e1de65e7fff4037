//! Named problem instances with default starting points.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::point::Point;
use crate::problem::{ScalarProblem, VectorField};
use crate::problems;

pub const NAMES: &[&str] = &[
    "abs",
    "gaussian",
    "quadratic-cond100",
    "quadratic-dense50",
    "quadratic-identity",
    "rotation",
    "strict-saddle-d10",
    "strict-saddle-d2",
    "strongmono-affine",
];

/// A registered instance. Objectives also carry their gradient field so
/// the VI methods can run on them; pure fields have no objective.
#[derive(Clone, Debug)]
pub struct Instance {
    pub name: &'static str,
    pub objective: Option<ScalarProblem>,
    pub field: Option<VectorField>,
    pub start: Point,
}

fn pt(v: &[f64]) -> Point {
    Point::from_vec(v.to_vec())
}

fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v))
}

fn objective(name: &'static str, p: ScalarProblem, start: Point) -> Result<Instance> {
    let field = if p.has_gradient() { Some(VectorField::gradient_field(&p)?) } else { None };
    Ok(Instance { name, objective: Some(p), field, start })
}

pub fn lookup(name: &str) -> Result<Instance> {
    let name = *NAMES.iter().find(|n| **n == name).ok_or_else(|| {
        Error::InvalidParameter(format!("unknown problem `{name}`; valid names: {}", NAMES.join(", ")))
    })?;
    match name {
        "abs" => objective(name, problems::abs_value()?, pt(&[1.0])),
        "gaussian" => objective(name, problems::quadratic(DMatrix::identity(1, 1), Point::zeros(1))?, pt(&[0.0])),
        "quadratic-identity" => {
            objective(name, problems::quadratic(DMatrix::identity(2, 2), Point::zeros(2))?, pt(&[3.0, 4.0]))
        }
        "quadratic-cond100" => {
            objective(name, problems::quadratic(diag(&[1.0, 100.0]), pt(&[1.0, 100.0]))?, pt(&[5.0, 5.0]))
        }
        "quadratic-dense50" => {
            let (p, start) = problems::dense_spectrum_quadratic(50)?;
            objective(name, p, start)
        }
        "strict-saddle-d2" | "strict-saddle-d10" => {
            let d = if name.ends_with("d2") { 2 } else { 10 };
            let mut start = vec![1.0; d];
            start[0] = 0.0;
            objective(name, problems::strict_saddle(d, -1.0)?, Point::from_vec(start))
        }
        "rotation" => {
            let (_, f) = problems::rotation()?;
            Ok(Instance { name, objective: None, field: Some(f), start: pt(&[1.0, 1.0]) })
        }
        "strongmono-affine" => {
            let f = problems::strongly_monotone_affine(1.0, 2.0, pt(&[1.0, -1.0]))?;
            Ok(Instance { name, objective: None, field: Some(f), start: pt(&[4.0, 3.0]) })
        }
        _ => unreachable!("every listed name is handled"),
    }
}

impl Instance {
    pub fn objective(&self) -> Result<&ScalarProblem> {
        self.objective
            .as_ref()
            .ok_or_else(|| Error::Unsupported(format!("`{}` is a vector field without an objective", self.name)))
    }

    pub fn field(&self) -> Result<&VectorField> {
        self.field.as_ref().ok_or_else(|| Error::Unsupported(format!("`{}` has no vector field", self.name)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves_with_matching_start() {
        for name in NAMES {
            let inst = lookup(name).unwrap();
            assert_eq!(inst.name, *name);
            let dim = inst.field.as_ref().map(|f| f.dim()).or(inst.objective.as_ref().map(|p| p.dim())).unwrap();
            assert_eq!(inst.start.dim(), dim, "{name}");
        }
        assert!(NAMES.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn unknown_name_lists_valid_ones() {
        let msg = lookup("nope").unwrap_err().to_string();
        assert!(msg.contains("rotation") && msg.contains("strongmono-affine"));
    }

    #[test]
    fn saddle_start_is_on_stable_manifold() {
        let inst = lookup("strict-saddle-d10").unwrap();
        assert_eq!(inst.start[0], 0.0);
        assert!(inst.objective().unwrap().optimum().is_some());
    }
}
