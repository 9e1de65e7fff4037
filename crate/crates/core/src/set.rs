//! Convex constraint sets and Euclidean projection onto them.

use crate::error::{ensure_dim, Error, Result};
use crate::point::Point;

/// Axis-aligned box `lower <= x <= upper`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSet {
    lower: Point,
    upper: Point,
}

impl BoxSet {
    pub fn lower(&self) -> &Point {
        &self.lower
    }
    pub fn upper(&self) -> &Point {
        &self.upper
    }
}

/// Closed Euclidean ball.
#[derive(Clone, Debug, PartialEq)]
pub struct BallSet {
    center: Point,
    radius: f64,
}

impl BallSet {
    pub fn center(&self) -> &Point {
        &self.center
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintSet {
    WholeSpace,
    Box(BoxSet),
    Ball(BallSet),
}

impl ConstraintSet {
    pub fn boxed(lower: Point, upper: Point) -> Result<Self> {
        ensure_dim(lower.dim(), upper.dim())?;
        if let Some(i) = (0..lower.dim()).find(|&i| lower[i] > upper[i]) {
            return Err(Error::InvalidParameter(format!("box lower bound exceeds upper bound in coordinate {i}")));
        }
        Ok(Self::Box(BoxSet { lower, upper }))
    }

    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self::Ball(BallSet { center, radius }))
    }

    /// Dimension the set lives in; `None` for the whole space of any dimension.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::WholeSpace => None,
            Self::Box(b) => Some(b.lower.dim()),
            Self::Ball(b) => Some(b.center.dim()),
        }
    }

    pub fn contains(&self, x: &Point) -> Result<bool> {
        self.check_dim(x)?;
        Ok(match self {
            Self::WholeSpace => true,
            Self::Box(b) => (0..x.dim()).all(|i| b.lower[i] <= x[i] && x[i] <= b.upper[i]),
            Self::Ball(b) => x.dist(&b.center) <= b.radius,
        })
    }

    fn check_dim(&self, x: &Point) -> Result<()> {
        match self.dim() {
            Some(d) => ensure_dim(d, x.dim()),
            None => Ok(()),
        }
    }
}

/// Nearest point of `set` to `x` in the Euclidean norm.
pub fn project(set: &ConstraintSet, x: &Point) -> Result<Point> {
    set.check_dim(x)?;
    Ok(match set {
        ConstraintSet::WholeSpace => x.clone(),
        ConstraintSet::Box(b) => Point::from_vec((0..x.dim()).map(|i| x[i].clamp(b.lower[i], b.upper[i])).collect()),
        ConstraintSet::Ball(b) => {
            let offset = x - &b.center;
            let r = offset.norm();
            if r <= b.radius {
                x.clone()
            } else {
                b.center.axpy(b.radius / r, &offset)
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::dot;
    use proptest::prelude::*;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn projection_examples() {
        let ball = ConstraintSet::ball(Point::zeros(2), 1.0).unwrap();
        assert_eq!(project(&ball, &p(&[2.0, 0.0])).unwrap(), p(&[1.0, 0.0]));
        let bx = ConstraintSet::boxed(p(&[-1.0, -1.0]), p(&[1.0, 1.0])).unwrap();
        assert_eq!(project(&bx, &p(&[0.5, 3.0])).unwrap(), p(&[0.5, 1.0]));
        let inside = p(&[0.3, -0.2]);
        for s in [&ball, &bx, &ConstraintSet::WholeSpace] {
            assert_eq!(project(s, &inside).unwrap(), inside);
        }
    }

    #[test]
    fn invalid_sets_rejected() {
        assert!(ConstraintSet::ball(Point::zeros(2), 0.0).is_err());
        assert!(ConstraintSet::ball(Point::zeros(2), -1.0).is_err());
        assert!(ConstraintSet::boxed(p(&[1.0]), p(&[0.0])).is_err());
        assert!(ConstraintSet::boxed(p(&[1.0]), p(&[2.0, 3.0])).is_err());
    }

    #[test]
    fn dimension_mismatch_reported() {
        let ball = ConstraintSet::ball(Point::zeros(2), 1.0).unwrap();
        assert!(matches!(project(&ball, &p(&[1.0, 2.0, 3.0])), Err(Error::DimensionMismatch { .. })));
    }

    fn arb_set_and_points() -> impl Strategy<Value = (ConstraintSet, Point, Point)> {
        let coords = prop::collection::vec(-10.0..10.0f64, 3);
        (0..3usize, coords.clone(), coords.clone(), coords.clone(), 0.1..5.0f64).prop_map(|(kind, a, b, c, r)| {
            let set = match kind {
                0 => ConstraintSet::WholeSpace,
                1 => {
                    let lo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect();
                    let hi: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
                    ConstraintSet::boxed(p(&lo), p(&hi)).unwrap()
                }
                _ => ConstraintSet::ball(p(&a), r).unwrap(),
            };
            (set, p(&b), p(&c))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn projection_is_idempotent((set, x, _y) in arb_set_and_points()) {
            let once = project(&set, &x).unwrap();
            let twice = project(&set, &once).unwrap();
            for i in 0..3 {
                prop_assert!((once[i] - twice[i]).abs() <= 1e-12 * (1.0 + once[i].abs()));
            }
            prop_assert!(set.contains(&twice).unwrap() || matches!(set, ConstraintSet::Ball(_)));
        }

        #[test]
        fn projection_is_firmly_nonexpansive((set, x, y) in arb_set_and_points()) {
            let px = project(&set, &x).unwrap();
            let py = project(&set, &y).unwrap();
            let dp = &px - &py;
            let rx = &x - &px;
            let ry = &y - &py;
            let dr = &rx - &ry;
            let dxy = &x - &y;
            prop_assert!(dot(&dp, &dp) + dot(&dr, &dr) <= dot(&dxy, &dxy) + 1e-12 * (1.0 + dot(&dxy, &dxy)));
        }
    }
}
