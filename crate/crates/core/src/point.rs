//! Dense iterates and the Euclidean operations the algorithms are written in.

use std::ops::{Add, Index, Mul, Neg, Sub};

use crate::error::{ensure_dim, Error, Result};

/// A point in R^d with finite coordinates.
///
/// Arithmetic through the operator impls assumes matching dimensions and
/// panics otherwise; public entry points validate dimensions first and
/// report [`Error::DimensionMismatch`].
#[derive(Clone, Debug, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("a point needs at least one coordinate".into()));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("coordinate {i} is {}", coords[i])));
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self(vec![0.0; dim])
    }

    /// Builds a point without the finiteness check. Algorithms use this for
    /// intermediate values and check finiteness on accepted iterates.
    pub(crate) fn from_vec(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty());
        Self(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    /// `self + a * y`
    pub fn axpy(&self, a: f64, y: &Point) -> Point {
        assert_eq!(self.dim(), y.dim());
        Point(self.0.iter().zip(&y.0).map(|(x, y)| x + a * y).collect())
    }

    pub fn scaled(&self, a: f64) -> Point {
        Point(self.0.iter().map(|x| a * x).collect())
    }

    /// Copies `self[start..start + len]` into a new point.
    pub fn block(&self, start: usize, len: usize) -> Point {
        Point(self.0[start..start + len].to_vec())
    }

    pub fn concat(parts: &[&Point]) -> Point {
        Point(parts.iter().flat_map(|p| p.0.iter().copied()).collect())
    }

    pub(crate) fn ensure_finite(self, context: impl FnOnce() -> String) -> Result<Point> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite(context()))
        }
    }
}

impl Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &Point {
    type Output = Point;
    fn add(self, rhs: &Point) -> Point {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &Point {
    type Output = Point;
    fn sub(self, rhs: &Point) -> Point {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<&Point> for f64 {
    type Output = Point;
    fn mul(self, rhs: &Point) -> Point {
        rhs.scaled(self)
    }
}

impl Neg for &Point {
    type Output = Point;
    fn neg(self) -> Point {
        self.scaled(-1.0)
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

/// Euclidean inner product.
pub fn inner(x: &Point, y: &Point) -> Result<f64> {
    ensure_dim(x.dim(), y.dim())?;
    Ok(dot(x, y))
}

pub(crate) fn dot(x: &Point, y: &Point) -> f64 {
    x.0.iter().zip(&y.0).map(|(a, b)| a * b).sum()
}
