//! First-order optimization, monotone-operator algorithms, continuous-time
//! dynamics, and Langevin sampling on a shared problem abstraction, with
//! empirical checks of regularity properties and convergence rates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
#[doc(hidden)]
pub mod fault;
pub mod ode;
pub mod optimize;
pub mod point;
pub mod problem;
pub mod problems;
pub mod registry;
pub mod sample;
pub mod set;
pub mod suite;
pub mod trace;
pub mod vi;

pub use error::{Error, Result};
pub use point::{inner, Point};
pub use problem::{
    bregman_divergence, AffineMap, FieldConstants, Optimum, ScalarConstants, ScalarProblem, VectorField,
};
pub use set::{project, BallSet, BoxSet, ConstraintSet};
pub use trace::{Metric, Record, RunConfig, RunTrace};
