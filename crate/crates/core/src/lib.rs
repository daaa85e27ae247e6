//! Spectral distributions of selfadjoint polynomials in free random variables
//! and Brown measures of non-selfadjoint ones.
//!
//! The pipeline is: parse a noncommutative polynomial ([`ncexpr`]), turn it
//! into a selfadjoint linear pencil ([`linpen`]), evaluate the pencil's
//! operator-valued Cauchy transform by subordination fixed points
//! ([`subord`]) over the scalar laws of the variables ([`laws`]), and recover
//! a density on ℝ or a Brown measure on ℂ ([`recover`]). [`rmt`] samples
//! random matrices as an independent Monte Carlo check.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cmat;
pub mod error;
pub mod laws;
pub mod linpen;
pub mod ncexpr;
pub mod recover;
pub mod rmt;
pub mod subord;

#[cfg(test)]
mod testutil;

pub use cmat::{CMatrix, HalfPlaneReport, C64};
pub use error::{Error, Result};
pub use laws::{CoefficientTerm, ScalarLaw};
pub use linpen::LinearPencil;
pub use ncexpr::NcPolynomial;
pub use recover::{BrownField, DensityCurve, Grid2d};
pub use subord::{FixedPointOptions, PencilEvaluator};
