//! Spectral workbench for the two-phase overdetermined torsion problem.

// negated comparisons are used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod branch;
pub mod chebyshev;
pub mod cli;
pub mod digest;
pub mod error;
pub mod fourier;
pub mod geometry;
pub mod operator;
pub mod oracles;
pub mod shape;
pub mod solver;

pub use error::{Error, Result};
pub use fourier::AngularField;
pub use geometry::GeometrySpec;
