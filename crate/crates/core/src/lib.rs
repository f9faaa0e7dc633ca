//! Finite metric measure spaces, discrete Sobolev calculus on graphs, and
//! numerical checks of tensorization inequalities on Cartesian and warped products.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod calculus;
pub mod corpus;
pub mod cubes;
pub mod error;
pub mod mmspace;
pub mod products;
pub mod tensorize;

pub use error::{Error, Result};
pub use mmspace::{Continuum, Curve, FiniteSpace, ScalarField};
