//! Finite-element laboratory for weighted Steklov eigenvalues of the
//! p-Laplacian with rapidly oscillating periodic boundary weights.

// `!(x > 0.0)` rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod bounds;
pub mod config;
pub mod eigen_linear;
pub mod eigen_plap;
mod error;
pub mod fucik;
pub mod harness;
pub mod mesh;
pub mod par;
pub mod pencil;
pub mod quadrature;
pub mod space;
pub mod sparse;
pub mod weights;

pub use error::{Error, Result};
