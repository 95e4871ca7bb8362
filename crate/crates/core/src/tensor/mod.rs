//! Dense tensor containers and the multilinear algebra used throughout the crate.

mod dense;
mod matrix;
mod norms;

pub use dense::{FactorStack, Tensor3, Tensor4};
pub use matrix::Matrix;
pub(crate) use matrix::dot;
pub(crate) use norms::check_p;
