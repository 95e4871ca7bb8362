//! Orthogonal low-rank machinery: reduced SVD, Stiefel projection and independent HOSVD.

mod hosvd;
mod stiefel;
mod svd;

pub use hosvd::{compose, init_hosvd, project_core, Hosvd};
pub use stiefel::{project_stiefel, StiefelProjection};
pub use svd::{leading_left_singular_vectors, reduced_svd, ReducedSvd};
