//! Hyperspectral image denoising and destriping.
//!
//! A noisy cube `D` is split as `D ≈ L + S + N`: `L` is recovered through a nonlocal
//! low-rank tensor model (block-matched groups, each approximated by an orthogonal Tucker
//! decomposition with an ℓ1-sparsified core), and `S` collects column-aligned stripes and
//! dead lines through a weighted tensor ℓ2,p penalty with `p ∈ (0, 1)`. The resulting
//! nonconvex problem with orthogonality constraints is solved by proximal block
//! coordinate descent ([`solver`]).
//!
//! All numerical kernels are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

pub mod block_matching;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod lowrank;
pub mod metrics;
pub mod noise;
pub mod prox;
pub mod scalar;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor3f = tensor::Tensor3<f64>;
pub type Tensor4f = tensor::Tensor4<f64>;
pub type Matrixf = tensor::Matrix<f64>;
pub type FactorStackf = tensor::FactorStack<f64>;
pub type BlockMatchingPlanf = block_matching::BlockMatchingPlan;
pub type SolverConfigf = solver::SolverConfig<f64>;
pub type SolverStatef = solver::SolverState<f64>;

pub type Tensor3s = tensor::Tensor3<f32>;
pub type Tensor4s = tensor::Tensor4<f32>;
pub type Matrixs = tensor::Matrix<f32>;
pub type FactorStacks = tensor::FactorStack<f32>;
pub type SolverConfigs = solver::SolverConfig<f32>;
