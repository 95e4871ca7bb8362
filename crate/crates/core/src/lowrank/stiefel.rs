use crate::error::{usage, Result};
use crate::lowrank::svd::reduced_svd;
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Nearest point on the Stiefel manifold `{X : XᵀX = I}` to a matrix `A`.
#[derive(Clone, Debug)]
pub struct StiefelProjection<T> {
    pub x: Matrix<T>,
    /// `A` was not of full column rank, so the nearest point is not unique and `x` is
    /// one member of the solution set.
    pub degenerate: bool,
}

/// Projects `a` (`m × n`, `m ≥ n`) onto the Stiefel manifold as `UVᵀ` from a reduced SVD
/// `A = UΣVᵀ`.
pub fn project_stiefel<T: Scalar>(a: &Matrix<T>) -> Result<StiefelProjection<T>> {
    let (m, n) = a.shape();
    if m < n {
        return usage(format!("Stiefel projection expects rows >= cols, got {m}x{n}"));
    }
    let svd = reduced_svd(a)?;
    let x = svd.u.matmul_tr(&svd.v)?;
    Ok(StiefelProjection { x, degenerate: svd.is_rank_deficient() })
}
