//! Norms used by the model: Frobenius, entrywise ℓ1, weighted ℓ1 over group stacks and
//! the tensor ℓ2,p quasi-norm over mode-1 fibers.

use crate::error::{usage, Result};
use crate::scalar::Scalar;
use crate::tensor::{Tensor3, Tensor4};

pub(crate) fn check_p<T: Scalar>(p: T) -> Result<()> {
    if !(p > T::zero() && p < T::one()) {
        return usage(format!("p must lie in (0, 1), got {p}"));
    }
    Ok(())
}

impl<T: Scalar> Tensor3<T> {
    pub fn frobenius_sq(&self) -> T {
        self.data().iter().map(|&x| x * x).sum()
    }

    pub fn frobenius(&self) -> T {
        self.frobenius_sq().sqrt()
    }

    pub fn l1(&self) -> T {
        self.data().iter().map(|x| x.abs()).sum()
    }

    /// Euclidean norm of every mode-1 fiber, `i2` fastest.
    pub fn fiber_norms(&self) -> Vec<T> {
        self.fibers().map(|f| f.iter().map(|&x| x * x).sum::<T>().sqrt()).collect()
    }

    /// `‖X‖_{2,p}^p = Σ_{i2,i3} ‖x_{:i2i3}‖_2^p`. Zero fibers contribute zero.
    pub fn l2p_pow(&self, p: T) -> Result<T> {
        check_p(p)?;
        Ok(self
            .fiber_norms()
            .into_iter()
            .filter(|&n| n > T::zero())
            .map(|n| n.powf(p))
            .sum())
    }

    /// `‖X‖_{2,p} = (Σ_{i2,i3} ‖x_{:i2i3}‖_2^p)^{1/p}`.
    pub fn l2p(&self, p: T) -> Result<T> {
        Ok(self.l2p_pow(p)?.powf(T::one() / p))
    }
}

impl<T: Scalar> Tensor4<T> {
    pub fn frobenius_sq(&self) -> T {
        self.slabs().iter().map(Tensor3::frobenius_sq).sum()
    }

    pub fn frobenius(&self) -> T {
        self.frobenius_sq().sqrt()
    }

    /// `‖[G]‖_{1,w} = Σ_j w_j ‖[G]^{(j)}‖_1`.
    pub fn weighted_l1(&self, w: &[T]) -> Result<T> {
        if w.len() != self.len() {
            return usage(format!("weight vector has length {}, stack has {} slabs", w.len(), self.len()));
        }
        if w.iter().any(|&x| !(x >= T::zero() && x.is_finite())) {
            return usage("group weights must be nonnegative and finite");
        }
        Ok(self.slabs().iter().zip(w).map(|(s, &wj)| wj * s.l1()).sum())
    }
}
