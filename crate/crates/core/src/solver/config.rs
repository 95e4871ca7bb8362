use serde::{Deserialize, Serialize};

use crate::block_matching::BlockMatchingParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Core weights `w_j`: one value shared by all groups or one value per group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupWeights<T> {
    Constant(T),
    PerGroup(Vec<T>),
}

impl<T: Scalar> GroupWeights<T> {
    /// Expands to one weight per group.
    pub fn resolve(&self, n_groups: usize) -> Result<Vec<T>> {
        match self {
            GroupWeights::Constant(w) => Ok(vec![*w; n_groups]),
            GroupWeights::PerGroup(v) if v.len() == n_groups => Ok(v.clone()),
            GroupWeights::PerGroup(v) => Err(Error::Config(format!(
                "w lists {} weights but the block-matching plan has {n_groups} groups",
                v.len()
            ))),
        }
    }

    fn all_positive(&self) -> bool {
        match self {
            GroupWeights::Constant(w) => *w > T::zero() && w.is_finite(),
            GroupWeights::PerGroup(v) => v.iter().all(|w| *w > T::zero() && w.is_finite()),
        }
    }
}

/// Model and algorithm parameters of the denoiser.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct SolverConfig<T> {
    /// Data-fidelity weight `δ`.
    pub delta: T,
    /// Weight `γ` of the ℓ2,p stripe penalty.
    pub gamma: T,
    /// Exponent `p ∈ (0, 1)` of the ℓ2,p penalty.
    pub p: T,
    /// Core sparsity weights `w_j`.
    pub w: GroupWeights<T>,
    pub alpha_s: T,
    pub alpha_x: T,
    pub alpha_g: T,
    /// Tucker ranks `(n1, n2, n3)` of every group.
    pub ranks: [usize; 3],
    /// Spatial block side `r`.
    pub block: usize,
    pub stride: usize,
    pub window: usize,
    /// Group size `m2`.
    pub group_size: usize,
    #[serde(default = "one")]
    pub candidate_stride: usize,
    pub max_outer_iters: usize,
    /// Number of `{X1, X2, X3, G}` sweeps per outer iteration.
    pub inner_xg_iters: usize,
    /// Block matching is redone on the current `L` for the first this-many iterations.
    pub bm_refresh_iters: usize,
    /// Stop once `‖Lᵏ⁺¹ − Lᵏ‖ / ‖Lᵏ‖` falls to this value.
    pub rel_tol: T,
}

fn one() -> usize {
    1
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            delta: T::of(0.5),
            gamma: T::of(150.0),
            p: T::of(0.1),
            w: GroupWeights::Constant(T::of(100.0)),
            alpha_s: T::of(0.001),
            alpha_x: T::of(0.001),
            alpha_g: T::of(0.001),
            ranks: [25, 2, 32],
            block: 5,
            stride: 5,
            window: 30,
            group_size: 128,
            candidate_stride: 1,
            max_outer_iters: 50,
            inner_xg_iters: 3,
            bm_refresh_iters: 2,
            rel_tol: T::of(0.01),
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn block_matching(&self) -> BlockMatchingParams {
        BlockMatchingParams {
            block: self.block,
            stride: self.stride,
            window: self.window,
            group_size: self.group_size,
            candidate_stride: self.candidate_stride,
        }
    }

    /// Checks every positivity and range constraint, and the ranks against the slab
    /// dimensions `(r², m2, I3)` implied by a cube with `bands` bands.
    pub fn validate(&self, bands: usize) -> Result<()> {
        let positive = [
            ("delta", self.delta),
            ("gamma", self.gamma),
            ("alpha_s", self.alpha_s),
            ("alpha_x", self.alpha_x),
            ("alpha_g", self.alpha_g),
            ("rel_tol", self.rel_tol),
        ];
        for (name, v) in positive {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.p > T::zero() && self.p < T::one()) {
            return Err(Error::Config(format!("p must lie in (0, 1), got {}", self.p)));
        }
        if !self.w.all_positive() {
            return Err(Error::Config("core weights w must be positive and finite".into()));
        }
        if self.max_outer_iters == 0 || self.inner_xg_iters == 0 {
            return Err(Error::Config("max_outer_iters and inner_xg_iters must be at least 1".into()));
        }
        let slab = [self.block * self.block, self.group_size, bands];
        for k in 0..3 {
            if self.ranks[k] == 0 || self.ranks[k] > slab[k] {
                return Err(Error::Config(format!(
                    "rank n{} = {} must lie in 1..={} for group slabs of size {:?}",
                    k + 1,
                    self.ranks[k],
                    slab[k],
                    slab
                )));
            }
        }
        Ok(())
    }
}
