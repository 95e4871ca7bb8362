//! Proximal operators of the two nonsmooth penalties.
//!
//! * [`prox_weighted_l1`]: slab-wise soft thresholding for the Tucker cores.
//! * [`prox_l2p`]: the tensor ℓ2,p proximal map. The problem separates over mode-1
//!   fibers, and each fiber solution is a nonnegative multiple `t·s̃` of the input fiber,
//!   where `t` minimizes `ν tᵖ + ½(t − 1)²` over `t ≥ 0` with `ν = μ‖s̃‖^{p−2}`
//!   ([`solve_scalar_t`]).

use crate::error::{usage, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{check_p, Tensor3, Tensor4};

const NEWTON_MAX_ITERS: usize = 100;

/// Threshold constants of the ℓ2,p proximal map for a given `(μ, p)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct L2pThresholds<T> {
    pub p: T,
    pub mu: T,
    /// `β₀ = [2μ(1−p)]^{1/(2−p)}`.
    pub beta0: T,
    /// Fiber norms at or below `β₀(2−p)/(2(1−p))` are mapped to zero.
    pub zero_cutoff: T,
}

impl<T: Scalar> L2pThresholds<T> {
    pub fn new(mu: T, p: T) -> Result<Self> {
        check_p(p)?;
        if !(mu > T::zero()) || !mu.is_finite() {
            return usage(format!("mu must be positive and finite, got {mu}"));
        }
        let one = T::one();
        let two = T::of(2.0);
        let beta0 = (two * mu * (one - p)).powf(one / (two - p));
        let zero_cutoff = beta0 * (two - p) / (two * (one - p));
        Ok(Self { p, mu, beta0, zero_cutoff })
    }

    /// `Γ_μ(β)`: the scaling applied to a fiber of Euclidean norm `β`.
    pub fn gamma(&self, beta: T) -> Result<T> {
        if beta <= self.zero_cutoff {
            return Ok(T::zero());
        }
        let nu = self.mu * beta.powf(self.p - T::of(2.0));
        solve_scalar_t(nu, self.p)
    }
}

/// `ν₀ = [2(1−p)]^{1−p} / (2−p)^{2−p}`: above it the scalar problem is solved by `t = 0`.
pub fn nu0<T: Scalar>(p: T) -> T {
    let one = T::one();
    let two = T::of(2.0);
    (two * (one - p)).powf(one - p) / (two - p).powf(two - p)
}

/// `τ(ν) = [2ν(1−p)]^{1/(2−p)}`, the lower end of the bracket holding the nonzero minimizer.
pub fn tau<T: Scalar>(nu: T, p: T) -> T {
    let one = T::one();
    let two = T::of(2.0);
    (two * nu * (one - p)).powf(one / (two - p))
}

/// Objective of the scalar problem, `ν tᵖ + ½(t − 1)²` for `t ≥ 0`.
pub fn scalar_objective<T: Scalar>(t: T, nu: T, p: T) -> T {
    let pen = if t > T::zero() { nu * t.powf(p) } else { T::zero() };
    pen + T::of(0.5) * (t - T::one()) * (t - T::one())
}

fn newton_tol<T: Scalar>() -> T {
    T::of(1e-12).max(T::of(64.0) * T::epsilon())
}

/// Minimizer of `ν tᵖ + ½(t − 1)²` over `t ∈ [0, ∞)`.
///
/// Returns `0` when `ν ≥ ν₀` (at `ν = ν₀` both `0` and `τ(ν₀)` are optimal and `0` is
/// chosen). Otherwise returns the unique root in `(τ(ν), 1)` of `ν p t^{p−1} + t − 1`,
/// in closed form for `p = ½` and by bracketed Newton iteration started at
/// `(τ(ν) + 1)/2` for other `p`.
pub fn solve_scalar_t<T: Scalar>(nu: T, p: T) -> Result<T> {
    check_p(p)?;
    if !(nu > T::zero()) || !nu.is_finite() {
        return usage(format!("nu must be positive and finite, got {nu}"));
    }
    if nu >= nu0(p) {
        return Ok(T::zero());
    }
    let lo = tau(nu, p);
    if p == T::of(0.5) {
        if let Some(t) = half_power_root(nu, lo) {
            return Ok(t);
        }
    }
    newton_root(nu, p, lo, (lo + T::one()) * T::of(0.5))
}

#[inline]
fn stationarity<T: Scalar>(t: T, nu: T, p: T) -> T {
    nu * p * t.powf(p - T::one()) + t - T::one()
}

/// For `p = ½` the stationarity equation in `u = √t` is the depressed cubic
/// `u³ − u + ν/2 = 0`; the sought root is its largest real root.
fn half_power_root<T: Scalar>(nu: T, lo: T) -> Option<T> {
    let three = T::of(3.0);
    let arg = -(three * three.sqrt() / T::of(4.0)) * nu;
    if arg < -T::one() || arg > T::one() {
        return None;
    }
    let u = T::of(2.0) / three.sqrt() * (arg.acos() / three).cos();
    let t = u * u;
    let half = T::of(0.5);
    if !(t > lo && t < T::one()) || stationarity(t, nu, half).abs() > newton_tol() {
        return None;
    }
    Some(t)
}

fn newton_root<T: Scalar>(nu: T, p: T, lo: T, t0: T) -> Result<T> {
    let one = T::one();
    let tol = newton_tol::<T>();
    // On (τ, 1) the stationarity function is increasing and convex, so f(lo) < 0 < f(1).
    let f_lo = stationarity(lo, nu, p);
    if f_lo >= T::zero() {
        return Ok(lo);
    }
    let (mut a, mut b) = (lo, one);
    let mut t = t0;
    for _ in 0..NEWTON_MAX_ITERS {
        let f = stationarity(t, nu, p);
        if f.abs() <= tol {
            return Ok(t);
        }
        if f < T::zero() {
            a = t;
        } else {
            b = t;
        }
        if b - a <= T::epsilon() * b {
            return Ok(t);
        }
        let df = nu * p * (p - one) * t.powf(p - T::of(2.0)) + one;
        let next = t - f / df;
        t = if next.is_finite() && next > a && next < b { next } else { (a + b) * T::of(0.5) };
    }
    Err(Error::Numerical(format!(
        "Newton iteration for the l2,p scalar problem did not converge (nu = {nu}, p = {p})"
    )))
}

/// Proximal map of `μ‖·‖_{2,p}^p` evaluated fiber-wise along mode 1.
pub fn prox_l2p<T: Scalar>(t: &Tensor3<T>, mu: T, p: T) -> Result<Tensor3<T>> {
    let th = L2pThresholds::new(mu, p)?;
    let mut out = t.clone();
    let i2_count = t.dims()[1].max(1);
    for (f, fiber) in out.fibers_mut().enumerate() {
        let beta = fiber.iter().map(|&x| x * x).sum::<T>().sqrt();
        let g = th.gamma(beta).map_err(|e| match e {
            Error::Numerical(msg) => Error::Numerical(format!(
                "{msg} at fiber (i2 = {}, i3 = {})",
                f % i2_count,
                f / i2_count
            )),
            other => other,
        })?;
        fiber.iter_mut().for_each(|x| *x *= g);
    }
    Ok(out)
}

#[inline]
pub fn soft_threshold<T: Scalar>(x: T, threshold: T) -> T {
    if x > threshold {
        x - threshold
    } else if x < -threshold {
        x + threshold
    } else {
        T::zero()
    }
}

/// Proximal map of `step·‖·‖_{1,w}`: slab `j` is soft-thresholded at `step·w_j`.
pub fn prox_weighted_l1<T: Scalar>(g: &Tensor4<T>, w: &[T], step: T) -> Result<Tensor4<T>> {
    if w.len() != g.len() {
        return usage(format!("weight vector has length {}, stack has {} slabs", w.len(), g.len()));
    }
    if w.iter().any(|&x| x < T::zero() || !x.is_finite()) || step < T::zero() {
        return usage("thresholds must be nonnegative and finite");
    }
    let mut out = g.clone();
    for (slab, &wj) in out.slabs_mut().iter_mut().zip(w) {
        let thr = step * wj;
        slab.data_mut().iter_mut().for_each(|x| *x = soft_threshold(*x, thr));
    }
    Ok(out)
}
