//! Proximal block coordinate descent for the denoising model.
//!
//! Each outer iteration updates `S`, then runs `inner_xg_iters` sweeps of
//! `X1 → X2 → X3 → G`, then updates `L`. Every block update is the exact minimizer of
//! `Φ` plus a proximal term in that block, so `Φ` cannot increase while the
//! block-matching plan is held fixed; [`run`] asserts this after every iteration.

mod config;
mod diagnostics;
mod state;

use std::time::Instant;

pub use config::{GroupWeights, SolverConfig};
pub use diagnostics::{Diagnostics, IterationRecord, PlotData, StopReason};
pub use state::{ObjectiveTerms, SolverState, StationarityResiduals, WeightCaches};

use crate::block_matching::BlockMatchingPlan;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor3;

/// Result of [`run`].
#[derive(Clone, Debug)]
pub struct SolverOutput<T> {
    pub state: SolverState<T>,
    pub diagnostics: Diagnostics,
}

impl<T: Scalar> SolverOutput<T> {
    /// Restored cube `L`.
    pub fn restored(&self) -> &Tensor3<T> {
        &self.state.l
    }

    /// Extracted stripe and dead-line component `S`.
    pub fn stripes(&self) -> &Tensor3<T> {
        &self.state.s
    }
}

/// Relative slack allowed on `Φ` between consecutive iterates.
fn descent_slack<T: Scalar>() -> f64 {
    1e-9f64.max(64.0 * T::epsilon().as_f64())
}

fn feasibility_tol<T: Scalar>() -> T {
    T::of(1e-10).max(T::of(1e3) * T::epsilon())
}

/// Denoises `d` starting from [`SolverState::initialize`].
pub fn run<T: Scalar>(d: &Tensor3<T>, config: &SolverConfig<T>) -> Result<SolverOutput<T>> {
    let state = SolverState::initialize(d, config)?;
    run_from(state, d, config)
}

/// Runs outer iterations from an explicit starting state.
pub fn run_from<T: Scalar>(mut state: SolverState<T>, d: &Tensor3<T>, config: &SolverConfig<T>) -> Result<SolverOutput<T>> {
    config.validate(d.dims()[2])?;
    let mut diagnostics = Diagnostics::default();
    let mut epoch = 0;
    let slack = descent_slack::<T>();
    for k in 0..config.max_outer_iters {
        let started = Instant::now();
        if k > 0 && k < config.bm_refresh_iters {
            state.set_plan(BlockMatchingPlan::build(&state.l, &config.block_matching())?)?;
            epoch += 1;
        }
        let phi_before = state.objective(config, d)?.as_f64();
        let s_prev = state.s.clone();
        let l_prev = state.l.clone();

        state.s = state.update_s(config, d)?;
        let rl = state.group_tensor()?;
        let mut degenerate = 0;
        for _ in 0..config.inner_xg_iters {
            for mode in 1..=3 {
                let (x, dg) = state.update_x(config, mode, &rl)?;
                state.x[mode - 1] = x;
                degenerate += dg;
            }
            state.g = state.update_g(config, &rl)?;
        }
        state.l = state.update_l(config, d)?;

        if !state.l.is_finite() || !state.s.is_finite() || !state.g.is_finite() {
            return Err(Error::Numerical(format!("non-finite iterate at iteration {k}")));
        }
        if let Some(i) = state.x.iter().position(|x| !x.is_orthonormal(feasibility_tol::<T>())) {
            return Err(Error::Integrity(format!(
                "factor stack {} lost orthonormality ({:e}) at iteration {k}",
                i + 1,
                state.x[i].orthonormality_error().as_f64()
            )));
        }
        let phi = state.objective(config, d)?;
        let phi_f = phi.as_f64();
        if !phi_f.is_finite() {
            return Err(Error::Numerical(format!("objective is not finite at iteration {k}")));
        }
        if phi_f > phi_before + slack * (1.0 + phi_before.abs()) {
            return Err(Error::DescentViolation { iteration: k, before: phi_before, after: phi_f });
        }

        let l_norm = l_prev.frobenius().as_f64().max(1e-12);
        let l_change = state.l.sub(&l_prev)?.frobenius().as_f64();
        let s_change = state.s.sub(&s_prev)?.frobenius().as_f64();
        let rel_change = l_change / l_norm;
        let res = state.stationarity_residuals(config, d)?;

        state.iter = k + 1;
        state.phi_history.push(phi);
        state.plan_epochs.push(epoch);
        diagnostics.records.push(IterationRecord {
            iteration: k,
            plan_epoch: epoch,
            phi: phi_f,
            rel_change,
            s_change,
            l_change,
            r_s: res.r_s,
            r_x_feas: res.r_x_feas,
            r_x_sub: res.r_x_sub,
            r_x_sym: res.r_x_sym,
            r_g: res.r_g,
            r_l: res.r_l,
            degenerate_projections: degenerate,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        if rel_change <= config.rel_tol.as_f64() {
            diagnostics.stop_reason = StopReason::Converged;
            return Ok(SolverOutput { state, diagnostics });
        }
    }
    diagnostics.stop_reason = StopReason::MaxIterations;
    Ok(SolverOutput { state, diagnostics })
}
