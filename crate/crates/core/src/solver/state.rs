use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block_matching::{BlockMatchingPlan, WeightTensor};
use crate::error::{usage, Error, Result};
use crate::lowrank::{compose, init_hosvd, project_core, project_stiefel};
use crate::prox::{prox_l2p, prox_weighted_l1};
use crate::scalar::Scalar;
use crate::solver::SolverConfig;
use crate::tensor::{FactorStack, Matrix, Tensor3, Tensor4};

/// `W_R` together with the elementwise powers the updates need.
#[derive(Clone, Debug)]
pub struct WeightCaches<T> {
    pub w: Tensor3<T>,
    pub sqrt_w: Tensor3<T>,
    pub inv_w: Tensor3<T>,
    pub inv_sqrt_w: Tensor3<T>,
}

impl<T: Scalar> WeightCaches<T> {
    pub fn new(w: WeightTensor<T>) -> Self {
        let w = w.into_tensor();
        Self {
            sqrt_w: w.map(|x| x.sqrt()),
            inv_w: w.map(|x| x.recip()),
            inv_sqrt_w: w.map(|x| x.sqrt().recip()),
            w,
        }
    }
}

/// Iterate `(S, [X1], [X2], [X3], [G], L)` plus the block-matching plan it lives on.
#[derive(Clone, Debug)]
pub struct SolverState<T> {
    pub s: Tensor3<T>,
    pub l: Tensor3<T>,
    pub x: [FactorStack<T>; 3],
    pub g: Tensor4<T>,
    pub plan: BlockMatchingPlan,
    pub caches: WeightCaches<T>,
    /// Per-group core weights `w_j`.
    pub core_weights: Vec<T>,
    /// Completed outer iterations.
    pub iter: usize,
    /// `Φ` after each outer iteration.
    pub phi_history: Vec<T>,
    /// Plan generation each `phi_history` entry was computed under.
    pub plan_epochs: Vec<usize>,
}

/// The four terms of `Φ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveTerms<T> {
    /// `(δ/2)‖R(L + S − D)‖²`.
    pub fidelity: T,
    /// `γ‖√W_R ⊙ S‖_{2,p}^p`.
    pub stripes: T,
    /// `‖[G]‖_{1,w}`.
    pub core: T,
    /// `½‖R(L) − [G] ×₁ [X1] ×₂ [X2] ×₃ [X3]‖²`.
    pub coupling: T,
}

impl<T: Scalar> ObjectiveTerms<T> {
    pub fn total(&self) -> T {
        self.fidelity + self.stripes + self.core + self.coupling
    }
}

/// Norms of the first-order stationarity residuals of the current iterate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StationarityResiduals {
    /// `‖S − S⁺‖`, the fixed-point residual of the S update.
    pub r_s: f64,
    /// `Σᵢ ‖[Xᵢ]ᵀ[Xᵢ] − I‖`.
    pub r_x_feas: f64,
    /// `Σᵢ ‖(I − [Xᵢ][Xᵢ]ᵀ)[Hᵢ]‖`.
    pub r_x_sub: f64,
    /// `Σᵢ ‖[Hᵢ]ᵀ[Xᵢ] − [Xᵢ]ᵀ[Hᵢ]‖`.
    pub r_x_sym: f64,
    /// `‖[G] − [G]⁺‖`, the fixed-point residual of the core update.
    pub r_g: f64,
    /// `‖δ(L + S − D) + L − W_R⁻¹ ⊙ Rᵀ([Y])‖`.
    pub r_l: f64,
}

impl StationarityResiduals {
    pub fn max(&self) -> f64 {
        [self.r_s, self.r_x_feas, self.r_x_sub, self.r_x_sym, self.r_g, self.r_l]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Applies `·×ₖ Xₖᵀ` for every mode `k ≠ skip` (modes are 1-based).
fn project_except<T: Scalar>(t: &Tensor3<T>, x: [&Matrix<T>; 3], skip: usize) -> Result<Tensor3<T>> {
    let mut out = t.clone();
    for k in (1..=3).filter(|&k| k != skip) {
        out = out.mode_product_tr(x[k - 1], k)?;
    }
    Ok(out)
}

/// Applies `·×ₖ Xₖ` for every mode `k ≠ skip`.
fn expand_except<T: Scalar>(t: &Tensor3<T>, x: [&Matrix<T>; 3], skip: usize) -> Result<Tensor3<T>> {
    let mut out = t.clone();
    for k in (1..=3).filter(|&k| k != skip) {
        out = out.mode_product(x[k - 1], k)?;
    }
    Ok(out)
}

fn check_mode(mode: usize) -> Result<()> {
    if !(1..=3).contains(&mode) {
        return usage(format!("factor mode must be 1, 2 or 3, got {mode}"));
    }
    Ok(())
}

impl<T: Scalar> SolverState<T> {
    /// `L⁰ = D`, `S⁰ = 0`, plan from block matching on `D`, and factors and cores from a
    /// truncated HOSVD of `R(D)`.
    pub fn initialize(d: &Tensor3<T>, config: &SolverConfig<T>) -> Result<Self> {
        if !d.is_finite() {
            return Err(Error::Numerical("input cube contains non-finite values".into()));
        }
        config.validate(d.dims()[2])?;
        let plan = BlockMatchingPlan::build(d, &config.block_matching())?;
        let core_weights = config.w.resolve(plan.n_groups())?;
        let rd = plan.extract(d)?;
        let h = init_hosvd(&rd, config.ranks)?;
        let [x1, x2, x3] = h.factors;
        Self::from_parts(plan, Tensor3::zeros(d.dims()), d.clone(), [x1, x2, x3], h.core, core_weights)
    }

    /// Assembles a state from explicit blocks, checking that all shapes agree with `plan`.
    pub fn from_parts(
        plan: BlockMatchingPlan,
        s: Tensor3<T>,
        l: Tensor3<T>,
        x: [FactorStack<T>; 3],
        g: Tensor4<T>,
        core_weights: Vec<T>,
    ) -> Result<Self> {
        s.check_same_dims(&l)?;
        if l.dims() != plan.dims {
            return usage(format!("iterate dims {:?} differ from plan dims {:?}", l.dims(), plan.dims));
        }
        let n = plan.n_groups();
        let sd = plan.slab_dims();
        for (k, f) in x.iter().enumerate() {
            let (m, r, count) = f.dims();
            if m != sd[k] || count != n || r != g.slab_dims()[k] {
                return usage(format!(
                    "factor stack {} has dims {:?}, expected ({}, {}, {n})",
                    k + 1,
                    f.dims(),
                    sd[k],
                    g.slab_dims()[k]
                ));
            }
        }
        if g.len() != n || core_weights.len() != n {
            return usage(format!(
                "core stack has {} slabs and {} weights for {n} groups",
                g.len(),
                core_weights.len()
            ));
        }
        let caches = WeightCaches::new(plan.weight_tensor()?);
        Ok(Self { s, l, x, g, plan, caches, core_weights, iter: 0, phi_history: Vec::new(), plan_epochs: Vec::new() })
    }

    /// Swaps in a new block-matching plan with the same number of groups; factors and
    /// cores carry over group by group.
    pub fn set_plan(&mut self, plan: BlockMatchingPlan) -> Result<()> {
        if plan.n_groups() != self.plan.n_groups() || plan.slab_dims() != self.plan.slab_dims() {
            return usage("replacement plan must keep the group count and slab shape");
        }
        self.caches = WeightCaches::new(plan.weight_tensor()?);
        self.plan = plan;
        Ok(())
    }

    /// `R(L)` under the current plan.
    pub fn group_tensor(&self) -> Result<Tensor4<T>> {
        self.plan.extract(&self.l)
    }

    /// `[Y] = [G] ×₁ [X1] ×₂ [X2] ×₃ [X3]`.
    pub fn low_rank_groups(&self) -> Result<Tensor4<T>> {
        compose(&self.g, &self.x[0], &self.x[1], &self.x[2])
    }

    pub fn objective_terms(&self, config: &SolverConfig<T>, d: &Tensor3<T>) -> Result<ObjectiveTerms<T>> {
        d.check_same_dims(&self.l)?;
        let half = T::of(0.5);
        let mut fid = T::zero();
        for (((&l, &s), &dv), &w) in self.l.data().iter().zip(self.s.data()).zip(d.data()).zip(self.caches.w.data()) {
            let r = l + s - dv;
            fid += w * r * r;
        }
        let scaled = self.s.hadamard(&self.caches.sqrt_w)?;
        let coupling = self.group_tensor()?.sub(&self.low_rank_groups()?)?.frobenius_sq();
        Ok(ObjectiveTerms {
            fidelity: half * config.delta * fid,
            stripes: config.gamma * scaled.l2p_pow(config.p)?,
            core: self.g.weighted_l1(&self.core_weights)?,
            coupling: half * coupling,
        })
    }

    /// `Φ` at the current iterate.
    pub fn objective(&self, config: &SolverConfig<T>, d: &Tensor3<T>) -> Result<T> {
        Ok(self.objective_terms(config, d)?.total())
    }

    /// Exact minimizer of `Φ + (α_S/2)‖√W_R ⊙ (S − Sᵏ)‖²` over `S`:
    /// `(√W_R)⁻¹ ⊙ prox_{γ̃‖·‖_{2,p}^p}[√W_R ⊙ (S − α̃_S(S + L − D))]`.
    pub fn update_s(&self, config: &SolverConfig<T>, d: &Tensor3<T>) -> Result<Tensor3<T>> {
        d.check_same_dims(&self.l)?;
        let denom = config.delta + config.alpha_s;
        let step = config.delta / denom;
        let mu = config.gamma / denom;
        let mut arg = self.s.clone();
        for ((((a, &l), &dv), &sw), s) in arg
            .data_mut()
            .iter_mut()
            .zip(self.l.data())
            .zip(d.data())
            .zip(self.caches.sqrt_w.data())
            .zip(self.s.data())
        {
            *a = sw * (*s - step * (*s + l - dv));
        }
        prox_l2p(&arg, mu, config.p)?.hadamard(&self.caches.inv_sqrt_w)
    }

    /// Exact minimizer of `Φ + (α_X/2)‖[X] − [Xᵏ]‖²` over `[X_mode]` on the Stiefel
    /// manifold, using the other factors as currently stored. `rl` must equal `R(L)`.
    /// Returns the new stack and the number of slabs whose projection was rank deficient.
    pub fn update_x(&self, config: &SolverConfig<T>, mode: usize, rl: &Tensor4<T>) -> Result<(FactorStack<T>, usize)> {
        check_mode(mode)?;
        let step = (T::one() + config.alpha_x).recip();
        let idx = mode - 1;
        let out: Vec<(Matrix<T>, bool)> = rl
            .slabs()
            .par_iter()
            .enumerate()
            .map(|(j, p)| -> Result<_> {
                let xs = [self.x[0].get(j), self.x[1].get(j), self.x[2].get(j)];
                // P Qᵀ = (P ×ₖ Xₖᵀ for k ≠ i)₍ᵢ₎ G₍ᵢ₎ᵀ.
                let pq = project_except(p, xs, mode)?.unfold(mode)?.matmul_tr(&self.g.slab(j).unfold(mode)?)?;
                let xi = xs[idx];
                let a = xi.zip_map(&pq, |x, t| x - step * (x - t))?;
                let proj = project_stiefel(&a)?;
                Ok((proj.x, proj.degenerate))
            })
            .collect::<Result<_>>()?;
        let degenerate = out.iter().filter(|(_, d)| *d).count();
        let stack = FactorStack::from_mats(self.x[idx].shape(), out.into_iter().map(|(m, _)| m).collect())?;
        Ok((stack, degenerate))
    }

    /// Exact minimizer of `Φ + (α_G/2)‖[G] − [Gᵏ]‖²` over `[G]`: soft thresholding of
    /// `(1 − α̃_G)[G] + α̃_G[O]` at `α̃_G·w_j`, with `[O] = R(L) ×ᵢ [Xᵢ]ᵀ`.
    pub fn update_g(&self, config: &SolverConfig<T>, rl: &Tensor4<T>) -> Result<Tensor4<T>> {
        let step = (T::one() + config.alpha_g).recip();
        let o = project_core(rl, &self.x[0], &self.x[1], &self.x[2])?;
        let blend = self.g.zip_map(&o, move |g, o| g + step * (o - g))?;
        prox_weighted_l1(&blend, &self.core_weights, step)
    }

    /// Closed-form minimizer of `Φ` over `L`: `δ̃ W_R⁻¹ ⊙ Rᵀ([Y]) + (1 − δ̃)(D − S)`.
    pub fn update_l(&self, config: &SolverConfig<T>, d: &Tensor3<T>) -> Result<Tensor3<T>> {
        d.check_same_dims(&self.l)?;
        let dt = (T::one() + config.delta).recip();
        let back = self.plan.transpose_apply(&self.low_rank_groups()?)?;
        let mut out = back;
        for (((o, &iw), &dv), &s) in out.data_mut().iter_mut().zip(self.caches.inv_w.data()).zip(d.data()).zip(self.s.data()) {
            *o = dt * iw * *o + (T::one() - dt) * (dv - s);
        }
        Ok(out)
    }

    /// Residuals of the first-order stationarity system at the current iterate.
    pub fn stationarity_residuals(&self, config: &SolverConfig<T>, d: &Tensor3<T>) -> Result<StationarityResiduals> {
        let rl = self.group_tensor()?;
        let r_s = self.update_s(config, d)?.sub(&self.s)?.frobenius().as_f64();
        let r_g = self.update_g(config, &rl)?.sub(&self.g)?.frobenius().as_f64();

        let mut sub = [0.0f64; 3];
        let mut sym = [0.0f64; 3];
        let mut feas = [0.0f64; 3];
        let per_slab: Vec<[[f64; 3]; 3]> = rl
            .slabs()
            .par_iter()
            .enumerate()
            .map(|(j, p)| -> Result<_> {
                let xs = [self.x[0].get(j), self.x[1].get(j), self.x[2].get(j)];
                let g = self.g.slab(j);
                let mut acc = [[0.0; 3]; 3];
                for mode in 1..=3 {
                    let x = xs[mode - 1];
                    let q = expand_except(g, xs, mode)?.unfold(mode)?;
                    let h = x.matmul(&q.matmul_tr(&q)?)?.sub(&p.unfold(mode)?.matmul_tr(&q)?)?;
                    let xtx = x.tr_matmul(x)?;
                    let xth = x.tr_matmul(&h)?;
                    let proj_h = h.sub(&x.matmul(&xth)?)?;
                    let sq = |m: &Matrix<T>| m.frobenius().as_f64().powi(2);
                    acc[0][mode - 1] = sq(&proj_h);
                    acc[1][mode - 1] = sq(&xth.transpose().sub(&xth)?);
                    acc[2][mode - 1] = sq(&xtx.sub(&Matrix::identity(xtx.rows()))?);
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        for acc in &per_slab {
            for k in 0..3 {
                sub[k] += acc[0][k];
                sym[k] += acc[1][k];
                feas[k] += acc[2][k];
            }
        }
        let total = |v: [f64; 3]| v.iter().map(|x| x.sqrt()).sum::<f64>();

        let back = self.plan.transpose_apply(&self.low_rank_groups()?)?;
        let mut r_l = 0.0f64;
        for ((((&l, &s), &dv), &iw), &b) in
            self.l.data().iter().zip(self.s.data()).zip(d.data()).zip(self.caches.inv_w.data()).zip(back.data())
        {
            let r = (config.delta * (l + s - dv) + l - iw * b).as_f64();
            r_l += r * r;
        }
        Ok(StationarityResiduals {
            r_s,
            r_x_feas: total(feas),
            r_x_sub: total(sub),
            r_x_sym: total(sym),
            r_g,
            r_l: r_l.sqrt(),
        })
    }
}
