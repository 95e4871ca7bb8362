//! Independent (per-slab) truncated 3-D HOSVD and its inverse map.

use rayon::prelude::*;

use crate::error::{usage, Result};
use crate::lowrank::svd::leading_left_singular_vectors;
use crate::scalar::Scalar;
use crate::tensor::{FactorStack, Matrix, Tensor3, Tensor4};

/// Output of [`init_hosvd`].
#[derive(Clone, Debug)]
pub struct Hosvd<T> {
    pub core: Tensor4<T>,
    pub factors: [FactorStack<T>; 3],
    /// Slabs for which some unfolding had rank below the requested rank; their trailing
    /// factor columns are an arbitrary orthonormal completion.
    pub degenerate: Vec<bool>,
}

/// Truncated HOSVD of each slab: `X_i` holds the `n_i` leading left singular vectors of
/// the mode-`i` unfolding and the core is `Y ×₁ X₁ᵀ ×₂ X₂ᵀ ×₃ X₃ᵀ`.
pub fn init_hosvd<T: Scalar>(y: &Tensor4<T>, ranks: [usize; 3]) -> Result<Hosvd<T>> {
    let sd = y.slab_dims();
    for k in 0..3 {
        if ranks[k] == 0 || ranks[k] > sd[k] {
            return usage(format!(
                "rank n{} = {} must lie in 1..={} (slab dims {:?})",
                k + 1,
                ranks[k],
                sd[k],
                sd
            ));
        }
    }
    let per_slab: Vec<(Tensor3<T>, [Matrix<T>; 3], bool)> = y
        .slabs()
        .par_iter()
        .map(|slab| -> Result<_> {
            let mut degenerate = false;
            let mut fs = Vec::with_capacity(3);
            for k in 0..3 {
                let (x, d) = leading_left_singular_vectors(&slab.unfold(k + 1)?, ranks[k])?;
                degenerate |= d;
                fs.push(x);
            }
            let fs: [Matrix<T>; 3] = fs.try_into().expect("three modes");
            let core = project_slab(slab, &fs)?;
            Ok((core, fs, degenerate))
        })
        .collect::<Result<_>>()?;

    let mut cores = Vec::with_capacity(per_slab.len());
    let mut mats: [Vec<Matrix<T>>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut degenerate = Vec::with_capacity(per_slab.len());
    for (core, fs, d) in per_slab {
        cores.push(core);
        for (k, f) in fs.into_iter().enumerate() {
            mats[k].push(f);
        }
        degenerate.push(d);
    }
    let [m1, m2, m3] = mats;
    Ok(Hosvd {
        core: Tensor4::from_slabs(ranks, cores)?,
        factors: [
            FactorStack::from_mats((sd[0], ranks[0]), m1)?,
            FactorStack::from_mats((sd[1], ranks[1]), m2)?,
            FactorStack::from_mats((sd[2], ranks[2]), m3)?,
        ],
        degenerate,
    })
}

fn project_slab<T: Scalar>(slab: &Tensor3<T>, fs: &[Matrix<T>; 3]) -> Result<Tensor3<T>> {
    slab.mode_product_tr(&fs[0], 1)?
        .mode_product_tr(&fs[1], 2)?
        .mode_product_tr(&fs[2], 3)
}

fn check_factors<T: Scalar>(core_dims: [usize; 3], n: usize, x: [&FactorStack<T>; 3]) -> Result<()> {
    for (k, f) in x.iter().enumerate() {
        if f.len() != n {
            return usage(format!("factor stack {} has {} slabs, expected {n}", k + 1, f.len()));
        }
        if f.shape().1 != core_dims[k] {
            return usage(format!(
                "factor stack {} has {} columns, core mode {} has size {}",
                k + 1,
                f.shape().1,
                k + 1,
                core_dims[k]
            ));
        }
    }
    Ok(())
}

/// `[G] ×₁ [X₁] ×₂ [X₂] ×₃ [X₃]`, slab by slab.
pub fn compose<T: Scalar>(
    g: &Tensor4<T>,
    x1: &FactorStack<T>,
    x2: &FactorStack<T>,
    x3: &FactorStack<T>,
) -> Result<Tensor4<T>> {
    check_factors(g.slab_dims(), g.len(), [x1, x2, x3])?;
    let slabs = g
        .slabs()
        .par_iter()
        .enumerate()
        .map(|(j, s)| {
            s.mode_product(x1.get(j), 1)?
                .mode_product(x2.get(j), 2)?
                .mode_product(x3.get(j), 3)
        })
        .collect::<Result<Vec<_>>>()?;
    Tensor4::from_slabs([x1.shape().0, x2.shape().0, x3.shape().0], slabs)
}

/// `[Y] ×₁ [X₁]ᵀ ×₂ [X₂]ᵀ ×₃ [X₃]ᵀ`, slab by slab.
pub fn project_core<T: Scalar>(
    y: &Tensor4<T>,
    x1: &FactorStack<T>,
    x2: &FactorStack<T>,
    x3: &FactorStack<T>,
) -> Result<Tensor4<T>> {
    let sd = y.slab_dims();
    for (k, f) in [x1, x2, x3].iter().enumerate() {
        if f.len() != y.len() || f.shape().0 != sd[k] {
            return usage(format!(
                "factor stack {} of dims {:?} does not match group stack {:?}",
                k + 1,
                f.dims(),
                y.dims()
            ));
        }
    }
    let slabs = y
        .slabs()
        .par_iter()
        .enumerate()
        .map(|(j, s)| project_slab(s, &[x1.get(j).clone(), x2.get(j).clone(), x3.get(j).clone()]))
        .collect::<Result<Vec<_>>>()?;
    Tensor4::from_slabs([x1.shape().1, x2.shape().1, x3.shape().1], slabs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lowrank::svd::reduced_svd;

    struct Lcg(u64);
    impl Lcg {
        fn next(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((self.0 >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        }
        fn matrix(&mut self, m: usize, n: usize) -> Matrix<f64> {
            Matrix::from_fn(m, n, |_, _| self.next())
        }
        fn orthonormal(&mut self, m: usize, n: usize) -> Matrix<f64> {
            reduced_svd(&self.matrix(m, n)).unwrap().u
        }
        fn tensor(&mut self, dims: [usize; 3]) -> Tensor3<f64> {
            Tensor3::from_fn(dims, |_, _, _| self.next())
        }
    }

    fn low_rank_stack(rng: &mut Lcg, dims: [usize; 3], ranks: [usize; 3], n: usize) -> Tensor4<f64> {
        let slabs = (0..n)
            .map(|_| {
                let core = rng.tensor(ranks);
                core.mode_product(&rng.orthonormal(dims[0], ranks[0]), 1)
                    .unwrap()
                    .mode_product(&rng.orthonormal(dims[1], ranks[1]), 2)
                    .unwrap()
                    .mode_product(&rng.orthonormal(dims[2], ranks[2]), 3)
                    .unwrap()
            })
            .collect();
        Tensor4::from_slabs(dims, slabs).unwrap()
    }

    #[test]
    fn exact_multilinear_rank_is_recovered() {
        let mut rng = Lcg(5);
        let y = low_rank_stack(&mut rng, [6, 5, 7], [2, 3, 2], 4);
        let h = init_hosvd(&y, [2, 3, 2]).unwrap();
        let r = compose(&h.core, &h.factors[0], &h.factors[1], &h.factors[2]).unwrap();
        assert!(r.sub(&y).unwrap().frobenius() <= 1e-9 * y.frobenius());
        for f in &h.factors {
            assert!(f.orthonormality_error() < 1e-10);
        }
        assert!(h.degenerate.iter().all(|d| !d));
    }

    #[test]
    fn full_rank_hosvd_is_lossless() {
        let mut rng = Lcg(6);
        let slabs = (0..3).map(|_| rng.tensor([4, 3, 5])).collect();
        let y = Tensor4::from_slabs([4, 3, 5], slabs).unwrap();
        let h = init_hosvd(&y, [4, 3, 5]).unwrap();
        let r = compose(&h.core, &h.factors[0], &h.factors[1], &h.factors[2]).unwrap();
        assert!(r.sub(&y).unwrap().frobenius() <= 1e-12 * y.frobenius());
    }

    #[test]
    fn zero_slab_gives_zero_core() {
        let y = Tensor4::<f64>::zeros([3, 3, 3], 2);
        let h = init_hosvd(&y, [2, 2, 2]).unwrap();
        assert!(h.core.frobenius() == 0.0);
        assert!(h.degenerate.iter().all(|&d| d));
        for f in &h.factors {
            assert!(f.orthonormality_error() < 1e-15);
        }
    }

    #[test]
    fn rank_above_dimension_is_usage_error() {
        let y = Tensor4::<f64>::zeros([3, 3, 3], 1);
        assert!(init_hosvd(&y, [4, 1, 1]).is_err());
        assert!(init_hosvd(&y, [0, 1, 1]).is_err());
    }

    #[test]
    fn core_slices_are_ordered() {
        let mut rng = Lcg(8);
        let slabs = (0..3).map(|_| rng.tensor([5, 4, 6])).collect();
        let y = Tensor4::from_slabs([5, 4, 6], slabs).unwrap();
        let h = init_hosvd(&y, [5, 4, 6]).unwrap();
        for core in h.core.slabs() {
            for k in 1..=3 {
                let u = core.unfold(k).unwrap();
                let norms: Vec<f64> = (0..u.rows())
                    .map(|i| (0..u.cols()).map(|j| u[(i, j)] * u[(i, j)]).sum::<f64>())
                    .collect();
                assert!(norms.windows(2).all(|w| w[0] >= w[1] - 1e-12), "{norms:?}");
            }
        }
    }

    #[test]
    fn compose_identity_norm_and_linearity() {
        let mut rng = Lcg(9);
        let g1 = Tensor4::from_slabs([3, 2, 2], (0..2).map(|_| rng.tensor([3, 2, 2])).collect()).unwrap();
        let g2 = Tensor4::from_slabs([3, 2, 2], (0..2).map(|_| rng.tensor([3, 2, 2])).collect()).unwrap();

        let i1 = FactorStack::eye(3, 3, 2).unwrap();
        let i2 = FactorStack::eye(2, 2, 2).unwrap();
        assert_eq!(compose(&g1, &i1, &i2, &i2).unwrap(), g1);

        let x1 = FactorStack::from_mats((5, 3), vec![rng.orthonormal(5, 3), rng.orthonormal(5, 3)]).unwrap();
        let x2 = FactorStack::from_mats((4, 2), vec![rng.orthonormal(4, 2), rng.orthonormal(4, 2)]).unwrap();
        let x3 = FactorStack::from_mats((3, 2), vec![rng.orthonormal(3, 2), rng.orthonormal(3, 2)]).unwrap();
        let y1 = compose(&g1, &x1, &x2, &x3).unwrap();
        assert!((y1.frobenius() - g1.frobenius()).abs() < 1e-12);

        let (a, b) = (0.7, -1.3);
        let mix = g1.zip_map(&g2, |p, q| a * p + b * q).unwrap();
        let lhs = compose(&mix, &x1, &x2, &x3).unwrap();
        let y2 = compose(&g2, &x1, &x2, &x3).unwrap();
        let rhs = y1.zip_map(&y2, |p, q| a * p + b * q).unwrap();
        assert!(lhs.sub(&rhs).unwrap().frobenius() < 1e-12);

        // Single slab agrees with sequential mode products.
        let seq = g1.slab(1)
            .mode_product(x1.get(1), 1).unwrap()
            .mode_product(x2.get(1), 2).unwrap()
            .mode_product(x3.get(1), 3).unwrap();
        assert_eq!(&seq, y1.slab(1));

        assert!(compose(&g1, &x2, &x2, &x3).is_err());
    }
}
