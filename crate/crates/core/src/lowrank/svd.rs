//! Reduced SVD by one-sided (Hestenes) Jacobi rotations.

use crate::error::{usage, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{dot, Matrix};

const MAX_SWEEPS: usize = 80;

/// `A = U·diag(σ)·Vᵀ` with `U` `m×n`, `V` `n×n`, `σ` nonincreasing.
#[derive(Clone, Debug)]
pub struct ReducedSvd<T> {
    pub u: Matrix<T>,
    pub sigma: Vec<T>,
    pub v: Matrix<T>,
    /// Number of singular values above the numerical-zero threshold.
    pub rank: usize,
}

impl<T: Scalar> ReducedSvd<T> {
    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.sigma.len()
    }

    pub fn reconstruct(&self) -> Matrix<T> {
        let mut us = self.u.clone();
        for (j, &s) in self.sigma.iter().enumerate() {
            us.col_mut(j).iter_mut().for_each(|x| *x *= s);
        }
        us.matmul_tr(&self.v).expect("conformable by construction")
    }
}

/// Reduced SVD of a tall (or square) matrix.
pub fn reduced_svd<T: Scalar>(a: &Matrix<T>) -> Result<ReducedSvd<T>> {
    let (m, n) = a.shape();
    if m < n {
        return usage(format!("reduced SVD expects rows >= cols, got {m}x{n}"));
    }
    if !a.is_finite() {
        return Err(Error::Numerical("SVD input contains non-finite entries".into()));
    }
    let mut w = a.clone();
    let mut v = Matrix::identity(n);
    let tol = T::epsilon() * T::of_usize(m.max(1));
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = dot(w.col(p), w.col(p));
                let beta = dot(w.col(q), w.col(q));
                let gamma = dot(w.col(p), w.col(q));
                if alpha == T::zero() || beta == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::Numerical(format!("Jacobi SVD did not converge on a {m}x{n} matrix")));
    }

    let norms: Vec<T> = (0..n).map(|j| dot(w.col(j), w.col(j)).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));

    let sigma: Vec<T> = order.iter().map(|&j| norms[j]).collect();
    let smax = sigma.first().copied().unwrap_or(T::zero());
    let cut = smax * T::epsilon() * T::of_usize(m.max(n).max(1));
    let rank = sigma.iter().take_while(|&&s| s > cut && s > T::zero()).count();

    let mut u = Matrix::zeros(m, n);
    let mut vs = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vs.col_mut(dst).copy_from_slice(v.col(src));
        if dst < rank {
            let s = norms[src];
            for (o, &x) in u.col_mut(dst).iter_mut().zip(w.col(src)) {
                *o = x / s;
            }
        }
    }
    orthonormalize_columns(&mut u, rank);
    Ok(ReducedSvd { u, sigma, v: vs, rank })
}

fn rotate<T: Scalar>(m: &mut Matrix<T>, p: usize, q: usize, c: T, s: T) {
    let rows = m.rows();
    let data = m.data_mut();
    let (left, right) = data.split_at_mut(q * rows);
    let cp = &mut left[p * rows..(p + 1) * rows];
    let cq = &mut right[..rows];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Makes the columns of `m` orthonormal in place.
///
/// The first `valid` columns are re-orthogonalized (modified Gram–Schmidt, two passes);
/// the remaining columns are replaced by a completion drawn from the canonical basis.
pub(crate) fn orthonormalize_columns<T: Scalar>(m: &mut Matrix<T>, valid: usize) {
    let (rows, cols) = m.shape();
    let mut next_basis = 0usize;
    for j in 0..cols {
        let mut ok = false;
        if j < valid {
            ok = gram_schmidt_column(m, j);
        }
        while !ok {
            assert!(next_basis < rows, "cannot complete an orthonormal basis: m < n");
            let col = m.col_mut(j);
            col.iter_mut().for_each(|x| *x = T::zero());
            col[next_basis] = T::one();
            next_basis += 1;
            ok = gram_schmidt_column(m, j);
        }
    }
}

/// Orthogonalizes column `j` against columns `0..j` and normalizes it. Returns `false`
/// when the column is (numerically) inside their span.
fn gram_schmidt_column<T: Scalar>(m: &mut Matrix<T>, j: usize) -> bool {
    let rows = m.rows();
    let before = dot(m.col(j), m.col(j)).sqrt();
    if before == T::zero() {
        return false;
    }
    for _ in 0..2 {
        for k in 0..j {
            let (head, tail) = m.data_mut().split_at_mut(j * rows);
            let ck = &head[k * rows..(k + 1) * rows];
            let cj = &mut tail[..rows];
            let proj = dot(ck, cj);
            for (x, &y) in cj.iter_mut().zip(ck) {
                *x -= proj * y;
            }
        }
    }
    let after = dot(m.col(j), m.col(j)).sqrt();
    if after <= before * T::of(1e-3) || after == T::zero() {
        return false;
    }
    m.col_mut(j).iter_mut().for_each(|x| *x /= after);
    true
}

/// The `k` leading left singular vectors of an arbitrary matrix as an `m × k` orthonormal
/// matrix, plus a flag set when fewer than `k` singular values are nonzero.
pub fn leading_left_singular_vectors<T: Scalar>(a: &Matrix<T>, k: usize) -> Result<(Matrix<T>, bool)> {
    let (m, n) = a.shape();
    if k > m {
        return usage(format!("requested {k} singular vectors of a matrix with {m} rows"));
    }
    let (mut basis, rank) = if m <= n {
        let svd = reduced_svd(&a.transpose())?;
        (svd.v, svd.rank)
    } else {
        let svd = reduced_svd(a)?;
        (svd.u, svd.rank)
    };
    // Keep the leading k columns, completing when the SVD produced fewer.
    let have = basis.cols();
    let mut out = Matrix::zeros(m, k);
    for j in 0..k.min(have) {
        out.col_mut(j).copy_from_slice(basis.col(j));
    }
    let valid = k.min(rank);
    orthonormalize_columns(&mut out, valid);
    basis = out;
    Ok((basis, rank < k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_matrix(m: usize, n: usize, seed: u64) -> Matrix<f64> {
        let mut s = seed;
        Matrix::from_fn(m, n, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    #[test]
    fn diagonal_matrix() {
        let a = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 3.0]]).unwrap();
        let svd = reduced_svd(&a).unwrap();
        assert_eq!(svd.sigma, vec![3.0, 1.0]);
        for j in 0..2 {
            // Signed permutation columns.
            assert_eq!(svd.u.col(j).iter().filter(|x: &&f64| x.abs() == 1.0).count(), 1);
            assert_eq!(svd.v.col(j).iter().filter(|x: &&f64| x.abs() == 1.0).count(), 1);
        }
        assert!(svd.reconstruct().sub(&a).unwrap().frobenius() < 1e-15);
    }

    #[test]
    fn random_tall_matrix_reconstructs() {
        for seed in 0..20 {
            let a = lcg_matrix(6, 3, seed);
            let svd = reduced_svd(&a).unwrap();
            assert!(svd.reconstruct().sub(&a).unwrap().frobenius() <= 1e-10 * a.frobenius());
            assert!(svd.u.orthonormality_error() < 1e-12);
            assert!(svd.v.orthonormality_error() < 1e-12);
            assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1]));
            assert!(svd.sigma.iter().all(|&s| s >= 0.0));
        }
    }

    #[test]
    fn repeated_column_is_rank_deficient() {
        let mut a = lcg_matrix(5, 3, 11);
        let c0 = a.col(0).to_vec();
        a.col_mut(2).copy_from_slice(&c0);
        let svd = reduced_svd(&a).unwrap();
        assert!(svd.is_rank_deficient());
        assert!(svd.sigma[2] < 1e-12);
        assert!(svd.u.orthonormality_error() < 1e-12);
        assert!(svd.reconstruct().sub(&a).unwrap().frobenius() < 1e-12);
    }

    #[test]
    fn wide_matrix_is_rejected() {
        assert!(reduced_svd(&Matrix::<f64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn leading_vectors_of_wide_and_tall_inputs() {
        let a = lcg_matrix(4, 9, 3);
        let (u, deg) = leading_left_singular_vectors(&a, 2).unwrap();
        assert!(!deg);
        assert_eq!(u.shape(), (4, 2));
        assert!(u.orthonormality_error() < 1e-12);
        // Leading subspace: uᵀa captures the two largest singular values.
        let full = reduced_svd(&a.transpose()).unwrap();
        let cap = u.tr_matmul(&a).unwrap().frobenius();
        let expect = (full.sigma[0].powi(2) + full.sigma[1].powi(2)).sqrt();
        assert!((cap - expect).abs() < 1e-12);

        let b = lcg_matrix(7, 2, 4);
        let (u, deg) = leading_left_singular_vectors(&b, 4).unwrap();
        assert!(deg);
        assert!(u.orthonormality_error() < 1e-12);

        let (z, deg) = leading_left_singular_vectors(&Matrix::<f64>::zeros(3, 5), 2).unwrap();
        assert!(deg);
        assert!(z.orthonormality_error() < 1e-15);
    }
}
