use std::ops::{Index, IndexMut};

use crate::error::{usage, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Dense third-order tensor `I1 × I2 × I3`.
///
/// Entries are stored with the first index fastest, so entry `(i1, i2, i3)` lives at
/// `i1 + I1·(i2 + I2·i3)`. Under this layout the mode-1 fibers are contiguous and the
/// mode-1 unfolding shares the tensor's memory order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3<T> {
    dims: [usize; 3],
    data: Vec<T>,
}

impl<T: Scalar> Tensor3<T> {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self { dims, data: vec![T::zero(); dims.iter().product()] }
    }

    pub fn filled(dims: [usize; 3], value: T) -> Self {
        Self { dims, data: vec![value; dims.iter().product()] }
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for i3 in 0..dims[2] {
            for i2 in 0..dims[1] {
                for i1 in 0..dims[0] {
                    data.push(f(i1, i2, i3));
                }
            }
        }
        Self { dims, data }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<T>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if data.len() != n {
            return usage(format!("tensor {:?} needs {n} entries, got {}", dims, data.len()));
        }
        Ok(Self { dims, data })
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn offset(&self, i1: usize, i2: usize, i3: usize) -> usize {
        debug_assert!(i1 < self.dims[0] && i2 < self.dims[1] && i3 < self.dims[2]);
        i1 + self.dims[0] * (i2 + self.dims[1] * i3)
    }

    /// The mode-1 fiber `x_{:i2i3}`.
    pub fn fiber(&self, i2: usize, i3: usize) -> &[T] {
        let start = self.offset(0, i2, i3);
        &self.data[start..start + self.dims[0]]
    }

    /// Iterator over all mode-1 fibers, `i2` fastest.
    pub fn fibers(&self) -> std::slice::Chunks<'_, T> {
        self.data.chunks(self.dims[0].max(1))
    }

    pub fn fibers_mut(&mut self) -> std::slice::ChunksMut<'_, T> {
        let n = self.dims[0].max(1);
        self.data.chunks_mut(n)
    }

    /// The frontal slice `X_{::i3}` as a contiguous `I1·I2` slice.
    pub fn band(&self, i3: usize) -> &[T] {
        let n = self.dims[0] * self.dims[1];
        &self.data[i3 * n..(i3 + 1) * n]
    }

    pub fn band_mut(&mut self, i3: usize) -> &mut [T] {
        let n = self.dims[0] * self.dims[1];
        &mut self.data[i3 * n..(i3 + 1) * n]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { dims: self.dims, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(Self {
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    /// Entrywise (Hadamard) product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return usage(format!("dimension mismatch {:?} vs {:?}", self.dims, other.dims));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Frobenius inner product `⟨self, other⟩_F`.
    pub fn inner(&self, other: &Self) -> Result<T> {
        self.check_same_dims(other)?;
        Ok(crate::tensor::matrix::dot(&self.data, &other.data))
    }

    fn check_mode(mode: usize) -> Result<usize> {
        match mode {
            1..=3 => Ok(mode - 1),
            _ => usage(format!("mode must be 1, 2 or 3, got {mode}")),
        }
    }

    /// Mode-`k` unfolding `X_(k)` of size `I_k × ∏_{j≠k} I_j`.
    ///
    /// Entry `(i1, i2, i3)` lands in row `i_k` and column
    /// `Σ_{l≠k} i_l ∏_{m<l, m≠k} I_m` (zero-based).
    pub fn unfold(&self, mode: usize) -> Result<Matrix<T>> {
        let k = Self::check_mode(mode)?;
        let [n1, n2, n3] = self.dims;
        let rows = self.dims[k];
        let cols = self.len() / rows.max(1);
        let mut m = Matrix::zeros(rows, cols);
        match k {
            0 => m.data_mut().copy_from_slice(&self.data),
            1 => {
                for i3 in 0..n3 {
                    for i2 in 0..n2 {
                        for i1 in 0..n1 {
                            m[(i2, i1 + n1 * i3)] = self.data[i1 + n1 * (i2 + n2 * i3)];
                        }
                    }
                }
            }
            _ => {
                for i3 in 0..n3 {
                    for i2 in 0..n2 {
                        for i1 in 0..n1 {
                            m[(i3, i1 + n1 * i2)] = self.data[i1 + n1 * (i2 + n2 * i3)];
                        }
                    }
                }
            }
        }
        Ok(m)
    }

    /// Inverse of [`Tensor3::unfold`].
    pub fn fold(m: &Matrix<T>, mode: usize, dims: [usize; 3]) -> Result<Self> {
        let k = Self::check_mode(mode)?;
        let total: usize = dims.iter().product();
        if m.rows() != dims[k] || m.rows() * m.cols() != total {
            return usage(format!(
                "cannot fold a {:?} matrix along mode {mode} into {:?}",
                m.shape(),
                dims
            ));
        }
        let n1 = dims[0];
        Ok(match k {
            0 => Self { dims, data: m.data().to_vec() },
            1 => Self::from_fn(dims, |i1, i2, i3| m[(i2, i1 + n1 * i3)]),
            _ => Self::from_fn(dims, |i1, i2, i3| m[(i3, i1 + n1 * i2)]),
        })
    }

    /// Mode-`k` product `self ×_k m`; the result's mode-`k` unfolding is `m · X_(k)`.
    pub fn mode_product(&self, m: &Matrix<T>, mode: usize) -> Result<Self> {
        let k = Self::check_mode(mode)?;
        if m.cols() != self.dims[k] {
            return usage(format!(
                "mode-{mode} product needs {} matrix columns, got {}",
                self.dims[k],
                m.cols()
            ));
        }
        let [n1, n2, n3] = self.dims;
        let mut dims = self.dims;
        dims[k] = m.rows();
        let mut out = Self::zeros(dims);
        match k {
            0 => {
                let r = m.rows();
                for (src, dst) in self.data.chunks(n1.max(1)).zip(out.data.chunks_mut(r.max(1))) {
                    for (i1, &x) in src.iter().enumerate() {
                        if x == T::zero() {
                            continue;
                        }
                        for (d, &a) in dst.iter_mut().zip(m.col(i1)) {
                            *d += a * x;
                        }
                    }
                }
            }
            1 => {
                let r = m.rows();
                for i3 in 0..n3 {
                    for i2 in 0..n2 {
                        let src = &self.data[n1 * (i2 + n2 * i3)..n1 * (i2 + n2 * i3 + 1)];
                        for b in 0..r {
                            let coef = m[(b, i2)];
                            if coef == T::zero() {
                                continue;
                            }
                            let start = n1 * (b + r * i3);
                            for (d, &x) in out.data[start..start + n1].iter_mut().zip(src) {
                                *d += coef * x;
                            }
                        }
                    }
                }
            }
            _ => {
                let plane = n1 * n2;
                for c in 0..m.rows() {
                    let dst = &mut out.data[c * plane..(c + 1) * plane];
                    for i3 in 0..n3 {
                        let coef = m[(c, i3)];
                        if coef == T::zero() {
                            continue;
                        }
                        for (d, &x) in dst.iter_mut().zip(&self.data[i3 * plane..(i3 + 1) * plane]) {
                            *d += coef * x;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `self ×_k mᵀ`.
    pub fn mode_product_tr(&self, m: &Matrix<T>, mode: usize) -> Result<Self> {
        self.mode_product(&m.transpose(), mode)
    }
}

impl<T> Index<[usize; 3]> for Tensor3<T> {
    type Output = T;

    #[inline]
    fn index(&self, [i1, i2, i3]: [usize; 3]) -> &T {
        &self.data[i1 + self.dims[0] * (i2 + self.dims[1] * i3)]
    }
}

impl<T> IndexMut<[usize; 3]> for Tensor3<T> {
    #[inline]
    fn index_mut(&mut self, [i1, i2, i3]: [usize; 3]) -> &mut T {
        &mut self.data[i1 + self.dims[0] * (i2 + self.dims[1] * i3)]
    }
}

/// A stack of `N` independent third-order tensors, each `m1 × m2 × m3`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4<T> {
    slab_dims: [usize; 3],
    slabs: Vec<Tensor3<T>>,
}

impl<T: Scalar> Tensor4<T> {
    pub fn zeros(slab_dims: [usize; 3], n: usize) -> Self {
        Self { slab_dims, slabs: vec![Tensor3::zeros(slab_dims); n] }
    }

    pub fn from_slabs(slab_dims: [usize; 3], slabs: Vec<Tensor3<T>>) -> Result<Self> {
        if let Some((j, s)) = slabs.iter().enumerate().find(|(_, s)| s.dims() != slab_dims) {
            return usage(format!("slab {j} has dims {:?}, expected {:?}", s.dims(), slab_dims));
        }
        Ok(Self { slab_dims, slabs })
    }

    /// `(m1, m2, m3, N)`.
    pub fn dims(&self) -> [usize; 4] {
        [self.slab_dims[0], self.slab_dims[1], self.slab_dims[2], self.slabs.len()]
    }

    pub fn slab_dims(&self) -> [usize; 3] {
        self.slab_dims
    }

    pub fn len(&self) -> usize {
        self.slabs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slabs.is_empty()
    }

    pub fn slab(&self, j: usize) -> &Tensor3<T> {
        &self.slabs[j]
    }

    pub fn slab_mut(&mut self, j: usize) -> &mut Tensor3<T> {
        &mut self.slabs[j]
    }

    pub fn slabs(&self) -> &[Tensor3<T>] {
        &self.slabs
    }

    pub fn slabs_mut(&mut self) -> &mut [Tensor3<T>] {
        &mut self.slabs
    }

    pub fn into_slabs(self) -> Vec<Tensor3<T>> {
        self.slabs
    }

    pub fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return usage(format!("dimension mismatch {:?} vs {:?}", self.dims(), other.dims()));
        }
        Ok(())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T + Copy) -> Result<Self> {
        self.check_same_dims(other)?;
        let slabs = self
            .slabs
            .iter()
            .zip(&other.slabs)
            .map(|(a, b)| a.zip_map(b, f))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { slab_dims: self.slab_dims, slabs })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn inner(&self, other: &Self) -> Result<T> {
        self.check_same_dims(other)?;
        let mut acc = T::zero();
        for (a, b) in self.slabs.iter().zip(&other.slabs) {
            acc += a.inner(b)?;
        }
        Ok(acc)
    }

    pub fn is_finite(&self) -> bool {
        self.slabs.iter().all(Tensor3::is_finite)
    }
}

/// A stack of `N` independent `m × n` matrices, `m ≥ n`, holding per-group factor matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorStack<T> {
    shape: (usize, usize),
    mats: Vec<Matrix<T>>,
}

impl<T: Scalar> FactorStack<T> {
    pub fn from_mats(shape: (usize, usize), mats: Vec<Matrix<T>>) -> Result<Self> {
        if shape.0 < shape.1 {
            return usage(format!("factor shape {shape:?} must have m >= n"));
        }
        if let Some((j, m)) = mats.iter().enumerate().find(|(_, m)| m.shape() != shape) {
            return usage(format!("factor {j} has shape {:?}, expected {:?}", m.shape(), shape));
        }
        Ok(Self { shape, mats })
    }

    /// `N` copies of the `m × n` truncated identity.
    pub fn eye(m: usize, n: usize, count: usize) -> Result<Self> {
        Self::from_mats((m, n), vec![Matrix::eye(m, n); count])
    }

    /// `(m, n, N)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.shape.0, self.shape.1, self.mats.len())
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn get(&self, j: usize) -> &Matrix<T> {
        &self.mats[j]
    }

    pub fn get_mut(&mut self, j: usize) -> &mut Matrix<T> {
        &mut self.mats[j]
    }

    pub fn mats(&self) -> &[Matrix<T>] {
        &self.mats
    }

    /// Largest per-slab `‖XᵀX − I‖_F`.
    pub fn orthonormality_error(&self) -> T {
        self.mats
            .iter()
            .map(Matrix::orthonormality_error)
            .fold(T::zero(), T::max)
    }

    pub fn is_orthonormal(&self, tol: T) -> bool {
        self.orthonormality_error() <= tol
    }

    /// `‖[X]‖_F` over the whole stack.
    pub fn frobenius(&self) -> T {
        self.mats
            .iter()
            .map(|m| {
                let f = m.frobenius();
                f * f
            })
            .sum::<T>()
            .sqrt()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dims() != other.dims() {
            return usage(format!("factor stack mismatch {:?} vs {:?}", self.dims(), other.dims()));
        }
        let mats = self.mats.iter().zip(&other.mats).map(|(a, b)| a.sub(b)).collect::<Result<_>>()?;
        Ok(Self { shape: self.shape, mats })
    }
}
