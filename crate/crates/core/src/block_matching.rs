//! Nonlocal block matching and the group extraction operator `R`.
//!
//! A full-band block (FBB) is an `r × r` spatial patch spanning all bands. For every
//! reference FBB on a regular grid the `m2` most similar FBBs (Euclidean distance over
//! all bands) inside a local search window form a group. `R` stacks each group into an
//! `r² × m2 × I3` slab: mode 1 runs over the in-block pixels (first spatial index
//! fastest), mode 2 over the group members and mode 3 over the bands. `Rᵀ` scatter-adds
//! slabs back onto the cube, and `RᵀR` is the entrywise product with the coverage counts
//! `W_R`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Tensor3, Tensor4};

/// Geometry of the block-matching search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockMatchingParams {
    /// Spatial block side `r`; slabs have `m1 = r²` rows.
    pub block: usize,
    /// Spacing of the reference grid.
    pub stride: usize,
    /// Side of the square search window centred on each reference block.
    pub window: usize,
    /// Group size `m2` (reference included).
    pub group_size: usize,
    /// Spacing of candidate positions inside the window.
    pub candidate_stride: usize,
}

impl Default for BlockMatchingParams {
    fn default() -> Self {
        Self { block: 5, stride: 5, window: 30, group_size: 128, candidate_stride: 1 }
    }
}

impl BlockMatchingParams {
    pub fn validate(&self, dims: [usize; 3]) -> Result<()> {
        let Self { block, stride, window, group_size, candidate_stride } = *self;
        if block == 0 || stride == 0 || candidate_stride == 0 || group_size == 0 {
            return Err(Error::Config("block, stride, candidate_stride and group_size must be positive".into()));
        }
        if block > dims[0].min(dims[1]) {
            return Err(Error::Config(format!(
                "block size {block} exceeds the spatial extent {}x{}",
                dims[0], dims[1]
            )));
        }
        if window < block {
            return Err(Error::Config(format!("search window {window} is smaller than the block {block}")));
        }
        if stride > block {
            return Err(Error::Config(format!(
                "reference stride {stride} larger than block {block} leaves pixels uncovered"
            )));
        }
        Ok(())
    }
}

/// Frozen output of block matching: which FBBs form each group.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockMatchingPlan {
    /// Cube dimensions `(I1, I2, I3)` the plan was built for.
    pub dims: [usize; 3],
    pub block: usize,
    /// Top-left `(i1, i2)` of every addressable FBB, in raster order (`i1` fastest).
    pub fbb_grid: Vec<[usize; 2]>,
    /// `groups[j]` lists FBB indices; the first entry is the reference block of group `j`.
    pub groups: Vec<Vec<usize>>,
}

/// Block positions along one axis: `0, step, 2·step, …` plus a final position clamped to
/// `len − r` so the last blocks touch the border.
fn axis_positions(len: usize, r: usize, step: usize) -> Vec<usize> {
    let last = len - r;
    let mut v: Vec<usize> = (0..=last).step_by(step).collect();
    if v.last() != Some(&last) {
        v.push(last);
    }
    v
}

fn merged(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = a.iter().chain(b).copied().collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Pixel range `[lo, hi)` of a window of side `window` centred on a block at `pos`.
fn window_range(pos: usize, r: usize, window: usize, len: usize) -> (usize, usize) {
    if window >= len {
        return (0, len);
    }
    let centre = pos + r / 2;
    let lo = centre.saturating_sub(window / 2).min(len - window);
    (lo, lo + window)
}

impl BlockMatchingPlan {
    /// Runs block matching on `hsi`.
    ///
    /// Distances are squared Frobenius distances between full-band blocks; ties are broken
    /// by raster index so identical inputs always produce identical plans. The reference
    /// block is always the first member of its own group.
    pub fn build<T: Scalar>(hsi: &Tensor3<T>, params: &BlockMatchingParams) -> Result<Self> {
        let dims = hsi.dims();
        params.validate(dims)?;
        let r = params.block;
        let refs_1 = axis_positions(dims[0], r, params.stride);
        let refs_2 = axis_positions(dims[1], r, params.stride);
        let grid_1 = merged(&refs_1, &axis_positions(dims[0], r, params.candidate_stride));
        let grid_2 = merged(&refs_2, &axis_positions(dims[1], r, params.candidate_stride));
        let fbb_grid: Vec<[usize; 2]> = grid_2
            .iter()
            .flat_map(|&y| grid_1.iter().map(move |&x| [x, y]))
            .collect();
        let index_of = |x: usize, y: usize| -> usize {
            let ix = grid_1.binary_search(&x).expect("reference lies on the grid");
            let iy = grid_2.binary_search(&y).expect("reference lies on the grid");
            ix + grid_1.len() * iy
        };

        let references: Vec<usize> = refs_2
            .iter()
            .flat_map(|&y| refs_1.iter().map(move |&x| (x, y)))
            .map(|(x, y)| index_of(x, y))
            .collect();

        let m2 = params.group_size;
        let groups = references
            .par_iter()
            .map(|&ref_idx| -> Result<Vec<usize>> {
                let [rx, ry] = fbb_grid[ref_idx];
                let (lo1, hi1) = window_range(rx, r, params.window, dims[0]);
                let (lo2, hi2) = window_range(ry, r, params.window, dims[1]);
                let xs: Vec<usize> = (0..grid_1.len()).filter(|&i| grid_1[i] >= lo1 && grid_1[i] + r <= hi1).collect();
                let ys: Vec<usize> = (0..grid_2.len()).filter(|&i| grid_2[i] >= lo2 && grid_2[i] + r <= hi2).collect();
                if xs.len() * ys.len() < m2 {
                    return Err(Error::Config(format!(
                        "search window around block ({rx}, {ry}) holds {} candidates, fewer than group size {m2}",
                        xs.len() * ys.len()
                    )));
                }
                let n_x = grid_1.len();
                let mut scored: Vec<(T, usize)> = ys
                    .iter()
                    .flat_map(|&iy| xs.iter().map(move |&ix| ix + n_x * iy))
                    .filter(|&c| c != ref_idx)
                    .map(|c| (block_distance(hsi, r, [rx, ry], fbb_grid[c]), c))
                    .collect();
                scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
                let mut group = Vec::with_capacity(m2);
                group.push(ref_idx);
                group.extend(scored.into_iter().take(m2 - 1).map(|(_, c)| c));
                Ok(group)
            })
            .collect::<Result<Vec<_>>>()?;

        let plan = Self { dims, block: r, fbb_grid, groups };
        plan.validate()?;
        Ok(plan)
    }

    /// Builds a plan from explicit groups, e.g. one loaded from disk or a test fixture.
    pub fn from_groups(dims: [usize; 3], block: usize, fbb_grid: Vec<[usize; 2]>, groups: Vec<Vec<usize>>) -> Result<Self> {
        let plan = Self { dims, block, fbb_grid, groups };
        plan.validate()?;
        Ok(plan)
    }

    /// Checks structural invariants: positions inside the cube, equal group sizes,
    /// distinct members, every pixel covered.
    pub fn validate(&self) -> Result<()> {
        let r = self.block;
        if r == 0 || r > self.dims[0] || r > self.dims[1] {
            return usage(format!("block size {r} incompatible with dims {:?}", self.dims));
        }
        if let Some(p) = self.fbb_grid.iter().find(|p| p[0] + r > self.dims[0] || p[1] + r > self.dims[1]) {
            return usage(format!("block at {p:?} exceeds the cube"));
        }
        let m2 = self.groups.first().map_or(0, Vec::len);
        if m2 == 0 {
            return usage("plan has no groups or empty groups");
        }
        for (j, g) in self.groups.iter().enumerate() {
            if g.len() != m2 {
                return usage(format!("group {j} has {} members, expected {m2}", g.len()));
            }
            if let Some(&bad) = g.iter().find(|&&i| i >= self.fbb_grid.len()) {
                return usage(format!("group {j} references FBB {bad} outside the grid"));
            }
            let mut sorted = g.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return usage(format!("group {j} contains a repeated FBB"));
            }
        }
        if self.coverage().contains(&0) {
            return Err(Error::Integrity("some pixel belongs to no group".into()));
        }
        Ok(())
    }

    /// Number of groups `N`.
    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group_size(&self) -> usize {
        self.groups.first().map_or(0, Vec::len)
    }

    /// Slab dimensions `(m1, m2, m3) = (r², m2, I3)`.
    pub fn slab_dims(&self) -> [usize; 3] {
        [self.block * self.block, self.group_size(), self.dims[2]]
    }

    /// Number of `(group, member)` pairs covering each spatial pixel, `i1` fastest.
    fn coverage(&self) -> Vec<usize> {
        let [n1, n2, _] = self.dims;
        let r = self.block;
        let mut counts = vec![0usize; n1 * n2];
        for &idx in self.groups.iter().flatten() {
            let [x, y] = self.fbb_grid[idx];
            for dy in 0..r {
                for dx in 0..r {
                    counts[x + dx + n1 * (y + dy)] += 1;
                }
            }
        }
        counts
    }

    fn check_cube<T: Scalar>(&self, t: &Tensor3<T>) -> Result<()> {
        if t.dims() != self.dims {
            return usage(format!("cube dims {:?} do not match plan dims {:?}", t.dims(), self.dims));
        }
        Ok(())
    }

    /// `R(L)`: slab `j` holds the Casorati matrices of group `j` stacked along mode 2.
    pub fn extract<T: Scalar>(&self, hsi: &Tensor3<T>) -> Result<Tensor4<T>> {
        self.check_cube(hsi)?;
        let sd = self.slab_dims();
        let r = self.block;
        let slabs = self
            .groups
            .par_iter()
            .map(|group| {
                let mut slab = Tensor3::zeros(sd);
                let out = slab.data_mut();
                let mut k = 0;
                for b in 0..sd[2] {
                    for &idx in group {
                        let [x, y] = self.fbb_grid[idx];
                        for dy in 0..r {
                            let row = hsi.offset(x, y + dy, b);
                            out[k..k + r].copy_from_slice(&hsi.data()[row..row + r]);
                            k += r;
                        }
                    }
                }
                slab
            })
            .collect();
        Tensor4::from_slabs(sd, slabs)
    }

    /// `Rᵀ(Y)`: scatter-adds every group member back onto its footprint. Accumulation runs
    /// in a fixed (group, band, member) order, so results are bit-reproducible.
    pub fn transpose_apply<T: Scalar>(&self, y: &Tensor4<T>) -> Result<Tensor3<T>> {
        if y.slab_dims() != self.slab_dims() || y.len() != self.n_groups() {
            return usage(format!(
                "group stack {:?} does not match plan {:?} x {}",
                y.dims(),
                self.slab_dims(),
                self.n_groups()
            ));
        }
        let r = self.block;
        let mut out = Tensor3::zeros(self.dims);
        for (group, slab) in self.groups.iter().zip(y.slabs()) {
            let src = slab.data();
            let mut k = 0;
            for b in 0..self.dims[2] {
                for &idx in group {
                    let [x, yy] = self.fbb_grid[idx];
                    for dy in 0..r {
                        let row = out.offset(x, yy + dy, b);
                        for (d, &s) in out.data_mut()[row..row + r].iter_mut().zip(&src[k..k + r]) {
                            *d += s;
                        }
                        k += r;
                    }
                }
            }
        }
        Ok(out)
    }

    /// The weight tensor `W_R` with `RᵀR = W_R ⊙ Id`.
    pub fn weight_tensor<T: Scalar>(&self) -> Result<WeightTensor<T>> {
        let counts = self.coverage();
        if let Some(p) = counts.iter().position(|&c| c == 0) {
            let n1 = self.dims[0];
            return Err(Error::Integrity(format!(
                "pixel ({}, {}) is not covered by any group",
                p % n1,
                p / n1
            )));
        }
        let plane = self.dims[0] * self.dims[1];
        let t = Tensor3::from_fn(self.dims, |i1, i2, _| T::of_usize(counts[i1 + self.dims[0] * i2]));
        debug_assert_eq!(t.len(), plane * self.dims[2]);
        Ok(WeightTensor(t))
    }
}

fn block_distance<T: Scalar>(hsi: &Tensor3<T>, r: usize, a: [usize; 2], b: [usize; 2]) -> T {
    let mut acc = T::zero();
    for band in 0..hsi.dims()[2] {
        for dy in 0..r {
            let ra = hsi.offset(a[0], a[1] + dy, band);
            let rb = hsi.offset(b[0], b[1] + dy, band);
            for (&p, &q) in hsi.data()[ra..ra + r].iter().zip(&hsi.data()[rb..rb + r]) {
                acc += (p - q) * (p - q);
            }
        }
    }
    acc
}

/// Strictly positive coverage counts `W_R`, replicated across bands.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTensor<T>(Tensor3<T>);

impl<T: Scalar> WeightTensor<T> {
    pub fn as_tensor(&self) -> &Tensor3<T> {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor3<T> {
        self.0
    }
}

impl<T> std::ops::Deref for WeightTensor<T> {
    type Target = Tensor3<T>;

    fn deref(&self) -> &Tensor3<T> {
        &self.0
    }
}
