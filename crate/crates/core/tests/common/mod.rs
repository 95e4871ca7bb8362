//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use nltl2p::noise::{BandSelection, NoiseSpec};
use nltl2p::solver::{GroupWeights, SolverConfig};
use nltl2p::tensor::{Matrix, Tensor3};

/// Smooth cube of exact Tucker rank (3, 3, 3) with values in [0.1, 0.9].
///
/// Each mode uses the three lowest cosine modes (the first one constant), so the affine
/// rescaling only changes the leading core entry.
pub fn low_rank_cube(dims: [usize; 3]) -> Tensor3<f64> {
    let basis = |len: usize, k: usize| {
        Matrix::from_fn(len, 3, |i, c| {
            (std::f64::consts::PI * c as f64 * (i as f64 + 0.5) / len as f64 * (1.0 + 0.3 * k as f64)).cos()
        })
    };
    let core = Tensor3::from_vec(
        [3, 3, 3],
        vec![
            2.0, 0.5, -0.4, 0.3, -0.6, 0.2, 0.4, 0.1, -0.3, 0.5, 0.3, 0.2, -0.4, 0.6, 0.1, 0.2, -0.2, 0.3, -0.3, 0.2,
            0.4, 0.1, -0.1, 0.3, 0.2, 0.3, -0.2,
        ],
    )
    .unwrap();
    let t = core
        .mode_product(&basis(dims[0], 0), 1)
        .unwrap()
        .mode_product(&basis(dims[1], 1), 2)
        .unwrap()
        .mode_product(&basis(dims[2], 2), 3)
        .unwrap();
    let lo = t.data().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = t.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    t.map(|x| 0.1 + 0.8 * (x - lo) / (hi - lo))
}

/// Gaussian noise plus stripes on every band, as in the first preset case.
pub fn striped_noise(seed: u64) -> NoiseSpec {
    NoiseSpec {
        gaussian_sigma: 0.1,
        stripe_bands: BandSelection::All,
        stripe_density: 0.3,
        stripe_sigma: 0.2,
        deadline_bands: BandSelection::None,
        deadline_density: 0.0,
        seed,
    }
}

/// Solver settings for 32×32×16 cubes. Candidates sit on the block grid so that group
/// members do not share stripe columns.
pub fn desk_config() -> SolverConfig<f64> {
    SolverConfig {
        delta: 0.5,
        gamma: 0.5,
        p: 0.5,
        w: GroupWeights::Constant(0.1),
        alpha_s: 0.001,
        alpha_x: 0.001,
        alpha_g: 0.001,
        ranks: [4, 2, 3],
        block: 4,
        stride: 4,
        window: 12,
        group_size: 8,
        candidate_stride: 4,
        max_outer_iters: 50,
        inner_xg_iters: 3,
        bm_refresh_iters: 2,
        rel_tol: 1e-15,
    }
}
