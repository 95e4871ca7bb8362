//! Restoration quality metrics: MPSNR, MSSIM and ERGAS, each averaged over bands.
//!
//! `X*` below is the restored cube and `X̂` the clean reference.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor3;

/// PSNR reported for a band restored without error.
pub const DEFAULT_PSNR_CAP: f64 = 100.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_RANGE: f64 = 1.0;

fn check_pair<T: Scalar>(restored: &Tensor3<T>, clean: &Tensor3<T>) -> Result<()> {
    if restored.dims() != clean.dims() {
        return usage(format!("restored dims {:?} differ from clean dims {:?}", restored.dims(), clean.dims()));
    }
    if restored.is_empty() {
        return usage("metrics need a non-empty cube");
    }
    Ok(())
}

fn band_f64<T: Scalar>(t: &Tensor3<T>, b: usize) -> Vec<f64> {
    t.band(b).iter().map(|x| x.as_f64()).collect()
}

fn band_mse<T: Scalar>(restored: &Tensor3<T>, clean: &Tensor3<T>, b: usize) -> f64 {
    let (r, c) = (restored.band(b), clean.band(b));
    r.iter().zip(c).map(|(&x, &y)| (x.as_f64() - y.as_f64()).powi(2)).sum::<f64>() / r.len() as f64
}

/// Band PSNRs `10·log10(max²(X*_b) / mse_b)` and their mean. The peak is taken from the
/// restored band; bands with zero error get `cap`.
pub fn mpsnr<T: Scalar>(restored: &Tensor3<T>, clean: &Tensor3<T>, cap: f64) -> Result<(f64, Vec<f64>)> {
    check_pair(restored, clean)?;
    let per_band: Vec<f64> = (0..restored.dims()[2])
        .into_par_iter()
        .map(|b| {
            let mse = band_mse(restored, clean, b);
            if mse == 0.0 {
                return cap;
            }
            let peak = restored.band(b).iter().map(|x| x.as_f64()).fold(f64::NEG_INFINITY, f64::max);
            10.0 * (peak * peak / mse).log10()
        })
        .collect();
    let mean = per_band.iter().sum::<f64>() / per_band.len() as f64;
    Ok((mean, per_band))
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let c = (SSIM_WINDOW / 2) as f64;
    let mut taps = [0.0; SSIM_WINDOW];
    for (i, t) in taps.iter_mut().enumerate() {
        let x = i as f64 - c;
        *t = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Separable "valid" filtering of an `n1 × n2` image (first index fastest).
fn filter_valid(img: &[f64], n1: usize, n2: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (o1, o2) = (n1 - k + 1, n2 - k + 1);
    let mut tmp = vec![0.0; o1 * n2];
    for j in 0..n2 {
        for i in 0..o1 {
            tmp[i + o1 * j] = taps.iter().enumerate().map(|(t, w)| w * img[i + t + n1 * j]).sum();
        }
    }
    let mut out = vec![0.0; o1 * o2];
    for j in 0..o2 {
        for i in 0..o1 {
            out[i + o1 * j] = taps.iter().enumerate().map(|(t, w)| w * tmp[i + o1 * (j + t)]).sum();
        }
    }
    out
}

/// Mean SSIM of one band pair with an 11×11 Gaussian window (σ = 1.5) over all valid
/// window positions, `K1 = 0.01`, `K2 = 0.03` and dynamic range 1.
pub fn ssim_band(x: &[f64], y: &[f64], n1: usize, n2: usize) -> Result<f64> {
    if n1 < SSIM_WINDOW || n2 < SSIM_WINDOW {
        return usage(format!("SSIM needs bands of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {n1}x{n2}"));
    }
    let taps = gaussian_taps();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let [mx, my, sxx, syy, sxy] = [x, y, &xx[..], &yy[..], &xy[..]].map(|img| filter_valid(img, n1, n2, &taps));
    let c1 = (SSIM_K1 * SSIM_RANGE).powi(2);
    let c2 = (SSIM_K2 * SSIM_RANGE).powi(2);
    let n = mx.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (a, b) = (mx[i], my[i]);
            let va = sxx[i] - a * a;
            let vb = syy[i] - b * b;
            let cov = sxy[i] - a * b;
            ((2.0 * a * b + c1) * (2.0 * cov + c2)) / ((a * a + b * b + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / n as f64)
}

/// Band-averaged SSIM.
pub fn mssim<T: Scalar>(restored: &Tensor3<T>, clean: &Tensor3<T>) -> Result<f64> {
    check_pair(restored, clean)?;
    let [n1, n2, n3] = restored.dims();
    let per_band = (0..n3)
        .into_par_iter()
        .map(|b| ssim_band(&band_f64(restored, b), &band_f64(clean, b), n1, n2))
        .collect::<Result<Vec<f64>>>()?;
    Ok(per_band.iter().sum::<f64>() / n3 as f64)
}

/// `100·sqrt(mean_b(mse_b / mean(X*_b)))`. The band mean enters unsquared.
pub fn ergas<T: Scalar>(restored: &Tensor3<T>, clean: &Tensor3<T>) -> Result<f64> {
    check_pair(restored, clean)?;
    let n3 = restored.dims()[2];
    let mut acc = 0.0;
    for b in 0..n3 {
        let band = restored.band(b);
        let mean = band.iter().map(|x| x.as_f64()).sum::<f64>() / band.len() as f64;
        if mean == 0.0 {
            return Err(Error::Numerical(format!("ERGAS undefined: restored band {b} has zero mean")));
        }
        acc += band_mse(restored, clean, b) / mean;
    }
    Ok(100.0 * (acc / n3 as f64).sqrt())
}

/// All metrics for one restored/clean pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mpsnr: f64,
    pub mssim: f64,
    pub ergas: f64,
    pub per_band_psnr: Vec<f64>,
    /// Not computed; present so reports keep the same columns as published tables.
    pub mfsim: Option<f64>,
}

impl MetricReport {
    pub fn evaluate<T: Scalar>(restored: &Tensor3<T>, clean: &Tensor3<T>, psnr_cap: f64) -> Result<Self> {
        let (mpsnr, per_band_psnr) = mpsnr(restored, clean, psnr_cap)?;
        Ok(Self { mpsnr, mssim: mssim(restored, clean)?, ergas: ergas(restored, clean)?, per_band_psnr, mfsim: None })
    }

    pub const CSV_HEADER: &'static str = "mpsnr,mssim,ergas,mfsim";

    /// Summary row matching [`Self::CSV_HEADER`]; values use shortest round-trip formatting.
    pub fn csv_row(&self) -> String {
        let mfsim = self.mfsim.map(|v| v.to_string()).unwrap_or_default();
        format!("{},{},{},{}", self.mpsnr, self.mssim, self.ergas, mfsim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(dims: [usize; 3], seed: u64) -> Tensor3<f64> {
        let mut s = seed;
        Tensor3::from_fn(dims, |i, j, k| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let r = (s >> 11) as f64 / (1u64 << 53) as f64;
            0.5 + 0.3 * ((i as f64 * 0.4 + k as f64).sin() * (j as f64 * 0.3).cos()) + 0.1 * (r - 0.5)
        })
    }

    /// Direct evaluation of windowed SSIM statistics at every valid position.
    fn ssim_oracle(x: &[f64], y: &[f64], n1: usize, n2: usize) -> f64 {
        let mut w = [[0.0; 11]; 11];
        let mut total_w = 0.0;
        for (a, row) in w.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                let (da, db) = (a as f64 - 5.0, b as f64 - 5.0);
                *v = (-(da * da + db * db) / 4.5).exp();
                total_w += *v;
            }
        }
        let (c1, c2) = (1e-4, 9e-4);
        let mut sum = 0.0;
        let mut count = 0;
        for j0 in 0..=n2 - 11 {
            for i0 in 0..=n1 - 11 {
                let (mut mx, mut my) = (0.0, 0.0);
                for b in 0..11 {
                    for a in 0..11 {
                        let k = i0 + a + n1 * (j0 + b);
                        mx += w[a][b] / total_w * x[k];
                        my += w[a][b] / total_w * y[k];
                    }
                }
                let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
                for b in 0..11 {
                    for a in 0..11 {
                        let k = i0 + a + n1 * (j0 + b);
                        let ww = w[a][b] / total_w;
                        vx += ww * (x[k] - mx).powi(2);
                        vy += ww * (y[k] - my).powi(2);
                        cxy += ww * (x[k] - mx) * (y[k] - my);
                    }
                }
                sum += (2.0 * mx * my + c1) * (2.0 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        sum / count as f64
    }

    #[test]
    fn psnr_hand_example() {
        let clean = Tensor3::from_fn([4, 4, 1], |i, j, _| if i == 0 && j == 0 { 1.0 } else { 0.25 * (i as f64) / 3.0 });
        let restored = clean.map(|x| x + 0.1);
        let (m, per) = mpsnr(&restored, &clean, DEFAULT_PSNR_CAP).unwrap();
        let want = 10.0 * (1.1f64.powi(2) / 0.01).log10();
        assert!((m - want).abs() < 1e-9);
        assert!((want - 20.83).abs() < 0.01);
        assert_eq!(per.len(), 1);
    }

    #[test]
    fn identical_inputs_hit_the_cap_and_ideal_values() {
        let x = textured([16, 14, 3], 1);
        let r = MetricReport::evaluate(&x, &x, DEFAULT_PSNR_CAP).unwrap();
        assert_eq!(r.mpsnr, DEFAULT_PSNR_CAP);
        assert!(r.per_band_psnr.iter().all(|&p| p == DEFAULT_PSNR_CAP));
        assert!((r.mssim - 1.0).abs() < 1e-12);
        assert_eq!(r.ergas, 0.0);
        assert_eq!(r.mfsim, None);
    }

    #[test]
    fn band_permutation_leaves_mpsnr_unchanged() {
        let c = textured([12, 12, 4], 2);
        let r = textured([12, 12, 4], 3);
        let perm = [2, 0, 3, 1];
        let pc = Tensor3::from_fn(c.dims(), |i, j, k| c[[i, j, perm[k]]]);
        let pr = Tensor3::from_fn(r.dims(), |i, j, k| r[[i, j, perm[k]]]);
        let a = mpsnr(&r, &c, 100.0).unwrap().0;
        let b = mpsnr(&pr, &pc, 100.0).unwrap().0;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn ssim_matches_double_loop_oracle() {
        let x = textured([17, 13, 2], 4);
        let y = textured([17, 13, 2], 5).map(|v| 0.8 * v + 0.05);
        for b in 0..2 {
            let fast = ssim_band(x.band(b), y.band(b), 17, 13).unwrap();
            let slow = ssim_oracle(x.band(b), y.band(b), 17, 13);
            assert!((fast - slow).abs() < 1e-6, "{fast} vs {slow}");
        }
    }

    #[test]
    fn negated_image_has_negative_ssim() {
        // Negation flips the structure term; the luminance term stays positive only when
        // local means are near zero, hence a modulated checkerboard.
        let x = Tensor3::from_fn([14, 12, 2], |i, j, k| {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            sign * (0.2 + 0.05 * ((i * j + k) as f64).sin())
        });
        assert!(mssim(&x.map(|v| -v), &x).unwrap() < 0.0);
    }

    #[test]
    fn small_bands_are_rejected_by_ssim() {
        let x = textured([10, 12, 1], 7);
        assert!(mssim(&x, &x).is_err());
    }

    #[test]
    fn ergas_hand_example_and_scaling() {
        let r = Tensor3::from_vec([2, 2, 1], vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let c = Tensor3::from_vec([2, 2, 1], vec![1.0, 1.0, 1.0, 0.5]).unwrap();
        assert!((ergas(&r, &c).unwrap() - 25.0).abs() < 1e-12);
        // mse scales by 4 and the unsquared mean by 2.
        let e2 = ergas(&r.scale(2.0), &c.scale(2.0)).unwrap();
        assert!((e2 - 25.0 * 2f64.sqrt()).abs() < 1e-12);
        let zero = Tensor3::from_vec([2, 2, 1], vec![1.0, -1.0, 0.5, -0.5]).unwrap();
        assert!(ergas(&zero, &c).is_err());
    }

    #[test]
    fn mpsnr_decreases_with_noise_level() {
        let c = textured([16, 16, 3], 8);
        let mut last = f64::INFINITY;
        for sigma in [0.05, 0.1, 0.2] {
            let (n, _) = crate::noise::add_gaussian(&c, sigma, 3).unwrap();
            let m = mpsnr(&n, &c, 100.0).unwrap().0;
            assert!(m < last);
            last = m;
        }
    }

    #[test]
    fn spatial_transposition_invariance() {
        let c = textured([13, 12, 2], 9);
        let r = textured([13, 12, 2], 10);
        let t = |x: &Tensor3<f64>| Tensor3::from_fn([12, 13, 2], |i, j, k| x[[j, i, k]]);
        let a = MetricReport::evaluate(&r, &c, 100.0).unwrap();
        let b = MetricReport::evaluate(&t(&r), &t(&c), 100.0).unwrap();
        assert!((a.mpsnr - b.mpsnr).abs() < 1e-10);
        assert!((a.mssim - b.mssim).abs() < 1e-10);
        assert!((a.ergas - b.ergas).abs() < 1e-10);
    }

    #[test]
    fn mismatched_dims_are_rejected() {
        let a = textured([12, 12, 2], 1);
        let b = textured([12, 12, 3], 1);
        assert!(matches!(MetricReport::evaluate(&a, &b, 100.0), Err(Error::Usage(_))));
    }
}
