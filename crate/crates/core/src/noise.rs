//! Seeded degradation of clean cubes: Gaussian noise, stripes and dead lines.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64`; each corruption stage draws
//! from its own stream of the same seed, so changing one stage leaves the others intact.
//! Corrupted values are not clipped.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor3;

const GAUSSIAN_STREAM: u64 = 1;
const STRIPE_STREAM: u64 = 2;
const DEADLINE_STREAM: u64 = 3;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Which bands a structured corruption touches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandSelection {
    None,
    All,
    /// Explicit zero-based band indices.
    List(Vec<usize>),
    /// `⌈fraction · I3⌉` bands drawn uniformly without replacement.
    Fraction(f64),
}

impl BandSelection {
    /// Sorted zero-based band indices for a cube with `bands` bands.
    pub fn resolve(&self, bands: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
        match self {
            BandSelection::None => Ok(Vec::new()),
            BandSelection::All => Ok((0..bands).collect()),
            BandSelection::List(v) => {
                if let Some(b) = v.iter().find(|&&b| b >= bands) {
                    return usage(format!("band {b} out of range for {bands} bands"));
                }
                let mut v = v.clone();
                v.sort_unstable();
                v.dedup();
                Ok(v)
            }
            BandSelection::Fraction(f) => {
                check_fraction("band fraction", *f)?;
                let k = ((f * bands as f64).ceil() as usize).min(bands);
                let mut v = sample(rng, bands, k).into_vec();
                v.sort_unstable();
                Ok(v)
            }
        }
    }
}

fn check_fraction(name: &str, f: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&f) {
        return usage(format!("{name} must lie in [0, 1], got {f}"));
    }
    Ok(())
}

fn check_sigma(name: &str, s: f64) -> Result<()> {
    if !(s >= 0.0 && s.is_finite()) {
        return usage(format!("{name} must be nonnegative and finite, got {s}"));
    }
    Ok(())
}

/// Full description of a degradation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub gaussian_sigma: f64,
    pub stripe_bands: BandSelection,
    /// Fraction of columns (mode-1 fibers) striped in each selected band.
    pub stripe_density: f64,
    pub stripe_sigma: f64,
    pub deadline_bands: BandSelection,
    /// Fraction of columns zeroed in each selected band.
    pub deadline_density: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        check_sigma("gaussian_sigma", self.gaussian_sigma)?;
        check_sigma("stripe_sigma", self.stripe_sigma)?;
        check_fraction("stripe_density", self.stripe_density)?;
        check_fraction("deadline_density", self.deadline_density)
    }

    /// Preset degradation `case` (1, 2 or 3) for a cube with `bands` bands.
    ///
    /// Case 2 stripes bands 11–40, 71–100 and 121–128 (one-based) of a 128-band cube;
    /// for other band counts the ranges are rescaled by `bands / 128` and rounded.
    pub fn case(case: u8, bands: usize, seed: u64) -> Result<Self> {
        let base = NoiseSpec {
            gaussian_sigma: 0.1,
            stripe_bands: BandSelection::None,
            stripe_density: 0.0,
            stripe_sigma: 0.0,
            deadline_bands: BandSelection::None,
            deadline_density: 0.0,
            seed,
        };
        match case {
            1 => Ok(NoiseSpec { stripe_bands: BandSelection::All, stripe_density: 0.3, stripe_sigma: 0.2, ..base }),
            2 => {
                let scale = |b: usize| ((b as f64) * bands as f64 / 128.0).round() as usize;
                let list = [(11, 40), (71, 100), (121, 128)]
                    .iter()
                    .flat_map(|&(s, e)| scale(s - 1)..scale(e).min(bands))
                    .collect();
                Ok(NoiseSpec {
                    stripe_bands: BandSelection::List(list),
                    stripe_density: 0.2,
                    stripe_sigma: 0.2,
                    ..base
                })
            }
            3 => Ok(NoiseSpec {
                gaussian_sigma: 0.2,
                deadline_bands: BandSelection::Fraction(0.25),
                deadline_density: 0.05,
                ..base
            }),
            other => usage(format!("noise case must be 1, 2 or 3, got {other}")),
        }
    }
}

/// Additive pieces of a simulated degradation. The noisy cube equals
/// `((clean + gaussian) + stripes) + deadlines` bit for bit, evaluated in that order.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseComponents<T> {
    pub gaussian: Tensor3<T>,
    pub stripes: Tensor3<T>,
    pub deadlines: Tensor3<T>,
    pub stripe_bands: Vec<usize>,
    pub deadline_bands: Vec<usize>,
}

impl<T: Scalar> NoiseComponents<T> {
    /// Rebuilds the noisy cube from `clean` in the canonical summation order.
    pub fn reconstruct(&self, clean: &Tensor3<T>) -> Result<Tensor3<T>> {
        clean.add(&self.gaussian)?.add(&self.stripes)?.add(&self.deadlines)
    }
}

/// Adds i.i.d. `N(0, σ²)` noise; returns the noisy cube and the noise itself.
pub fn add_gaussian<T: Scalar>(clean: &Tensor3<T>, sigma: f64, seed: u64) -> Result<(Tensor3<T>, Tensor3<T>)> {
    check_sigma("gaussian sigma", sigma)?;
    if sigma == 0.0 {
        return Ok((clean.clone(), Tensor3::zeros(clean.dims())));
    }
    let mut rng = rng_for(seed, GAUSSIAN_STREAM);
    let normal = Normal::new(0.0, sigma).expect("sigma checked");
    let noise = Tensor3::from_fn(clean.dims(), |_, _, _| T::of(normal.sample(&mut rng)));
    Ok((clean.add(&noise)?, noise))
}

/// In each selected band, adds a constant `N(0, σ²)` offset to `⌊density · I2⌋` distinct
/// columns. Returns the striped cube, the stripe component and the selected bands.
pub fn add_stripes<T: Scalar>(
    t: &Tensor3<T>,
    bands: &BandSelection,
    density: f64,
    sigma: f64,
    seed: u64,
) -> Result<(Tensor3<T>, Tensor3<T>, Vec<usize>)> {
    check_fraction("stripe density", density)?;
    check_sigma("stripe sigma", sigma)?;
    let [_, n2, n3] = t.dims();
    let mut rng = rng_for(seed, STRIPE_STREAM);
    let selected = bands.resolve(n3, &mut rng)?;
    let count = (density * n2 as f64).floor() as usize;
    let normal = Normal::new(0.0, sigma).expect("sigma checked");
    let mut component = Tensor3::zeros(t.dims());
    for &b in &selected {
        for col in sample(&mut rng, n2, count) {
            let v = T::of(normal.sample(&mut rng));
            let start = component.offset(0, col, b);
            let len = t.dims()[0];
            component.data_mut()[start..start + len].fill(v);
        }
    }
    Ok((t.add(&component)?, component, selected))
}

/// In each selected band, zeroes `⌊density · I2⌋` distinct columns. The returned
/// component holds the negated original values, so `t + component` is the output.
pub fn add_deadlines<T: Scalar>(
    t: &Tensor3<T>,
    bands: &BandSelection,
    density: f64,
    seed: u64,
) -> Result<(Tensor3<T>, Tensor3<T>, Vec<usize>)> {
    check_fraction("dead-line density", density)?;
    let [n1, n2, n3] = t.dims();
    let mut rng = rng_for(seed, DEADLINE_STREAM);
    let selected = bands.resolve(n3, &mut rng)?;
    let count = (density * n2 as f64).floor() as usize;
    let mut component = Tensor3::zeros(t.dims());
    for &b in &selected {
        for col in sample(&mut rng, n2, count) {
            let start = t.offset(0, col, b);
            for k in start..start + n1 {
                component.data_mut()[k] = -t.data()[k];
            }
        }
    }
    Ok((t.add(&component)?, component, selected))
}

/// Applies Gaussian noise, then stripes, then dead lines as described by `spec`.
pub fn apply_spec<T: Scalar>(clean: &Tensor3<T>, spec: &NoiseSpec) -> Result<(Tensor3<T>, NoiseComponents<T>)> {
    spec.validate()?;
    let (t, gaussian) = add_gaussian(clean, spec.gaussian_sigma, spec.seed)?;
    let (t, stripes, stripe_bands) =
        add_stripes(&t, &spec.stripe_bands, spec.stripe_density, spec.stripe_sigma, spec.seed)?;
    let (t, deadlines, deadline_bands) = add_deadlines(&t, &spec.deadline_bands, spec.deadline_density, spec.seed)?;
    Ok((t, NoiseComponents { gaussian, stripes, deadlines, stripe_bands, deadline_bands }))
}

/// Applies preset degradation `case` with the given seed.
pub fn apply_case<T: Scalar>(clean: &Tensor3<T>, case: u8, seed: u64) -> Result<(Tensor3<T>, NoiseComponents<T>)> {
    apply_spec(clean, &NoiseSpec::case(case, clean.dims()[2], seed)?)
}
