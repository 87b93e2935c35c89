use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::aesthetics::DEGENERATE_NORM;
use crate::error::{Error, Result};
use crate::tensor::{self, Real, Tensor};

/// Attempts after the first when the pre-normalization vector vanishes.
pub const GENERATE_RETRIES: u64 = 3;

/// Stand-in for a conditional image generator: maps a conditioning vector
/// straight to the embedding of the "generated image".
#[derive(Clone, Debug, PartialEq)]
pub struct ToyGeneratorWeights<T = f32> {
    pub m: Tensor<T>,
    pub g: Tensor<T>,
    pub noise_scale: f64,
    pub seed: u64,
}

impl<T: Real> ToyGeneratorWeights<T> {
    pub fn new(m: Tensor<T>, g: Tensor<T>, noise_scale: f64, seed: u64) -> Result<Self> {
        let d = m.shape().first().copied().unwrap_or(0);
        if m.shape() != [d, d] || g.shape() != [d, d] {
            return Err(Error::dim("generator matrices must be square", m.shape(), g.shape()));
        }
        if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
            return Err(Error::Config(format!(
                "noise scale must be non-negative, got {noise_scale}"
            )));
        }
        Ok(Self {
            m,
            g,
            noise_scale,
            seed,
        })
    }

    /// `M` and `G` are the identity plus `0.3·N(0,1)/sqrt(d)` entries.
    pub fn init(dim: usize, noise_scale: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut near_identity = || {
            let mut t = Tensor::<T>::identity(dim);
            let s = 0.3 / (dim as f64).sqrt();
            for x in t.data_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *x = *x + T::of(s * z);
            }
            t
        };
        let m = near_identity();
        let g = near_identity();
        Self::new(m, g, noise_scale, seed)
    }

    pub fn dim(&self) -> usize {
        self.m.shape()[0]
    }

    pub fn cast<U: Real>(&self) -> ToyGeneratorWeights<U> {
        ToyGeneratorWeights {
            m: self.m.cast(),
            g: self.g.cast(),
            noise_scale: self.noise_scale,
            seed: self.seed,
        }
    }
}

/// `normalize(G·tanh(M·c) + σ·z)` with `z` drawn from `seed`. A vanishing
/// pre-image is redrawn with `seed + 1`, up to [`GENERATE_RETRIES`] times.
pub fn toy_generate<T: Real>(conditioning: &Tensor<T>, gen: &ToyGeneratorWeights<T>, seed: u64) -> Result<Tensor<T>> {
    if conditioning.shape() != [gen.dim()] {
        return Err(Error::dim("toy_generate", conditioning.shape(), &[gen.dim()]));
    }
    let hidden = tensor::map(&tensor::matvec(&gen.m, conditioning)?, |x| x.tanh());
    let clean = tensor::matvec(&gen.g, &hidden)?;
    let sigma = T::of(gen.noise_scale);
    for attempt in 0..=GENERATE_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let mut v = clean.clone();
        for x in v.data_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x = *x + sigma * T::of(z);
        }
        if v.norm().to_f64_lossy() >= DEGENERATE_NORM {
            return tensor::l2_normalize(&v);
        }
    }
    Err(Error::Degenerate(format!(
        "generated vector vanished for seeds {seed}..={}",
        seed.wrapping_add(GENERATE_RETRIES)
    )))
}
