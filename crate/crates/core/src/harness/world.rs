use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, tags, ToyGeneratorWeights};
use crate::aesthetics::{build_aesthetic_embedding, personalize, AestheticEmbedding, PersonalizationConfig};
use crate::clip::{EncoderConfig, MiniClipWeights, TokenSequence, Vocabulary};
use crate::corpus::PROMPTS;
use crate::error::{Error, Result};
use crate::scorer::{make_aligned_scorer, ScorerWeights};
use crate::tensor::{Real, Tensor};

/// Timestamp recorded on synthesized aesthetics, so runs stay reproducible.
pub const SYNTHETIC_TIMESTAMP: &str = "1970-01-01T00:00:00Z";

/// `count` grayscale images sharing one seeded sinusoidal style, each with
/// its own jitter and pixel noise, values in roughly [0, 1].
pub fn synthetic_images<T: Real>(cfg: &EncoderConfig, count: usize, seed: u64) -> Vec<Tensor<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let style_fr: f64 = rng.gen_range(0.1..0.6);
    let style_fc: f64 = rng.gen_range(0.1..0.6);
    let style_contrast: f64 = rng.gen_range(0.2..0.5);
    let side = cfg.image_side;
    (0..count)
        .map(|_| {
            let fr = style_fr * rng.gen_range(0.9..1.1);
            let fc = style_fc * rng.gen_range(0.9..1.1);
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let data: Vec<T> = (0..side * side)
                .map(|i| {
                    let (r, c) = ((i / side) as f64, (i % side) as f64);
                    let wave = (fr * r + fc * c + phase).sin();
                    T::of(0.5 + style_contrast * wave + 0.05 * rng.gen_range(-1.0..1.0))
                })
                .collect();
            Tensor::new(vec![side, side], data).expect("square image")
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldOptions {
    pub encoder: EncoderConfig,
    pub scorer_gain: f64,
    pub scorer_bias: f64,
    pub generator_noise_scale: f64,
    pub aesthetic_images: usize,
    pub aesthetic_name: String,
}

impl Default for WorldOptions {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::toy_default(),
            scorer_gain: 4.0,
            scorer_bias: 5.0,
            generator_noise_scale: 0.1,
            aesthetic_images: 16,
            aesthetic_name: "synthetic".into(),
        }
    }
}

/// Everything one experiment needs, derived from a master seed.
#[derive(Clone, Debug)]
pub struct ToyWorld<T> {
    pub weights: MiniClipWeights<T>,
    pub vocab: Vocabulary,
    pub aesthetic: AestheticEmbedding<T>,
    pub scorer: ScorerWeights<T>,
    pub generator: ToyGeneratorWeights<T>,
}

/// Files that replace the synthesized parts of a [`ToyWorld`].
#[derive(Clone, Debug, Default)]
pub struct WorldInputs<T> {
    /// Its config replaces `WorldOptions::encoder`.
    pub weights: Option<MiniClipWeights<T>>,
    pub aesthetic: Option<AestheticEmbedding<T>>,
    pub scorer: Option<ScorerWeights<T>>,
}

impl<T: Real> ToyWorld<T> {
    pub fn build(opts: &WorldOptions, master_seed: u64) -> Result<Self> {
        Self::with_inputs(opts, master_seed, WorldInputs::default())
    }

    /// Like [`ToyWorld::build`], keeping whatever `inputs` provides. The
    /// scorer defaults to one aligned with the (given or synthesized)
    /// aesthetic.
    pub fn with_inputs(opts: &WorldOptions, master_seed: u64, inputs: WorldInputs<T>) -> Result<Self> {
        let weights = match inputs.weights {
            Some(w) => w,
            None => MiniClipWeights::init(opts.encoder, derive_seed(master_seed, &[tags::WEIGHTS]))?,
        };
        let cfg = *weights.config();
        let vocab = Vocabulary::default_for(cfg.vocab_size)?;
        let aesthetic = match inputs.aesthetic {
            Some(e) => e,
            None => synthetic_aesthetic(
                &weights,
                opts.aesthetic_images,
                derive_seed(master_seed, &[tags::AESTHETIC]),
                &opts.aesthetic_name,
            )?,
        };
        if aesthetic.dim() != cfg.d_joint {
            return Err(Error::dim(
                "aesthetic vs encoder joint width",
                &[aesthetic.dim()],
                &[cfg.d_joint],
            ));
        }
        let scorer = match inputs.scorer {
            Some(s) => s,
            None => make_aligned_scorer(&aesthetic, opts.scorer_gain, opts.scorer_bias)?,
        };
        if scorer.dim() != cfg.d_joint {
            return Err(Error::dim(
                "scorer vs encoder joint width",
                &[scorer.dim()],
                &[cfg.d_joint],
            ));
        }
        let generator = ToyGeneratorWeights::init(
            cfg.d_joint,
            opts.generator_noise_scale,
            derive_seed(master_seed, &[tags::GENERATOR]),
        )?;
        Ok(Self {
            weights,
            vocab,
            aesthetic,
            scorer,
            generator,
        })
    }
}

/// Mean visual embedding of [`synthetic_images`] under `weights`.
pub fn synthetic_aesthetic<T: Real>(
    weights: &MiniClipWeights<T>,
    count: usize,
    seed: u64,
    name: &str,
) -> Result<AestheticEmbedding<T>> {
    let embeddings = synthetic_images(weights.config(), count, seed)
        .iter()
        .map(|img| weights.encode_image(img))
        .collect::<Result<Vec<_>>>()?;
    build_aesthetic_embedding(&embeddings, name, SYNTHETIC_TIMESTAMP)
}

/// One seeded personalization problem: fresh weights, a random prompt from
/// the evaluation list and a synthesized aesthetic.
#[derive(Clone, Debug)]
pub struct TrialInstance<T> {
    pub weights: MiniClipWeights<T>,
    pub prompt: String,
    pub tokens: TokenSequence,
    pub aesthetic: AestheticEmbedding<T>,
}

impl<T: Real> TrialInstance<T> {
    pub fn new(cfg: EncoderConfig, seed: u64) -> Result<Self> {
        let weights = MiniClipWeights::init(cfg, derive_seed(seed, &[tags::WEIGHTS]))?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[tags::PROMPT]));
        let prompt = PROMPTS[rng.gen_range(0..PROMPTS.len())].to_string();
        let tokens = Vocabulary::default_for(cfg.vocab_size)?.tokenize(&prompt, cfg.context_length)?;
        let aesthetic = synthetic_aesthetic(&weights, 8, derive_seed(seed, &[tags::AESTHETIC]), "trial")?;
        Ok(Self {
            weights,
            prompt,
            tokens,
            aesthetic,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Largest candidate that ascended monotonically in every trial.
    pub epsilon: Option<f64>,
    /// (candidate, trials with strictly increasing similarity)
    pub monotone_trials: Vec<(f64, usize)>,
    pub trials: usize,
    pub iterations: usize,
}

/// Sweeps `candidates` over `trials` seeded instances of `T` steps each.
pub fn calibrate_epsilon<T: Real>(
    cfg: EncoderConfig,
    candidates: &[f64],
    trials: usize,
    iterations: usize,
    seed: u64,
) -> Result<Calibration> {
    let instances = (0..trials)
        .map(|t| TrialInstance::<T>::new(cfg, derive_seed(seed, &[t as u64])))
        .collect::<Result<Vec<_>>>()?;
    let mut monotone_trials = Vec::with_capacity(candidates.len());
    for &epsilon in candidates {
        let pcfg = PersonalizationConfig {
            epsilon,
            iterations,
            ..Default::default()
        };
        let ok = instances
            .par_iter()
            .map(|inst| {
                let (_, trace) = personalize(&inst.weights, &inst.tokens, &inst.aesthetic, &pcfg, 0)?;
                Ok(trace.is_strictly_increasing())
            })
            .collect::<Result<Vec<bool>>>()?;
        monotone_trials.push((epsilon, ok.iter().filter(|&&b| b).count()));
    }
    let epsilon = monotone_trials
        .iter()
        .filter(|(_, n)| *n == trials)
        .map(|(e, _)| *e)
        .fold(None, |best: Option<f64>, e| Some(best.map_or(e, |b| b.max(e))));
    Ok(Calibration {
        epsilon,
        monotone_trials,
        trials,
        iterations,
    })
}
