//! JSON run configuration and its named presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aesthetics::PersonalizationConfig;
use crate::clip::EncoderConfig;
use crate::error::{Error, Result};
use crate::format::{load_aesthetic, load_scorer, load_weights};
use crate::harness::{ToyWorld, WorldInputs, WorldOptions};

/// Step size for the default toy encoder, from [`crate::harness::calibrate_epsilon`]
/// over 20 trials of 20 steps.
pub const TOY_EPSILON: f64 = 1e-4;

/// The step size used with full-size encoders.
pub const FULL_SCALE_EPSILON: f64 = 1e-4;

pub const PRESETS: [&str; 2] = ["toy-default", "full-scale"];

/// Encoder presets by name.
pub fn encoder_preset(name: &str) -> Result<EncoderConfig> {
    match name {
        "toy-default" => Ok(EncoderConfig::toy_default()),
        "tiny" => Ok(EncoderConfig::tiny(16, 2)),
        other => Err(Error::Config(format!("unknown encoder preset {other:?}"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentOptions {
    pub seeds_per_prompt: usize,
    pub keyword: Option<String>,
    pub scorer_gain: f64,
    pub scorer_bias: f64,
    pub generator_noise_scale: f64,
    /// Images synthesized for the aesthetic when no file is given.
    pub aesthetic_images: usize,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            seeds_per_prompt: 6,
            keyword: None,
            scorer_gain: 4.0,
            scorer_bias: 5.0,
            generator_noise_scale: 0.1,
            aesthetic_images: 16,
        }
    }
}

/// Optional inputs; anything missing is derived from the master seed.
/// Relative paths are taken relative to the working directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunPaths {
    pub weights: Option<PathBuf>,
    pub aesthetic: Option<PathBuf>,
    pub scorer: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Encoder preset name, see [`encoder_preset`].
    pub encoder: String,
    pub personalization: PersonalizationConfig,
    #[serde(default)]
    pub experiment: ExperimentOptions,
    #[serde(default)]
    pub paths: RunPaths,
    pub master_seed: u64,
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let epsilon = match name {
            "toy-default" => TOY_EPSILON,
            "full-scale" => FULL_SCALE_EPSILON,
            other => return Err(Error::Config(format!("unknown preset {other:?}"))),
        };
        Ok(Self {
            encoder: "toy-default".into(),
            personalization: PersonalizationConfig {
                epsilon,
                iterations: 10,
                ..PersonalizationConfig::default()
            },
            experiment: ExperimentOptions::default(),
            paths: RunPaths::default(),
            master_seed: 0,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad run config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn encoder_config(&self) -> Result<EncoderConfig> {
        encoder_preset(&self.encoder)
    }

    pub fn world_options(&self) -> Result<WorldOptions> {
        Ok(WorldOptions {
            encoder: self.encoder_config()?,
            scorer_gain: self.experiment.scorer_gain,
            scorer_bias: self.experiment.scorer_bias,
            generator_noise_scale: self.experiment.generator_noise_scale,
            aesthetic_images: self.experiment.aesthetic_images,
            ..WorldOptions::default()
        })
    }

    /// The experiment inputs: files named in `paths`, everything else
    /// derived from `master_seed`.
    pub fn build_world(&self) -> Result<ToyWorld<f32>> {
        let weights = self.paths.weights.as_deref().map(load_weights).transpose()?;
        let aesthetic = self
            .paths
            .aesthetic
            .as_deref()
            .map(|p| load_aesthetic(p, true))
            .transpose()?;
        let scorer = self.paths.scorer.as_deref().map(|p| load_scorer(p, None)).transpose()?;
        ToyWorld::with_inputs(
            &self.world_options()?,
            self.master_seed,
            WorldInputs {
                weights,
                aesthetic,
                scorer,
            },
        )
    }

    /// Checks values and that every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        self.encoder_config()?.validate()?;
        self.personalization.validate()?;
        if self.experiment.seeds_per_prompt == 0 {
            return Err(Error::Config("seeds_per_prompt must be positive".into()));
        }
        if self.experiment.aesthetic_images == 0 {
            return Err(Error::Config("aesthetic_images must be positive".into()));
        }
        if let Some(k) = &self.experiment.keyword {
            if k.trim().is_empty() {
                return Err(Error::Config("keyword must not be empty".into()));
            }
        }
        for p in [&self.paths.weights, &self.paths.aesthetic, &self.paths.scorer]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                return Err(Error::Input(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }
}
