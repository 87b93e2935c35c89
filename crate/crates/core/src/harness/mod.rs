//! The paired scoring experiment: for every prompt, generate from the
//! original, personalized and (optionally) keyword-appended conditioning
//! with matched seeds and score each generation.

mod generator;
mod report;
mod stats;
mod world;

pub use generator::{toy_generate, ToyGeneratorWeights, GENERATE_RETRIES};
pub use report::{emit_report, render_histogram, scores_csv, summary_json, HISTOGRAM_BINS};
pub use stats::{sign_test, summarize, SignTest, Summary};
pub use world::{
    calibrate_epsilon, synthetic_aesthetic, synthetic_images, Calibration, ToyWorld, TrialInstance, WorldInputs,
    WorldOptions,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aesthetics::{
    personalize, personalized_conditioning, semantic_drift, similarity, AestheticEmbedding, AestheticMetadata,
    PersonalizationConfig,
};
use crate::clip::{EncoderConfig, MiniClipWeights, Vocabulary};
use crate::corpus::PromptCorpus;
use crate::error::{Error, Result};
use crate::scorer::{ScorerMetadata, ScorerWeights};
use crate::tensor::Real;

/// Stream tags mixed into [`derive_seed`].
pub mod tags {
    pub const GENERATE: u64 = 1;
    pub const PERSONALIZE: u64 = 2;
    pub const WEIGHTS: u64 = 3;
    pub const AESTHETIC: u64 = 4;
    pub const GENERATOR: u64 = 5;
    pub const PROMPT: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent seed for a (master, path…) tuple.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// `"prompt, keyword"`.
pub fn keyword_baseline(prompt: &str, keyword: &str) -> Result<String> {
    if keyword.trim().is_empty() {
        return Err(Error::Input("keyword must not be empty".into()));
    }
    Ok(format!("{prompt}, {keyword}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Original,
    Personalized,
    Keyword,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Original => "original",
            Condition::Personalized => "personalized",
            Condition::Keyword => "keyword",
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One scored generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub prompt_index: usize,
    pub condition: Condition,
    /// Seed index within the prompt, shared by all conditions.
    pub seed: usize,
    pub score: f64,
    /// Agreement of the condition's conditioning vector with `e`.
    pub similarity_to_e: f64,
    /// cosine(c, conditioning); 1 for the original condition.
    pub drift_cosine: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptSummary {
    pub index: usize,
    pub prompt: String,
    pub original_mean: f64,
    pub personalized_mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keyword_mean: Option<f64>,
    /// personalized_mean − original_mean
    pub personalized_difference: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keyword_difference: Option<f64>,
    pub similarity_original: f64,
    /// sim(c', e) − sim(c, e)
    pub delta_similarity_personalized: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_similarity_keyword: Option<f64>,
    pub drift_personalized: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift_keyword: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    #[serde(flatten)]
    pub scores: Summary,
    pub mean_similarity_to_e: f64,
}

/// Everything that determines a run, as recorded in its summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSnapshot {
    pub master_seed: u64,
    pub prompts: usize,
    pub seeds_per_prompt: usize,
    pub keyword: Option<String>,
    pub encoder: EncoderConfig,
    pub weights_checksum: String,
    pub personalization: PersonalizationConfig,
    pub aesthetic: AestheticMetadata,
    pub scorer: ScorerMetadata,
    pub scorer_bias: f64,
    pub generator_noise_scale: f64,
    pub generator_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// Sorted by prompt, then condition, then seed.
    #[serde(skip)]
    pub generations: Vec<Generation>,
    pub conditions: Vec<ConditionSummary>,
    pub prompts: Vec<PromptSummary>,
    /// Prompts whose personalized mean beats the original mean.
    pub sign_test: SignTest,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keyword_sign_test: Option<SignTest>,
    /// Whether every personalized copy kept the vision tower bit for bit.
    pub vision_frozen: bool,
    pub config: ExperimentSnapshot,
}

impl ExperimentReport {
    pub fn condition(&self, c: Condition) -> Option<&ConditionSummary> {
        self.conditions.iter().find(|s| s.condition == c)
    }

    pub fn scores(&self, c: Condition) -> Vec<f64> {
        self.generations
            .iter()
            .filter(|g| g.condition == c)
            .map(|g| g.score)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Serial,
    /// One rayon task per prompt.
    Parallel,
}

/// Inputs of [`run_experiment`].
#[derive(Clone, Copy, Debug)]
pub struct ExperimentSetup<'a, T: Real> {
    pub weights: &'a MiniClipWeights<T>,
    pub vocab: &'a Vocabulary,
    pub corpus: &'a PromptCorpus,
    pub aesthetic: &'a AestheticEmbedding<T>,
    pub scorer: &'a ScorerWeights<T>,
    pub generator: &'a ToyGeneratorWeights<T>,
    pub personalization: &'a PersonalizationConfig,
    pub seeds_per_prompt: usize,
    pub keyword: Option<&'a str>,
    pub master_seed: u64,
}

struct PromptOutcome {
    generations: Vec<Generation>,
    summary: PromptSummary,
    vision_frozen: bool,
}

impl<T: Real> ExperimentSetup<'_, T> {
    fn check(&self) -> Result<()> {
        let joint = self.weights.config().d_joint;
        for (what, dim) in [
            ("aesthetic", self.aesthetic.dim()),
            ("scorer", self.scorer.dim()),
            ("generator", self.generator.dim()),
        ] {
            if dim != joint {
                return Err(Error::Config(format!(
                    "{what} has dimension {dim}, encoder joint width is {joint}"
                )));
            }
        }
        if self.seeds_per_prompt == 0 {
            return Err(Error::Config("seeds_per_prompt must be positive".into()));
        }
        if self.corpus.is_empty() {
            return Err(Error::Config("prompt corpus is empty".into()));
        }
        if let Some(k) = self.keyword {
            keyword_baseline("", k)?;
        }
        self.personalization.validate()
    }

    fn run_prompt(&self, index: usize) -> Result<PromptOutcome> {
        let cfg = self.weights.config();
        let prompt = &self.corpus.prompts()[index];
        let normalize = self.personalization.normalize_text_in_loss;
        let tokens = self.vocab.tokenize(prompt, cfg.context_length)?;
        let c = self.weights.text_conditioning(&tokens)?;

        let vision_before = self.weights.vision_checksum();
        let personal_seed = derive_seed(self.master_seed, &[tags::PERSONALIZE, index as u64]);
        let (personal, _trace) = personalize(
            self.weights,
            &tokens,
            self.aesthetic,
            self.personalization,
            personal_seed,
        )?;
        let vision_frozen = personal.vision_checksum() == vision_before;
        let c_personal = personalized_conditioning(&personal, &tokens)?;

        let mut conditionings = vec![(Condition::Original, c.clone()), (Condition::Personalized, c_personal)];
        if let Some(k) = self.keyword {
            let kw_tokens = self.vocab.tokenize(&keyword_baseline(prompt, k)?, cfg.context_length)?;
            conditionings.push((Condition::Keyword, self.weights.text_conditioning(&kw_tokens)?));
        }

        let mut generations = Vec::with_capacity(conditionings.len() * self.seeds_per_prompt);
        let mut sims = Vec::new();
        let mut drifts = Vec::new();
        let mut means = Vec::new();
        for (condition, cond) in &conditionings {
            let sim = similarity(cond, self.aesthetic, normalize)?.to_f64_lossy();
            let drift = semantic_drift(&c, cond)?;
            let mut total = 0.0;
            for seed in 0..self.seeds_per_prompt {
                let gen_seed = derive_seed(self.master_seed, &[tags::GENERATE, index as u64, seed as u64]);
                let v = toy_generate(cond, self.generator, gen_seed)?;
                let score = self.scorer.score(&v)?.to_f64_lossy();
                total += score;
                generations.push(Generation {
                    prompt_index: index,
                    condition: *condition,
                    seed,
                    score,
                    similarity_to_e: sim,
                    drift_cosine: drift,
                });
            }
            sims.push(sim);
            drifts.push(drift);
            means.push(total / self.seeds_per_prompt as f64);
        }

        let keyword = self.keyword.map(|_| 2);
        let summary = PromptSummary {
            index,
            prompt: prompt.clone(),
            original_mean: means[0],
            personalized_mean: means[1],
            keyword_mean: keyword.map(|k| means[k]),
            personalized_difference: means[1] - means[0],
            keyword_difference: keyword.map(|k| means[k] - means[0]),
            similarity_original: sims[0],
            delta_similarity_personalized: sims[1] - sims[0],
            delta_similarity_keyword: keyword.map(|k| sims[k] - sims[0]),
            drift_personalized: drifts[1],
            drift_keyword: keyword.map(|k| drifts[k]),
        };
        Ok(PromptOutcome {
            generations,
            summary,
            vision_frozen,
        })
    }
}

/// Runs every prompt, merges results by prompt index and summarizes.
/// Serial and parallel execution give identical reports.
pub fn run_experiment<T: Real>(setup: &ExperimentSetup<'_, T>, execution: Execution) -> Result<ExperimentReport> {
    setup.check()?;
    let job = |i: usize| {
        setup.run_prompt(i).map_err(|e| Error::Prompt {
            index: i,
            source: Box::new(e),
        })
    };
    let outcomes: Vec<PromptOutcome> = match execution {
        Execution::Serial => (0..setup.corpus.len()).map(job).collect::<Result<_>>()?,
        Execution::Parallel => (0..setup.corpus.len())
            .into_par_iter()
            .map(job)
            .collect::<Result<_>>()?,
    };

    let vision_frozen = outcomes.iter().all(|o| o.vision_frozen);
    let prompts: Vec<PromptSummary> = outcomes.iter().map(|o| o.summary.clone()).collect();
    let mut generations: Vec<Generation> = outcomes.into_iter().flat_map(|o| o.generations).collect();
    generations.sort_by_key(|g| (g.prompt_index, g.condition, g.seed));

    let mut present = vec![Condition::Original, Condition::Personalized];
    if setup.keyword.is_some() {
        present.push(Condition::Keyword);
    }
    let conditions = present
        .iter()
        .map(|&condition| {
            let rows: Vec<&Generation> = generations.iter().filter(|g| g.condition == condition).collect();
            let scores: Vec<f64> = rows.iter().map(|g| g.score).collect();
            ConditionSummary {
                condition,
                scores: summarize(&scores),
                mean_similarity_to_e: rows.iter().map(|g| g.similarity_to_e).sum::<f64>() / rows.len() as f64,
            }
        })
        .collect();

    let personal: Vec<f64> = prompts.iter().map(|p| p.personalized_difference).collect();
    let keyword_sign_test = setup.keyword.map(|_| {
        let diffs: Vec<f64> = prompts.iter().filter_map(|p| p.keyword_difference).collect();
        sign_test(&diffs)
    });

    let config = ExperimentSnapshot {
        master_seed: setup.master_seed,
        prompts: setup.corpus.len(),
        seeds_per_prompt: setup.seeds_per_prompt,
        keyword: setup.keyword.map(str::to_string),
        encoder: *setup.weights.config(),
        weights_checksum: setup.weights.checksum(),
        personalization: setup.personalization.clone(),
        aesthetic: setup.aesthetic.metadata.clone(),
        scorer: setup.scorer.metadata.clone(),
        scorer_bias: setup.scorer.bias().to_f64_lossy(),
        generator_noise_scale: setup.generator.noise_scale,
        generator_seed: setup.generator.seed,
    };

    Ok(ExperimentReport {
        generations,
        conditions,
        sign_test: sign_test(&personal),
        keyword_sign_test,
        prompts,
        vision_frozen,
        config,
    })
}
