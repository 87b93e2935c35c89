//! Aesthetic embeddings and the personalization loop.
//!
//! An aesthetic is the normalized mean of a set of visual embeddings. The
//! loop repeatedly ascends the text encoder's weights along the gradient of
//! `c·e`, yielding personalized weights θ' whose conditioning c' leans
//! towards the aesthetic.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::{Graph, Var};
use crate::clip::{MiniClipWeights, TokenSequence};
use crate::error::{Error, Result};
use crate::tensor::{self, Real, Tensor};

/// Norm below which vectors are treated as zero.
pub const DEGENERATE_NORM: f64 = 1e-8;

/// Step sizes tried when calibrating a toy-scale default.
pub const EPSILON_SWEEP: [f64; 5] = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AestheticMetadata {
    pub name: String,
    #[serde(rename = "K")]
    pub source_count: usize,
    pub created_at: String,
    pub source_digest: String,
}

/// A unit-norm vector in the joint space plus its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct AestheticEmbedding<T = f32> {
    vector: Tensor<T>,
    pub metadata: AestheticMetadata,
}

impl<T: Real> AestheticEmbedding<T> {
    /// Wraps an existing vector without renormalizing it, e.g. after loading
    /// from disk. Rejects non-vectors and non-finite values.
    pub fn from_parts(vector: Tensor<T>, metadata: AestheticMetadata) -> Result<Self> {
        if vector.rank() != 1 {
            return Err(Error::dim("aesthetic vector", vector.shape(), &[vector.len()]));
        }
        if !vector.all_finite() {
            return Err(Error::Input("aesthetic vector has non-finite entries".into()));
        }
        if metadata.source_count == 0 {
            return Err(Error::Input("aesthetic must come from at least one source".into()));
        }
        Ok(Self { vector, metadata })
    }

    pub fn vector(&self) -> &Tensor<T> {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn cast<U: Real>(&self) -> AestheticEmbedding<U> {
        AestheticEmbedding {
            vector: self.vector.cast(),
            metadata: self.metadata.clone(),
        }
    }
}

/// Mean of `embeddings`, normalized to unit length. The digest covers the
/// dimension, the count and the raw bits of every input in order.
pub fn build_aesthetic_embedding<T: Real>(
    embeddings: &[Tensor<T>],
    name: &str,
    created_at: &str,
) -> Result<AestheticEmbedding<T>> {
    let first = embeddings
        .first()
        .ok_or_else(|| Error::Input("no embeddings to average".into()))?;
    let dim = first.len();
    let mut sum = vec![0.0f64; dim];
    let mut hasher = Sha256::new();
    hasher.update((dim as u64).to_le_bytes());
    hasher.update((embeddings.len() as u64).to_le_bytes());
    for (i, v) in embeddings.iter().enumerate() {
        if v.rank() != 1 || v.len() != dim {
            return Err(Error::Input(format!(
                "embedding {i} has shape {:?}, expected [{dim}]",
                v.shape()
            )));
        }
        if !v.all_finite() {
            return Err(Error::Input(format!("embedding {i} has non-finite entries")));
        }
        for (s, &x) in sum.iter_mut().zip(v.data()) {
            *s += x.to_f64_lossy();
            hasher.update(x.bits().to_le_bytes());
        }
    }
    let k = embeddings.len() as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / k).collect();
    let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm.is_nan() || norm < DEGENERATE_NORM {
        return Err(Error::Degenerate(format!(
            "mean embedding has norm {norm:e}; the set cancels out"
        )));
    }
    let vector = Tensor::from_f64(vec![dim], &mean.iter().map(|x| x / norm).collect::<Vec<_>>())?;
    Ok(AestheticEmbedding {
        vector,
        metadata: AestheticMetadata {
            name: name.to_string(),
            source_count: embeddings.len(),
            created_at: created_at.to_string(),
            source_digest: hex::encode(hasher.finalize()),
        },
    })
}

/// `c·e`, or `(c/‖c‖)·e` when `normalize_text` is set.
pub fn similarity<T: Real>(c: &Tensor<T>, e: &AestheticEmbedding<T>, normalize_text: bool) -> Result<T> {
    if c.len() != e.dim() {
        return Err(Error::dim("similarity", c.shape(), e.vector.shape()));
    }
    let dot = tensor::dot(c, &e.vector)?;
    if !normalize_text {
        return Ok(dot);
    }
    let norm = c.norm();
    if norm.to_f64_lossy().is_nan() || norm.to_f64_lossy() < DEGENERATE_NORM {
        return Err(Error::Degenerate("cannot normalize a zero conditioning vector".into()));
    }
    Ok(dot / norm)
}

/// Cosine similarity between the original and personalized conditioning.
pub fn semantic_drift<T: Real>(c: &Tensor<T>, c_prime: &Tensor<T>) -> Result<f64> {
    if c.shape() != c_prime.shape() {
        return Err(Error::dim("semantic_drift", c.shape(), c_prime.shape()));
    }
    let a = c.to_f64_vec();
    let b = c_prime.to_f64_vec();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(na >= DEGENERATE_NORM && nb >= DEGENERATE_NORM) {
        return Err(Error::Degenerate("drift is undefined for a zero vector".into()));
    }
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    GradientAscent,
    /// Gradient ascent plus `sqrt(2·ε·τ)·N(0, I)` noise per step.
    Sgld,
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "gradient_ascent" | "ascent" | "ga" => Ok(Optimizer::GradientAscent),
            "sgld" => Ok(Optimizer::Sgld),
            other => Err(Error::Config(format!("unknown optimizer {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PersonalizationConfig {
    pub epsilon: f64,
    pub iterations: usize,
    pub optimizer: Optimizer,
    pub sgld_temperature: f64,
    pub normalize_text_in_loss: bool,
    /// Names of the text parameters to update; `None` means all of them.
    pub parameter_mask: Option<BTreeSet<String>>,
}

impl Default for PersonalizationConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            iterations: 10,
            optimizer: Optimizer::GradientAscent,
            sgld_temperature: 0.0,
            normalize_text_in_loss: false,
            parameter_mask: None,
        }
    }
}

impl PersonalizationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations > 0 && !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        if !(self.sgld_temperature >= 0.0 && self.sgld_temperature.is_finite()) {
            return Err(Error::Config(format!(
                "sgld_temperature must be non-negative, got {}",
                self.sgld_temperature
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub similarity: f64,
    /// L2 norm over the updated parameters; absent for the final step,
    /// which is only evaluated.
    pub grad_norm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersonalizationTrace {
    pub steps: Vec<TraceStep>,
    /// cosine(c, c') between the first and last evaluated conditioning.
    pub drift: f64,
}

impl PersonalizationTrace {
    pub fn initial_similarity(&self) -> f64 {
        self.steps[0].similarity
    }

    pub fn final_similarity(&self) -> f64 {
        self.steps[self.steps.len() - 1].similarity
    }

    /// Whether similarity strictly increases at every step.
    pub fn is_strictly_increasing(&self) -> bool {
        self.steps.windows(2).all(|w| w[1].similarity > w[0].similarity)
    }
}

/// A differentiable map from a prompt to a conditioning vector.
pub trait TextEncoder<T: Real>: Clone {
    /// Trainable tensors, in the order [`TextEncoder::forward`] expects.
    fn parameters(&self) -> Vec<(String, &Tensor<T>)>;

    fn parameters_mut(&mut self) -> Vec<(String, &mut Tensor<T>)>;

    /// Records the forward pass over `params` (one leaf per parameter).
    fn forward(&self, graph: &mut Graph<T>, tokens: &TokenSequence, params: &[Var]) -> Result<Var>;

    fn joint_dim(&self) -> usize;
}

impl<T: Real> TextEncoder<T> for MiniClipWeights<T> {
    fn parameters(&self) -> Vec<(String, &Tensor<T>)> {
        self.text_tensors()
    }

    fn parameters_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        self.text_tensors_mut()
    }

    fn forward(&self, graph: &mut Graph<T>, tokens: &TokenSequence, params: &[Var]) -> Result<Var> {
        self.text_forward(graph, tokens, params)
    }

    fn joint_dim(&self) -> usize {
        self.config().d_joint
    }
}

/// `c = W·x` with a fixed input `x`; the prompt is ignored. Small enough
/// for the update to be worked out by hand.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearTextEncoder<T> {
    pub w: Tensor<T>,
    pub x: Tensor<T>,
}

impl<T: Real> LinearTextEncoder<T> {
    pub fn new(w: Tensor<T>, x: Tensor<T>) -> Result<Self> {
        match w.matrix_dims() {
            Some((_, k)) if x.rank() == 1 && x.len() == k => Ok(Self { w, x }),
            _ => Err(Error::dim("linear encoder", w.shape(), x.shape())),
        }
    }
}

impl<T: Real> TextEncoder<T> for LinearTextEncoder<T> {
    fn parameters(&self) -> Vec<(String, &Tensor<T>)> {
        vec![("w".to_string(), &self.w)]
    }

    fn parameters_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        vec![("w".to_string(), &mut self.w)]
    }

    fn forward(&self, graph: &mut Graph<T>, _tokens: &TokenSequence, params: &[Var]) -> Result<Var> {
        let k = self.x.len();
        let x = graph.constant(self.x.reshape(vec![k, 1])?);
        let c = graph.matmul(params[0], x)?;
        graph.reshape(c, vec![self.joint_dim()])
    }

    fn joint_dim(&self) -> usize {
        self.w.shape()[0]
    }
}

/// Ascends a private copy of `base` for `cfg.iterations` steps and returns
/// it with the trace. `base` is never modified. The noise stream (SGLD only)
/// is seeded from `seed`.
pub fn personalize<T: Real, E: TextEncoder<T>>(
    base: &E,
    tokens: &TokenSequence,
    e: &AestheticEmbedding<T>,
    cfg: &PersonalizationConfig,
    seed: u64,
) -> Result<(E, PersonalizationTrace)> {
    cfg.validate()?;
    if e.dim() != base.joint_dim() {
        return Err(Error::dim("aesthetic vs joint width", &[e.dim()], &[base.joint_dim()]));
    }
    let names: Vec<String> = base.parameters().into_iter().map(|(n, _)| n).collect();
    let selected: Vec<bool> = match &cfg.parameter_mask {
        None => vec![true; names.len()],
        Some(mask) => {
            if let Some(unknown) = mask.iter().find(|m| !names.contains(m)) {
                return Err(Error::Config(format!("{unknown:?} is not a text-encoder parameter")));
            }
            names.iter().map(|n| mask.contains(n)).collect()
        }
    };

    let mut weights = base.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = T::of(cfg.epsilon);
    let noise_scale = match cfg.optimizer {
        Optimizer::Sgld if cfg.sgld_temperature > 0.0 => Some(T::of((2.0 * cfg.epsilon * cfg.sgld_temperature).sqrt())),
        _ => None,
    };

    let mut steps = Vec::with_capacity(cfg.iterations + 1);
    let mut first_c = None;
    let mut last_c = None;
    for step in 0..=cfg.iterations {
        let mut graph = Graph::new();
        let vars: Vec<Var> = weights
            .parameters()
            .into_iter()
            .zip(&selected)
            .map(|((_, t), &on)| {
                if on {
                    graph.param(t.clone())
                } else {
                    graph.constant(t.clone())
                }
            })
            .collect();
        let c = weights.forward(&mut graph, tokens, &vars)?;
        let target = graph.constant(e.vector.clone());
        let objective = if cfg.normalize_text_in_loss {
            let unit = graph.l2_normalize(c)?;
            graph.dot(unit, target)?
        } else {
            graph.dot(c, target)?
        };
        let sim = graph.value(objective).item()?.to_f64_lossy();
        if !sim.is_finite() {
            return Err(Error::Numeric {
                step,
                what: "similarity".into(),
            });
        }
        if first_c.is_none() {
            first_c = Some(graph.value(c).clone());
        }
        if step == cfg.iterations {
            last_c = Some(graph.value(c).clone());
            steps.push(TraceStep {
                step,
                similarity: sim,
                grad_norm: None,
            });
            break;
        }

        let mut grads = graph.backward(objective)?;
        let mut sq = 0.0f64;
        let mut updates = Vec::new();
        for ((name, &v), &on) in names.iter().zip(&vars).zip(&selected) {
            if !on {
                updates.push(None);
                continue;
            }
            let g = grads.remove(v).expect("selected parameters are leaves");
            if !g.all_finite() {
                return Err(Error::Numeric {
                    step,
                    what: format!("gradient of {name}"),
                });
            }
            sq += g.data().iter().map(|x| x.to_f64_lossy().powi(2)).sum::<f64>();
            updates.push(Some(g));
        }
        for ((_, param), update) in weights.parameters_mut().into_iter().zip(updates) {
            let Some(g) = update else { continue };
            param.axpy(eps, &g)?;
            if let Some(scale) = noise_scale {
                for x in param.data_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *x = *x + scale * T::of(z);
                }
            }
        }
        steps.push(TraceStep {
            step,
            similarity: sim,
            grad_norm: Some(sq.sqrt()),
        });
    }

    let drift = semantic_drift(
        first_c.as_ref().expect("at least one evaluation"),
        last_c.as_ref().expect("final evaluation"),
    )?;
    Ok((weights, PersonalizationTrace { steps, drift }))
}

/// c' of personalized weights: a plain forward pass.
pub fn personalized_conditioning<T: Real>(weights: &MiniClipWeights<T>, tokens: &TokenSequence) -> Result<Tensor<T>> {
    weights.text_conditioning(tokens)
}
