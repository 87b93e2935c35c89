use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::EncoderConfig;
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Name prefix shared by every vision-tower parameter.
pub const VISION_PREFIX: &str = "vision.";

/// One pre-norm transformer block. Keys carry no bias: a key bias shifts
/// every score of a query row by the same amount, which softmax cancels.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockWeights<T> {
    pub ln1_gamma: Tensor<T>,
    pub ln1_beta: Tensor<T>,
    pub w_q: Tensor<T>,
    pub b_q: Tensor<T>,
    pub w_k: Tensor<T>,
    pub w_v: Tensor<T>,
    pub b_v: Tensor<T>,
    pub w_o: Tensor<T>,
    pub b_o: Tensor<T>,
    pub ln2_gamma: Tensor<T>,
    pub ln2_beta: Tensor<T>,
    pub w_fc: Tensor<T>,
    pub b_fc: Tensor<T>,
    pub w_proj: Tensor<T>,
    pub b_proj: Tensor<T>,
}

pub(crate) const BLOCK_PARAMS: usize = 15;

const BLOCK_FIELDS: [&str; BLOCK_PARAMS] = [
    "ln1.gamma",
    "ln1.beta",
    "attn.w_q",
    "attn.b_q",
    "attn.w_k",
    "attn.w_v",
    "attn.b_v",
    "attn.w_o",
    "attn.b_o",
    "ln2.gamma",
    "ln2.beta",
    "mlp.w_fc",
    "mlp.b_fc",
    "mlp.w_proj",
    "mlp.b_proj",
];

impl<T: Real> BlockWeights<T> {
    fn fields(&self) -> [&Tensor<T>; 15] {
        [
            &self.ln1_gamma,
            &self.ln1_beta,
            &self.w_q,
            &self.b_q,
            &self.w_k,
            &self.w_v,
            &self.b_v,
            &self.w_o,
            &self.b_o,
            &self.ln2_gamma,
            &self.ln2_beta,
            &self.w_fc,
            &self.b_fc,
            &self.w_proj,
            &self.b_proj,
        ]
    }

    fn fields_mut(&mut self) -> [&mut Tensor<T>; 15] {
        [
            &mut self.ln1_gamma,
            &mut self.ln1_beta,
            &mut self.w_q,
            &mut self.b_q,
            &mut self.w_k,
            &mut self.w_v,
            &mut self.b_v,
            &mut self.w_o,
            &mut self.b_o,
            &mut self.ln2_gamma,
            &mut self.ln2_beta,
            &mut self.w_fc,
            &mut self.b_fc,
            &mut self.w_proj,
            &mut self.b_proj,
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextTower<T> {
    pub token_embedding: Tensor<T>,
    pub positional_embedding: Tensor<T>,
    pub layers: Vec<BlockWeights<T>>,
    pub final_ln_gamma: Tensor<T>,
    pub final_ln_beta: Tensor<T>,
    pub text_projection: Tensor<T>,
}

impl<T: Real> TextTower<T> {
    fn tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = vec![
            ("token_embedding".to_string(), &self.token_embedding),
            ("positional_embedding".to_string(), &self.positional_embedding),
        ];
        for (i, layer) in self.layers.iter().enumerate() {
            for (name, tensor) in BLOCK_FIELDS.iter().zip(layer.fields()) {
                out.push((format!("layers.{i}.{name}"), tensor));
            }
        }
        out.push(("final_ln.gamma".to_string(), &self.final_ln_gamma));
        out.push(("final_ln.beta".to_string(), &self.final_ln_beta));
        out.push(("text_projection".to_string(), &self.text_projection));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = vec![
            ("token_embedding".to_string(), &mut self.token_embedding),
            ("positional_embedding".to_string(), &mut self.positional_embedding),
        ];
        for (i, layer) in self.layers.iter_mut().enumerate() {
            for (name, tensor) in BLOCK_FIELDS.iter().zip(layer.fields_mut()) {
                out.push((format!("layers.{i}.{name}"), tensor));
            }
        }
        out.push(("final_ln.gamma".to_string(), &mut self.final_ln_gamma));
        out.push(("final_ln.beta".to_string(), &mut self.final_ln_beta));
        out.push(("text_projection".to_string(), &mut self.text_projection));
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VisionTower<T> {
    pub patch_projection: Tensor<T>,
    pub projection: Tensor<T>,
}

/// Every parameter of the dual encoder, shaped by its [`EncoderConfig`].
#[derive(Clone, Debug, PartialEq)]
pub struct MiniClipWeights<T> {
    config: EncoderConfig,
    pub text: TextTower<T>,
    pub vision: VisionTower<T>,
}

enum Init {
    Embedding,
    Linear(usize),
    Ones,
    Zeros,
}

impl<T: Real> MiniClipWeights<T> {
    /// Seeded initialization: embeddings ~ 0.02·N(0,1), linear weights
    /// ~ N(0,1)/sqrt(fan_in), biases 0, layer-norm gains 1.
    pub fn init(config: EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut make = |shape: &[usize], init: Init| -> Tensor<T> {
            let n: usize = shape.iter().product();
            let data = match init {
                Init::Ones => vec![T::one(); n],
                Init::Zeros => vec![T::zero(); n],
                Init::Embedding => sample(&mut rng, n, 0.02),
                Init::Linear(fan_in) => sample(&mut rng, n, 1.0 / (fan_in as f64).sqrt()),
            };
            Tensor::new(shape.to_vec(), data).expect("shape matches data")
        };

        let d = config.d_model;
        let h = config.mlp_width();
        let token_embedding = make(&[config.vocab_size, d], Init::Embedding);
        let positional_embedding = make(&[config.context_length, d], Init::Embedding);
        let layers = (0..config.n_layers)
            .map(|_| BlockWeights {
                ln1_gamma: make(&[d], Init::Ones),
                ln1_beta: make(&[d], Init::Zeros),
                w_q: make(&[d, d], Init::Linear(d)),
                b_q: make(&[d], Init::Zeros),
                w_k: make(&[d, d], Init::Linear(d)),
                w_v: make(&[d, d], Init::Linear(d)),
                b_v: make(&[d], Init::Zeros),
                w_o: make(&[d, d], Init::Linear(d)),
                b_o: make(&[d], Init::Zeros),
                ln2_gamma: make(&[d], Init::Ones),
                ln2_beta: make(&[d], Init::Zeros),
                w_fc: make(&[d, h], Init::Linear(d)),
                b_fc: make(&[h], Init::Zeros),
                w_proj: make(&[h, d], Init::Linear(h)),
                b_proj: make(&[d], Init::Zeros),
            })
            .collect();
        let final_ln_gamma = make(&[d], Init::Ones);
        let final_ln_beta = make(&[d], Init::Zeros);
        let text_projection = make(&[d, config.d_joint], Init::Linear(d));
        let p2 = config.patch_side * config.patch_side;
        let patch_projection = make(&[p2, d], Init::Linear(p2));
        let projection = make(&[d, config.d_joint], Init::Linear(d));

        Ok(Self {
            config,
            text: TextTower {
                token_embedding,
                positional_embedding,
                layers,
                final_ln_gamma,
                final_ln_beta,
                text_projection,
            },
            vision: VisionTower {
                patch_projection,
                projection,
            },
        })
    }

    /// All-zero weights, used as a target for deserialization.
    pub fn zeros(config: EncoderConfig) -> Result<Self> {
        let mut w = Self::init(config, 0)?;
        for (_, t) in w.named_tensors_mut() {
            t.data_mut().fill(T::zero());
        }
        Ok(w)
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    /// Text-tower parameters in declaration order.
    pub fn text_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        self.text.tensors()
    }

    pub fn text_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        self.text.tensors_mut()
    }

    pub fn vision_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        vec![
            (
                format!("{VISION_PREFIX}patch_projection"),
                &self.vision.patch_projection,
            ),
            (format!("{VISION_PREFIX}projection"), &self.vision.projection),
        ]
    }

    /// Every parameter in declaration order (text tower, then vision).
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut all = self.text_tensors();
        all.extend(self.vision_tensors());
        all
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut all = self.text.tensors_mut();
        all.push((
            format!("{VISION_PREFIX}patch_projection"),
            &mut self.vision.patch_projection,
        ));
        all.push((format!("{VISION_PREFIX}projection"), &mut self.vision.projection));
        all
    }

    pub fn parameter_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> MiniClipWeights<U> {
        let block = |b: &BlockWeights<T>| BlockWeights {
            ln1_gamma: b.ln1_gamma.cast(),
            ln1_beta: b.ln1_beta.cast(),
            w_q: b.w_q.cast(),
            b_q: b.b_q.cast(),
            w_k: b.w_k.cast(),
            w_v: b.w_v.cast(),
            b_v: b.b_v.cast(),
            w_o: b.w_o.cast(),
            b_o: b.b_o.cast(),
            ln2_gamma: b.ln2_gamma.cast(),
            ln2_beta: b.ln2_beta.cast(),
            w_fc: b.w_fc.cast(),
            b_fc: b.b_fc.cast(),
            w_proj: b.w_proj.cast(),
            b_proj: b.b_proj.cast(),
        };
        MiniClipWeights {
            config: self.config,
            text: TextTower {
                token_embedding: self.text.token_embedding.cast(),
                positional_embedding: self.text.positional_embedding.cast(),
                layers: self.text.layers.iter().map(block).collect(),
                final_ln_gamma: self.text.final_ln_gamma.cast(),
                final_ln_beta: self.text.final_ln_beta.cast(),
                text_projection: self.text.text_projection.cast(),
            },
            vision: VisionTower {
                patch_projection: self.vision.patch_projection.cast(),
                projection: self.vision.projection.cast(),
            },
        }
    }

    /// SHA-256 over config, names, shapes and raw bits of every parameter.
    pub fn checksum(&self) -> String {
        digest_tensors(&self.config, self.named_tensors())
    }

    /// Checksum restricted to the vision tower.
    pub fn vision_checksum(&self) -> String {
        digest_tensors(&self.config, self.vision_tensors())
    }

    /// Bitwise equality of every parameter.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self
                .named_tensors()
                .iter()
                .zip(other.named_tensors())
                .all(|((_, a), (_, b))| a.bit_eq(b))
    }

    pub fn all_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.all_finite())
    }

    /// Prompt content must be framed and every id inside the vocabulary.
    pub fn check_tokens(&self, tokens: &super::TokenSequence) -> Result<()> {
        if tokens.len() > self.config.context_length {
            return Err(Error::Contract(format!(
                "{} tokens exceed context length {}",
                tokens.len(),
                self.config.context_length
            )));
        }
        if let Some(bad) = tokens.ids().iter().find(|&&i| i >= self.config.vocab_size) {
            return Err(Error::Contract(format!(
                "token id {bad} out of range for vocabulary of {}",
                self.config.vocab_size
            )));
        }
        Ok(())
    }
}

fn sample<T: Real>(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<T> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            T::of(z * scale)
        })
        .collect()
}

fn digest_tensors<T: Real>(config: &EncoderConfig, tensors: Vec<(String, &Tensor<T>)>) -> String {
    let mut h = Sha256::new();
    for f in config.to_fields() {
        h.update((f as u64).to_le_bytes());
    }
    for (name, t) in tensors {
        h.update(name.as_bytes());
        for &s in t.shape() {
            h.update((s as u64).to_le_bytes());
        }
        for &x in t.data() {
            h.update(x.bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_weights() {
        let c = EncoderConfig::tiny(8, 1);
        let a = MiniClipWeights::<f32>::init(c, 4).unwrap();
        let b = MiniClipWeights::<f32>::init(c, 4).unwrap();
        assert!(a.bit_eq(&b));
        assert_eq!(a.checksum(), b.checksum());
        let other = MiniClipWeights::<f32>::init(c, 5).unwrap();
        assert!(!a.bit_eq(&other));
        assert_ne!(a.checksum(), other.checksum());
    }

    #[test]
    fn shapes_follow_config() {
        let c = EncoderConfig::toy_default();
        let w = MiniClipWeights::<f32>::init(c, 0).unwrap();
        assert_eq!(w.text.token_embedding.shape(), &[512, 64]);
        assert_eq!(w.text.positional_embedding.shape(), &[77, 64]);
        assert_eq!(w.text.layers.len(), 2);
        assert_eq!(w.text.layers[0].w_fc.shape(), &[64, 256]);
        assert_eq!(w.text.text_projection.shape(), &[64, 64]);
        assert_eq!(w.vision.patch_projection.shape(), &[64, 64]);
        assert_eq!(w.named_tensors().len(), 2 + 15 * 2 + 3 + 2);
        assert!(w.all_finite());
    }

    #[test]
    fn mutable_and_shared_views_agree_on_order() {
        let mut w = MiniClipWeights::<f64>::init(EncoderConfig::tiny(8, 2), 1).unwrap();
        let names: Vec<String> = w.named_tensors().into_iter().map(|(n, _)| n).collect();
        let names_mut: Vec<String> = w.named_tensors_mut().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, names_mut);
        let text: Vec<String> = w.text_tensors_mut().into_iter().map(|(n, _)| n).collect();
        assert_eq!(&names[..text.len()], text.as_slice());
        assert!(names[text.len()..].iter().all(|n| n.starts_with(VISION_PREFIX)));
    }

    #[test]
    fn cast_round_trip_preserves_f32_values() {
        let w = MiniClipWeights::<f32>::init(EncoderConfig::tiny(8, 1), 2).unwrap();
        assert!(w.cast::<f64>().cast::<f32>().bit_eq(&w));
    }
}
