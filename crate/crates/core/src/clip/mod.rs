//! A miniature CLIP-style dual encoder.
//!
//! The text tower is a pre-norm causal transformer pooled at the EOS
//! position; the vision tower is a linear patch embedding followed by mean
//! pooling. Both project into a shared joint space of width `d_joint`.

mod text;
mod tokenizer;
mod vision;
mod weights;

pub use text::{encode_text, RecordedText};
pub use tokenizer::{split_words, TokenSequence, Vocabulary, BOS_ID, EOS_ID, PAD_ID, UNK_ID};
pub use vision::{encode_image, image_patches};
pub use weights::{BlockWeights, MiniClipWeights, TextTower, VisionTower, VISION_PREFIX};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub context_length: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_joint: usize,
    pub image_side: usize,
    pub patch_side: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self::toy_default()
    }
}

impl EncoderConfig {
    /// vocab 512, context 77, width 64, 2 layers of 4 heads, joint width 64,
    /// 32×32 images in 8×8 patches.
    pub fn toy_default() -> Self {
        Self {
            vocab_size: 512,
            context_length: 77,
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            d_joint: 64,
            image_side: 32,
            patch_side: 8,
        }
    }

    /// Small configuration for finite-difference checks.
    pub fn tiny(d_model: usize, n_layers: usize) -> Self {
        Self {
            vocab_size: 512,
            context_length: 16,
            d_model,
            n_layers,
            n_heads: 2,
            d_joint: 8,
            image_side: 8,
            patch_side: 4,
        }
    }

    pub fn mlp_width(&self) -> usize {
        4 * self.d_model
    }

    pub fn patch_count(&self) -> usize {
        let per_side = self.image_side / self.patch_side;
        per_side * per_side
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vocab_size", self.vocab_size),
            ("context_length", self.context_length),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("d_joint", self.d_joint),
            ("image_side", self.image_side),
            ("patch_side", self.patch_side),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.vocab_size < 5 {
            return Err(Error::Config("vocab_size must be at least 5".into()));
        }
        if self.context_length < 2 {
            return Err(Error::Config("context_length must be at least 2".into()));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "n_heads {} does not divide d_model {}",
                self.n_heads, self.d_model
            )));
        }
        if !self.image_side.is_multiple_of(self.patch_side) {
            return Err(Error::Config(format!(
                "patch_side {} does not divide image_side {}",
                self.patch_side, self.image_side
            )));
        }
        Ok(())
    }

    /// Field-ordered values as stored in weight files.
    pub fn to_fields(&self) -> [usize; 8] {
        [
            self.vocab_size,
            self.context_length,
            self.d_model,
            self.n_layers,
            self.n_heads,
            self.d_joint,
            self.image_side,
            self.patch_side,
        ]
    }

    pub fn from_fields(f: [usize; 8]) -> Self {
        Self {
            vocab_size: f[0],
            context_length: f[1],
            d_model: f[2],
            n_layers: f[3],
            n_heads: f[4],
            d_joint: f[5],
            image_side: f[6],
            patch_side: f[7],
        }
    }
}
