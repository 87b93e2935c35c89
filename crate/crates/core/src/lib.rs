//! Aesthetic-gradient personalization at desk scale.
//!
//! Build a unit-norm aesthetic embedding `e` from image embeddings, then
//! nudge a miniature CLIP-style text encoder along `∇θ (c·e)` so that a
//! prompt's conditioning vector `c` leans towards the aesthetic.

pub mod aesthetics;
pub mod autodiff;
pub mod clip;
pub mod config;
pub mod corpus;
pub mod error;
pub mod format;
pub mod harness;
pub mod scorer;
pub mod tensor;

pub use aesthetics::{
    build_aesthetic_embedding, personalize, personalized_conditioning, semantic_drift, similarity, AestheticEmbedding,
    Optimizer, PersonalizationConfig, PersonalizationTrace,
};
pub use clip::{EncoderConfig, MiniClipWeights, TokenSequence, Vocabulary};
pub use error::{Error, Result};
pub use scorer::{make_aligned_scorer, ScorerWeights};
pub use tensor::{Real, Tensor};
