//! Linear aesthetic-score heads over visual embeddings.

use serde::{Deserialize, Serialize};

use crate::aesthetics::AestheticEmbedding;
use crate::error::{Error, Result};
use crate::tensor::{self, Real, Tensor};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerMetadata {
    pub name: String,
    pub expected_dim: usize,
}

/// `score(v) = w·v + b`, unbounded.
#[derive(Clone, Debug, PartialEq)]
pub struct ScorerWeights<T = f32> {
    w: Tensor<T>,
    b: T,
    pub metadata: ScorerMetadata,
}

impl<T: Real> ScorerWeights<T> {
    pub fn new(w: Tensor<T>, b: T, name: &str) -> Result<Self> {
        if w.rank() != 1 {
            return Err(Error::dim("scorer weights", w.shape(), &[w.len()]));
        }
        if !w.all_finite() || !b.is_finite() {
            return Err(Error::Input("scorer weights must be finite".into()));
        }
        let expected_dim = w.len();
        Ok(Self {
            w,
            b,
            metadata: ScorerMetadata {
                name: name.to_string(),
                expected_dim,
            },
        })
    }

    pub fn w(&self) -> &Tensor<T> {
        &self.w
    }

    pub fn bias(&self) -> T {
        self.b
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn score(&self, v: &Tensor<T>) -> Result<T> {
        if v.shape() != self.w.shape() {
            return Err(Error::dim("score", v.shape(), self.w.shape()));
        }
        Ok(tensor::dot(&self.w, v)? + self.b)
    }

    pub fn cast<U: Real>(&self) -> ScorerWeights<U> {
        ScorerWeights {
            w: self.w.cast(),
            b: U::of(self.b.to_f64_lossy()),
            metadata: self.metadata.clone(),
        }
    }
}

pub fn score<T: Real>(v: &Tensor<T>, s: &ScorerWeights<T>) -> Result<T> {
    s.score(v)
}

/// A scorer that rewards agreement with `e`: `w = gain·e`.
pub fn make_aligned_scorer<T: Real>(e: &AestheticEmbedding<T>, gain: f64, b: f64) -> Result<ScorerWeights<T>> {
    if gain == 0.0 || !gain.is_finite() {
        return Err(Error::Config(format!(
            "scorer gain must be non-zero and finite, got {gain}"
        )));
    }
    ScorerWeights::new(
        tensor::scale(e.vector(), T::of(gain)),
        T::of(b),
        &format!("aligned:{}", e.metadata.name),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aesthetics::build_aesthetic_embedding;

    fn e() -> AestheticEmbedding<f64> {
        build_aesthetic_embedding(&[Tensor::from_vec(vec![1.0, 2.0, -2.0])], "e", "0").unwrap()
    }

    #[test]
    fn constant_scorer() {
        let s = ScorerWeights::new(Tensor::zeros(&[3]), 5.0f64, "c").unwrap();
        assert_eq!(s.score(&Tensor::from_vec(vec![9.0, -1.0, 3.0])).unwrap(), 5.0);
    }

    #[test]
    fn aligned_scorer_values() {
        let e = e();
        let s = make_aligned_scorer(&e, 4.0, 0.0).unwrap();
        assert!((s.score(e.vector()).unwrap() - 4.0).abs() < 1e-12);
        let anti = make_aligned_scorer(&e, -1.0, 0.0).unwrap();
        assert!((anti.score(e.vector()).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(make_aligned_scorer(&e, 0.0, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn dimension_mismatch() {
        let s = make_aligned_scorer(&e(), 1.0, 0.0).unwrap();
        assert!(matches!(s.score(&Tensor::zeros(&[2])), Err(Error::Dimension { .. })));
    }
}
