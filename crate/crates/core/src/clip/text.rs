use super::weights::BLOCK_PARAMS;
use super::{MiniClipWeights, TokenSequence};
use crate::autodiff::{Graph, Var};
use crate::error::Result;
use crate::tensor::{Real, Tensor};

/// A recorded text forward pass: the graph, the conditioning node and the
/// leaf bound to each text-tower parameter.
#[derive(Debug)]
pub struct RecordedText<T> {
    pub graph: Graph<T>,
    pub conditioning: Var,
    pub params: Vec<(String, Var)>,
}

impl<T: Real> RecordedText<T> {
    pub fn value(&self) -> &Tensor<T> {
        self.graph.value(self.conditioning)
    }
}

/// Forward pass of the text tower with every text parameter bound as a
/// differentiable leaf. Returns `c` (width `d_joint`) and its record.
pub fn encode_text<T: Real>(
    weights: &MiniClipWeights<T>,
    tokens: &TokenSequence,
) -> Result<(Tensor<T>, RecordedText<T>)> {
    let mut graph = Graph::new();
    let (conditioning, params) = weights.record_text(&mut graph, tokens, true)?;
    let rec = RecordedText {
        graph,
        conditioning,
        params,
    };
    Ok((rec.value().clone(), rec))
}

impl<T: Real> MiniClipWeights<T> {
    /// Appends the text forward pass to `graph`. Parameters become
    /// differentiable leaves when `differentiable` is set, constants
    /// otherwise.
    pub fn record_text(
        &self,
        graph: &mut Graph<T>,
        tokens: &TokenSequence,
        differentiable: bool,
    ) -> Result<(Var, Vec<(String, Var)>)> {
        let bound: Vec<(String, Var)> = self
            .text_tensors()
            .into_iter()
            .map(|(name, t)| {
                let v = if differentiable {
                    graph.param(t.clone())
                } else {
                    graph.constant(t.clone())
                };
                (name, v)
            })
            .collect();
        let vars: Vec<Var> = bound.iter().map(|(_, v)| *v).collect();
        let c = self.text_forward(graph, tokens, &vars)?;
        Ok((c, bound))
    }

    /// The text forward pass over already-bound parameter leaves, given in
    /// [`MiniClipWeights::text_tensors`] order. Only the config of `self` is
    /// read, so the leaves may hold arbitrary values of the right shapes.
    pub fn text_forward(&self, graph: &mut Graph<T>, tokens: &TokenSequence, params: &[Var]) -> Result<Var> {
        self.check_tokens(tokens)?;
        let cfg = self.config();
        let expected = 5 + BLOCK_PARAMS * cfg.n_layers;
        if params.len() != expected {
            return Err(crate::Error::Contract(format!(
                "text forward needs {expected} parameter leaves, got {}",
                params.len()
            )));
        }
        let p = |i: usize| params[i];

        let n = tokens.len();
        let positions: Vec<usize> = (0..n).collect();
        let tok = graph.embedding_lookup(p(0), tokens.ids())?;
        let pos = graph.embedding_lookup(p(1), &positions)?;
        let mut h = graph.add(tok, pos)?;

        for layer in 0..cfg.n_layers {
            let b = 2 + BLOCK_PARAMS * layer;
            let a = graph.layer_norm(h, p(b), p(b + 1))?;
            let q = linear(graph, a, p(b + 2), p(b + 3))?;
            let k = graph.matmul(a, p(b + 4))?;
            let v = linear(graph, a, p(b + 5), p(b + 6))?;
            let att = graph.causal_attention(q, k, v, cfg.n_heads)?;
            let att = linear(graph, att, p(b + 7), p(b + 8))?;
            h = graph.add(h, att)?;

            let m = graph.layer_norm(h, p(b + 9), p(b + 10))?;
            let m = linear(graph, m, p(b + 11), p(b + 12))?;
            let m = graph.gelu(m)?;
            let m = linear(graph, m, p(b + 13), p(b + 14))?;
            h = graph.add(h, m)?;
        }

        let f = 2 + BLOCK_PARAMS * cfg.n_layers;
        let h = graph.layer_norm(h, p(f), p(f + 1))?;
        let pooled = graph.select_row(h, tokens.eos_position())?;
        let c = graph.matmul(pooled, p(f + 2))?;
        graph.reshape(c, vec![cfg.d_joint])
    }

    /// Plain forward pass of the text tower.
    pub fn text_conditioning(&self, tokens: &TokenSequence) -> Result<Tensor<T>> {
        let mut graph = Graph::new();
        let (c, _) = self.record_text(&mut graph, tokens, false)?;
        Ok(graph.value(c).clone())
    }
}

fn linear<T: Real>(graph: &mut Graph<T>, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = graph.matmul(x, w)?;
    graph.add_row(y, b)
}

#[cfg(test)]
mod tests {
    use super::super::{EncoderConfig, Vocabulary};
    use super::*;
    use crate::tensor;

    fn tiny() -> (MiniClipWeights<f64>, Vocabulary) {
        let w = MiniClipWeights::init(EncoderConfig::tiny(16, 2), 3).unwrap();
        (w, Vocabulary::default_for(512).unwrap())
    }

    #[test]
    fn deterministic_and_fixed_width() {
        let (w, v) = tiny();
        for prompt in ["", "Ethereal", "A fountain, sculpture"] {
            let t = v.tokenize(prompt, 16).unwrap();
            let a = w.text_conditioning(&t).unwrap();
            let b = w.text_conditioning(&t).unwrap();
            assert!(a.bit_eq(&b));
            assert_eq!(a.shape(), &[8]);
            let (recorded, _) = encode_text(&w, &t).unwrap();
            assert!(recorded.bit_eq(&a));
        }
    }

    #[test]
    fn zero_layer_encoder_matches_direct_computation() {
        let cfg = EncoderConfig {
            d_model: 8,
            n_layers: 0,
            ..EncoderConfig::tiny(8, 0)
        };
        let w = MiniClipWeights::<f64>::init(cfg, 11).unwrap();
        let v = Vocabulary::default_for(512).unwrap();
        let t = v.tokenize("A gateway between dreams", 16).unwrap();
        let c = w.text_conditioning(&t).unwrap();

        let eos = t.eos_position();
        let x: Vec<f64> = (0..8)
            .map(|j| {
                w.text.token_embedding.data()[t.ids()[eos] * 8 + j] + w.text.positional_embedding.data()[eos * 8 + j]
            })
            .collect();
        let mean = x.iter().sum::<f64>() / 8.0;
        let var = x.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 8.0;
        let normed: Vec<f64> = x
            .iter()
            .map(|a| (a - mean) / (var + tensor::LAYER_NORM_EPS).sqrt())
            .collect();
        let proj = &w.text.text_projection;
        for k in 0..cfg.d_joint {
            let expect: f64 = (0..8).map(|j| proj.data()[j * cfg.d_joint + k] * normed[j]).sum();
            assert!((c.data()[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn changing_a_content_token_changes_c() {
        let v = Vocabulary::default_for(512).unwrap();
        let t = v.tokenize("A giant octopus, bioluminescence", 16).unwrap();
        let swapped = t.with_token(2, v.id("marble")).unwrap();
        for seed in 0..10 {
            let w = MiniClipWeights::<f32>::init(EncoderConfig::tiny(16, 2), seed).unwrap();
            let a = w.text_conditioning(&t).unwrap();
            let b = w.text_conditioning(&swapped).unwrap();
            assert!(!a.bit_eq(&b), "seed {seed}");
        }
    }

    #[test]
    fn out_of_range_token_is_a_contract_error() {
        let (w, _) = tiny();
        let t = TokenSequence::from_ids(vec![1, 9999, 2]).unwrap();
        assert!(matches!(w.text_conditioning(&t), Err(crate::Error::Contract(_))));
    }
}
