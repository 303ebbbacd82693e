//! Attention Bi-LSTM relation classifier. Forward and backward LSTM outputs
//! are combined by element-wise sum; a learned attention vector pools the
//! per-position states into one representation:
//!
//! `M = tanh(H); α = softmax(wᵀM); r = αH; h* = tanh(r)`
//!
//! followed by a dropout + L2-regularized softmax output layer. The
//! attention weights have one entry per token and sum to 1.

use crate::corpus::{RelationInstance, RelationLabel, RELATION_LABELS};
use crate::embeddings::EmbeddingTable;
use crate::error::Result;
use crate::ner::BiLstm;
use crate::tensor::{Mode, Rng, Tensor};

use super::cnn::{argmax, nll_from_logits};
use super::{ReHyper, RelationClassifier};

#[derive(Debug, Clone)]
pub struct AttBlstmModel {
    pub hyper: ReHyper,
    pub word_table: EmbeddingTable,
    pub bilstm: BiLstm,
    pub att_w: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

impl AttBlstmModel {
    pub fn new(hyper: ReHyper, word_table: EmbeddingTable, rng: &Rng) -> Result<AttBlstmModel> {
        let h = hyper.lstm_hidden;
        let bilstm = BiLstm::new(word_table.dim(), h, &mut rng.fork("lstm"));
        let r = (6.0 / (h + 1) as f64).sqrt();
        let att_w = Tensor::uniform(&[h, 1], -r, r, &mut rng.fork("att"), true);
        let ro = (6.0 / (h + 3) as f64).sqrt();
        let out_w = Tensor::uniform(&[h, 3], -ro, ro, &mut rng.fork("out"), true);
        let out_b = Tensor::param(&[1, 3], vec![0.0; 3])?;
        Ok(AttBlstmModel {
            hyper,
            word_table,
            bilstm,
            att_w,
            out_w,
            out_b,
        })
    }

    pub fn parameters(&self) -> Vec<Tensor> {
        let mut p = Vec::new();
        if self.word_table.trainable() {
            p.push(self.word_table.matrix().clone());
        }
        p.extend(self.bilstm.parameters());
        p.push(self.att_w.clone());
        p.push(self.out_w.clone());
        p.push(self.out_b.clone());
        p
    }

    /// (logits [1,3], attention weights [1,L]).
    pub fn forward(
        &self,
        instance: &RelationInstance,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<(Tensor, Tensor)> {
        let tokens: Vec<&str> = instance.sentence.tokens.iter().map(|s| s.as_str()).collect();
        let emb = self
            .word_table
            .embed_tokens(&tokens)?
            .dropout(self.hyper.cnn_dropout, mode, rng)?;
        let (fwd, bwd) = self.bilstm.states(&emb)?;
        let rows: Vec<Tensor> = fwd
            .iter()
            .zip(&bwd)
            .map(|(f, b)| f.add(b))
            .collect::<Result<_>>()?;
        let h = Tensor::cat(&rows, 0)?.dropout(self.hyper.cnn_dropout, mode, rng)?;
        let m = h.tanh();
        let scores = m.matmul(&self.att_w)?.transpose()?;
        let alpha = scores.softmax(1)?;
        let r = alpha.matmul(&h)?;
        let pooled = r.tanh().dropout(self.hyper.cnn_dropout, mode, rng)?;
        let logits = pooled.matmul(&self.out_w)?.add(&self.out_b)?;
        Ok((logits, alpha))
    }

    /// (probabilities over the 3 labels, attention weights of length L).
    pub fn classify_with_attention(
        &self,
        instance: &RelationInstance,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut rng = Rng::seed_from(0);
        let (logits, alpha) = self.forward(instance, Mode::Eval, &mut rng)?;
        Ok((logits.softmax(1)?.to_vec(), alpha.to_vec()))
    }

    /// Cross-entropy plus L2 on the output layer.
    pub fn loss(&self, instance: &RelationInstance, mode: Mode, rng: &mut Rng) -> Result<Tensor> {
        let (logits, _) = self.forward(instance, mode, rng)?;
        let nll = nll_from_logits(&logits, instance.label.index())?;
        if self.hyper.l2 > 0.0 {
            let penalty = self.out_w.mul(&self.out_w)?.sum_all().scale(self.hyper.l2);
            nll.add(&penalty)
        } else {
            Ok(nll)
        }
    }
}

impl RelationClassifier for AttBlstmModel {
    fn classify(&self, instance: &RelationInstance) -> Result<RelationLabel> {
        let (probs, _) = self.classify_with_attention(instance)?;
        Ok(RELATION_LABELS[argmax(&probs)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EntitySpan, Sentence};
    use crate::tensor::gradcheck::{finite_diff_grad, max_rel_err};

    fn tiny_model(seed: u64) -> AttBlstmModel {
        let hyper = ReHyper {
            word_dim: 5,
            pos_dim: 3,
            cnn_filter_sizes: vec![2],
            cnn_filters_per_size: 2,
            cnn_dropout: 0.0,
            lstm_hidden: 4,
            l2: 1e-3,
            clip: 6,
        };
        let rng = Rng::seed_from(seed);
        let vocab: Vec<String> = ["takes", "garlic", "for", "nausea"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let words = EmbeddingTable::new_random(&vocab, 5, &mut rng.fork("w"), 0.5).unwrap();
        AttBlstmModel::new(hyper, words, &rng).unwrap()
    }

    fn instance(tokens: &[&str]) -> RelationInstance {
        RelationInstance::new(
            Sentence::new("s", tokens.iter().map(|s| s.to_string()).collect()).unwrap(),
            EntitySpan::ds(0, 1),
            EntitySpan::event(tokens.len() - 1, tokens.len()),
            RelationLabel::Negative,
        )
        .unwrap()
    }

    #[test]
    fn attention_length_equals_token_count_and_sums_to_one() {
        let model = tiny_model(1);
        for n in [1usize, 2, 5, 9] {
            let tokens: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
            let refs: Vec<&str> = tokens.iter().map(|s| s.as_str()).collect();
            let inst = instance(&refs);
            let (probs, alpha) = model.classify_with_attention(&inst).unwrap();
            assert_eq!(alpha.len(), n);
            assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(alpha.iter().all(|&a| a >= 0.0));
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_token_attention_is_exactly_one() {
        let model = tiny_model(2);
        let inst = instance(&["garlic"]);
        let (_, alpha) = model.classify_with_attention(&inst).unwrap();
        assert_eq!(alpha, vec![1.0]);
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        let model = tiny_model(3);
        let inst = instance(&["takes", "garlic", "for", "nausea"]);
        let mut rng = Rng::seed_from(0);
        let loss = model.loss(&inst, Mode::Eval, &mut rng).unwrap();
        loss.backward().unwrap();
        for (i, t) in model.parameters().iter().enumerate() {
            let analytic = t.grad().unwrap_or_else(|| vec![0.0; t.numel()]);
            let numeric = finite_diff_grad(t, 1e-5, || {
                let mut rng = Rng::seed_from(0);
                model.loss(&inst, Mode::Eval, &mut rng).unwrap().item()
            });
            let err = max_rel_err(&analytic, &numeric);
            assert!(err < 1e-3, "param {i}: rel err {err}");
        }
    }
}
