//! Relation CNN: per-token word embedding concatenated with two position
//! embeddings (distance to the DS head and to the Event head), convolutions
//! at several filter sizes, max-pooling per filter, dropout, and a softmax
//! output layer.

use crate::corpus::{RelationInstance, RelationLabel, RELATION_LABELS};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::tensor::{Mode, Rng, Tensor};

use super::{position_row, relative_positions, ReHyper, RelationClassifier};

#[derive(Debug, Clone)]
pub struct ConvBank {
    pub size: usize,
    pub weights: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct CnnRelModel {
    pub hyper: ReHyper,
    pub word_table: EmbeddingTable,
    /// [2·clip+1, pos_dim] tables for DS-relative and Event-relative
    /// distances.
    pub pos_ds: Tensor,
    pub pos_ev: Tensor,
    pub convs: Vec<ConvBank>,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

impl CnnRelModel {
    pub fn new(hyper: ReHyper, word_table: EmbeddingTable, rng: &Rng) -> Result<CnnRelModel> {
        if hyper.cnn_filter_sizes.is_empty() {
            return Err(Error::Config("no CNN filter sizes".into()));
        }
        let rows = (2 * hyper.clip + 1) as usize;
        let mut pos_rng = rng.fork("pos_emb");
        let pos_ds = Tensor::uniform(&[rows, hyper.pos_dim], -0.1, 0.1, &mut pos_rng, true);
        let pos_ev = Tensor::uniform(&[rows, hyper.pos_dim], -0.1, 0.1, &mut pos_rng, true);
        let width = word_table.dim() + 2 * hyper.pos_dim;
        let convs = hyper
            .cnn_filter_sizes
            .iter()
            .map(|&size| {
                let fan_in = size * width;
                let r = (6.0 / (fan_in + hyper.cnn_filters_per_size) as f64).sqrt();
                let mut crng = rng.fork(&format!("conv{size}"));
                ConvBank {
                    size,
                    weights: Tensor::uniform(
                        &[fan_in, hyper.cnn_filters_per_size],
                        -r,
                        r,
                        &mut crng,
                        true,
                    ),
                    bias: Tensor::param(&[1, hyper.cnn_filters_per_size], vec![
                        0.0;
                        hyper.cnn_filters_per_size
                    ])
                    .unwrap(),
                }
            })
            .collect();
        let pooled = hyper.cnn_filter_sizes.len() * hyper.cnn_filters_per_size;
        let r = (6.0 / (pooled + 3) as f64).sqrt();
        let out_w = Tensor::uniform(&[pooled, 3], -r, r, &mut rng.fork("out"), true);
        let out_b = Tensor::param(&[1, 3], vec![0.0; 3])?;
        Ok(CnnRelModel {
            hyper,
            word_table,
            pos_ds,
            pos_ev,
            convs,
            out_w,
            out_b,
        })
    }

    pub fn parameters(&self) -> Vec<Tensor> {
        let mut p = Vec::new();
        if self.word_table.trainable() {
            p.push(self.word_table.matrix().clone());
        }
        p.push(self.pos_ds.clone());
        p.push(self.pos_ev.clone());
        for c in &self.convs {
            p.push(c.weights.clone());
            p.push(c.bias.clone());
        }
        p.push(self.out_w.clone());
        p.push(self.out_b.clone());
        p
    }

    /// Per-token inputs [L, word_dim + 2·pos_dim].
    pub fn input_features(&self, instance: &RelationInstance) -> Result<Tensor> {
        let tokens: Vec<&str> = instance.sentence.tokens.iter().map(|s| s.as_str()).collect();
        let words = self.word_table.embed_tokens(&tokens)?;
        let (d_ds, d_ev) = relative_positions(instance, self.hyper.clip);
        let ds_rows: Vec<usize> = d_ds.iter().map(|&d| position_row(d, self.hyper.clip)).collect();
        let ev_rows: Vec<usize> = d_ev.iter().map(|&d| position_row(d, self.hyper.clip)).collect();
        let p_ds = self.pos_ds.gather_rows(&ds_rows)?;
        let p_ev = self.pos_ev.gather_rows(&ev_rows)?;
        Tensor::cat(&[words, p_ds, p_ev], 1)
    }

    /// Logits [1, 3].
    pub fn logits(&self, instance: &RelationInstance, mode: Mode, rng: &mut Rng) -> Result<Tensor> {
        let mut input = self.input_features(instance)?;
        let max_size = *self.hyper.cnn_filter_sizes.iter().max().unwrap();
        let len = input.shape()[0];
        if len < max_size {
            // Zero-pad short sentences to the largest filter size.
            let width = input.shape()[1];
            let pad = Tensor::zeros(&[max_size - len, width]);
            input = Tensor::cat(&[input, pad], 0)?;
        }
        let padded_len = input.shape()[0];
        let width = input.shape()[1];
        let mut pooled = Vec::with_capacity(self.convs.len());
        for bank in &self.convs {
            let positions = padded_len - bank.size + 1;
            let windows: Vec<Tensor> = (0..positions)
                .map(|p| input.narrow(0, p, bank.size)?.reshape(&[1, bank.size * width]))
                .collect::<Result<_>>()?;
            let stacked = Tensor::cat(&windows, 0)?;
            let bias = Tensor::ones(&[positions, 1]).matmul(&bank.bias)?;
            let conv = stacked.matmul(&bank.weights)?.add(&bias)?.tanh();
            pooled.push(conv.max_axis(0)?);
        }
        let features = Tensor::cat(&pooled, 1)?.dropout(self.hyper.cnn_dropout, mode, rng)?;
        features.matmul(&self.out_w)?.add(&self.out_b)
    }

    /// Probability distribution over the three labels; sums to 1.
    pub fn probabilities(&self, instance: &RelationInstance) -> Result<Vec<f64>> {
        let mut rng = Rng::seed_from(0);
        let logits = self.logits(instance, Mode::Eval, &mut rng)?;
        Ok(logits.softmax(1)?.to_vec())
    }

    /// Cross-entropy against the instance's own label.
    pub fn loss(&self, instance: &RelationInstance, mode: Mode, rng: &mut Rng) -> Result<Tensor> {
        let logits = self.logits(instance, mode, rng)?;
        nll_from_logits(&logits, instance.label.index())
    }
}

/// -log softmax(logits)[gold], computed stably via log-sum-exp.
pub fn nll_from_logits(logits: &Tensor, gold: usize) -> Result<Tensor> {
    let lse = logits.log_sum_exp(1)?.reshape(&[1])?;
    let gold_score = logits.gather_nd(&[(0, gold)])?;
    lse.sub(&gold_score)
}

/// Lowest-index argmax.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl RelationClassifier for CnnRelModel {
    fn classify(&self, instance: &RelationInstance) -> Result<RelationLabel> {
        let probs = self.probabilities(instance)?;
        Ok(RELATION_LABELS[argmax(&probs)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EntitySpan, Sentence};
    use crate::tensor::gradcheck::{finite_diff_grad, max_rel_err};

    fn tiny_hyper() -> ReHyper {
        ReHyper {
            word_dim: 5,
            pos_dim: 3,
            cnn_filter_sizes: vec![2, 3],
            cnn_filters_per_size: 4,
            cnn_dropout: 0.0,
            lstm_hidden: 4,
            l2: 0.0,
            clip: 6,
        }
    }

    fn tiny_model(seed: u64) -> CnnRelModel {
        let rng = Rng::seed_from(seed);
        let vocab: Vec<String> = ["takes", "garlic", "for", "nausea"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let words = EmbeddingTable::new_random(&vocab, 5, &mut rng.fork("w"), 0.5).unwrap();
        CnnRelModel::new(tiny_hyper(), words, &rng).unwrap()
    }

    fn instance(tokens: &[&str], ds: (usize, usize), ev: (usize, usize)) -> RelationInstance {
        RelationInstance::new(
            Sentence::new("s", tokens.iter().map(|s| s.to_string()).collect()).unwrap(),
            EntitySpan::ds(ds.0, ds.1),
            EntitySpan::event(ev.0, ev.1),
            RelationLabel::Positive,
        )
        .unwrap()
    }

    #[test]
    fn input_width_is_word_plus_two_position_dims() {
        let model = tiny_model(1);
        let inst = instance(&["takes", "garlic", "for", "nausea"], (1, 2), (3, 4));
        let input = model.input_features(&inst).unwrap();
        assert_eq!(input.shape(), vec![4, 5 + 2 * 3]);
        // Default geometry: word_dim + 200 with pos_dim 100.
        let d = ReHyper::default();
        assert_eq!(d.word_dim + 2 * d.pos_dim, d.word_dim + 200);
    }

    #[test]
    fn pooled_vector_length_is_sizes_times_filters() {
        let d = ReHyper::default();
        assert_eq!(d.cnn_filter_sizes.len() * d.cnn_filters_per_size, 384);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let model = tiny_model(2);
        let inst = instance(&["takes", "garlic", "for", "nausea"], (1, 2), (3, 4));
        let p = model.probabilities(&inst).unwrap();
        assert_eq!(p.len(), 3);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn short_sentence_is_zero_padded() {
        let model = tiny_model(3);
        // Two tokens with a size-3 filter in the bank.
        let inst = instance(&["garlic", "rash"], (0, 1), (1, 2));
        let p = model.probabilities(&inst).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn swapping_entity_roles_changes_the_input() {
        let model = tiny_model(4);
        let a = instance(&["x", "garlic", "y", "rash"], (1, 2), (3, 4));
        let mut b = a.clone();
        b.ds = EntitySpan::ds(3, 4);
        b.event = EntitySpan::event(1, 2);
        let ia = model.input_features(&a).unwrap().to_vec();
        let ib = model.input_features(&b).unwrap().to_vec();
        assert_ne!(ia, ib);
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        let model = tiny_model(5);
        let inst = instance(&["takes", "garlic", "for", "nausea"], (1, 2), (3, 4));
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
