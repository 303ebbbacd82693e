//! Character-level word features: a 1-D convolution with max-pooling over
//! character embeddings, or a character Bi-LSTM's final states.

use crate::embeddings::{char_indices, EmbeddingTable};
use crate::error::Result;
use crate::tensor::{Rng, Tensor};

use super::lstm::BiLstm;

/// Convolution over character embeddings: kernel windows are flattened and
/// multiplied against a [kernel·char_dim, filters] weight matrix, then
/// max-pooled over positions.
#[derive(Debug, Clone)]
pub struct CharCnn {
    pub weights: Tensor,
    pub bias: Tensor,
    pub kernel: usize,
    pub filters: usize,
    pub char_dim: usize,
}

impl CharCnn {
    pub fn new(char_dim: usize, kernel: usize, filters: usize, rng: &mut Rng) -> CharCnn {
        let fan_in = kernel * char_dim;
        let r = (6.0 / (fan_in + filters) as f64).sqrt();
        CharCnn {
            weights: Tensor::uniform(&[fan_in, filters], -r, r, rng, true),
            bias: Tensor::param(&[1, filters], vec![0.0; filters]).unwrap(),
            kernel,
            filters,
            char_dim,
        }
    }

    pub fn parameters(&self) -> Vec<Tensor> {
        vec![self.weights.clone(), self.bias.clone()]
    }

    /// [1, filters] feature vector for one word. Words shorter than the
    /// kernel are right-padded with the pad character (its embedding row is
    /// pinned at zero), so padding only ever enters the single unavoidable
    /// window.
    pub fn word_features(&self, word: &str, table: &EmbeddingTable) -> Result<Tensor> {
        let mut ids = char_indices(table, word);
        let pad_id = table.lookup(crate::embeddings::PAD_TOKEN);
        while ids.len() < self.kernel {
            ids.push(pad_id);
        }
        let emb = table.embed_rows(&ids)?;
        let positions = ids.len() - self.kernel + 1;
        let windows: Vec<Tensor> = (0..positions)
            .map(|p| {
                emb.narrow(0, p, self.kernel)?
                    .reshape(&[1, self.kernel * self.char_dim])
            })
            .collect::<Result<_>>()?;
        let stacked = Tensor::cat(&windows, 0)?;
        let bias_rows = Tensor::ones(&[positions, 1]).matmul(&self.bias)?;
        let conv = stacked.matmul(&self.weights)?.add(&bias_rows)?;
        conv.max_axis(0)
    }
}

/// Character Bi-LSTM features: final forward and final backward hidden
/// states concatenated, [1, 2·hidden].
pub fn char_lstm_word_features(
    word: &str,
    table: &EmbeddingTable,
    bilstm: &BiLstm,
) -> Result<Tensor> {
    let mut ids = char_indices(table, word);
    if ids.is_empty() {
        ids.push(table.unk_row());
    }
    let emb = table.embed_rows(&ids)?;
    bilstm.final_states(&emb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ner::lstm::LstmCell;

    fn char_table(seed: u64) -> EmbeddingTable {
        let mut rng = Rng::seed_from(seed);
        let table = EmbeddingTable::new_random_chars(6, &mut rng, 0.5).unwrap();
        // Pad row pinned at zero.
        let pad = table.lookup(crate::embeddings::PAD_TOKEN);
        let mut data = table.matrix().to_vec();
        for v in &mut data[pad * 6..(pad + 1) * 6] {
            *v = 0.0;
        }
        table.matrix().set_data(&data).unwrap();
        table
    }

    #[test]
    fn output_length_equals_filter_count() {
        let table = char_table(1);
        let cnn = CharCnn::new(6, 5, 300, &mut Rng::seed_from(2));
        let out = cnn.word_features("garlic", &table).unwrap();
        assert_eq!(out.shape(), vec![1, 300]);
    }

    #[test]
    fn one_char_word_is_padded_and_finite() {
        let table = char_table(3);
        let cnn = CharCnn::new(6, 5, 8, &mut Rng::seed_from(4));
        let out = cnn.word_features("a", &table).unwrap();
        assert_eq!(out.shape(), vec![1, 8]);
        assert!(out.to_vec().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn periodic_duplication_preserves_max_pool() {
        // "ababab" and "abababababab" expose the same set of kernel-5
        // windows, so max-pooling yields identical features.
        let table = char_table(5);
        let cnn = CharCnn::new(6, 5, 16, &mut Rng::seed_from(6));
        let a = cnn.word_features("ababab", &table).unwrap().to_vec();
        let b = cnn.word_features("abababababab", &table).unwrap().to_vec();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn char_lstm_output_length_is_twice_hidden() {
        let table = char_table(7);
        let bi = BiLstm::new(6, 25, &mut Rng::seed_from(8));
        let out = char_lstm_word_features("valerian", &table, &bi).unwrap();
        assert_eq!(out.shape(), vec![1, 50]);
    }

    #[test]
    fn zero_char_lstm_gives_zero_vector() {
        let table = char_table(9);
        let bi = BiLstm {
            fwd: LstmCell::zeroed(6, 4),
            bwd: LstmCell::zeroed(6, 4),
        };
        let out = char_lstm_word_features("zinc", &table, &bi).unwrap();
        assert!(out.to_vec().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn char_features_deterministic_per_seed() {
        let t1 = char_table(10);
        let t2 = char_table(10);
        let c1 = CharCnn::new(6, 3, 7, &mut Rng::seed_from(11));
        let c2 = CharCnn::new(6, 3, 7, &mut Rng::seed_from(11));
        assert_eq!(
            c1.word_features("ginkgo", &t1).unwrap().to_vec(),
            c2.word_features("ginkgo", &t2).unwrap().to_vec()
        );
    }
}
