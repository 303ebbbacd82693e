//! Named entity recognition: exact linear-chain CRF inference, Bi-LSTM
//! encoders, character-level word features, the three neural tagger
//! variants, and the feature-based CRF baseline.

pub mod baseline;
pub mod charfeat;
pub mod crf;
pub mod lstm;
pub mod model;
pub mod pos;

pub use baseline::{baseline_features, BaselineCrfHyper, BaselineCrfModel};
pub use charfeat::{char_lstm_word_features, CharCnn};
pub use crf::{crf_log_partition, crf_nll, crf_path_score, path_to_tags, viterbi, CrfParams};
pub use lstm::{BiLstm, LstmCell};
pub use model::{NerHyper, NerVariant, NeuralNerModel};

use crate::corpus::{EntitySpan, Sentence};
use crate::error::Result;

/// Anything that maps a sentence to entity spans.
pub trait NerTagger {
    fn tag(&self, sentence: &Sentence) -> Result<Vec<EntitySpan>>;
}
