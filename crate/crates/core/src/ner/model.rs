//! The neural taggers: a word-level Bi-LSTM feeding a linear projection into
//! the CRF layer, with three input compositions — word embeddings only, word
//! + char-CNN features, word + char-LSTM features.

use serde::{Deserialize, Serialize};

use crate::corpus::{tags_to_spans, DecodeMode, EntitySpan, Sentence, Tag, NUM_TAGS};
use crate::embeddings::{EmbeddingTable, PAD_TOKEN};
use crate::error::{Error, Result};
use crate::tensor::{Mode, Rng, Tensor};

use super::charfeat::{char_lstm_word_features, CharCnn};
use super::crf::{crf_nll, path_to_tags, viterbi, CrfParams};
use super::lstm::BiLstm;
use super::NerTagger;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NerVariant {
    WordOnly,
    CharLstm,
    CharCnn,
    BaselineCrf,
}

impl NerVariant {
    pub fn parse(s: &str) -> Option<NerVariant> {
        match s {
            "word_only" => Some(NerVariant::WordOnly),
            "char_lstm" => Some(NerVariant::CharLstm),
            "char_cnn" => Some(NerVariant::CharCnn),
            "baseline_crf" => Some(NerVariant::BaselineCrf),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            NerVariant::WordOnly => "word_only",
            NerVariant::CharLstm => "char_lstm",
            NerVariant::CharCnn => "char_cnn",
            NerVariant::BaselineCrf => "baseline_crf",
        }
    }

    pub fn all() -> [NerVariant; 4] {
        [
            NerVariant::WordOnly,
            NerVariant::CharLstm,
            NerVariant::CharCnn,
            NerVariant::BaselineCrf,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NerHyper {
    pub variant: NerVariant,
    /// Word embedding dimension when no pretrained file is given.
    pub word_dim: usize,
    pub word_lstm_hidden: usize,
    pub char_dim: usize,
    pub char_lstm_hidden: usize,
    pub char_cnn_filters: usize,
    pub char_cnn_kernel: usize,
    pub dropout: f64,
}

impl Default for NerHyper {
    fn default() -> Self {
        NerHyper {
            variant: NerVariant::WordOnly,
            word_dim: 50,
            word_lstm_hidden: 256,
            char_dim: 25,
            char_lstm_hidden: 25,
            char_cnn_filters: 300,
            char_cnn_kernel: 5,
            dropout: 0.5,
        }
    }
}

impl NerHyper {
    pub fn for_variant(variant: NerVariant) -> NerHyper {
        NerHyper {
            variant,
            ..NerHyper::default()
        }
    }
}

/// Bi-LSTM-CRF tagger over one of the three input compositions.
#[derive(Debug, Clone)]
pub struct NeuralNerModel {
    pub hyper: NerHyper,
    pub word_table: EmbeddingTable,
    pub char_table: Option<EmbeddingTable>,
    pub char_cnn: Option<CharCnn>,
    pub char_lstm: Option<BiLstm>,
    pub word_bilstm: BiLstm,
    pub proj_w: Tensor,
    pub proj_b: Tensor,
    pub crf: CrfParams,
}

impl NeuralNerModel {
    /// Build a fresh model. The word table may be pretrained (frozen or
    /// trainable); character tables are always randomly initialized.
    pub fn new(hyper: NerHyper, word_table: EmbeddingTable, rng: &Rng) -> Result<NeuralNerModel> {
        if hyper.variant == NerVariant::BaselineCrf {
            return Err(Error::InvalidArgument {
                op: "NeuralNerModel::new",
                msg: "baseline_crf is not a neural variant".into(),
            });
        }
        let mut char_table = None;
        let mut char_cnn = None;
        let mut char_lstm = None;
        let char_feat_dim = match hyper.variant {
            NerVariant::WordOnly => 0,
            NerVariant::CharCnn => {
                let table =
                    EmbeddingTable::new_random_chars(hyper.char_dim, &mut rng.fork("char_emb"), 0.5)?;
                zero_pad_row(&table);
                char_table = Some(table);
                char_cnn = Some(CharCnn::new(
                    hyper.char_dim,
                    hyper.char_cnn_kernel,
                    hyper.char_cnn_filters,
                    &mut rng.fork("char_cnn"),
                ));
                hyper.char_cnn_filters
            }
            NerVariant::CharLstm => {
                let table =
                    EmbeddingTable::new_random_chars(hyper.char_dim, &mut rng.fork("char_emb"), 0.5)?;
                zero_pad_row(&table);
                char_table = Some(table);
                char_lstm = Some(BiLstm::new(
                    hyper.char_dim,
                    hyper.char_lstm_hidden,
                    &mut rng.fork("char_lstm"),
                ));
                2 * hyper.char_lstm_hidden
            }
            NerVariant::BaselineCrf => unreachable!(),
        };
        let input_dim = word_table.dim() + char_feat_dim;
        let word_bilstm = BiLstm::new(input_dim, hyper.word_lstm_hidden, &mut rng.fork("word_lstm"));
        let proj_in = 2 * hyper.word_lstm_hidden;
        let r = (6.0 / (proj_in + NUM_TAGS) as f64).sqrt();
        let proj_w = Tensor::uniform(&[proj_in, NUM_TAGS], -r, r, &mut rng.fork("proj"), true);
        let proj_b = Tensor::param(&[1, NUM_TAGS], vec![0.0; NUM_TAGS])?;
        let crf = CrfParams::new(NUM_TAGS, &mut rng.fork("crf"), 0.1).constrain_bio()?;
        Ok(NeuralNerModel {
            hyper,
            word_table,
            char_table,
            char_cnn,
            char_lstm,
            word_bilstm,
            proj_w,
            proj_b,
            crf,
        })
    }

    pub fn parameters(&self) -> Vec<Tensor> {
        let mut params = Vec::new();
        if self.word_table.trainable() {
            params.push(self.word_table.matrix().clone());
        }
        if let Some(t) = &self.char_table {
            params.push(t.matrix().clone());
        }
        if let Some(c) = &self.char_cnn {
            params.extend(c.parameters());
        }
        if let Some(l) = &self.char_lstm {
            params.extend(l.parameters());
        }
        params.extend(self.word_bilstm.parameters());
        params.push(self.proj_w.clone());
        params.push(self.proj_b.clone());
        params.extend(self.crf.parameters());
        params
    }

    /// Keep the pad character's embedding pinned at zero; call after every
    /// optimizer update.
    pub fn pin_pad_row(&self) {
        if let Some(t) = &self.char_table {
            zero_pad_row(t);
        }
    }

    /// Per-token input features: word vector, optionally concatenated with
    /// character-level features.
    fn input_features(&self, tokens: &[String]) -> Result<Tensor> {
        let refs: Vec<&str> = tokens.iter().map(|s| s.as_str()).collect();
        let words = self.word_table.embed_tokens(&refs)?;
        match self.hyper.variant {
            NerVariant::WordOnly => Ok(words),
            NerVariant::CharCnn => {
                let table = self.char_table.as_ref().unwrap();
                let cnn = self.char_cnn.as_ref().unwrap();
                let rows: Vec<Tensor> = tokens
                    .iter()
                    .map(|w| cnn.word_features(w, table))
                    .collect::<Result<_>>()?;
                let chars = Tensor::cat(&rows, 0)?;
                Tensor::cat(&[words, chars], 1)
            }
            NerVariant::CharLstm => {
                let table = self.char_table.as_ref().unwrap();
                let bilstm = self.char_lstm.as_ref().unwrap();
                let rows: Vec<Tensor> = tokens
                    .iter()
                    .map(|w| char_lstm_word_features(w, table, bilstm))
                    .collect::<Result<_>>()?;
                let chars = Tensor::cat(&rows, 0)?;
                Tensor::cat(&[words, chars], 1)
            }
            NerVariant::BaselineCrf => unreachable!(),
        }
    }

    /// [L, K] emission scores. Dropout applies to the concatenated input
    /// vectors in train mode.
    pub fn emissions(&self, tokens: &[String], mode: Mode, rng: &mut Rng) -> Result<Tensor> {
        if tokens.is_empty() {
            return Err(Error::InvalidArgument {
                op: "NeuralNerModel::emissions",
                msg: "empty token stream".into(),
            });
        }
        let input = self
            .input_features(tokens)?
            .dropout(self.hyper.dropout, mode, rng)?;
        let enc = self.word_bilstm.encode(&input)?;
        let len = tokens.len();
        let bias = Tensor::ones(&[len, 1]).matmul(&self.proj_b)?;
        enc.matmul(&self.proj_w)?.add(&bias)
    }

    /// CRF negative log-likelihood of one tagged sentence.
    pub fn sentence_loss(
        &self,
        sentence: &Sentence,
        tags: &[Tag],
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Tensor> {
        let emissions = self.emissions(&sentence.tokens, mode, rng)?;
        let indices: Vec<usize> = tags.iter().map(|t| t.index()).collect();
        crf_nll(&emissions, &indices, &self.crf)
    }

    /// Viterbi-decode a sentence to tags (inference mode, deterministic).
    pub fn predict_tags(&self, sentence: &Sentence) -> Result<Vec<Tag>> {
        let mut rng = Rng::seed_from(0);
        let emissions = self.emissions(&sentence.tokens, Mode::Eval, &mut rng)?;
        let (path, _) = viterbi(&emissions, &self.crf)?;
        Ok(path_to_tags(&path))
    }
}

fn zero_pad_row(table: &EmbeddingTable) {
    let pad = table.lookup(PAD_TOKEN);
    let dim = table.dim();
    let mut data = table.matrix().to_vec();
    for v in &mut data[pad * dim..(pad + 1) * dim] {
        *v = 0.0;
    }
    table.matrix().set_data(&data).unwrap();
    if let Some(mut grad) = table.matrix().grad() {
        for g in &mut grad[pad * dim..(pad + 1) * dim] {
            *g = 0.0;
        }
    }
}

impl NerTagger for NeuralNerModel {
    fn tag(&self, sentence: &Sentence) -> Result<Vec<EntitySpan>> {
        let tags = self.predict_tags(sentence)?;
        tags_to_spans(&tags, DecodeMode::Lenient)
    }
}
