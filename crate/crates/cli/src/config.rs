//! Experiment configuration: a TOML file of key-value sections with unknown
//! keys rejected. Command-line flags override config values; every key has
//! a default, so the file (and any section in it) is optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use supsig::corpus::SyntheticConfig;
use supsig::error::{Error, Result};
use supsig::ner::{BaselineCrfHyper, NerHyper, NerVariant};
use supsig::pipeline::{NerPipelineConfig, ReModelKind, RePipelineConfig, WordSource};
use supsig::re::{ReHyper, RfHyper};
use supsig::training::{AdamConfig, SplitSpec, TrainConfig};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub data: DataSection,
    pub corpus: CorpusSection,
    pub split: SplitSection,
    pub embeddings: EmbeddingsSection,
    pub ner: NerSection,
    pub re: ReSection,
    pub train: TrainSection,
    pub discover: DiscoverSection,
}

/// Input file locations (flags override).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub ner_corpus: Option<PathBuf>,
    pub re_corpus: Option<PathBuf>,
    pub sentences: Option<PathBuf>,
    pub kb: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub event_synonyms: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSection {
    pub ner_sentences: usize,
    pub re_sentences: usize,
    pub relation_mix: [f64; 3],
    pub ner_mix: [f64; 4],
    pub signal_count: usize,
    pub variant_prob: f64,
    pub typo_prob: f64,
}

impl Default for CorpusSection {
    fn default() -> Self {
        let d = SyntheticConfig::default();
        CorpusSection {
            ner_sentences: d.ner_sentences,
            re_sentences: d.re_sentences,
            relation_mix: d.relation_mix,
            ner_mix: d.ner_mix,
            signal_count: d.signal_count,
            variant_prob: d.variant_prob,
            typo_prob: d.typo_prob,
        }
    }
}

impl CorpusSection {
    pub fn to_synthetic(&self) -> SyntheticConfig {
        SyntheticConfig {
            ner_sentences: self.ner_sentences,
            re_sentences: self.re_sentences,
            relation_mix: self.relation_mix,
            ner_mix: self.ner_mix,
            signal_count: self.signal_count,
            variant_prob: self.variant_prob,
            typo_prob: self.typo_prob,
            ..SyntheticConfig::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            fractions: [0.8, 0.1, 0.1],
            seed: 1234,
        }
    }
}

impl SplitSection {
    pub fn to_spec(&self) -> SplitSpec {
        SplitSpec {
            fractions: self.fractions,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingsSection {
    /// Text-format word vectors; random initialization when omitted.
    pub path: Option<PathBuf>,
    pub dim: usize,
    pub trainable: bool,
}

impl Default for EmbeddingsSection {
    fn default() -> Self {
        EmbeddingsSection {
            path: None,
            dim: 50,
            trainable: true,
        }
    }
}

impl EmbeddingsSection {
    pub fn to_source(&self) -> WordSource {
        match &self.path {
            Some(path) => WordSource::File {
                path: path.clone(),
                trainable: self.trainable,
            },
            None => WordSource::Random { dim: self.dim },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NerSection {
    pub variant: String,
    pub word_lstm_hidden: usize,
    pub char_dim: usize,
    pub char_lstm_hidden: usize,
    pub char_cnn_filters: usize,
    pub char_cnn_kernel: usize,
    pub dropout: f64,
    /// L2 penalty of the baseline CRF's feature weights.
    pub l2: f64,
}

impl Default for NerSection {
    fn default() -> Self {
        let d = NerHyper::default();
        NerSection {
            variant: "char_cnn".to_string(),
            word_lstm_hidden: d.word_lstm_hidden,
            char_dim: d.char_dim,
            char_lstm_hidden: d.char_lstm_hidden,
            char_cnn_filters: d.char_cnn_filters,
            char_cnn_kernel: d.char_cnn_kernel,
            dropout: d.dropout,
            l2: BaselineCrfHyper::default().l2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReSection {
    pub model: String,
    pub pos_dim: usize,
    pub cnn_filter_sizes: Vec<usize>,
    pub cnn_filters_per_size: usize,
    pub cnn_dropout: f64,
    pub lstm_hidden: usize,
    pub l2: f64,
    pub clip: i64,
    pub rf_trees: usize,
    pub rf_max_depth: Option<usize>,
}

impl Default for ReSection {
    fn default() -> Self {
        let d = ReHyper::default();
        ReSection {
            model: "att_blstm".to_string(),
            pos_dim: d.pos_dim,
            cnn_filter_sizes: d.cnn_filter_sizes,
            cnn_filters_per_size: d.cnn_filters_per_size,
            cnn_dropout: d.cnn_dropout,
            lstm_hidden: d.lstm_hidden,
            l2: d.l2,
            clip: d.clip,
            rf_trees: RfHyper::default().n_trees,
            rf_max_depth: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub batch_size: usize,
    pub eval_every: usize,
    pub patience: usize,
    pub max_steps: usize,
    pub lr: f64,
    pub clip_norm: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            batch_size: d.batch_size,
            eval_every: d.eval_every,
            patience: d.patience,
            max_steps: d.max_steps,
            lr: d.optimizer.lr,
            clip_norm: d.clip_norm,
        }
    }
}

impl TrainSection {
    pub fn to_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            eval_every: self.eval_every,
            patience: self.patience,
            max_steps: self.max_steps,
            optimizer: AdamConfig {
                lr: self.lr,
                ..AdamConfig::default()
            },
            clip_norm: self.clip_norm,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscoverSection {
    /// Keep pairs with source-sentence frequency strictly greater than this.
    pub threshold: usize,
    /// Example sentences attached per reported pair.
    pub examples: usize,
}

impl Default for DiscoverSection {
    fn default() -> Self {
        DiscoverSection {
            threshold: 10,
            examples: 10,
        }
    }
}

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "SUPSIG_CONFIG";

impl ExperimentConfig {
    /// Load from `--config`, else from `$SUPSIG_CONFIG`, else defaults.
    pub fn load(flag: Option<&Path>) -> Result<ExperimentConfig> {
        let path = match flag {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var(CONFIG_ENV).ok().map(PathBuf::from),
        };
        match path {
            Some(path) => {
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    Error::Config(format!("cannot read config {}: {e}", path.display()))
                })?;
                toml::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            }
            None => Ok(ExperimentConfig::default()),
        }
    }

    pub fn ner_variant(&self) -> Result<NerVariant> {
        NerVariant::parse(&self.ner.variant).ok_or_else(|| {
            Error::Config(format!(
                "unknown ner variant {:?}; expected one of word_only, char_lstm, char_cnn, baseline_crf",
                self.ner.variant
            ))
        })
    }

    pub fn re_kind(&self) -> Result<ReModelKind> {
        ReModelKind::parse(&self.re.model).ok_or_else(|| {
            Error::Config(format!(
                "unknown re model {:?}; expected one of cnn, att_blstm, rf",
                self.re.model
            ))
        })
    }

    pub fn ner_pipeline(&self, variant: NerVariant) -> NerPipelineConfig {
        NerPipelineConfig {
            hyper: NerHyper {
                variant,
                word_dim: self.embeddings.dim,
                word_lstm_hidden: self.ner.word_lstm_hidden,
                char_dim: self.ner.char_dim,
                char_lstm_hidden: self.ner.char_lstm_hidden,
                char_cnn_filters: self.ner.char_cnn_filters,
                char_cnn_kernel: self.ner.char_cnn_kernel,
                dropout: self.ner.dropout,
            },
            baseline: BaselineCrfHyper { l2: self.ner.l2 },
            train: self.train.to_config(),
            split: self.split.to_spec(),
            words: self.embeddings.to_source(),
        }
    }

    pub fn re_pipeline(&self, kind: ReModelKind) -> RePipelineConfig {
        RePipelineConfig {
            kind,
            hyper: ReHyper {
                word_dim: self.embeddings.dim,
                pos_dim: self.re.pos_dim,
                cnn_filter_sizes: self.re.cnn_filter_sizes.clone(),
                cnn_filters_per_size: self.re.cnn_filters_per_size,
                cnn_dropout: self.re.cnn_dropout,
                lstm_hidden: self.re.lstm_hidden,
                l2: self.re.l2,
                clip: self.re.clip,
            },
            rf: RfHyper {
                n_trees: self.re.rf_trees,
                max_depth: self.re.rf_max_depth,
                ..RfHyper::default()
            },
            train: self.train.to_config(),
            split: self.split.to_spec(),
            words: self.embeddings.to_source(),
        }
    }

    /// Canonical JSON of the resolved config (hashed into run manifests).
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_without_file() {
        let config = ExperimentConfig::default();
        assert_eq!(config.corpus.ner_sentences, 7000);
        assert_eq!(config.train.patience, 500);
        assert_eq!(config.discover.threshold, 10);
        assert_eq!(config.ner.word_lstm_hidden, 256);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = toml::from_str::<ExperimentConfig>("[train]\nbogus_key = 1\n");
        assert!(err.is_err());
        let err = toml::from_str::<ExperimentConfig>("[nonexistent_section]\nx = 1\n");
        assert!(err.is_err());
    }

    #[test]
    fn partial_file_overrides_only_named_keys() {
        let config: ExperimentConfig =
            toml::from_str("[train]\npatience = 200\n\n[ner]\nvariant = \"word_only\"\n").unwrap();
        assert_eq!(config.train.patience, 200);
        assert_eq!(config.train.batch_size, 32);
        assert_eq!(config.ner_variant().unwrap(), NerVariant::WordOnly);
    }

    #[test]
    fn bad_variant_is_config_error() {
        let config: ExperimentConfig = toml::from_str("[ner]\nvariant = \"bogus\"\n").unwrap();
        assert!(config.ner_variant().is_err());
    }
}
