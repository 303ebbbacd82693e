//! Versioned, self-describing model files. One JSON document holds the
//! family tag, hyperparameters, vocabularies, and every parameter tensor;
//! the same format serves both the taggers and the relation classifiers.
//! Serialization is deterministic, so identical training runs produce
//! byte-identical artifacts.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, EntitySpan, RelationInstance, RelationLabel};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result, ARTIFACT_VERSION};
use crate::ner::baseline::BaselineCrfHyper;
use crate::ner::charfeat::CharCnn;
use crate::ner::{BaselineCrfModel, BiLstm, CrfParams, LstmCell, NerHyper, NerTagger, NeuralNerModel};
use crate::re::forest::TreeNode;
use crate::re::{AttBlstmModel, CnnRelModel, RandomForestModel, ReHyper, RelationClassifier, RfHyper};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorData {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl TensorData {
    pub fn of(t: &Tensor) -> TensorData {
        TensorData {
            shape: t.shape(),
            data: t.to_vec(),
        }
    }

    pub fn to_param(&self) -> Result<Tensor> {
        Tensor::param(&self.shape, self.data.clone())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingData {
    pub tokens: Vec<String>,
    pub matrix: TensorData,
    pub trainable: bool,
    pub fold_case: bool,
}

impl EmbeddingData {
    fn of(table: &EmbeddingTable) -> EmbeddingData {
        EmbeddingData {
            tokens: table.tokens().to_vec(),
            matrix: TensorData::of(table.matrix()),
            trainable: table.trainable(),
            fold_case: table.fold_case(),
        }
    }

    fn build(&self) -> Result<EmbeddingTable> {
        let dim = self.matrix.shape[1];
        let rows: Vec<Vec<f64>> = self.matrix.data.chunks(dim).map(|c| c.to_vec()).collect();
        EmbeddingTable::from_rows_with(self.tokens.clone(), rows, self.trainable, self.fold_case)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LstmCellData {
    pub w: TensorData,
    pub u: TensorData,
    pub b: TensorData,
    pub input_dim: usize,
    pub hidden: usize,
}

impl LstmCellData {
    fn of(cell: &LstmCell) -> LstmCellData {
        LstmCellData {
            w: TensorData::of(&cell.w),
            u: TensorData::of(&cell.u),
            b: TensorData::of(&cell.b),
            input_dim: cell.input_dim,
            hidden: cell.hidden,
        }
    }

    fn build(&self) -> Result<LstmCell> {
        Ok(LstmCell {
            w: self.w.to_param()?,
            u: self.u.to_param()?,
            b: self.b.to_param()?,
            input_dim: self.input_dim,
            hidden: self.hidden,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiLstmData {
    pub fwd: LstmCellData,
    pub bwd: LstmCellData,
}

impl BiLstmData {
    fn of(b: &BiLstm) -> BiLstmData {
        BiLstmData {
            fwd: LstmCellData::of(&b.fwd),
            bwd: LstmCellData::of(&b.bwd),
        }
    }

    fn build(&self) -> Result<BiLstm> {
        Ok(BiLstm {
            fwd: self.fwd.build()?,
            bwd: self.bwd.build()?,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrfData {
    pub transitions: TensorData,
    pub start: TensorData,
    pub stop: TensorData,
    pub constrained: bool,
}

impl CrfData {
    fn of(crf: &CrfParams) -> CrfData {
        CrfData {
            transitions: TensorData::of(&crf.transitions),
            start: TensorData::of(&crf.start),
            stop: TensorData::of(&crf.stop),
            constrained: crf.is_constrained(),
        }
    }

    fn build(&self) -> Result<CrfParams> {
        let crf = CrfParams::from_tensors(
            self.transitions.to_param()?,
            self.start.to_param()?,
            self.stop.to_param()?,
        )?;
        if self.constrained {
            crf.constrain_bio()
        } else {
            Ok(crf)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharCnnData {
    pub weights: TensorData,
    pub bias: TensorData,
    pub kernel: usize,
    pub filters: usize,
    pub char_dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvBankData {
    pub size: usize,
    pub weights: TensorData,
    pub bias: TensorData,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelArtifact {
    NerNeural {
        hyper: NerHyper,
        words: EmbeddingData,
        chars: Option<EmbeddingData>,
        char_cnn: Option<CharCnnData>,
        char_lstm: Option<BiLstmData>,
        word_lstm: BiLstmData,
        proj_w: TensorData,
        proj_b: TensorData,
        crf: CrfData,
    },
    NerBaseline {
        hyper: BaselineCrfHyper,
        features: Vec<String>,
        weights: TensorData,
        crf: CrfData,
    },
    ReCnn {
        hyper: ReHyper,
        words: EmbeddingData,
        pos_ds: TensorData,
        pos_ev: TensorData,
        convs: Vec<ConvBankData>,
        out_w: TensorData,
        out_b: TensorData,
    },
    ReAttBlstm {
        hyper: ReHyper,
        words: EmbeddingData,
        lstm: BiLstmData,
        att_w: TensorData,
        out_w: TensorData,
        out_b: TensorData,
    },
    ReForest {
        hyper: RfHyper,
        features: Vec<String>,
        trees: Vec<TreeNode>,
    },
}

impl ModelArtifact {
    pub fn family(&self) -> &'static str {
        match self {
            ModelArtifact::NerNeural { .. } => "ner_neural",
            ModelArtifact::NerBaseline { .. } => "ner_baseline",
            ModelArtifact::ReCnn { .. } => "re_cnn",
            ModelArtifact::ReAttBlstm { .. } => "re_att_blstm",
            ModelArtifact::ReForest { .. } => "re_forest",
        }
    }

    pub fn is_ner(&self) -> bool {
        matches!(
            self,
            ModelArtifact::NerNeural { .. } | ModelArtifact::NerBaseline { .. }
        )
    }

    pub fn from_ner(model: &NeuralNerModel) -> ModelArtifact {
        ModelArtifact::NerNeural {
            hyper: model.hyper,
            words: EmbeddingData::of(&model.word_table),
            chars: model.char_table.as_ref().map(EmbeddingData::of),
            char_cnn: model.char_cnn.as_ref().map(|c| CharCnnData {
                weights: TensorData::of(&c.weights),
                bias: TensorData::of(&c.bias),
                kernel: c.kernel,
                filters: c.filters,
                char_dim: c.char_dim,
            }),
            char_lstm: model.char_lstm.as_ref().map(BiLstmData::of),
            word_lstm: BiLstmData::of(&model.word_bilstm),
            proj_w: TensorData::of(&model.proj_w),
            proj_b: TensorData::of(&model.proj_b),
            crf: CrfData::of(&model.crf),
        }
    }

    pub fn into_ner(&self) -> Result<NeuralNerModel> {
        match self {
            ModelArtifact::NerNeural {
                hyper,
                words,
                chars,
                char_cnn,
                char_lstm,
                word_lstm,
                proj_w,
                proj_b,
                crf,
            } => Ok(NeuralNerModel {
                hyper: *hyper,
                word_table: words.build()?,
                char_table: chars.as_ref().map(|c| c.build()).transpose()?,
                char_cnn: char_cnn
                    .as_ref()
                    .map(|c| -> Result<CharCnn> {
                        Ok(CharCnn {
                            weights: c.weights.to_param()?,
                            bias: c.bias.to_param()?,
                            kernel: c.kernel,
                            filters: c.filters,
                            char_dim: c.char_dim,
                        })
                    })
                    .transpose()?,
                char_lstm: char_lstm.as_ref().map(|l| l.build()).transpose()?,
                word_bilstm: word_lstm.build()?,
                proj_w: proj_w.to_param()?,
                proj_b: proj_b.to_param()?,
                crf: crf.build()?,
            }),
            other => Err(Error::Artifact(format!(
                "expected a ner_neural artifact, got {}",
                other.family()
            ))),
        }
    }

    pub fn from_baseline(model: &BaselineCrfModel) -> ModelArtifact {
        ModelArtifact::NerBaseline {
            hyper: model.hyper,
            features: model.feature_names.clone(),
            weights: TensorData::of(&model.weights),
            crf: CrfData::of(&model.crf),
        }
    }

    pub fn into_baseline(&self) -> Result<BaselineCrfModel> {
        match self {
            ModelArtifact::NerBaseline {
                hyper,
                features,
                weights,
                crf,
            } => Ok(BaselineCrfModel::from_parts(
                features.clone(),
                weights.to_param()?,
                crf.build()?,
                *hyper,
            )),
            other => Err(Error::Artifact(format!(
                "expected a ner_baseline artifact, got {}",
                other.family()
            ))),
        }
    }

    pub fn from_re_cnn(model: &CnnRelModel) -> ModelArtifact {
        ModelArtifact::ReCnn {
            hyper: model.hyper.clone(),
            words: EmbeddingData::of(&model.word_table),
            pos_ds: TensorData::of(&model.pos_ds),
            pos_ev: TensorData::of(&model.pos_ev),
            convs: model
                .convs
                .iter()
                .map(|c| ConvBankData {
                    size: c.size,
                    weights: TensorData::of(&c.weights),
                    bias: TensorData::of(&c.bias),
                })
                .collect(),
            out_w: TensorData::of(&model.out_w),
            out_b: TensorData::of(&model.out_b),
        }
    }

    pub fn into_re_cnn(&self) -> Result<CnnRelModel> {
        match self {
            ModelArtifact::ReCnn {
                hyper,
                words,
                pos_ds,
                pos_ev,
                convs,
                out_w,
                out_b,
            } => Ok(CnnRelModel {
                hyper: hyper.clone(),
                word_table: words.build()?,
                pos_ds: pos_ds.to_param()?,
                pos_ev: pos_ev.to_param()?,
                convs: convs
                    .iter()
                    .map(|c| -> Result<crate::re::cnn::ConvBank> {
                        Ok(crate::re::cnn::ConvBank {
                            size: c.size,
                            weights: c.weights.to_param()?,
                            bias: c.bias.to_param()?,
                        })
                    })
                    .collect::<Result<_>>()?,
                out_w: out_w.to_param()?,
                out_b: out_b.to_param()?,
            }),
            other => Err(Error::Artifact(format!(
                "expected a re_cnn artifact, got {}",
                other.family()
            ))),
        }
    }

    pub fn from_att_blstm(model: &AttBlstmModel) -> ModelArtifact {
        ModelArtifact::ReAttBlstm {
            hyper: model.hyper.clone(),
            words: EmbeddingData::of(&model.word_table),
            lstm: BiLstmData::of(&model.bilstm),
            att_w: TensorData::of(&model.att_w),
            out_w: TensorData::of(&model.out_w),
            out_b: TensorData::of(&model.out_b),
        }
    }

    pub fn into_att_blstm(&self) -> Result<AttBlstmModel> {
        match self {
            ModelArtifact::ReAttBlstm {
                hyper,
                words,
                lstm,
                att_w,
                out_w,
                out_b,
            } => Ok(AttBlstmModel {
                hyper: hyper.clone(),
                word_table: words.build()?,
                bilstm: lstm.build()?,
                att_w: att_w.to_param()?,
                out_w: out_w.to_param()?,
                out_b: out_b.to_param()?,
            }),
            other => Err(Error::Artifact(format!(
                "expected a re_att_blstm artifact, got {}",
                other.family()
            ))),
        }
    }

    pub fn from_forest(model: &RandomForestModel) -> ModelArtifact {
        ModelArtifact::ReForest {
            hyper: model.hyper.clone(),
            features: model.feature_names.clone(),
            trees: model.trees.clone(),
        }
    }

    pub fn into_forest(&self) -> Result<RandomForestModel> {
        match self {
            ModelArtifact::ReForest {
                hyper,
                features,
                trees,
            } => Ok(RandomForestModel::from_parts(
                hyper.clone(),
                features.clone(),
                trees.clone(),
            )),
            other => Err(Error::Artifact(format!(
                "expected a re_forest artifact, got {}",
                other.family()
            ))),
        }
    }

    /// Instantiate any NER family as a tagger.
    pub fn tagger(&self) -> Result<Box<dyn NerTagger>> {
        match self {
            ModelArtifact::NerNeural { .. } => Ok(Box::new(self.into_ner()?)),
            ModelArtifact::NerBaseline { .. } => Ok(Box::new(self.into_baseline()?)),
            other => Err(Error::Artifact(format!(
                "artifact family {} is not a tagger",
                other.family()
            ))),
        }
    }

    /// Instantiate any RE family as a classifier.
    pub fn classifier(&self) -> Result<Box<dyn RelationClassifier>> {
        match self {
            ModelArtifact::ReCnn { .. } => Ok(Box::new(self.into_re_cnn()?)),
            ModelArtifact::ReAttBlstm { .. } => Ok(Box::new(self.into_att_blstm()?)),
            ModelArtifact::ReForest { .. } => Ok(Box::new(self.into_forest()?)),
            other => Err(Error::Artifact(format!(
                "artifact family {} is not a relation classifier",
                other.family()
            ))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ArtifactFile {
    format_version: u32,
    model: ModelArtifact,
}

pub fn artifact_to_json(model: &ModelArtifact) -> Result<String> {
    Ok(serde_json::to_string(&ArtifactFile {
        format_version: ARTIFACT_VERSION,
        model: model.clone(),
    })?)
}

pub fn artifact_from_json(json: &str) -> Result<ModelArtifact> {
    #[derive(Deserialize)]
    struct VersionOnly {
        format_version: u32,
    }
    let v: VersionOnly = serde_json::from_str(json)?;
    if v.format_version != ARTIFACT_VERSION {
        return Err(Error::ArtifactVersion {
            found: v.format_version,
            expected: ARTIFACT_VERSION,
        });
    }
    let file: ArtifactFile = serde_json::from_str(json)?;
    Ok(file.model)
}

pub fn save_artifact(path: impl AsRef<Path>, model: &ModelArtifact) -> Result<()> {
    fs::write(path, artifact_to_json(model)?)?;
    Ok(())
}

pub fn load_artifact(path: impl AsRef<Path>) -> Result<ModelArtifact> {
    let text = fs::read_to_string(path.as_ref())?;
    artifact_from_json(&text)
}

/// Sanity fixture used by round-trip tests: prediction equality on a probe
/// instance.
pub fn probe_instance() -> RelationInstance {
    let sentence = Sentence::new(
        "probe",
        ["takes", "garlic", "for", "nausea"].iter().map(|s| s.to_string()).collect(),
    )
    .unwrap();
    RelationInstance::new(
        sentence,
        EntitySpan::ds(1, 2),
        EntitySpan::event(3, 4),
        RelationLabel::Positive,
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
        use crate::ner::NerVariant;
    use crate::tensor::Rng;

    fn word_table(seed: u64, trainable: bool) -> EmbeddingTable {
        let vocab: Vec<String> = ["takes", "garlic", "for", "nausea"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut rng = Rng::seed_from(seed);
        let t = EmbeddingTable::new_random(&vocab, 6, &mut rng, 0.5).unwrap();
        if trainable {
            t
        } else {
            EmbeddingTable::from_rows(
                t.tokens().to_vec(),
                t.matrix().to_vec().chunks(6).map(|c| c.to_vec()).collect(),
                false,
            )
            .unwrap()
        }
    }

    #[test]
    fn ner_artifact_round_trip_preserves_predictions() {
        let hyper = NerHyper {
            variant: NerVariant::CharCnn,
            word_dim: 6,
            word_lstm_hidden: 3,
            char_dim: 3,
            char_lstm_hidden: 2,
            char_cnn_filters: 4,
            char_cnn_kernel: 3,
            dropout: 0.2,
        };
        let model = NeuralNerModel::new(hyper, word_table(1, true), &Rng::seed_from(2)).unwrap();
        let artifact = ModelArtifact::from_ner(&model);
        let json = artifact_to_json(&artifact).unwrap();
        let back = artifact_from_json(&json).unwrap().into_ner().unwrap();
        let sentence = probe_instance().sentence;
        assert_eq!(model.tag(&sentence).unwrap(), back.tag(&sentence).unwrap());
        // Serialization is deterministic.
        assert_eq!(json, artifact_to_json(&ModelArtifact::from_ner(&model)).unwrap());
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let model = RandomForestModel::from_parts(
            RfHyper::default(),
            vec!["u=x".into()],
            vec![TreeNode::Leaf { label: 1 }],
        );
        let json = artifact_to_json(&ModelArtifact::from_forest(&model)).unwrap();
        let bumped = json.replace("\"format_version\":1", "\"format_version\":99");
        match artifact_from_json(&bumped) {
            Err(Error::ArtifactVersion { found, expected }) => {
                assert_eq!(found, 99);
                assert_eq!(expected, ARTIFACT_VERSION);
            }
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn family_dispatch_checks_kind() {
        let model = RandomForestModel::from_parts(
            RfHyper::default(),
            vec![],
            vec![TreeNode::Leaf { label: 0 }],
        );
        let artifact = ModelArtifact::from_forest(&model);
        assert!(artifact.classifier().is_ok());
        assert!(artifact.tagger().is_err());
        assert!(artifact.into_ner().is_err());
    }

    #[test]
    fn re_cnn_round_trip_preserves_probabilities() {
        let hyper = ReHyper {
            word_dim: 6,
            pos_dim: 3,
            cnn_filter_sizes: vec![2, 3],
            cnn_filters_per_size: 4,
            cnn_dropout: 0.3,
            lstm_hidden: 4,
            l2: 1e-4,
            clip: 5,
        };
        let model = CnnRelModel::new(hyper, word_table(3, false), &Rng::seed_from(4)).unwrap();
        let artifact = ModelArtifact::from_re_cnn(&model);
        let back = artifact_from_json(&artifact_to_json(&artifact).unwrap())
            .unwrap()
            .into_re_cnn()
            .unwrap();
        let inst = probe_instance();
        assert_eq!(
            model.probabilities(&inst).unwrap(),
            back.probabilities(&inst).unwrap()
        );
        // Frozen word table stays frozen through the round trip.
        assert!(!back.word_table.trainable());
    }

    #[test]
    fn att_blstm_round_trip_preserves_attention() {
        let hyper = ReHyper {
            word_dim: 6,
            pos_dim: 3,
            cnn_filter_sizes: vec![2],
            cnn_filters_per_size: 2,
            cnn_dropout: 0.3,
            lstm_hidden: 4,
            l2: 1e-4,
            clip: 5,
        };
        let model = AttBlstmModel::new(hyper, word_table(5, true), &Rng::seed_from(6)).unwrap();
        let artifact = ModelArtifact::from_att_blstm(&model);
        let back = artifact_from_json(&artifact_to_json(&artifact).unwrap())
            .unwrap()
            .into_att_blstm()
            .unwrap();
        let inst = probe_instance();
        let (pa, aa) = model.classify_with_attention(&inst).unwrap();
        let (pb, ab) = back.classify_with_attention(&inst).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(aa, ab);
    }
}
