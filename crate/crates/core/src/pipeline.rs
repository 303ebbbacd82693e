//! End-to-end pipeline orchestration shared by the CLI and the test suites:
//! split a corpus, build the vocabulary and word vectors, train one model
//! with early stopping, and score it on the held-out test split.

use std::path::PathBuf;
use std::time::Instant;

use crate::artifact::ModelArtifact;
use crate::corpus::{
    corpus_spans, RelationInstance, Sentence, TagSequence,
};
use crate::embeddings::{load_word_embeddings, token_vocab, EmbeddingTable};
use crate::error::{Error, Result};
use crate::evaluation::{ner_score, re_score, NerReport, ReReport};
use crate::ner::{BaselineCrfHyper, BaselineCrfModel, NerHyper, NerTagger, NerVariant, NeuralNerModel};
use crate::re::{rf_train, AttBlstmModel, CnnRelModel, ReHyper, RelationClassifier, RfHyper};
use crate::tensor::Rng;
use crate::training::{
    split, tasks, train, AttBlstmTrainTask, BaselineCrfTrainTask, CnnTrainTask, NerTrainTask,
    SplitSpec, TrainConfig, TrainOutcome,
};

/// Where word vectors come from: a fresh random table over the training
/// vocabulary, or a pretrained text-format file.
#[derive(Debug, Clone)]
pub enum WordSource {
    Random { dim: usize },
    File { path: PathBuf, trainable: bool },
}

impl WordSource {
    fn build(&self, train_tokens: impl Iterator<Item = String>, rng: &Rng) -> Result<EmbeddingTable> {
        match self {
            WordSource::Random { dim } => {
                let tokens: Vec<String> = train_tokens.collect();
                let vocab = token_vocab(tokens.iter().map(|s| s.as_str()));
                EmbeddingTable::new_random(&vocab, *dim, &mut rng.fork("word_emb"), 0.5)
            }
            WordSource::File { path, trainable } => load_word_embeddings(path, *trainable),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NerPipelineConfig {
    pub hyper: NerHyper,
    pub baseline: BaselineCrfHyper,
    pub train: TrainConfig,
    pub split: SplitSpec,
    pub words: WordSource,
}

pub struct NerRunOutcome {
    pub artifact: ModelArtifact,
    pub test: NerReport,
    pub dev_f1: f64,
    pub outcome: Option<TrainOutcome>,
    pub train_seconds: f64,
}

fn score_tagger(
    tagger: &dyn NerTagger,
    test: &[(Sentence, TagSequence)],
) -> Result<NerReport> {
    let gold = corpus_spans(test);
    let pred: Vec<(String, Vec<crate::corpus::EntitySpan>)> = test
        .iter()
        .map(|(s, _)| Ok((s.id.clone(), tagger.tag(s)?)))
        .collect::<Result<_>>()?;
    ner_score(&gold, &pred)
}

/// Split, build, train, and test one tagger (neural or baseline, per
/// `config.hyper.variant`). `run_seed` drives initialization, batch order,
/// and dropout; the split seed is independent so repeated runs share data.
pub fn train_ner_once(
    corpus: &[(Sentence, TagSequence)],
    config: &NerPipelineConfig,
    run_seed: u64,
) -> Result<NerRunOutcome> {
    let (train_set, dev_set, test_set) = split(corpus, &config.split)?;
    let rng = Rng::seed_from(run_seed);
    let started = Instant::now();
    if config.hyper.variant == NerVariant::BaselineCrf {
        let model = BaselineCrfModel::new(&train_set, config.baseline, &rng.fork("init"))?;
        let mut task = BaselineCrfTrainTask {
            model,
            train: train_set,
            dev: dev_set,
        };
        let outcome = train(&mut task, &config.train, &rng.fork("train"))?;
        let best = outcome.artifact.into_baseline()?;
        let test = score_tagger(&best, &test_set)?;
        Ok(NerRunOutcome {
            artifact: outcome.artifact.clone(),
            test,
            dev_f1: outcome.best_dev,
            train_seconds: started.elapsed().as_secs_f64(),
            outcome: Some(outcome),
        })
    } else {
        let words = config.words.build(
            train_set
                .iter()
                .flat_map(|(s, _)| s.tokens.iter().cloned()),
            &rng,
        )?;
        let model = NeuralNerModel::new(config.hyper, words, &rng.fork("init"))?;
        let mut task = NerTrainTask {
            model,
            train: train_set,
            dev: dev_set,
        };
        let outcome = train(&mut task, &config.train, &rng.fork("train"))?;
        let best = outcome.artifact.into_ner()?;
        let test = score_tagger(&best, &test_set)?;
        Ok(NerRunOutcome {
            artifact: outcome.artifact.clone(),
            test,
            dev_f1: outcome.best_dev,
            train_seconds: started.elapsed().as_secs_f64(),
            outcome: Some(outcome),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReModelKind {
    Cnn,
    AttBlstm,
    RandomForest,
}

impl ReModelKind {
    pub fn parse(s: &str) -> Option<ReModelKind> {
        match s {
            "cnn" => Some(ReModelKind::Cnn),
            "att_blstm" => Some(ReModelKind::AttBlstm),
            "rf" => Some(ReModelKind::RandomForest),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ReModelKind::Cnn => "cnn",
            ReModelKind::AttBlstm => "att_blstm",
            ReModelKind::RandomForest => "rf",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RePipelineConfig {
    pub kind: ReModelKind,
    pub hyper: ReHyper,
    pub rf: RfHyper,
    pub train: TrainConfig,
    pub split: SplitSpec,
    pub words: WordSource,
}

pub struct ReRunOutcome {
    pub artifact: ModelArtifact,
    pub test: ReReport,
    pub dev_f1: f64,
    pub outcome: Option<TrainOutcome>,
    pub train_seconds: f64,
}

fn score_classifier(
    classifier: &dyn RelationClassifier,
    test: &[RelationInstance],
) -> Result<ReReport> {
    let gold: Vec<_> = test.iter().map(|i| i.label).collect();
    let pred: Vec<_> = test
        .iter()
        .map(|i| classifier.classify(i))
        .collect::<Result<_>>()?;
    re_score(&gold, &pred)
}

/// Split, build, train, and test one relation classifier.
pub fn train_re_once(
    instances: &[RelationInstance],
    config: &RePipelineConfig,
    run_seed: u64,
) -> Result<ReRunOutcome> {
    let (train_set, dev_set, test_set) = split(instances, &config.split)?;
    if train_set.is_empty() {
        return Err(Error::InvalidArgument {
            op: "train_re_once",
            msg: "empty training split".into(),
        });
    }
    let rng = Rng::seed_from(run_seed);
    let started = Instant::now();
    match config.kind {
        ReModelKind::RandomForest => {
            let model = rf_train(&train_set, &config.rf, &rng.fork("rf"))?;
            let dev_f1 = tasks::classifier_dev_f1(&model, &dev_set)?;
            let test = score_classifier(&model, &test_set)?;
            Ok(ReRunOutcome {
                artifact: ModelArtifact::from_forest(&model),
                test,
                dev_f1,
                outcome: None,
                train_seconds: started.elapsed().as_secs_f64(),
            })
        }
        ReModelKind::Cnn => {
            let words = config.words.build(
                train_set
                    .iter()
                    .flat_map(|i| i.sentence.tokens.iter().cloned()),
                &rng,
            )?;
            let model = CnnRelModel::new(config.hyper.clone(), words, &rng.fork("init"))?;
            let mut task = CnnTrainTask {
                model,
                train: train_set,
                dev: dev_set,
            };
            let outcome = train(&mut task, &config.train, &rng.fork("train"))?;
            let best = outcome.artifact.into_re_cnn()?;
            let test = score_classifier(&best, &test_set)?;
            Ok(ReRunOutcome {
                artifact: outcome.artifact.clone(),
                test,
                dev_f1: outcome.best_dev,
                train_seconds: started.elapsed().as_secs_f64(),
                outcome: Some(outcome),
            })
        }
        ReModelKind::AttBlstm => {
            let words = config.words.build(
                train_set
                    .iter()
                    .flat_map(|i| i.sentence.tokens.iter().cloned()),
                &rng,
            )?;
            let model = AttBlstmModel::new(config.hyper.clone(), words, &rng.fork("init"))?;
            let mut task = AttBlstmTrainTask {
                model,
                train: train_set,
                dev: dev_set,
            };
            let outcome = train(&mut task, &config.train, &rng.fork("train"))?;
            let best = outcome.artifact.into_att_blstm()?;
            let test = score_classifier(&best, &test_set)?;
            Ok(ReRunOutcome {
                artifact: outcome.artifact.clone(),
                test,
                dev_f1: outcome.best_dev,
                train_seconds: started.elapsed().as_secs_f64(),
                outcome: Some(outcome),
            })
        }
    }
}
