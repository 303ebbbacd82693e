//! [`TrainableModel`] adapters binding each model family to its corpus and
//! dev metric.

use crate::artifact::ModelArtifact;
use crate::corpus::{tags_to_spans, DecodeMode, RelationInstance, Sentence, TagSequence};
use crate::error::Result;
use crate::evaluation::{ner_score, re_score};
use crate::ner::{BaselineCrfModel, NerTagger, NeuralNerModel};
use crate::re::{AttBlstmModel, CnnRelModel, RelationClassifier};
use crate::tensor::{Mode, Rng, Tensor};

use super::trainer::TrainableModel;

fn mean_of(losses: Vec<Tensor>) -> Result<Tensor> {
    let n = losses.len() as f64;
    let mut it = losses.into_iter();
    let mut total = it.next().expect("non-empty batch");
    for l in it {
        total = total.add(&l)?;
    }
    Ok(total.scale(1.0 / n))
}

/// Entity-level micro-F1 of a tagger over a tagged dev set.
pub fn tagger_dev_f1(
    tagger: &dyn NerTagger,
    dev: &[(Sentence, TagSequence)],
) -> Result<f64> {
    let mut gold = Vec::with_capacity(dev.len());
    let mut pred = Vec::with_capacity(dev.len());
    for (sentence, tags) in dev {
        gold.push((sentence.id.clone(), tags_to_spans(tags, DecodeMode::Strict)?));
        pred.push((sentence.id.clone(), tagger.tag(sentence)?));
    }
    Ok(ner_score(&gold, &pred)?.micro.f1)
}

/// Micro-F1 (= accuracy) of a relation classifier over labeled instances.
pub fn classifier_dev_f1(
    classifier: &dyn RelationClassifier,
    dev: &[RelationInstance],
) -> Result<f64> {
    let gold: Vec<_> = dev.iter().map(|i| i.label).collect();
    let pred: Vec<_> = dev
        .iter()
        .map(|i| classifier.classify(i))
        .collect::<Result<_>>()?;
    Ok(re_score(&gold, &pred)?.micro.f1)
}

pub struct NerTrainTask {
    pub model: NeuralNerModel,
    pub train: Vec<(Sentence, TagSequence)>,
    pub dev: Vec<(Sentence, TagSequence)>,
}

impl TrainableModel for NerTrainTask {
    fn num_train(&self) -> usize {
        self.train.len()
    }

    fn batch_loss(&mut self, indices: &[usize], rng: &mut Rng) -> Result<Tensor> {
        let losses: Vec<Tensor> = indices
            .iter()
            .map(|&i| {
                let (sentence, tags) = &self.train[i];
                self.model.sentence_loss(sentence, tags, Mode::Train, rng)
            })
            .collect::<Result<_>>()?;
        mean_of(losses)
    }

    fn parameters(&self) -> Vec<Tensor> {
        self.model.parameters()
    }

    fn post_update(&mut self) {
        self.model.pin_pad_row();
    }

    fn dev_metric(&mut self) -> Result<f64> {
        tagger_dev_f1(&self.model, &self.dev)
    }

    fn snapshot(&self) -> Result<ModelArtifact> {
        Ok(ModelArtifact::from_ner(&self.model))
    }
}

pub struct BaselineCrfTrainTask {
    pub model: BaselineCrfModel,
    pub train: Vec<(Sentence, TagSequence)>,
    pub dev: Vec<(Sentence, TagSequence)>,
}

impl TrainableModel for BaselineCrfTrainTask {
    fn num_train(&self) -> usize {
        self.train.len()
    }

    fn batch_loss(&mut self, indices: &[usize], _rng: &mut Rng) -> Result<Tensor> {
        let losses: Vec<Tensor> = indices
            .iter()
            .map(|&i| {
                let (sentence, tags) = &self.train[i];
                self.model.sentence_loss(sentence, tags)
            })
            .collect::<Result<_>>()?;
        mean_of(losses)
    }

    fn parameters(&self) -> Vec<Tensor> {
        self.model.parameters()
    }

    fn dev_metric(&mut self) -> Result<f64> {
        tagger_dev_f1(&self.model, &self.dev)
    }

    fn snapshot(&self) -> Result<ModelArtifact> {
        Ok(ModelArtifact::from_baseline(&self.model))
    }
}

pub struct CnnTrainTask {
    pub model: CnnRelModel,
    pub train: Vec<RelationInstance>,
    pub dev: Vec<RelationInstance>,
}

impl TrainableModel for CnnTrainTask {
    fn num_train(&self) -> usize {
        self.train.len()
    }

    fn batch_loss(&mut self, indices: &[usize], rng: &mut Rng) -> Result<Tensor> {
        let losses: Vec<Tensor> = indices
            .iter()
            .map(|&i| self.model.loss(&self.train[i], Mode::Train, rng))
            .collect::<Result<_>>()?;
        mean_of(losses)
    }

    fn parameters(&self) -> Vec<Tensor> {
        self.model.parameters()
    }

    fn dev_metric(&mut self) -> Result<f64> {
        classifier_dev_f1(&self.model, &self.dev)
    }

    fn snapshot(&self) -> Result<ModelArtifact> {
        Ok(ModelArtifact::from_re_cnn(&self.model))
    }
}

pub struct AttBlstmTrainTask {
    pub model: AttBlstmModel,
    pub train: Vec<RelationInstance>,
    pub dev: Vec<RelationInstance>,
}

impl TrainableModel for AttBlstmTrainTask {
    fn num_train(&self) -> usize {
        self.train.len()
    }

    fn batch_loss(&mut self, indices: &[usize], rng: &mut Rng) -> Result<Tensor> {
        let losses: Vec<Tensor> = indices
            .iter()
            .map(|&i| self.model.loss(&self.train[i], Mode::Train, rng))
            .collect::<Result<_>>()?;
        mean_of(losses)
    }

    fn parameters(&self) -> Vec<Tensor> {
        self.model.parameters()
    }

    fn dev_metric(&mut self) -> Result<f64> {
        classifier_dev_f1(&self.model, &self.dev)
    }

    fn snapshot(&self) -> Result<ModelArtifact> {
        Ok(ModelArtifact::from_att_blstm(&self.model))
    }
}

#[cfg(test)]
mod tests {
    use super::super::trainer::{train, TrainConfig};
    use super::*;
    use crate::corpus::{spans_to_tags, EntitySpan};
    use crate::embeddings::EmbeddingTable;
    use crate::ner::{NerHyper, NerVariant};
    use crate::training::adam::AdamConfig;

    /// Memorization smoke test: a 10-sentence corpus is driven to low loss
    /// within a few hundred steps.
    #[test]
    fn memorizes_a_tiny_corpus() {
        let mut corpus = Vec::new();
        let ds_terms = ["garlic", "zinc", "niacin", "biotin", "ginger"];
        let ev_terms = ["rash", "nausea", "hives", "fatigue", "bruising"];
        for i in 0..5 {
            let tokens: Vec<String> = ["takes", ds_terms[i], "for", ev_terms[i]]
                .iter()
                .map(|s| s.to_string())
                .collect();
            let sentence = Sentence::new(format!("s{i}"), tokens).unwrap();
            let tags = spans_to_tags(&[EntitySpan::ds(1, 2), EntitySpan::event(3, 4)], 4).unwrap();
            corpus.push((sentence, tags));
            let tokens: Vec<String> = [ds_terms[i], "caused", ev_terms[4 - i]]
                .iter()
                .map(|s| s.to_string())
                .collect();
            let sentence = Sentence::new(format!("t{i}"), tokens).unwrap();
            let tags = spans_to_tags(&[EntitySpan::ds(0, 1), EntitySpan::event(2, 3)], 3).unwrap();
            corpus.push((sentence, tags));
        }
        let vocab: Vec<String> = {
            let mut v: Vec<String> = corpus
                .iter()
                .flat_map(|(s, _)| s.tokens.iter().map(|t| t.to_lowercase()))
                .collect();
            v.sort();
            v.dedup();
            v
        };
        let rng = Rng::seed_from(11);
        let words = EmbeddingTable::new_random(&vocab, 10, &mut rng.fork("emb"), 0.5).unwrap();
        let hyper = NerHyper {
            variant: NerVariant::WordOnly,
            word_dim: 10,
            word_lstm_hidden: 8,
            dropout: 0.0,
            ..NerHyper::default()
        };
        let model = NeuralNerModel::new(hyper, words, &rng).unwrap();
        let mut task = NerTrainTask {
            model,
            train: corpus.clone(),
            dev: corpus.clone(),
        };
        let config = TrainConfig {
            batch_size: 10,
            eval_every: 50,
            patience: 300,
            max_steps: 300,
            optimizer: AdamConfig {
                lr: 5e-3,
                ..AdamConfig::default()
            },
            clip_norm: 5.0,
        };
        let out = train(&mut task, &config, &rng).unwrap();
        let final_loss = out.log.last().unwrap().loss;
        assert!(final_loss < 0.05, "final loss {final_loss}");
        assert!(out.best_dev > 0.99, "dev f1 {}", out.best_dev);
    }
}
