//! Feature-based CRF baseline: sparse indicator features per position feed
//! linear per-tag emission scores into the same CRF layer the neural models
//! use. The feature set is small by design: word identity, 2/3-character
//! suffixes, coarse POS of the token and its neighbors, capitalization,
//! digit shape.

use std::collections::HashMap;

use crate::corpus::{tags_to_spans, DecodeMode, EntitySpan, Sentence, Tag, NUM_TAGS};
use crate::error::{Error, Result};
use crate::tensor::{Rng, Tensor};

use super::crf::{crf_nll, path_to_tags, viterbi, CrfParams};
use super::pos::tag_word;
use super::NerTagger;

/// Indicator features for position `i`; a pure function of the sentence and
/// position, emitted in a fixed order.
pub fn baseline_features(sentence: &Sentence, i: usize) -> Vec<String> {
    let word = &sentence.tokens[i];
    let lower = word.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut feats = Vec::with_capacity(10);
    feats.push("bias".to_string());
    feats.push(format!("w={lower}"));
    let suf = |n: usize| -> String { chars[chars.len().saturating_sub(n)..].iter().collect() };
    feats.push(format!("suf2={}", suf(2)));
    feats.push(format!("suf3={}", suf(3)));
    let pos_at = |j: isize| -> String {
        if j < 0 {
            "BOS".to_string()
        } else if j as usize >= sentence.len() {
            "EOS".to_string()
        } else {
            tag_word(&sentence.tokens[j as usize]).to_string()
        }
    };
    feats.push(format!("pos[-1]={}", pos_at(i as isize - 1)));
    feats.push(format!("pos[0]={}", pos_at(i as isize)));
    feats.push(format!("pos[+1]={}", pos_at(i as isize + 1)));
    if word.chars().next().is_some_and(|c| c.is_uppercase()) {
        feats.push("cap".to_string());
    }
    if !word.is_empty() && word.chars().all(|c| c.is_ascii_digit()) {
        feats.push("digit".to_string());
    }
    feats.push(format!("shape={}", shape_of(word)));
    feats
}

/// Compressed word shape: X/x/d/- runs collapsed ("Vit-B12" → "Xx-Xd").
fn shape_of(word: &str) -> String {
    let mut out = String::new();
    let mut last = '\0';
    for c in word.chars() {
        let s = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_ascii_digit() {
            'd'
        } else {
            '-'
        };
        if s != last {
            out.push(s);
            last = s;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineCrfHyper {
    /// L2 penalty on the feature weights.
    pub l2: f64,
}

impl Default for BaselineCrfHyper {
    fn default() -> Self {
        BaselineCrfHyper { l2: 1e-4 }
    }
}

use serde::{Deserialize, Serialize};

/// CRF over sparse indicator features.
#[derive(Debug, Clone)]
pub struct BaselineCrfModel {
    /// Feature names in index order.
    pub feature_names: Vec<String>,
    index: HashMap<String, usize>,
    /// [F, K] per-tag feature weights.
    pub weights: Tensor,
    pub crf: CrfParams,
    pub hyper: BaselineCrfHyper,
}

impl BaselineCrfModel {
    /// Build the feature space from a training corpus; weights start at 0.
    pub fn new(
        train: &[(Sentence, Vec<Tag>)],
        hyper: BaselineCrfHyper,
        rng: &Rng,
    ) -> Result<BaselineCrfModel> {
        if train.is_empty() {
            return Err(Error::InvalidArgument {
                op: "BaselineCrfModel::new",
                msg: "empty corpus".into(),
            });
        }
        let mut index = HashMap::new();
        let mut feature_names = Vec::new();
        for (sentence, _) in train {
            for i in 0..sentence.len() {
                for f in baseline_features(sentence, i) {
                    if !index.contains_key(&f) {
                        index.insert(f.clone(), feature_names.len());
                        feature_names.push(f);
                    }
                }
            }
        }
        let f = feature_names.len();
        let weights = Tensor::param(&[f, NUM_TAGS], vec![0.0; f * NUM_TAGS])?;
        let crf = CrfParams::new(NUM_TAGS, &mut rng.fork("crf"), 0.01);
        Ok(BaselineCrfModel {
            feature_names,
            index,
            weights,
            crf,
            hyper,
        })
    }

    pub fn from_parts(
        feature_names: Vec<String>,
        weights: Tensor,
        crf: CrfParams,
        hyper: BaselineCrfHyper,
    ) -> BaselineCrfModel {
        let index = feature_names
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i))
            .collect();
        BaselineCrfModel {
            feature_names,
            index,
            weights,
            crf,
            hyper,
        }
    }

    pub fn parameters(&self) -> Vec<Tensor> {
        let mut p = vec![self.weights.clone()];
        p.extend(self.crf.parameters());
        p
    }

    /// [L, K] emissions: sum of the active features' weight rows per
    /// position. Unseen features are skipped.
    pub fn emissions(&self, sentence: &Sentence) -> Result<Tensor> {
        let rows: Vec<Tensor> = (0..sentence.len())
            .map(|i| {
                let ids: Vec<usize> = baseline_features(sentence, i)
                    .iter()
                    .filter_map(|f| self.index.get(f).copied())
                    .collect();
                if ids.is_empty() {
                    Ok(Tensor::zeros(&[1, NUM_TAGS]))
                } else {
                    self.weights.gather_rows(&ids)?.sum_axis(0)
                }
            })
            .collect::<Result<_>>()?;
        Tensor::cat(&rows, 0)
    }

    /// CRF NLL plus the L2 penalty.
    pub fn sentence_loss(&self, sentence: &Sentence, tags: &[Tag]) -> Result<Tensor> {
        let emissions = self.emissions(sentence)?;
        let indices: Vec<usize> = tags.iter().map(|t| t.index()).collect();
        let nll = crf_nll(&emissions, &indices, &self.crf)?;
        if self.hyper.l2 > 0.0 {
            let penalty = self.weights.mul(&self.weights)?.sum_all().scale(self.hyper.l2);
            nll.add(&penalty)
        } else {
            Ok(nll)
        }
    }

    pub fn predict_tags(&self, sentence: &Sentence) -> Result<Vec<Tag>> {
        let emissions = self.emissions(sentence)?;
        let (path, _) = viterbi(&emissions, &self.crf)?;
        Ok(path_to_tags(&path))
    }
}

impl NerTagger for BaselineCrfModel {
    fn tag(&self, sentence: &Sentence) -> Result<Vec<EntitySpan>> {
        if sentence.tokens.is_empty() {
            return Err(Error::InvalidArgument {
                op: "BaselineCrfModel::tag",
                msg: "empty token stream".into(),
            });
        }
        let tags = self.predict_tags(sentence)?;
        tags_to_spans(&tags, DecodeMode::Lenient)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentence(tokens: &[&str]) -> Sentence {
        Sentence::new("s", tokens.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn features_contain_suffixes_and_boundaries() {
        let s = sentence(&["she", "takes", "turmeric", "daily"]);
        let feats = baseline_features(&s, 2);
        assert!(feats.contains(&"suf3=ric".to_string()), "{feats:?}");
        assert!(feats.contains(&"suf2=ic".to_string()));
        assert!(feats.contains(&"w=turmeric".to_string()));
        let first = baseline_features(&s, 0);
        assert!(first.contains(&"pos[-1]=BOS".to_string()));
        let last = baseline_features(&s, 3);
        assert!(last.contains(&"pos[+1]=EOS".to_string()));
    }

    #[test]
    fn features_are_pure() {
        let s = sentence(&["garlic", "caused", "rash"]);
        assert_eq!(baseline_features(&s, 1), baseline_features(&s, 1));
    }

    #[test]
    fn shape_compresses_runs() {
        assert_eq!(shape_of("Vit-B12"), "Xx-Xd");
        assert_eq!(shape_of("turmeric"), "x");
        assert_eq!(shape_of("500"), "d");
    }

    #[test]
    fn short_word_suffixes_are_whole_word() {
        let s = sentence(&["a", "b"]);
        let feats = baseline_features(&s, 0);
        assert!(feats.contains(&"suf2=a".to_string()));
        assert!(feats.contains(&"suf3=a".to_string()));
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(BaselineCrfModel::new(&[], BaselineCrfHyper::default(), &Rng::seed_from(1)).is_err());
    }

    #[test]
    fn emissions_shape() {
        let s = sentence(&["takes", "garlic", "for", "nausea"]);
        let tags = vec![Tag::O, Tag::BDs, Tag::O, Tag::BEvent];
        let model = BaselineCrfModel::new(
            &[(s.clone(), tags)],
            BaselineCrfHyper::default(),
            &Rng::seed_from(2),
        )
        .unwrap();
        assert_eq!(model.emissions(&s).unwrap().shape(), vec![4, NUM_TAGS]);
    }
}
