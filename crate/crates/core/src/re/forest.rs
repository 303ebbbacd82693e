//! Random forest over bag-of-n-gram features: bagged CART trees split on
//! feature presence by Gini impurity, sqrt-of-features subsampling per
//! split, majority vote with ties toward the lowest label index.
//! Deterministic for a given seed.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{RelationInstance, RelationLabel, RELATION_LABELS};
use crate::error::{Error, Result};
use crate::tensor::Rng;

use super::{ngram_featurize, RelationClassifier, RfHyper};

const NUM_CLASSES: usize = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        label: usize,
    },
    Split {
        feature: u32,
        present: Box<TreeNode>,
        absent: Box<TreeNode>,
    },
}

impl TreeNode {
    fn predict(&self, features: &HashSet<u32>) -> usize {
        match self {
            TreeNode::Leaf { label } => *label,
            TreeNode::Split {
                feature,
                present,
                absent,
            } => {
                if features.contains(feature) {
                    present.predict(features)
                } else {
                    absent.predict(features)
                }
            }
        }
    }

    fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { present, absent, .. } => 1 + present.depth().max(absent.depth()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomForestModel {
    pub hyper: RfHyper,
    /// Feature strings in id order.
    pub feature_names: Vec<String>,
    pub trees: Vec<TreeNode>,
    feature_ids: BTreeMap<String, u32>,
}

impl RandomForestModel {
    pub fn from_parts(hyper: RfHyper, feature_names: Vec<String>, trees: Vec<TreeNode>) -> Self {
        let feature_ids = feature_names
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i as u32))
            .collect();
        RandomForestModel {
            hyper,
            feature_names,
            trees,
            feature_ids,
        }
    }

    pub fn featurize(&self, instance: &RelationInstance) -> HashSet<u32> {
        ngram_featurize(instance, &self.hyper.ngram_orders)
            .into_iter()
            .filter_map(|f| self.feature_ids.get(&f).copied())
            .collect()
    }

    pub fn max_tree_depth(&self) -> usize {
        self.trees.iter().map(|t| t.depth()).max().unwrap_or(0)
    }
}

fn gini(counts: &[usize; NUM_CLASSES]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p * p
        })
        .sum::<f64>()
}

fn majority(counts: &[usize; NUM_CLASSES]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

struct TreeBuilder<'a> {
    features: &'a [HashSet<u32>],
    labels: &'a [usize],
    n_features: usize,
    n_candidates: usize,
    max_depth: Option<usize>,
}

impl TreeBuilder<'_> {
    fn class_counts(&self, indices: &[usize]) -> [usize; NUM_CLASSES] {
        let mut counts = [0usize; NUM_CLASSES];
        for &i in indices {
            counts[self.labels[i]] += 1;
        }
        counts
    }

    fn build(&self, indices: &[usize], depth: usize, rng: &mut Rng) -> TreeNode {
        let counts = self.class_counts(indices);
        let parent_gini = gini(&counts);
        let stop = parent_gini == 0.0
            || indices.len() < 2
            || self.max_depth.is_some_and(|d| depth >= d);
        if stop {
            return TreeNode::Leaf {
                label: majority(&counts),
            };
        }
        // Sample sqrt(F) distinct candidate features.
        let mut candidates: Vec<u32> = Vec::with_capacity(self.n_candidates);
        let mut seen = HashSet::new();
        while candidates.len() < self.n_candidates.min(self.n_features) {
            let f = rng.below(self.n_features) as u32;
            if seen.insert(f) {
                candidates.push(f);
            }
        }
        let n = indices.len() as f64;
        let mut best: Option<(f64, u32)> = None;
        for &f in &candidates {
            let mut present = [0usize; NUM_CLASSES];
            let mut n_present = 0usize;
            for &i in indices {
                if self.features[i].contains(&f) {
                    present[self.labels[i]] += 1;
                    n_present += 1;
                }
            }
            if n_present == 0 || n_present == indices.len() {
                continue;
            }
            let absent = [
                counts[0] - present[0],
                counts[1] - present[1],
                counts[2] - present[2],
            ];
            let n_absent = indices.len() - n_present;
            let weighted = (n_present as f64 / n) * gini(&present)
                + (n_absent as f64 / n) * gini(&absent);
            let gain = parent_gini - weighted;
            if gain > 1e-12 && best.map_or(true, |(g, _)| gain > g) {
                best = Some((gain, f));
            }
        }
        let Some((_, feature)) = best else {
            return TreeNode::Leaf {
                label: majority(&counts),
            };
        };
        let (p_idx, a_idx): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| self.features[i].contains(&feature));
        TreeNode::Split {
            feature,
            present: Box::new(self.build(&p_idx, depth + 1, rng)),
            absent: Box::new(self.build(&a_idx, depth + 1, rng)),
        }
    }
}

/// Train a forest. The feature vocabulary is built from the training
/// instances; each tree sees a bootstrap sample of the data.
pub fn rf_train(
    instances: &[RelationInstance],
    hyper: &RfHyper,
    rng: &Rng,
) -> Result<RandomForestModel> {
    hyper.validate()?;
    if instances.is_empty() {
        return Err(Error::InvalidArgument {
            op: "rf_train",
            msg: "empty training set".into(),
        });
    }
    let mut vocab: BTreeMap<String, u32> = BTreeMap::new();
    let mut raw: Vec<Vec<String>> = Vec::with_capacity(instances.len());
    for inst in instances {
        raw.push(ngram_featurize(inst, &hyper.ngram_orders));
    }
    for feats in &raw {
        for f in feats {
            let next = vocab.len() as u32;
            vocab.entry(f.clone()).or_insert(next);
        }
    }
    let features: Vec<HashSet<u32>> = raw
        .iter()
        .map(|feats| feats.iter().map(|f| vocab[f]).collect())
        .collect();
    let labels: Vec<usize> = instances.iter().map(|i| i.label.index()).collect();
    let n_features = vocab.len();
    let builder = TreeBuilder {
        features: &features,
        labels: &labels,
        n_features,
        n_candidates: (n_features as f64).sqrt().floor().max(1.0) as usize,
        max_depth: hyper.max_depth,
    };
    let trees: Vec<TreeNode> = (0..hyper.n_trees)
        .map(|t| {
            let mut tree_rng = rng.fork_indexed("tree", t as u64);
            let sample: Vec<usize> = (0..instances.len())
                .map(|_| tree_rng.below(instances.len()))
                .collect();
            builder.build(&sample, 0, &mut tree_rng)
        })
        .collect();
    let mut feature_names = vec![String::new(); n_features];
    for (name, id) in vocab {
        feature_names[id as usize] = name;
    }
    Ok(RandomForestModel::from_parts(
        hyper.clone(),
        feature_names,
        trees,
    ))
}

/// Majority vote over the forest; ties break toward the lowest label index.
pub fn rf_predict(model: &RandomForestModel, instance: &RelationInstance) -> RelationLabel {
    let features = model.featurize(instance);
    let mut votes = [0usize; NUM_CLASSES];
    for tree in &model.trees {
        votes[tree.predict(&features)] += 1;
    }
    RELATION_LABELS[majority(&votes)]
}

impl RelationClassifier for RandomForestModel {
    fn classify(&self, instance: &RelationInstance) -> Result<RelationLabel> {
        Ok(rf_predict(self, instance))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EntitySpan, Sentence};

    fn instance(tokens: &[&str], label: RelationLabel) -> RelationInstance {
        RelationInstance::new(
            Sentence::new("s", tokens.iter().map(|s| s.to_string()).collect()).unwrap(),
            EntitySpan::ds(0, 1),
            EntitySpan::event(tokens.len() - 1, tokens.len()),
            label,
        )
        .unwrap()
    }

    fn separable_data() -> Vec<RelationInstance> {
        let mut data = Vec::new();
        for i in 0..40 {
            let ds = format!("ds{i}");
            data.push(instance(&[&ds, "helped", "nausea"], RelationLabel::Positive));
            data.push(instance(&[&ds, "caused", "rash"], RelationLabel::Negative));
            data.push(instance(&[&ds, "unrelated", "cough"], RelationLabel::NotRelated));
        }
        data
    }

    #[test]
    fn single_class_data_always_predicts_that_class() {
        let data: Vec<_> = (0..10)
            .map(|i| {
                instance(
                    &[&format!("w{i}"), "caused", "rash"],
                    RelationLabel::Negative,
                )
            })
            .collect();
        let model = rf_train(&data, &RfHyper::default(), &Rng::seed_from(1)).unwrap();
        for inst in &data {
            assert_eq!(rf_predict(&model, inst), RelationLabel::Negative);
        }
        let unseen = instance(&["anything", "whatever", "else"], RelationLabel::Positive);
        assert_eq!(rf_predict(&model, &unseen), RelationLabel::Negative);
    }

    #[test]
    fn separable_data_reaches_perfect_training_accuracy() {
        let data = separable_data();
        let hyper = RfHyper {
            n_trees: 50,
            ..RfHyper::default()
        };
        let model = rf_train(&data, &hyper, &Rng::seed_from(2)).unwrap();
        let correct = data
            .iter()
            .filter(|i| rf_predict(&model, i) == i.label)
            .count();
        assert_eq!(correct, data.len());
    }

    #[test]
    fn deterministic_per_seed() {
        let data = separable_data();
        let hyper = RfHyper {
            n_trees: 10,
            ..RfHyper::default()
        };
        let a = rf_train(&data, &hyper, &Rng::seed_from(7)).unwrap();
        let b = rf_train(&data, &hyper, &Rng::seed_from(7)).unwrap();
        for inst in &data {
            assert_eq!(rf_predict(&a, inst), rf_predict(&b, inst));
        }
        let sa = serde_json::to_string(&a.trees).unwrap();
        let sb = serde_json::to_string(&b.trees).unwrap();
        assert_eq!(sa, sb);
    }

    #[test]
    fn forest_of_identical_trees_equals_single_tree() {
        let data = separable_data();
        let hyper = RfHyper {
            n_trees: 1,
            ..RfHyper::default()
        };
        let single = rf_train(&data, &hyper, &Rng::seed_from(3)).unwrap();
        let forest = RandomForestModel::from_parts(
            RfHyper {
                n_trees: 9,
                ..RfHyper::default()
            },
            single.feature_names.clone(),
            vec![single.trees[0].clone(); 9],
        );
        for inst in &data {
            assert_eq!(rf_predict(&single, inst), rf_predict(&forest, inst));
        }
    }

    #[test]
    fn empty_training_set_rejected() {
        assert!(rf_train(&[], &RfHyper::default(), &Rng::seed_from(1)).is_err());
    }

    #[test]
    fn max_depth_caps_tree_height() {
        let data = separable_data();
        let hyper = RfHyper {
            n_trees: 5,
            max_depth: Some(2),
            ..RfHyper::default()
        };
        let model = rf_train(&data, &hyper, &Rng::seed_from(4)).unwrap();
        assert!(model.max_tree_depth() <= 2);
    }
}
