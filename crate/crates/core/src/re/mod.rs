//! Relation classification over (sentence, DS span, Event span) instances:
//! a position-embedding CNN, an attention-pooled Bi-LSTM, and a
//! random-forest n-gram baseline.

pub mod attblstm;
pub mod cnn;
pub mod forest;
pub mod ngram;

pub use attblstm::AttBlstmModel;
pub use cnn::CnnRelModel;
pub use forest::{rf_predict, rf_train, RandomForestModel};
pub use ngram::{ngram_featurize, STOP_WORDS};

use serde::{Deserialize, Serialize};

use crate::corpus::{RelationInstance, RelationLabel};
use crate::error::{Error, Result};

/// Anything that labels a relation instance.
pub trait RelationClassifier {
    fn classify(&self, instance: &RelationInstance) -> Result<RelationLabel>;
}

/// Hyperparameters shared by the neural relation models. Defaults are the
/// tuned values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReHyper {
    /// Word embedding dimension when no pretrained file is given.
    pub word_dim: usize,
    pub pos_dim: usize,
    pub cnn_filter_sizes: Vec<usize>,
    pub cnn_filters_per_size: usize,
    pub cnn_dropout: f64,
    pub lstm_hidden: usize,
    pub l2: f64,
    /// Relative distances are clipped to [-clip, +clip].
    pub clip: i64,
}

impl Default for ReHyper {
    fn default() -> Self {
        ReHyper {
            word_dim: 50,
            pos_dim: 100,
            cnn_filter_sizes: vec![2, 3, 4],
            cnn_filters_per_size: 128,
            cnn_dropout: 0.3,
            lstm_hidden: 128,
            l2: 1e-4,
            clip: 30,
        }
    }
}

/// Feature-subsampling rule for the random forest (features tried per
/// split).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfHyper {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub max_depth: Option<usize>,
    pub ngram_orders: Vec<usize>,
}

impl Default for RfHyper {
    fn default() -> Self {
        RfHyper {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            max_depth: None,
            ngram_orders: vec![1, 2],
        }
    }
}

impl RfHyper {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be ≥ 1".into()));
        }
        if self.ngram_orders.is_empty() || self.ngram_orders.iter().any(|&n| n == 0 || n > 3) {
            return Err(Error::Config("ngram orders must be within 1..=3".into()));
        }
        Ok(())
    }
}

/// Relative distance of every token to the DS head and the Event head (the
/// last token of each span), clipped to ±clip.
pub fn relative_positions(instance: &RelationInstance, clip: i64) -> (Vec<i64>, Vec<i64>) {
    let len = instance.sentence.len();
    let ds_head = instance.ds.head() as i64;
    let ev_head = instance.event.head() as i64;
    let clamp = |d: i64| d.clamp(-clip, clip);
    let ds: Vec<i64> = (0..len as i64).map(|t| clamp(t - ds_head)).collect();
    let ev: Vec<i64> = (0..len as i64).map(|t| clamp(t - ev_head)).collect();
    (ds, ev)
}

/// Row index of a clipped distance in a position-embedding table of
/// 2·clip+1 rows.
pub fn position_row(d: i64, clip: i64) -> usize {
    (d + clip) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EntitySpan, Sentence};

    fn instance(len: usize, ds: (usize, usize), ev: (usize, usize)) -> RelationInstance {
        let tokens: Vec<String> = (0..len).map(|i| format!("t{i}")).collect();
        RelationInstance::new(
            Sentence::new("s", tokens).unwrap(),
            EntitySpan::ds(ds.0, ds.1),
            EntitySpan::event(ev.0, ev.1),
            RelationLabel::Positive,
        )
        .unwrap()
    }

    #[test]
    fn head_token_distance_is_zero() {
        let inst = instance(5, (1, 3), (4, 5));
        let (d_ds, d_ev) = relative_positions(&inst, 30);
        assert_eq!(d_ds[2], 0); // head = last token of span (1,3)
        assert_eq!(d_ev[4], 0);
    }

    #[test]
    fn distances_are_offsets_from_heads() {
        let inst = instance(7, (2, 3), (5, 6));
        let (d_ds, d_ev) = relative_positions(&inst, 30);
        assert_eq!(d_ds, vec![-2, -1, 0, 1, 2, 3, 4]);
        assert_eq!(d_ev, vec![-5, -4, -3, -2, -1, 0, 1]);
    }

    #[test]
    fn distances_clip() {
        let inst = instance(50, (0, 1), (48, 49));
        let (d_ds, d_ev) = relative_positions(&inst, 30);
        assert_eq!(*d_ds.last().unwrap(), 30);
        assert_eq!(d_ds[45], 30);
        assert_eq!(d_ev[0], -30);
        assert_eq!(position_row(30, 30), 60);
        assert_eq!(position_row(-30, 30), 0);
    }

    #[test]
    fn defaults_are_the_tuned_values() {
        let h = ReHyper::default();
        assert_eq!(h.pos_dim, 100);
        assert_eq!(h.cnn_filter_sizes, vec![2, 3, 4]);
        assert_eq!(h.cnn_filters_per_size, 128);
        assert!((h.cnn_dropout - 0.3).abs() < 1e-12);
        assert_eq!(h.lstm_hidden, 128);
    }

    #[test]
    fn rf_hyper_validation() {
        let mut h = RfHyper::default();
        assert!(h.validate().is_ok());
        h.n_trees = 0;
        assert!(h.validate().is_err());
        let mut h = RfHyper::default();
        h.ngram_orders = vec![];
        assert!(h.validate().is_err());
    }
}
