//! Generic mini-batch training loop: shuffled batches, Adam with gradient
//! clipping, periodic dev evaluation, early stopping, best-checkpoint
//! return, and divergence detection.

use serde::{Deserialize, Serialize};

use crate::artifact::ModelArtifact;
use crate::error::{Error, Result};
use crate::tensor::{Rng, Tensor};

use super::adam::{Adam, AdamConfig};
use super::early_stop::EarlyStop;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Dev metric evaluated every this many steps.
    pub eval_every: usize,
    /// Halt this many steps after the last strict dev improvement.
    pub patience: usize,
    pub max_steps: usize,
    pub optimizer: AdamConfig,
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            eval_every: 50,
            patience: 500,
            max_steps: 5000,
            optimizer: AdamConfig::default(),
            clip_norm: 5.0,
        }
    }
}

/// A model the loop can train: it owns its train/dev data and knows how to
/// build a scalar batch loss on the tape.
pub trait TrainableModel {
    fn num_train(&self) -> usize;
    /// Mean loss over the given training indices, on the tape.
    fn batch_loss(&mut self, indices: &[usize], rng: &mut Rng) -> Result<Tensor>;
    fn parameters(&self) -> Vec<Tensor>;
    /// Invoked after every optimizer update (e.g. re-pinning fixed rows).
    fn post_update(&mut self) {}
    /// Dev micro-F1 (or accuracy where they coincide).
    fn dev_metric(&mut self) -> Result<f64>;
    fn snapshot(&self) -> Result<ModelArtifact>;
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainLogEntry {
    pub step: usize,
    pub loss: f64,
    pub dev: Option<f64>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub artifact: ModelArtifact,
    pub best_step: usize,
    pub best_dev: f64,
    pub steps_run: usize,
    pub log: Vec<TrainLogEntry>,
}

/// Line-delimited training log: `step<TAB>loss<TAB>dev` with `-` when no
/// evaluation happened at that step.
pub fn log_to_string(log: &[TrainLogEntry]) -> String {
    let mut s = String::from("step\tloss\tdev\n");
    for e in log {
        let dev = e.dev.map_or("-".to_string(), |d| format!("{d:.6}"));
        s.push_str(&format!("{}\t{:.6}\t{}\n", e.step, e.loss, dev));
    }
    s
}

pub fn train(model: &mut dyn TrainableModel, config: &TrainConfig, rng: &Rng) -> Result<TrainOutcome> {
    let n = model.num_train();
    if n == 0 {
        return Err(Error::InvalidArgument {
            op: "train",
            msg: "empty training set".into(),
        });
    }
    let params = model.parameters();
    let mut adam = Adam::new(config.optimizer, &params);
    let mut order_rng = rng.fork("batch_order");
    let mut dropout_rng = rng.fork("dropout");
    let mut order: Vec<usize> = (0..n).collect();
    order_rng.shuffle(&mut order);
    let mut cursor = 0usize;

    let mut early = EarlyStop::new(config.patience);
    let mut best: Option<(usize, f64, ModelArtifact)> = None;
    let mut log: Vec<TrainLogEntry> = Vec::new();
    let mut steps_run = 0;

    for step in 1..=config.max_steps {
        steps_run = step;
        let mut batch = Vec::with_capacity(config.batch_size);
        for _ in 0..config.batch_size.min(n) {
            if cursor == n {
                cursor = 0;
                order_rng.shuffle(&mut order);
            }
            batch.push(order[cursor]);
            cursor += 1;
        }
        let loss = model.batch_loss(&batch, &mut dropout_rng)?;
        let loss_value = loss.item();
        if !loss_value.is_finite() {
            return Err(Error::Diverged {
                step,
                loss: loss_value,
            });
        }
        loss.backward()?;
        adam.step(&params, Some(config.clip_norm))?;
        for p in &params {
            p.zero_grad();
        }
        model.post_update();

        let mut dev = None;
        if step % config.eval_every == 0 || step == config.max_steps {
            let metric = model.dev_metric()?;
            dev = Some(metric);
            if early.observe(step, metric) {
                best = Some((step, metric, model.snapshot()?));
            }
        }
        log.push(TrainLogEntry {
            step,
            loss: loss_value,
            dev,
        });
        if early.should_stop(step) {
            break;
        }
    }

    let (best_step, best_dev, artifact) = match best {
        Some(b) => b,
        None => {
            // max_steps was below the first evaluation point.
            let metric = model.dev_metric()?;
            (steps_run, metric, model.snapshot()?)
        }
    };
    Ok(TrainOutcome {
        artifact,
        best_step,
        best_dev,
        steps_run,
        log,
    })
}
