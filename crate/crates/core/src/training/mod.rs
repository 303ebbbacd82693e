//! Dataset splitting, mini-batch optimization with early stopping on the
//! development metric, hyperparameter grids, and multi-seed runs.

pub mod adam;
pub mod early_stop;
pub mod grid;
pub mod tasks;
pub mod trainer;

pub use adam::{Adam, AdamConfig};
pub use early_stop::EarlyStop;
pub use grid::{grid_search, GridResult};
pub use tasks::{AttBlstmTrainTask, BaselineCrfTrainTask, CnnTrainTask, NerTrainTask};
pub use trainer::{train, TrainConfig, TrainLogEntry, TrainOutcome, TrainableModel};

use crate::error::{Error, Result};
use crate::tensor::Rng;

/// Train/dev/test fractions plus the shuffling seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(seed: u64) -> SplitSpec {
        SplitSpec {
            fractions: [0.8, 0.1, 0.1],
            seed,
        }
    }
}

/// Shuffle by seed and cut into train/dev/test. Dev and test get the floor
/// of their fractions; the remainder goes to train. Partitions are disjoint
/// and exhaustive.
pub fn split<T: Clone>(items: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let n = items.len();
    if n < 10 {
        return Err(Error::InvalidArgument {
            op: "split",
            msg: format!("need at least 10 items, got {n}"),
        });
    }
    let total: f64 = spec.fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions sum to {total}, expected 1"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::seed_from(spec.seed).fork("split").shuffle(&mut order);
    let n_dev = (spec.fractions[1] * n as f64).floor() as usize;
    let n_test = (spec.fractions[2] * n as f64).floor() as usize;
    let n_train = n - n_dev - n_test;
    let pick = |range: std::ops::Range<usize>| -> Vec<T> {
        order[range].iter().map(|&i| items[i].clone()).collect()
    };
    Ok((
        pick(0..n_train),
        pick(n_train..n_train + n_dev),
        pick(n_train + n_dev..n),
    ))
}

/// Distinct derived seeds for repeated runs.
pub fn seeds_for(base_seed: u64, k: usize) -> Vec<u64> {
    let root = Rng::seed_from(base_seed);
    (0..k)
        .map(|i| root.fork_indexed("run", i as u64).seed())
        .collect()
}

/// Run a closure once per seed, collecting the results (training, k models
/// with distinct seeds).
pub fn multi_run<T>(seeds: &[u64], mut run: impl FnMut(u64) -> Result<T>) -> Result<Vec<T>> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument {
            op: "multi_run",
            msg: "need at least one seed".into(),
        });
    }
    seeds.iter().map(|&s| run(s)).collect()
}
