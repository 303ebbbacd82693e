//! Exhaustive hyperparameter grids. The winner is the argmax of the dev
//! metric; ties go to the earlier grid cell.

use crate::error::{Error, Result};
use crate::ner::{NerHyper, NerVariant};
use crate::re::ReHyper;

/// Candidate kernel sizes for the char-CNN tagger.
pub const NER_KERNEL_GRID: [usize; 5] = [2, 3, 4, 5, 6];
/// Candidate filter counts for the char-CNN tagger.
pub const NER_FILTER_GRID: [usize; 4] = [50, 100, 200, 300];
/// Candidate word-LSTM hidden sizes.
pub const NER_HIDDEN_GRID: [usize; 3] = [64, 128, 256];
/// Candidate position-embedding dimensions for the relation CNN.
pub const RE_POS_DIM_GRID: [usize; 3] = [50, 100, 200];
/// Candidate filter counts for the relation CNN.
pub const RE_FILTER_GRID: [usize; 4] = [64, 128, 256, 512];
/// Candidate filter sizes for the relation CNN.
pub const RE_SIZE_GRID: [usize; 5] = [2, 3, 4, 5, 6];
/// Candidate hidden sizes for the attention Bi-LSTM.
pub const RE_LSTM_HIDDEN_GRID: [usize; 4] = [64, 128, 256, 512];

/// Cross product of kernel sizes and filter counts for the char-CNN tagger.
pub fn ner_char_cnn_grid() -> Vec<NerHyper> {
    let mut grid = Vec::new();
    for &kernel in &NER_KERNEL_GRID {
        for &filters in &NER_FILTER_GRID {
            grid.push(NerHyper {
                variant: NerVariant::CharCnn,
                char_cnn_kernel: kernel,
                char_cnn_filters: filters,
                ..NerHyper::default()
            });
        }
    }
    grid
}

/// Cross product of position dims, filter counts, and single filter sizes
/// for the relation CNN.
pub fn re_cnn_grid() -> Vec<ReHyper> {
    let mut grid = Vec::new();
    for &pos_dim in &RE_POS_DIM_GRID {
        for &filters in &RE_FILTER_GRID {
            for &size in &RE_SIZE_GRID {
                grid.push(ReHyper {
                    pos_dim,
                    cnn_filters_per_size: filters,
                    cnn_filter_sizes: vec![size],
                    ..ReHyper::default()
                });
            }
        }
    }
    grid
}

#[derive(Debug, Clone)]
pub struct GridResult<H> {
    pub best: H,
    pub best_index: usize,
    pub best_score: f64,
    /// Dev score per grid cell, in grid order.
    pub scores: Vec<f64>,
}

/// Evaluate every cell and return the argmax (first cell wins ties).
pub fn grid_search<H: Clone>(
    grid: &[H],
    mut eval: impl FnMut(&H) -> Result<f64>,
) -> Result<GridResult<H>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument {
            op: "grid_search",
            msg: "empty grid".into(),
        });
    }
    let mut scores = Vec::with_capacity(grid.len());
    for cell in grid {
        scores.push(eval(cell)?);
    }
    let mut best_index = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best_index] {
            best_index = i;
        }
    }
    Ok(GridResult {
        best: grid[best_index].clone(),
        best_index,
        best_score: scores[best_index],
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grids_cover_the_candidate_values() {
        let ner = ner_char_cnn_grid();
        assert_eq!(ner.len(), 20);
        for kernel in [2, 3, 4, 5, 6] {
            for filters in [50, 100, 200, 300] {
                assert!(ner
                    .iter()
                    .any(|h| h.char_cnn_kernel == kernel && h.char_cnn_filters == filters));
            }
        }
        let re = re_cnn_grid();
        assert_eq!(re.len(), 60);
        assert!(re
            .iter()
            .any(|h| h.pos_dim == 200 && h.cnn_filters_per_size == 512
                && h.cnn_filter_sizes == vec![6]));
    }

    #[test]
    fn single_cell_grid_returns_that_cell() {
        let result = grid_search(&[7usize], |&x| Ok(x as f64)).unwrap();
        assert_eq!(result.best, 7);
        assert_eq!(result.best_index, 0);
    }

    #[test]
    fn ties_go_to_the_first_cell() {
        let result = grid_search(&[1usize, 2, 3], |_| Ok(0.5)).unwrap();
        assert_eq!(result.best_index, 0);
        let result = grid_search(&[1usize, 2, 3], |&x| Ok(if x == 2 { 1.0 } else { 0.5 }))
            .unwrap();
        assert_eq!(result.best, 2);
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(grid_search::<usize>(&[], |_| Ok(0.0)).is_err());
    }
}
