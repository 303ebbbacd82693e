//! Linear-chain CRF layer: exact log-partition by the forward algorithm in
//! log space, exact decoding by Viterbi, and negative log-likelihood whose
//! gradients flow to emissions and transition parameters through the tape.
//!
//! A path y over K tags scores
//! `start[y0] + Σ_t emissions[t, y_t] + Σ_t transitions[y_{t-1}, y_t] + stop[y_L]`.
//! Optional BIO masks pin forbidden transitions at -inf.

use crate::corpus::{Tag, NUM_TAGS, TAGS};
use crate::error::{Error, Result};
use crate::tensor::{Rng, Tensor};

#[derive(Debug, Clone)]
pub struct CrfParams {
    /// [K, K], from-tag → to-tag scores.
    pub transitions: Tensor,
    /// [K], score of starting in each tag.
    pub start: Tensor,
    /// [K], score of ending in each tag.
    pub stop: Tensor,
    /// Constant 0/-inf overlay on `transitions`, same shape.
    transition_mask: Option<Vec<f64>>,
    /// Constant 0/-inf overlay on `start`.
    start_mask: Option<Vec<f64>>,
    num_tags: usize,
}

impl CrfParams {
    /// Unconstrained parameters, uniform in [-scale, scale].
    pub fn new(num_tags: usize, rng: &mut Rng, scale: f64) -> CrfParams {
        CrfParams {
            transitions: Tensor::uniform(&[num_tags, num_tags], -scale, scale, rng, true),
            start: Tensor::uniform(&[num_tags], -scale, scale, rng, true),
            stop: Tensor::uniform(&[num_tags], -scale, scale, rng, true),
            transition_mask: None,
            start_mask: None,
            num_tags,
        }
    }

    pub fn from_tensors(transitions: Tensor, start: Tensor, stop: Tensor) -> Result<CrfParams> {
        let k = start.numel();
        if transitions.shape() != vec![k, k] || stop.numel() != k {
            return Err(Error::ShapeMismatch {
                op: "CrfParams::from_tensors",
                lhs: transitions.shape(),
                rhs: start.shape(),
            });
        }
        Ok(CrfParams {
            transitions,
            start,
            stop,
            transition_mask: None,
            start_mask: None,
            num_tags: k,
        })
    }

    /// Apply the hard BIO constraint over the standard 5-tag inventory:
    /// I-X may only follow B-X or I-X, and no sequence starts with I-X.
    pub fn constrain_bio(mut self) -> Result<CrfParams> {
        if self.num_tags != NUM_TAGS {
            return Err(Error::InvalidArgument {
                op: "CrfParams::constrain_bio",
                msg: format!("BIO mask needs {NUM_TAGS} tags, got {}", self.num_tags),
            });
        }
        let mut tmask = vec![0.0; NUM_TAGS * NUM_TAGS];
        for (i, from) in TAGS.iter().enumerate() {
            for (j, to) in TAGS.iter().enumerate() {
                if !from.may_precede(*to) {
                    tmask[i * NUM_TAGS + j] = f64::NEG_INFINITY;
                }
            }
        }
        let mut smask = vec![0.0; NUM_TAGS];
        for (j, tag) in TAGS.iter().enumerate() {
            if !tag.may_start() {
                smask[j] = f64::NEG_INFINITY;
            }
        }
        self.transition_mask = Some(tmask);
        self.start_mask = Some(smask);
        Ok(self)
    }

    pub fn is_constrained(&self) -> bool {
        self.transition_mask.is_some()
    }

    pub fn num_tags(&self) -> usize {
        self.num_tags
    }

    pub fn parameters(&self) -> Vec<Tensor> {
        vec![self.transitions.clone(), self.start.clone(), self.stop.clone()]
    }

    /// Transitions with the mask applied, on the tape.
    fn effective_transitions(&self) -> Result<Tensor> {
        match &self.transition_mask {
            Some(mask) => {
                let m = Tensor::from_vec(&[self.num_tags, self.num_tags], mask.clone())?;
                self.transitions.add(&m)
            }
            None => Ok(self.transitions.clone()),
        }
    }

    /// Start scores with the mask applied, shaped [1, K].
    fn effective_start(&self) -> Result<Tensor> {
        let start = self.start.reshape(&[1, self.num_tags])?;
        match &self.start_mask {
            Some(mask) => {
                let m = Tensor::from_vec(&[1, self.num_tags], mask.clone())?;
                start.add(&m)
            }
            None => Ok(start),
        }
    }

    fn start_allowed(&self, tag: usize) -> bool {
        self.start_mask
            .as_ref()
            .map_or(true, |m| m[tag] != f64::NEG_INFINITY)
    }

    fn transition_allowed(&self, from: usize, to: usize) -> bool {
        self.transition_mask
            .as_ref()
            .map_or(true, |m| m[from * self.num_tags + to] != f64::NEG_INFINITY)
    }
}

fn check_emissions(emissions: &Tensor, params: &CrfParams, op: &'static str) -> Result<usize> {
    let shape = emissions.shape();
    if shape.len() != 2 || shape[1] != params.num_tags {
        return Err(Error::ShapeMismatch {
            op,
            lhs: shape,
            rhs: vec![params.num_tags, params.num_tags],
        });
    }
    if shape[0] == 0 {
        return Err(Error::InvalidArgument {
            op,
            msg: "empty sequence".into(),
        });
    }
    Ok(shape[0])
}

/// log Σ over all K^L tag paths of exp(path score), computed with
/// log-sum-exp recurrences on the tape so gradients reach emissions and all
/// CRF parameters.
pub fn crf_log_partition(emissions: &Tensor, params: &CrfParams) -> Result<Tensor> {
    let len = check_emissions(emissions, params, "crf_log_partition")?;
    let k = params.num_tags;
    let t_eff = params.effective_transitions()?;
    let ones = Tensor::ones(&[1, k]);
    // alpha[j] = log Σ over paths ending in tag j at position t.
    let mut alpha = params.effective_start()?.add(&emissions.row(0)?)?;
    for t in 1..len {
        // column j of (alphaᵀ·1 + T) holds alpha[i] + T[i, j]
        let prev = alpha.transpose()?.matmul(&ones)?;
        let scores = prev.add(&t_eff)?;
        alpha = scores.log_sum_exp(0)?.add(&emissions.row(t)?)?;
    }
    let stop = params.stop.reshape(&[1, k])?;
    alpha.add(&stop)?.log_sum_exp(1)
}

/// Score of one gold path, on the tape.
pub fn crf_path_score(emissions: &Tensor, tags: &[usize], params: &CrfParams) -> Result<Tensor> {
    let len = check_emissions(emissions, params, "crf_path_score")?;
    if tags.len() != len {
        return Err(Error::InvalidArgument {
            op: "crf_path_score",
            msg: format!("{} tags for {} positions", tags.len(), len),
        });
    }
    if let Some(&bad) = tags.iter().find(|&&t| t >= params.num_tags) {
        return Err(Error::InvalidArgument {
            op: "crf_path_score",
            msg: format!("tag index {bad} out of range"),
        });
    }
    if !params.start_allowed(tags[0]) {
        return Err(Error::InvalidArgument {
            op: "crf_path_score",
            msg: format!("gold path starts with masked tag {}", tags[0]),
        });
    }
    for w in tags.windows(2) {
        if !params.transition_allowed(w[0], w[1]) {
            return Err(Error::InvalidArgument {
                op: "crf_path_score",
                msg: format!("gold path uses masked transition {} → {}", w[0], w[1]),
            });
        }
    }
    let em_coords: Vec<(usize, usize)> = tags.iter().enumerate().map(|(t, &y)| (t, y)).collect();
    let mut score = emissions.gather_nd(&em_coords)?.sum_all();
    if len > 1 {
        let tr_coords: Vec<(usize, usize)> = tags.windows(2).map(|w| (w[0], w[1])).collect();
        let trans = params.transitions.gather_nd(&tr_coords)?.sum_all();
        score = score.add(&trans)?;
    }
    let boundary = params
        .start
        .reshape(&[1, params.num_tags])?
        .gather_nd(&[(0, tags[0])])?
        .add(
            &params
                .stop
                .reshape(&[1, params.num_tags])?
                .gather_nd(&[(0, tags[len - 1])])?,
        )?;
    score.add(&boundary.sum_all())
}

/// Negative log-likelihood of a gold path: log-partition minus path score.
/// Always ≥ 0 up to rounding. Errors if the gold path uses a masked
/// transition.
pub fn crf_nll(emissions: &Tensor, tags: &[usize], params: &CrfParams) -> Result<Tensor> {
    let log_z = crf_log_partition(emissions, params)?;
    let gold = crf_path_score(emissions, tags, params)?;
    log_z.reshape(&[1])?.sub(&gold)
}

/// Exact max-scoring path and its score. Ties break toward the lowest tag
/// index at every backpointer and at the final argmax.
pub fn viterbi(emissions: &Tensor, params: &CrfParams) -> Result<(Vec<usize>, f64)> {
    let len = check_emissions(emissions, params, "viterbi")?;
    let k = params.num_tags;
    let em = emissions.to_vec();
    let trans = params.transitions.to_vec();
    let start = params.start.to_vec();
    let stop = params.stop.to_vec();
    let tmask = params.transition_mask.as_deref();
    let smask = params.start_mask.as_deref();

    let mut best = vec![f64::NEG_INFINITY; k];
    for j in 0..k {
        let masked = smask.map_or(0.0, |m| m[j]);
        best[j] = start[j] + masked + em[j];
    }
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(len);
    for t in 1..len {
        let mut next = vec![f64::NEG_INFINITY; k];
        let mut ptr = vec![0usize; k];
        for j in 0..k {
            let mut best_score = f64::NEG_INFINITY;
            let mut best_prev = 0usize;
            for i in 0..k {
                let masked = tmask.map_or(0.0, |m| m[i * k + j]);
                let s = best[i] + trans[i * k + j] + masked;
                if s > best_score {
                    best_score = s;
                    best_prev = i;
                }
            }
            next[j] = best_score + em[t * k + j];
            ptr[j] = best_prev;
        }
        best = next;
        back.push(ptr);
    }
    let mut final_best = f64::NEG_INFINITY;
    let mut last = 0usize;
    for (j, b) in best.iter().enumerate() {
        let s = b + stop[j];
        if s > final_best {
            final_best = s;
            last = j;
        }
    }
    let mut path = vec![last; len];
    for t in (1..len).rev() {
        last = back[t - 1][last];
        path[t - 1] = last;
    }
    Ok((path, final_best))
}

/// Decode a Viterbi path into tags over the standard inventory.
pub fn path_to_tags(path: &[usize]) -> Vec<Tag> {
    path.iter().map(|&i| Tag::from_index(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gradcheck::{finite_diff_grad, max_rel_err};

    fn zero_params(k: usize) -> CrfParams {
        CrfParams::from_tensors(
            Tensor::param(&[k, k], vec![0.0; k * k]).unwrap(),
            Tensor::param(&[k], vec![0.0; k]).unwrap(),
            Tensor::param(&[k], vec![0.0; k]).unwrap(),
        )
        .unwrap()
    }

    fn random_params(k: usize, seed: u64) -> CrfParams {
        CrfParams::new(k, &mut Rng::seed_from(seed), 1.0)
    }

    fn random_emissions(len: usize, k: usize, seed: u64) -> Tensor {
        let mut rng = Rng::seed_from(seed).fork("em");
        Tensor::param(
            &[len, k],
            (0..len * k).map(|_| rng.uniform_in(-2.0, 2.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_position_closed_form() {
        let params = random_params(5, 1);
        let em = random_emissions(1, 5, 2);
        let got = crf_log_partition(&em, &params).unwrap().item();
        let s = params.start.to_vec();
        let p = params.stop.to_vec();
        let e = em.to_vec();
        let expect = (0..5)
            .map(|j| (s[j] + e[j] + p[j]).exp())
            .sum::<f64>()
            .ln();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn all_zero_scores_count_paths() {
        // L=2, K=5, everything 0: log partition = ln(25).
        let params = zero_params(5);
        let em = Tensor::from_vec(&[2, 5], vec![0.0; 10]).unwrap();
        let got = crf_log_partition(&em, &params).unwrap().item();
        assert!((got - 25f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_sequence_rejected() {
        let params = zero_params(3);
        let em = Tensor::zeros(&[0, 3]);
        assert!(crf_log_partition(&em, &params).is_err());
    }

    #[test]
    fn single_tag_degenerate_nll_is_zero() {
        let params = random_params(1, 3);
        let em = random_emissions(4, 1, 4);
        let nll = crf_nll(&em, &[0, 0, 0, 0], &params).unwrap().item();
        assert!(nll.abs() < 1e-12, "nll {nll}");
    }

    #[test]
    fn dominant_path_drives_nll_to_zero() {
        // Give one path overwhelming scores: its NLL tends to 0.
        let k = 3;
        let mut em = vec![-50.0; 4 * k];
        let gold = [1usize, 2, 0, 1];
        for (t, &y) in gold.iter().enumerate() {
            em[t * k + y] = 50.0;
        }
        let params = zero_params(k);
        let em = Tensor::from_vec(&[4, k], em).unwrap();
        let nll = crf_nll(&em, &gold, &params).unwrap().item();
        assert!(nll >= 0.0);
        assert!(nll < 1e-9, "nll {nll}");
    }

    #[test]
    fn nll_non_negative_and_probability_sound() {
        for seed in 0..20 {
            let params = random_params(5, seed);
            let em = random_emissions(4, 5, seed + 100);
            let tags = vec![
                (seed as usize) % 5,
                (seed as usize + 1) % 5,
                0,
                (seed as usize + 3) % 5,
            ];
            let nll = crf_nll(&em, &tags, &params).unwrap().item();
            assert!(nll >= -1e-12, "nll {nll}");
            let p = (-nll).exp();
            assert!(p > 0.0 && p <= 1.0 + 1e-12, "p {p}");
        }
    }

    #[test]
    fn viterbi_single_position() {
        let params = random_params(5, 7);
        let em = random_emissions(1, 5, 8);
        let (path, score) = viterbi(&em, &params).unwrap();
        let s = params.start.to_vec();
        let p = params.stop.to_vec();
        let e = em.to_vec();
        let (mut best_j, mut best) = (0usize, f64::NEG_INFINITY);
        for j in 0..5 {
            let v = s[j] + e[j] + p[j];
            if v > best {
                best = v;
                best_j = j;
            }
        }
        assert_eq!(path, vec![best_j]);
        assert!((score - best).abs() < 1e-12);
    }

    #[test]
    fn viterbi_tie_breaks_to_lowest_index() {
        let params = zero_params(5);
        let em = Tensor::from_vec(&[4, 5], vec![0.0; 20]).unwrap();
        let (path, score) = viterbi(&em, &params).unwrap();
        assert_eq!(path, vec![0, 0, 0, 0]);
        assert!((score - 0.0).abs() < 1e-12);
    }

    #[test]
    fn nll_gradient_matches_finite_differences() {
        let params = random_params(5, 21);
        let em = random_emissions(3, 5, 22);
        let tags = vec![1, 2, 0];
        let loss = crf_nll(&em, &tags, &params).unwrap();
        loss.backward().unwrap();
        for t in [&em, &params.transitions, &params.start, &params.stop] {
            let analytic = t.grad().unwrap();
            let numeric =
                finite_diff_grad(t, 1e-5, || crf_nll(&em, &tags, &params).unwrap().item());
            assert!(
                max_rel_err(&analytic, &numeric) < 1e-4,
                "rel err {}",
                max_rel_err(&analytic, &numeric)
            );
        }
    }

    #[test]
    fn bio_mask_blocks_gold_paths_and_decoding() {
        let params = random_params(5, 31).constrain_bio().unwrap();
        let em = random_emissions(3, 5, 32);
        // I-DS (index 2) directly after O (index 0) is masked.
        assert!(crf_nll(&em, &[0, 2, 0], &params).is_err());
        // Starting with I-Event (index 4) is masked.
        assert!(crf_nll(&em, &[4, 0, 0], &params).is_err());
        // Legal gold path works.
        assert!(crf_nll(&em, &[1, 2, 3], &params).is_ok());
    }

    #[test]
    fn constrained_viterbi_emits_legal_sequences() {
        for seed in 0..50 {
            let params = random_params(5, 1000 + seed).constrain_bio().unwrap();
            let em = random_emissions(6, 5, 2000 + seed);
            let (path, _) = viterbi(&em, &params).unwrap();
            let tags = path_to_tags(&path);
            assert!(
                crate::corpus::tags_to_spans(&tags, crate::corpus::DecodeMode::Strict).is_ok(),
                "illegal path {tags:?}"
            );
        }
    }

    #[test]
    fn emission_shift_leaves_argmax_unchanged() {
        for seed in 0..10 {
            let params = random_params(5, 41 + seed);
            let em = random_emissions(5, 5, 51 + seed);
            let (path, _) = viterbi(&em, &params).unwrap();
            // Add a constant to every tag's emission at position 2.
            let mut shifted = em.to_vec();
            for j in 0..5 {
                shifted[2 * 5 + j] += 7.25;
            }
            let shifted = Tensor::from_vec(&[5, 5], shifted).unwrap();
            let (path2, _) = viterbi(&shifted, &params).unwrap();
            assert_eq!(path, path2);
        }
    }
}
