//! LSTM cell and bidirectional encoder on the autodiff tape.

use crate::error::Result;
use crate::tensor::{Rng, Tensor};

/// Glorot-uniform initialization bound.
fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// One-direction LSTM cell. Gate order along the 4H axis: input, forget,
/// cell candidate, output. Forget-gate bias starts at 1.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
    pub input_dim: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new(input_dim: usize, hidden: usize, rng: &mut Rng) -> LstmCell {
        let r = glorot(input_dim + hidden, hidden);
        let w = Tensor::uniform(&[input_dim, 4 * hidden], -r, r, rng, true);
        let u = Tensor::uniform(&[hidden, 4 * hidden], -r, r, rng, true);
        let mut bias = vec![0.0; 4 * hidden];
        for b in bias.iter_mut().take(2 * hidden).skip(hidden) {
            *b = 1.0;
        }
        let b = Tensor::param(&[1, 4 * hidden], bias).expect("bias shape");
        LstmCell {
            w,
            u,
            b,
            input_dim,
            hidden,
        }
    }

    /// All-zero parameters (useful as a degenerate fixture).
    pub fn zeroed(input_dim: usize, hidden: usize) -> LstmCell {
        LstmCell {
            w: Tensor::param(&[input_dim, 4 * hidden], vec![0.0; input_dim * 4 * hidden]).unwrap(),
            u: Tensor::param(&[hidden, 4 * hidden], vec![0.0; hidden * 4 * hidden]).unwrap(),
            b: Tensor::param(&[1, 4 * hidden], vec![0.0; 4 * hidden]).unwrap(),
            input_dim,
            hidden,
        }
    }

    pub fn parameters(&self) -> Vec<Tensor> {
        vec![self.w.clone(), self.u.clone(), self.b.clone()]
    }

    /// One step: x is [1, D]; state (h, c) both [1, H].
    pub fn step(&self, x: &Tensor, h: &Tensor, c: &Tensor) -> Result<(Tensor, Tensor)> {
        let z = x
            .matmul(&self.w)?
            .add(&h.matmul(&self.u)?)?
            .add(&self.b)?;
        let hsz = self.hidden;
        let i = z.narrow(1, 0, hsz)?.sigmoid();
        let f = z.narrow(1, hsz, hsz)?.sigmoid();
        let g = z.narrow(1, 2 * hsz, hsz)?.tanh();
        let o = z.narrow(1, 3 * hsz, hsz)?.sigmoid();
        let c_next = f.mul(c)?.add(&i.mul(&g)?)?;
        let h_next = o.mul(&c_next.tanh())?;
        Ok((h_next, c_next))
    }

    /// Hidden state per position, in sentence order. `reverse` runs the
    /// recurrence right-to-left (outputs still indexed by position).
    pub fn run(&self, inputs: &Tensor, reverse: bool) -> Result<Vec<Tensor>> {
        let len = inputs.shape()[0];
        let mut h = Tensor::zeros(&[1, self.hidden]);
        let mut c = Tensor::zeros(&[1, self.hidden]);
        let mut states: Vec<Option<Tensor>> = vec![None; len];
        let order: Vec<usize> = if reverse {
            (0..len).rev().collect()
        } else {
            (0..len).collect()
        };
        for t in order {
            let x = inputs.row(t)?;
            let (h2, c2) = self.step(&x, &h, &c)?;
            states[t] = Some(h2.clone());
            h = h2;
            c = c2;
        }
        Ok(states.into_iter().map(|s| s.unwrap()).collect())
    }
}

/// Forward + backward LSTM pair.
#[derive(Debug, Clone)]
pub struct BiLstm {
    pub fwd: LstmCell,
    pub bwd: LstmCell,
}

impl BiLstm {
    pub fn new(input_dim: usize, hidden: usize, rng: &mut Rng) -> BiLstm {
        BiLstm {
            fwd: LstmCell::new(input_dim, hidden, &mut rng.fork("fwd")),
            bwd: LstmCell::new(input_dim, hidden, &mut rng.fork("bwd")),
        }
    }

    pub fn hidden(&self) -> usize {
        self.fwd.hidden
    }

    pub fn parameters(&self) -> Vec<Tensor> {
        let mut p = self.fwd.parameters();
        p.extend(self.bwd.parameters());
        p
    }

    /// Per-position forward and backward states, each [1, H].
    pub fn states(&self, inputs: &Tensor) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
        Ok((self.fwd.run(inputs, false)?, self.bwd.run(inputs, true)?))
    }

    /// [L, 2H]: forward and backward states concatenated per position.
    pub fn encode(&self, inputs: &Tensor) -> Result<Tensor> {
        let (f, b) = self.states(inputs)?;
        let rows: Vec<Tensor> = f
            .iter()
            .zip(&b)
            .map(|(hf, hb)| Tensor::cat(&[hf.clone(), hb.clone()], 1))
            .collect::<Result<_>>()?;
        Tensor::cat(&rows, 0)
    }

    /// Final forward state and final backward state (the backward run's
    /// state at position 0), concatenated: [1, 2H].
    pub fn final_states(&self, inputs: &Tensor) -> Result<Tensor> {
        let (f, b) = self.states(inputs)?;
        Tensor::cat(&[f.last().unwrap().clone(), b[0].clone()], 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gradcheck::{finite_diff_grad, max_rel_err};

    fn random_inputs(len: usize, dim: usize, seed: u64) -> Tensor {
        let mut rng = Rng::seed_from(seed);
        Tensor::from_vec(
            &[len, dim],
            (0..len * dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_parameters_give_zero_outputs() {
        let bi = BiLstm {
            fwd: LstmCell::zeroed(3, 4),
            bwd: LstmCell::zeroed(3, 4),
        };
        let out = bi.encode(&random_inputs(5, 3, 1)).unwrap();
        assert_eq!(out.shape(), vec![5, 8]);
        assert!(out.to_vec().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_position_boundary() {
        let mut rng = Rng::seed_from(2);
        let bi = BiLstm::new(3, 4, &mut rng);
        let x = random_inputs(1, 3, 3);
        let out = bi.encode(&x).unwrap();
        assert_eq!(out.shape(), vec![1, 8]);
        // Both halves come from the same single step over x.
        let (h, c) = bi.fwd.step(&x.row(0).unwrap(), &Tensor::zeros(&[1, 4]), &Tensor::zeros(&[1, 4])).unwrap();
        let _ = c;
        let fwd_half = &out.to_vec()[..4];
        assert_eq!(fwd_half, h.to_vec().as_slice());
    }

    #[test]
    fn reversal_symmetry_with_swapped_directions() {
        let mut rng = Rng::seed_from(4);
        let bi = BiLstm::new(3, 4, &mut rng);
        let x = random_inputs(6, 3, 5);
        let out = bi.encode(&x).unwrap().to_vec();

        // Reverse the sequence rows.
        let mut rev = vec![0.0; 18];
        let xv = x.to_vec();
        for t in 0..6 {
            rev[t * 3..(t + 1) * 3].copy_from_slice(&xv[(5 - t) * 3..(6 - t) * 3]);
        }
        let rev = Tensor::from_vec(&[6, 3], rev).unwrap();
        let swapped = BiLstm {
            fwd: bi.bwd.clone(),
            bwd: bi.fwd.clone(),
        };
        let out2 = swapped.encode(&rev).unwrap().to_vec();
        // out2 reversed by position with halves swapped equals out.
        for t in 0..6 {
            let a = &out[t * 8..t * 8 + 8];
            let row = &out2[(5 - t) * 8..(5 - t) * 8 + 8];
            let b: Vec<f64> = row[4..].iter().chain(row[..4].iter()).copied().collect();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lstm_step_gradients_match_finite_differences() {
        let mut rng = Rng::seed_from(6);
        let cell = LstmCell::new(3, 2, &mut rng);
        let x = random_inputs(3, 3, 7);
        let forward = |cell: &LstmCell| {
            let states = cell.run(&x, false).unwrap();
            Tensor::cat(&states, 0).unwrap().sum_all()
        };
        let loss = forward(&cell);
        loss.backward().unwrap();
        for t in [&cell.w, &cell.u, &cell.b] {
            let analytic = t.grad().unwrap();
            let numeric = finite_diff_grad(t, 1e-5, || forward(&cell).item());
            let err = max_rel_err(&analytic, &numeric);
            assert!(err < 1e-4, "rel err {err}");
        }
    }
}
