//! Adam with optional global gradient-norm clipping.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: usize,
}

impl Adam {
    /// Moment buffers are positional: pass the same parameter list, in the
    /// same order, to every step.
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Adam {
        Adam {
            config,
            m: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            t: 0,
        }
    }

    /// One update from the parameters' accumulated gradients (missing
    /// gradients count as zero). Returns the pre-clip global gradient norm.
    pub fn step(&mut self, params: &[Tensor], clip_norm: Option<f64>) -> Result<f64> {
        assert_eq!(params.len(), self.m.len(), "parameter list changed");
        let grads: Vec<Vec<f64>> = params
            .iter()
            .map(|p| p.grad().unwrap_or_else(|| vec![0.0; p.numel()]))
            .collect();
        let norm = grads
            .iter()
            .flat_map(|g| g.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt();
        let scale = match clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        self.t += 1;
        let t = self.t as i32;
        let c = &self.config;
        for ((param, grad), (m, v)) in params
            .iter()
            .zip(&grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let mut data = param.to_vec();
            for i in 0..data.len() {
                let g = grad[i] * scale;
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
                let m_hat = m[i] / (1.0 - c.beta1.powi(t));
                let v_hat = v[i] / (1.0 - c.beta2.powi(t));
                data[i] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
            }
            param.set_data(&data)?;
        }
        Ok(norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_about_lr() {
        // With a constant unit gradient, bias correction makes the first
        // Adam step ≈ lr.
        let p = Tensor::param(&[1], vec![1.0]).unwrap();
        let mut adam = Adam::new(AdamConfig::default(), std::slice::from_ref(&p));
        let loss = p.scale(1.0);
        loss.backward().unwrap();
        adam.step(std::slice::from_ref(&p), None).unwrap();
        let moved = 1.0 - p.to_vec()[0];
        assert!((moved - 1e-3).abs() < 1e-6, "moved {moved}");
    }

    #[test]
    fn hand_computed_two_steps() {
        let cfg = AdamConfig {
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 0.0,
        };
        let p = Tensor::param(&[1], vec![0.0]).unwrap();
        let mut adam = Adam::new(cfg, std::slice::from_ref(&p));
        // Gradient 2.0 both steps.
        for _ in 0..2 {
            p.zero_grad();
            let loss = p.scale(2.0);
            loss.backward().unwrap();
            adam.step(std::slice::from_ref(&p), None).unwrap();
        }
        // Step 1: m=0.2, v=0.004, m̂=2, v̂=4 → −0.1·2/2 = −0.1
        // Step 2: m=0.38, v=0.007996; m̂=0.38/0.19=2, v̂=0.007996/0.001999=4.0
        //         → another −0.1.
        let got = p.to_vec()[0];
        assert!((got + 0.2).abs() < 1e-9, "got {got}");
    }

    #[test]
    fn clipping_bounds_the_update_norm() {
        let p = Tensor::param(&[2], vec![0.0, 0.0]).unwrap();
        let mut adam = Adam::new(AdamConfig::default(), std::slice::from_ref(&p));
        let loss = p.mul(&Tensor::from_vec(&[2], vec![300.0, 400.0]).unwrap())
            .unwrap()
            .sum_all();
        loss.backward().unwrap();
        let norm = adam.step(std::slice::from_ref(&p), Some(5.0)).unwrap();
        assert!((norm - 500.0).abs() < 1e-9);
        // Post-clip gradient is (3, 4): update direction preserved.
        let data = p.to_vec();
        assert!(data[0] < 0.0 && data[1] < 0.0);
    }

    #[test]
    fn missing_gradient_means_no_movement() {
        let used = Tensor::param(&[1], vec![1.0]).unwrap();
        let unused = Tensor::param(&[1], vec![1.0]).unwrap();
        let params = vec![used.clone(), unused.clone()];
        let mut adam = Adam::new(AdamConfig::default(), &params);
        let loss = used.scale(1.0);
        loss.backward().unwrap();
        adam.step(&params, None).unwrap();
        assert_eq!(unused.to_vec(), vec![1.0]);
        assert_ne!(used.to_vec(), vec![1.0]);
    }
}
