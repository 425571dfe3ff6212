//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment buffers (one pair per weight tensor) plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T = f32> {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<Tensor<T>>,
    pub second_moment: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[Tensor<T>], config: AdamConfig) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            config,
            step: 0,
            first_moment: zeros(),
            second_moment: zeros(),
        }
    }

    /// Applies one update in place. Rejects the whole step, leaving
    /// parameters and state untouched, if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first_moment.len() {
            return Err(Error::shape(format!(
                "adam: {} params, {} grads, {} moment buffers",
                params.len(),
                grads.len(),
                self.first_moment.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first_moment) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::shape(format!(
                    "adam: param {:?} vs grad {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
        }
        if !grads.iter().all(Tensor::is_finite) {
            return Err(Error::NonFinite("gradient"));
        }

        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - f64::from(c.beta1).powi(t);
        let bias2 = 1.0 - f64::from(c.beta2).powi(t);
        let b1 = T::from_f64_lossy(c.beta1.into());
        let b2 = T::from_f64_lossy(c.beta2.into());
        let one = T::one();
        // lr·m̂/(√v̂+ε) = step_size·m/(√v + ε·√bias2)
        let step_size = T::from_f64_lossy(f64::from(c.learning_rate) * bias2.sqrt() / bias1);
        let eps_hat = T::from_f64_lossy(f64::from(c.epsilon) * bias2.sqrt());

        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            for (((w, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = b1 * *mi + (one - b1) * gi;
                *vi = b2 * *vi + (one - b2) * gi * gi;
                *w = *w - step_size * *mi / (vi.sqrt() + eps_hat);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_weight_first_step() {
        let mut params = vec![Tensor::new(vec![1], vec![1.0f32]).unwrap()];
        let grads = vec![Tensor::new(vec![1], vec![0.5f32]).unwrap()];
        let mut state = AdamState::new(&params, AdamConfig::default());
        state.step(&mut params, &grads).unwrap();
        // m̂ = 0.5, v̂ = 0.25 → update = lr·0.5/(0.5+1e-8) ≈ 1e-4
        assert!((params[0].data()[0] - 0.9999).abs() < 1e-7);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut params = vec![Tensor::from_fn(&[3, 2], |i| i as f32 - 2.5)];
        let before = params.clone();
        let grads = vec![Tensor::zeros(&[3, 2])];
        let mut state = AdamState::new(&params, AdamConfig::default());
        for _ in 0..25 {
            state.step(&mut params, &grads).unwrap();
        }
        assert_eq!(params, before);
        assert_eq!(state.step, 25);
    }

    #[test]
    fn non_finite_gradient_rejected_without_mutation() {
        let mut params = vec![Tensor::new(vec![2], vec![1.0f32, 2.0]).unwrap()];
        let grads = vec![Tensor::new(vec![2], vec![0.1f32, f32::NAN]).unwrap()];
        let mut state = AdamState::new(&params, AdamConfig::default());
        assert!(matches!(state.step(&mut params, &grads), Err(Error::NonFinite(_))));
        assert_eq!(params[0].data(), &[1.0, 2.0]);
        assert_eq!(state.step, 0);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut params = vec![Tensor::from_fn(&[5], |i| i as f32 * 0.1)];
            let mut state = AdamState::new(&params, AdamConfig::default());
            for k in 0..50 {
                let g = vec![Tensor::from_fn(&[5], |i| ((i + k) as f32 * 0.77).sin())];
                state.step(&mut params, &g).unwrap();
            }
            params
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn converges_on_quadratic() {
        let mut params = vec![Tensor::new(vec![1], vec![3.0f64]).unwrap()];
        let mut state = AdamState::new(
            &params,
            AdamConfig {
                learning_rate: 0.05,
                ..AdamConfig::default()
            },
        );
        for _ in 0..2000 {
            let w = params[0].data()[0];
            let g = vec![Tensor::new(vec![1], vec![2.0 * (w - 1.0)]).unwrap()];
            state.step(&mut params, &g).unwrap();
        }
        assert!((params[0].data()[0] - 1.0).abs() < 1e-3);
    }
}
