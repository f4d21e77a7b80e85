use serde::{Deserialize, Serialize};

use super::backward::Gradients;
use crate::error::{Error, Result};
use crate::model::Network;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moments and step count for one parameter tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamSlot {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamSlot {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], slot: &mut AdamSlot, cfg: &AdamConfig) -> Result<()> {
    if params.len() != grads.len() || params.len() != slot.m.len() {
        return Err(Error::dim("adam update", params.len(), grads.len().min(slot.m.len())));
    }
    slot.step += 1;
    let bias1 = 1.0 - cfg.beta1.powi(slot.step as i32);
    let bias2 = 1.0 - cfg.beta2.powi(slot.step as i32);
    for ((p, &g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(slot.m.iter_mut().zip(slot.v.iter_mut()))
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

/// Optimizer state for a whole network. Each dendritic segment row is its
/// own slot so that a task's row is only ever moved while that task trains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub weights: Vec<AdamSlot>,
    /// `segments[layer][task]`; empty for layers without dendrites.
    pub segments: Vec<Vec<AdamSlot>>,
}

impl AdamState {
    pub fn new(net: &Network, config: AdamConfig) -> Self {
        Self {
            config,
            weights: net.layers.iter().map(|l| AdamSlot::new(l.weights.len())).collect(),
            segments: net
                .layers
                .iter()
                .map(|l| {
                    (0..l.n_segment_rows())
                        .map(|_| AdamSlot::new(l.neurons))
                        .collect()
                })
                .collect(),
        }
    }

    /// Applies `grads` to every weight matrix and to the segment rows of
    /// `tasks` only.
    pub fn apply(&mut self, net: &mut Network, grads: &Gradients, tasks: &[usize]) -> Result<()> {
        let cfg = self.config;
        for (l, layer) in net.layers.iter_mut().enumerate() {
            adam_step(&mut layer.weights, &grads.weights[l], &mut self.weights[l], &cfg)?;
            let n = layer.neurons;
            if let (Some(params), Some(g)) = (layer.segments.as_mut(), grads.segments[l].as_ref()) {
                for &task in tasks {
                    let range = task * n..(task + 1) * n;
                    adam_step(&mut params[range.clone()], &g[range], &mut self.segments[l][task], &cfg)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0, -2.0];
        let mut slot = AdamSlot::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut slot, &AdamConfig::default()).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = AdamConfig::default();
        let mut p = vec![0.0, 0.0];
        let mut slot = AdamSlot::new(2);
        adam_step(&mut p, &[0.5, -3.0], &mut slot, &cfg).unwrap();
        assert!((p[0] + cfg.lr).abs() < 1e-10);
        assert!((p[1] - cfg.lr).abs() < 1e-10);
    }

    #[test]
    fn quadratic_descends_monotonically() {
        let cfg = AdamConfig { lr: 1e-2, ..Default::default() };
        let mut w = vec![1.0];
        let mut slot = AdamSlot::new(1);
        let mut prev = w[0] * w[0];
        for _ in 0..100 {
            let g = [2.0 * w[0]];
            adam_step(&mut w, &g, &mut slot, &cfg).unwrap();
            let loss = w[0] * w[0];
            assert!(loss < prev);
            prev = loss;
        }
    }

    #[test]
    fn shape_mismatch_is_error() {
        let mut p = vec![0.0; 3];
        let mut slot = AdamSlot::new(3);
        assert!(adam_step(&mut p, &[0.0; 2], &mut slot, &AdamConfig::default()).is_err());
    }
}
