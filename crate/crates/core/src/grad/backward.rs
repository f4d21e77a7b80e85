//! Hand-derived gradients of spike times.
//!
//! For a neuron that fired with causal set `C`, slope `s = sum_{i in C} W_ij`,
//! crossing `t_j` and emitted time `t~_j = t_j + f(u_jn)`:
//!
//! ```text
//! dt~_j / dW_ij = (t_i - t~_j + f(u_jn)) / s
//! dt~_j / dt_i  = W_ij / s
//! dt~_j / du_jn = f'(u_jn) / s      (scaled mode)
//!               = f'(u_jn)          (direct mode)
//! ```
//!
//! Dead neurons and non-causal inputs receive exactly zero.

use serde::{Deserialize, Serialize};

use crate::config::{DendriteGradMode, NetworkConfig, DENOM_EPS};
use crate::model::{dendritic_delay_slope, DendriticLayer, LayerTrace, Network, NetworkTrace, NeuronTrace};

/// The forward artifacts the backward pass reads.
pub type GradientTape = NetworkTrace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    /// Full `n_tasks x neurons` matrix per dendritic layer.
    pub segments: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            segments: net
                .layers
                .iter()
                .map(|l| l.segments.as_ref().map(|s| vec![0.0; s.len()]))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.segments.iter_mut().zip(&other.segments) {
            if let (Some(a), Some(b)) = (a, b) {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            w.iter_mut().for_each(|x| *x *= factor);
        }
        for s in self.segments.iter_mut().flatten() {
            s.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().flatten().all(|&x| x == 0.0)
            && self.segments.iter().flatten().flatten().all(|&x| x == 0.0)
    }
}

/// Per-neuron coefficients shared by the weight and input gradients.
struct Coefficients {
    /// `upstream_j / s_j`, zero for dead neurons.
    scale: Vec<f64>,
    crossing: Vec<f64>,
    /// Latest causal input time; `-inf` for dead neurons.
    causal_until: Vec<f64>,
    latest: f64,
}

fn coefficients(trace: &LayerTrace, upstream: &[f64]) -> Coefficients {
    let n = trace.neurons.len();
    assert_eq!(upstream.len(), n, "upstream gradient length");
    let mut scale = vec![0.0; n];
    let mut crossing = vec![0.0; n];
    let mut causal_until = vec![f64::NEG_INFINITY; n];
    let mut latest = f64::NEG_INFINITY;
    for (j, neuron) in trace.neurons.iter().enumerate() {
        if let NeuronTrace::Fired {
            crossing: c,
            slope,
            causal_until: cut,
            ..
        } = *neuron
        {
            scale[j] = upstream[j] / slope.max(DENOM_EPS);
            crossing[j] = c;
            causal_until[j] = cut;
            latest = latest.max(cut);
        }
    }
    Coefficients {
        scale,
        crossing,
        causal_until,
        latest,
    }
}

/// Accumulates `dL/dW` for one layer into `out` (row-major, inputs x neurons).
pub fn grad_weights(trace: &LayerTrace, upstream: &[f64], out: &mut [f64]) {
    let n = trace.neurons.len();
    let co = coefficients(trace, upstream);
    #[allow(clippy::needless_range_loop)]
    for &i in &trace.schedule.order {
        let t_i = trace.inputs[i].time().expect("live input");
        if t_i > co.latest {
            break;
        }
        let row = &mut out[i * n..(i + 1) * n];
        for j in 0..n {
            if t_i <= co.causal_until[j] {
                row[j] += co.scale[j] * (t_i - co.crossing[j]);
            }
        }
    }
}

/// `dL/dt_i` for every presynaptic neuron of the layer.
pub fn grad_inputs(trace: &LayerTrace, layer: &DendriticLayer, upstream: &[f64]) -> Vec<f64> {
    let co = coefficients(trace, upstream);
    let mut grads = vec![0.0; layer.inputs];
    #[allow(clippy::needless_range_loop)]
    for &i in &trace.schedule.order {
        let t_i = trace.inputs[i].time().expect("live input");
        if t_i > co.latest {
            break;
        }
        let row = layer.weight_row(i);
        let mut acc = 0.0;
        for j in 0..layer.neurons {
            if t_i <= co.causal_until[j] {
                acc += co.scale[j] * row[j];
            }
        }
        grads[i] = acc;
    }
    grads
}

/// Accumulates `dL/du` into row `trace.task` of `out` (`n_tasks x neurons`).
/// Every other row is left untouched.
pub fn grad_dendrites(trace: &LayerTrace, layer: &DendriticLayer, upstream: &[f64], cfg: &NetworkConfig, out: &mut [f64]) {
    let Some(segments) = layer.segment_row(trace.task) else {
        return;
    };
    let row = &mut out[trace.task * layer.neurons..(trace.task + 1) * layer.neurons];
    for (j, neuron) in trace.neurons.iter().enumerate() {
        if let NeuronTrace::Fired { slope, .. } = *neuron {
            let df = dendritic_delay_slope(segments[j], cfg.strength);
            let local = match cfg.dendrite_grad_mode {
                DendriteGradMode::Scaled => df / slope.max(DENOM_EPS),
                DendriteGradMode::Direct => df,
            };
            row[j] += upstream[j] * local;
        }
    }
}

/// Backpropagates `output_grad` (dL/dt of the output layer) through the
/// whole network, accumulating into `grads`.
pub fn backward_into(net: &Network, tape: &GradientTape, output_grad: &[f64], grads: &mut Gradients) {
    let mut upstream = output_grad.to_vec();
    for l in (0..net.layers.len()).rev() {
        let layer = &net.layers[l];
        let trace = &tape.layers[l];
        grad_weights(trace, &upstream, &mut grads.weights[l]);
        if let Some(seg) = grads.segments[l].as_mut() {
            grad_dendrites(trace, layer, &upstream, &net.config, seg);
        }
        if l > 0 {
            upstream = grad_inputs(trace, layer, &upstream);
        }
    }
}

pub fn backward(net: &Network, tape: &GradientTape, output_grad: &[f64]) -> Gradients {
    let mut grads = Gradients::zeros_like(net);
    backward_into(net, tape, output_grad, &mut grads);
    grads
}
