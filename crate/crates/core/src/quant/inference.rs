//! Discrete-timestep reference inference of a quantized model.
//!
//! Per neuron: a synaptic accumulator gains the weights of inputs that spike
//! at timestep `t`; at the end of the timestep the membrane adds the
//! accumulator. Both registers saturate at 11 bits. The first timestep with
//! `membrane >= threshold` starts the delay, and the neuron spikes `delay`
//! timesteps later if that is still inside the window.

use serde::{Deserialize, Serialize};

use super::quantize::{saturate, QuantizedLayer, QuantizedModel};
use crate::data::{encode_ttfs_steps, TaskStream};
use crate::error::{Error, Result};

/// A spike timestep, or `None` for a neuron that never fired.
pub type StepSpike = Option<u16>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedOutput {
    /// Spike timesteps of every layer, first hidden to output.
    pub layers: Vec<Vec<StepSpike>>,
    pub prediction: usize,
}

/// Earliest spike wins; ties and all-dead go to the lowest index.
pub fn predict_steps(outputs: &[StepSpike]) -> usize {
    let mut best: Option<(usize, u16)> = None;
    for (k, s) in outputs.iter().enumerate() {
        if let Some(t) = *s {
            if best.is_none_or(|(_, bt)| t < bt) {
                best = Some((k, t));
            }
        }
    }
    best.map_or(0, |(k, _)| k)
}

fn arrivals(input: &[StepSpike], t_max: u16) -> Result<Vec<Vec<usize>>> {
    let mut by_step = vec![Vec::new(); t_max as usize + 1];
    for (i, s) in input.iter().enumerate() {
        if let Some(t) = *s {
            if t > t_max {
                return Err(Error::Config(format!("input {i} spikes at {t}, after T_max = {t_max}")));
            }
            by_step[t as usize].push(i);
        }
    }
    Ok(by_step)
}

pub fn quantized_layer(layer: &QuantizedLayer, input: &[StepSpike], task: usize, t_max: u16) -> Result<Vec<StepSpike>> {
    if input.len() != layer.inputs {
        return Err(Error::dim("quantized layer input", layer.inputs, input.len()));
    }
    let by_step = arrivals(input, t_max)?;
    let n = layer.neurons;
    let delays = layer.delay_row(task);
    let theta = layer.threshold as i32;
    let mut synaptic = vec![0i32; n];
    let mut membrane = vec![0i32; n];
    let mut crossed = vec![false; n];
    let mut out = vec![None; n];
    for (t, arriving) in by_step.iter().enumerate() {
        for &i in arriving {
            for (j, acc) in synaptic.iter_mut().enumerate() {
                *acc = saturate(*acc + layer.weight(i, j) as i32);
            }
        }
        for j in 0..n {
            if crossed[j] {
                continue;
            }
            membrane[j] = saturate(membrane[j] + synaptic[j]);
            if membrane[j] >= theta {
                crossed[j] = true;
                let spike = t + delays[j] as usize;
                if spike <= t_max as usize {
                    out[j] = Some(spike as u16);
                }
            }
        }
    }
    Ok(out)
}

pub fn quantized_inference(model: &QuantizedModel, input: &[StepSpike], task: usize) -> Result<QuantizedOutput> {
    if task >= model.n_tasks {
        return Err(Error::TaskOutOfRange {
            task,
            n_tasks: model.n_tasks,
        });
    }
    if input.len() != model.input_size() {
        return Err(Error::dim("quantized input spikes", model.input_size(), input.len()));
    }
    let mut layers: Vec<Vec<StepSpike>> = Vec::with_capacity(model.layers.len());
    for layer in &model.layers {
        let prev = layers.last().map_or(input, Vec::as_slice);
        let out = quantized_layer(layer, prev, task, model.t_max)?;
        layers.push(out);
    }
    let prediction = predict_steps(layers.last().map_or(&[][..], Vec::as_slice));
    Ok(QuantizedOutput { layers, prediction })
}

/// Per-task accuracy of the quantized model on the test sets.
pub fn quantized_accuracy(model: &QuantizedModel, data: &TaskStream) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    data.tasks
        .iter()
        .map(|task| {
            if task.test.is_empty() {
                return Err(Error::EmptyTestSet);
            }
            let correct = task
                .test
                .par_iter()
                .map(|s| -> Result<usize> {
                    let x = encode_ttfs_steps(&s.pixels, model.t_max);
                    Ok((quantized_inference(model, &x, task.id)?.prediction == s.label) as usize)
                })
                .try_reduce(|| 0, |a, b| Ok(a + b))?;
            Ok(correct as f64 / task.test.len() as f64)
        })
        .collect()
}
