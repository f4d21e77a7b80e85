use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::layer::{layer_forward, layer_forward_traced, DendriticLayer, LayerTrace};
use super::spike::{predict_class, SpikeRecord};
use crate::config::NetworkConfig;
use crate::error::{Error, Result};

/// Standard deviation of the initial dendritic segments.
const SEGMENT_INIT_STD: f64 = 0.1;

/// Fraction of hidden neurons that should fire on random input at init.
const MIN_INIT_FIRING: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub config: NetworkConfig,
    pub layers: Vec<DendriticLayer>,
}

/// Forward artifacts of every layer, input to output.
#[derive(Clone, Debug)]
pub struct NetworkTrace {
    pub layers: Vec<LayerTrace>,
}

impl NetworkTrace {
    pub fn outputs(&self) -> Vec<SpikeRecord> {
        self.layers.last().map(LayerTrace::outputs).unwrap_or_default()
    }
}

impl Network {
    pub fn new(config: NetworkConfig, layers: Vec<DendriticLayer>) -> Result<Self> {
        config.validate()?;
        let sizes = &config.layer_sizes;
        if layers.len() != sizes.len() - 1 {
            return Err(Error::dim("layer count", sizes.len() - 1, layers.len()));
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.inputs != sizes[l] {
                return Err(Error::dim(format!("layer {l} inputs"), sizes[l], layer.inputs));
            }
            if layer.neurons != sizes[l + 1] {
                return Err(Error::dim(format!("layer {l} neurons"), sizes[l + 1], layer.neurons));
            }
            if layer.has_dendrites() && layer.n_segment_rows() != config.n_tasks {
                return Err(Error::dim(
                    format!("layer {l} dendritic rows"),
                    config.n_tasks,
                    layer.n_segment_rows(),
                ));
            }
        }
        Ok(Self { config, layers })
    }

    /// Random initialisation. Weights of a layer with `I` inputs are drawn
    /// from `N(3 V_th / I, 1 / sqrt(I))` so that most neurons cross the
    /// threshold early; with `dendrites`, every hidden layer gets segments
    /// drawn from `N(0, 0.1)`. The output layer never has dendrites.
    pub fn init<R: Rng + ?Sized>(config: NetworkConfig, dendrites: bool, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let sizes = config.layer_sizes.clone();
        let n_layers = sizes.len() - 1;
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let (inputs, neurons) = (sizes[l], sizes[l + 1]);
            let fan_in = inputs as f64;
            let normal = Normal::new(3.0 * config.v_th / fan_in, 1.0 / fan_in.sqrt())
                .map_err(|e| Error::Config(e.to_string()))?;
            let weights = (0..inputs * neurons).map(|_| normal.sample(rng)).collect();
            let segments = (dendrites && l + 1 < n_layers).then(|| {
                let normal = Normal::new(0.0, SEGMENT_INIT_STD).expect("valid std");
                (0..config.n_tasks * neurons).map(|_| normal.sample(rng)).collect()
            });
            layers.push(DendriticLayer::new(inputs, neurons, weights, segments)?);
        }
        Self::new(config, layers)
    }

    pub fn has_dendrites(&self) -> bool {
        self.layers.iter().any(DendriticLayer::has_dendrites)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.segments.as_ref().map_or(0, Vec::len))
            .sum()
    }

    fn check_input(&self, input: &[SpikeRecord], task: usize) -> Result<()> {
        if input.len() != self.config.input_size() {
            return Err(Error::dim("input spikes", self.config.input_size(), input.len()));
        }
        if task >= self.config.n_tasks {
            return Err(Error::TaskOutOfRange {
                task,
                n_tasks: self.config.n_tasks,
            });
        }
        Ok(())
    }

    /// Spike records of every layer, first hidden layer to output.
    pub fn forward(&self, input: &[SpikeRecord], task: usize) -> Result<Vec<Vec<SpikeRecord>>> {
        self.check_input(input, task)?;
        let mut all: Vec<Vec<SpikeRecord>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let prev = all.last().map_or(input, Vec::as_slice);
            let out = layer_forward(prev, layer, task, &self.config)?;
            all.push(out);
        }
        Ok(all)
    }

    pub fn forward_traced(&self, input: &[SpikeRecord], task: usize) -> Result<NetworkTrace> {
        self.check_input(input, task)?;
        let mut layers: Vec<LayerTrace> = Vec::with_capacity(self.layers.len());
        let mut current = input.to_vec();
        for layer in &self.layers {
            let trace = layer_forward_traced(&current, layer, task, &self.config)?;
            current = trace.outputs();
            layers.push(trace);
        }
        Ok(NetworkTrace { layers })
    }

    pub fn output(&self, input: &[SpikeRecord], task: usize) -> Result<Vec<SpikeRecord>> {
        Ok(self.forward(input, task)?.pop().unwrap_or_default())
    }

    pub fn predict(&self, input: &[SpikeRecord], task: usize) -> Result<usize> {
        Ok(predict_class(&self.output(input, task)?))
    }

    /// Fraction of hidden neurons that fire, averaged over `samples`.
    pub fn hidden_firing_rate(&self, samples: &[Vec<SpikeRecord>], task: usize) -> Result<f64> {
        let mut fired = 0usize;
        let mut total = 0usize;
        for s in samples {
            let layers = self.forward(s, task)?;
            for out in &layers[..layers.len() - 1] {
                fired += out.iter().filter(|r| !r.is_dead()).count();
                total += out.len();
            }
        }
        Ok(if total == 0 { 1.0 } else { fired as f64 / total as f64 })
    }

    /// Logs a warning when too few hidden neurons fire on `samples`.
    pub fn check_init_activity(&self, samples: &[Vec<SpikeRecord>]) -> Result<f64> {
        let rate = self.hidden_firing_rate(samples, 0)?;
        if rate < MIN_INIT_FIRING {
            log::warn!(
                "only {:.1}% of hidden neurons fire at initialisation (want >= {:.0}%)",
                rate * 100.0,
                MIN_INIT_FIRING * 100.0
            );
        }
        Ok(rate)
    }
}
