use serde::{Deserialize, Serialize};

use crate::data::round_half_away;
use crate::error::{Error, Result};
use crate::model::{dendritic_delay, Network};

/// Signed synaptic weight width.
pub const WEIGHT_BITS: u32 = 4;
/// Unsigned dendritic delay width.
pub const DELAY_BITS: u32 = 8;
/// Signed width of the membrane and synaptic registers.
pub const MEMBRANE_BITS: u32 = 11;

pub const WEIGHT_MIN: i32 = -(1 << (WEIGHT_BITS - 1));
pub const WEIGHT_MAX: i32 = (1 << (WEIGHT_BITS - 1)) - 1;
pub const DELAY_MAX: i32 = (1 << DELAY_BITS) - 1;
pub const MEMBRANE_MIN: i32 = -(1 << (MEMBRANE_BITS - 1));
pub const MEMBRANE_MAX: i32 = (1 << (MEMBRANE_BITS - 1)) - 1;

/// Clamp to the 11-bit signed register range.
#[inline]
pub fn saturate(x: i32) -> i32 {
    x.clamp(MEMBRANE_MIN, MEMBRANE_MAX)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizedLayer {
    pub inputs: usize,
    pub neurons: usize,
    /// Row-major `inputs x neurons`, each in `[-8, 7]`.
    pub weights: Vec<i8>,
    /// Real value of one weight step.
    pub scale: f64,
    /// Threshold in weight units, `round(V_th / scale)`.
    pub threshold: i16,
    /// Row-major `n_tasks x neurons` delays in timesteps, each in `[0, 255]`.
    /// All zero for layers without dendrites.
    pub delays: Vec<u8>,
    pub has_dendrites: bool,
}

impl QuantizedLayer {
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> i8 {
        self.weights[i * self.neurons + j]
    }

    #[inline]
    pub fn delay_row(&self, task: usize) -> &[u8] {
        &self.delays[task * self.neurons..(task + 1) * self.neurons]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizedModel {
    pub layers: Vec<QuantizedLayer>,
    pub n_tasks: usize,
    /// Observation window in timesteps.
    pub t_max: u16,
}

impl QuantizedModel {
    pub fn input_size(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, |l| l.neurons)
    }

    pub fn validate(&self) -> Result<()> {
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.weights.len() != layer.inputs * layer.neurons {
                return Err(Error::dim(format!("quantized layer {l} weights"), layer.inputs * layer.neurons, layer.weights.len()));
            }
            if layer.delays.len() != self.n_tasks * layer.neurons {
                return Err(Error::dim(format!("quantized layer {l} delays"), self.n_tasks * layer.neurons, layer.delays.len()));
            }
            if let Some(w) = layer.weights.iter().find(|&&w| !(WEIGHT_MIN..=WEIGHT_MAX).contains(&(w as i32))) {
                return Err(Error::Quantization(format!("layer {l}: weight {w} outside 4-bit range")));
            }
            if !(MEMBRANE_MIN..=MEMBRANE_MAX).contains(&(layer.threshold as i32)) {
                return Err(Error::Quantization(format!("layer {l}: threshold {} outside 11-bit range", layer.threshold)));
            }
            if l > 0 && self.layers[l - 1].neurons != layer.inputs {
                return Err(Error::dim(format!("quantized layer {l} inputs"), self.layers[l - 1].neurons, layer.inputs));
            }
        }
        Ok(())
    }
}

/// Per-layer symmetric quantization: `scale = max|W| / 7`, weights rounded
/// half away from zero and clamped to 4 bits, threshold on the same scale,
/// and the dendritic delay `f(u)` (not `u`) rounded to whole timesteps.
pub fn quantize_model(net: &Network) -> Result<QuantizedModel> {
    let cfg = &net.config;
    if cfg.t_max.fract() != 0.0 || cfg.t_max > u16::MAX as f64 {
        return Err(Error::Quantization(format!("T_max {} is not a whole number of timesteps", cfg.t_max)));
    }
    let mut layers = Vec::with_capacity(net.layers.len());
    for (l, layer) in net.layers.iter().enumerate() {
        let max_abs = layer.weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        if max_abs == 0.0 || !max_abs.is_finite() {
            return Err(Error::Quantization(format!("layer {l}: all-zero or non-finite weights, scale undefined")));
        }
        let scale = max_abs / WEIGHT_MAX as f64;
        let weights = layer
            .weights
            .iter()
            .map(|w| (round_half_away(w / scale) as i32).clamp(WEIGHT_MIN, WEIGHT_MAX) as i8)
            .collect();
        let threshold = (round_half_away(cfg.v_th / scale) as i64).clamp(MEMBRANE_MIN as i64, MEMBRANE_MAX as i64) as i16;
        let delays = match &layer.segments {
            Some(seg) => seg
                .iter()
                .map(|&u| (round_half_away(dendritic_delay(u, cfg.strength)) as i32).clamp(0, DELAY_MAX) as u8)
                .collect(),
            None => vec![0; cfg.n_tasks * layer.neurons],
        };
        layers.push(QuantizedLayer {
            inputs: layer.inputs,
            neurons: layer.neurons,
            weights,
            scale,
            threshold,
            delays,
            has_dendrites: layer.has_dendrites(),
        });
    }
    let model = QuantizedModel {
        layers,
        n_tasks: cfg.n_tasks,
        t_max: cfg.t_max as u16,
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::NetworkConfig;
    use crate::model::DendriticLayer;
    use proptest::prelude::*;

    fn net_with(weights: Vec<f64>, segments: Option<Vec<f64>>) -> Network {
        let mut cfg = NetworkConfig::new(vec![2, 2]);
        cfg.n_tasks = 1;
        Network::new(cfg, vec![DendriticLayer::new(2, 2, weights, segments).unwrap()]).unwrap()
    }

    #[test]
    fn max_entry_maps_to_seven() {
        let q = quantize_model(&net_with(vec![0.0, 0.0, 0.35, 0.0], None)).unwrap();
        assert_eq!(q.layers[0].weights, vec![0, 0, 7, 0]);
        assert!((q.layers[0].scale - 0.05).abs() < 1e-15);
        assert_eq!(q.layers[0].threshold, 20);
    }

    #[test]
    fn all_zero_layer_is_error() {
        assert!(matches!(
            quantize_model(&net_with(vec![0.0; 4], None)),
            Err(Error::Quantization(_))
        ));
    }

    #[test]
    fn delays_quantize_the_delay_not_the_segment() {
        // f(0) = 2, f(ln 3) = 1, f(-20) ~ 4, f(20) ~ 0
        let q = quantize_model(&net_with(vec![1.0, 0.5, -0.5, 0.25], Some(vec![0.0, 3f64.ln()]))).unwrap();
        assert_eq!(q.layers[0].delays, vec![2, 1]);
        let q = quantize_model(&net_with(vec![1.0; 4], Some(vec![-20.0, 20.0]))).unwrap();
        assert_eq!(q.layers[0].delays, vec![4, 0]);
    }

    #[test]
    fn threshold_saturates_to_eleven_bits() {
        let q = quantize_model(&net_with(vec![1e-4, 0.0, 0.0, 0.0], None)).unwrap();
        assert_eq!(q.layers[0].threshold as i32, MEMBRANE_MAX);
    }

    proptest! {
        #[test]
        fn dequantization_error_is_half_a_step(ws in proptest::collection::vec(-3.0f64..3.0, 4)) {
            prop_assume!(ws.iter().any(|w| w.abs() > 1e-6));
            let net = net_with(ws.clone(), None);
            let q = quantize_model(&net).unwrap();
            let layer = &q.layers[0];
            for (w, &qw) in ws.iter().zip(&layer.weights) {
                prop_assert!((w - qw as f64 * layer.scale).abs() <= layer.scale / 2.0 + 1e-12);
                prop_assert!((WEIGHT_MIN..=WEIGHT_MAX).contains(&(qw as i32)));
            }
        }
    }
}
