use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest slope (sum of causal weights) for which a threshold crossing is
/// considered. Also the clamp used by every division in the backward pass.
pub const DENOM_EPS: f64 = 1e-12;

/// Observation window used for MNIST encoding.
pub const DEFAULT_T_MAX: f64 = 450.0;

/// How the gradient of a spike time with respect to its dendritic segment is
/// formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DendriteGradMode {
    /// `f'(u) / sum(W)`: the delay derivative scaled by the causal slope.
    #[default]
    Scaled,
    /// `f'(u)`: exact derivative of the modulated spike time.
    Direct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub layer_sizes: Vec<usize>,
    pub t_max: f64,
    pub v_th: f64,
    /// Dendritic delay strength `S`; delays lie in `(0, S)`.
    pub strength: f64,
    pub n_tasks: usize,
    #[serde(default)]
    pub dendrite_grad_mode: DendriteGradMode,
}

impl NetworkConfig {
    pub fn new(layer_sizes: Vec<usize>) -> Self {
        Self {
            layer_sizes,
            t_max: DEFAULT_T_MAX,
            v_th: 1.0,
            strength: 4.0,
            n_tasks: 5,
            dendrite_grad_mode: DendriteGradMode::Scaled,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::Config(format!(
                "need at least two layer sizes, got {:?}",
                self.layer_sizes
            )));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::Config(format!(
                "layer sizes must be positive, got {:?}",
                self.layer_sizes
            )));
        }
        for (name, value) in [("t_max", self.t_max), ("v_th", self.v_th), ("strength", self.strength)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        if self.n_tasks == 0 {
            return Err(Error::Config("n_tasks must be at least 1".into()));
        }
        Ok(())
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().expect("validated layer sizes")
    }
}
