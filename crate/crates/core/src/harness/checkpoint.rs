//! Versioned binary checkpoint container.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic    8 bytes  "TTFSCKPT"
//! version  u32
//! hlen     u32      length of the JSON header
//! header   hlen bytes of UTF-8 JSON (config, seed, shapes, progress)
//! tensors  f64 blobs in header order: per layer weights then segments;
//!          with optimizer state, per layer (m, v) of the weights followed
//!          by (m, v) of every segment row
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::{ExperimentMode, RunState};
use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::grad::{AdamConfig, AdamSlot, AdamState};
use crate::model::{DendriticLayer, Network};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"TTFSCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub mode: Option<ExperimentMode>,
    pub epochs_done: usize,
    pub network: Network,
    pub optimizer: Option<AdamState>,
    pub accuracy: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct LayerShape {
    inputs: usize,
    neurons: usize,
    segment_rows: usize,
}

#[derive(Serialize, Deserialize)]
struct OptimizerHeader {
    config: AdamConfig,
    weight_steps: Vec<u64>,
    segment_steps: Vec<Vec<u64>>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    seed: u64,
    mode: Option<ExperimentMode>,
    epochs_done: usize,
    config: NetworkConfig,
    layers: Vec<LayerShape>,
    optimizer: Option<OptimizerHeader>,
    accuracy: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn from_state(state: &RunState, mode: Option<ExperimentMode>) -> Self {
        Self {
            seed: state.seed,
            mode,
            epochs_done: state.epochs_done,
            network: state.network.clone(),
            optimizer: Some(state.optimizer.clone()),
            accuracy: state.accuracy.clone(),
        }
    }

    pub fn into_state(self) -> Result<RunState> {
        let optimizer = self
            .optimizer
            .ok_or_else(|| Error::Format("checkpoint carries no optimizer state; cannot resume".into()))?;
        Ok(RunState {
            seed: self.seed,
            epochs_done: self.epochs_done,
            network: self.network,
            optimizer,
            accuracy: self.accuracy,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let net = &self.network;
        let header = Header {
            seed: self.seed,
            mode: self.mode,
            epochs_done: self.epochs_done,
            config: net.config.clone(),
            layers: net
                .layers
                .iter()
                .map(|l| LayerShape {
                    inputs: l.inputs,
                    neurons: l.neurons,
                    segment_rows: l.n_segment_rows(),
                })
                .collect(),
            optimizer: self.optimizer.as_ref().map(|o| OptimizerHeader {
                config: o.config,
                weight_steps: o.weights.iter().map(|s| s.step).collect(),
                segment_steps: o.segments.iter().map(|rows| rows.iter().map(|s| s.step).collect()).collect(),
            }),
            accuracy: self.accuracy.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(16 + json.len() + 8 * net.parameter_count() * 3);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);

        let mut put = |xs: &[f64]| xs.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        for l in &net.layers {
            put(&l.weights);
            if let Some(s) = &l.segments {
                put(s);
            }
        }
        if let Some(o) = &self.optimizer {
            for (l, slot) in o.weights.iter().enumerate() {
                put(&slot.m);
                put(&slot.v);
                for row in &o.segments[l] {
                    put(&row.m);
                    put(&row.v);
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fmt = |m: &str| Error::Format(format!("checkpoint: {m}"));
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(fmt("missing TTFSCKPT magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(fmt(&format!("unsupported version {version}")));
        }
        let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let json = bytes.get(16..16 + hlen).ok_or_else(|| fmt("truncated header"))?;
        let header: Header = serde_json::from_slice(json)?;

        let mut cursor = 16 + hlen;
        let mut take = |n: usize| -> Result<Vec<f64>> {
            let end = cursor + 8 * n;
            let raw = bytes.get(cursor..end).ok_or_else(|| fmt("truncated tensor data"))?;
            cursor = end;
            Ok(raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };

        let mut layers = Vec::with_capacity(header.layers.len());
        for shape in &header.layers {
            let weights = take(shape.inputs * shape.neurons)?;
            let segments = if shape.segment_rows > 0 {
                Some(take(shape.segment_rows * shape.neurons)?)
            } else {
                None
            };
            layers.push(DendriticLayer::new(shape.inputs, shape.neurons, weights, segments)?);
        }
        let optimizer = match &header.optimizer {
            None => None,
            Some(oh) => {
                let mut weights = Vec::new();
                let mut segments = Vec::new();
                for (l, shape) in header.layers.iter().enumerate() {
                    let n = shape.inputs * shape.neurons;
                    let step = *oh.weight_steps.get(l).ok_or_else(|| fmt("optimizer step table"))?;
                    weights.push(AdamSlot {
                        m: take(n)?,
                        v: take(n)?,
                        step,
                    });
                    let mut rows = Vec::new();
                    for r in 0..shape.segment_rows {
                        let step = *oh
                            .segment_steps
                            .get(l)
                            .and_then(|s| s.get(r))
                            .ok_or_else(|| fmt("optimizer step table"))?;
                        rows.push(AdamSlot {
                            m: take(shape.neurons)?,
                            v: take(shape.neurons)?,
                            step,
                        });
                    }
                    segments.push(rows);
                }
                Some(AdamState {
                    config: oh.config,
                    weights,
                    segments,
                })
            }
        };
        if cursor != bytes.len() {
            return Err(fmt("trailing bytes"));
        }
        Ok(Self {
            seed: header.seed,
            mode: header.mode,
            epochs_done: header.epochs_done,
            network: Network::new(header.config, layers)?,
            optimizer,
            accuracy: header.accuracy,
        })
    }

    /// Writes through a temporary file so an interrupted save never leaves
    /// a truncated checkpoint behind.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingPath(path.to_path_buf()));
        }
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grad::AdamConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(dendrites: bool) -> Checkpoint {
        let mut cfg = NetworkConfig::new(vec![5, 4, 3, 2]);
        cfg.n_tasks = 3;
        let net = Network::init(cfg, dendrites, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let mut opt = AdamState::new(&net, AdamConfig::default());
        opt.weights[1].step = 7;
        opt.weights[1].m[2] = 0.25;
        if dendrites {
            opt.segments[0][2].step = 3;
            opt.segments[0][2].v[1] = 1e-3;
        }
        Checkpoint {
            seed: 42,
            mode: Some(ExperimentMode::SequentialWithDendrites),
            epochs_done: 3,
            network: net,
            optimizer: Some(opt),
            accuracy: vec![vec![0.5, 0.6, 0.7]; 3],
        }
    }

    #[test]
    fn round_trip() {
        for dendrites in [true, false] {
            let ck = sample(dendrites);
            assert_eq!(Checkpoint::from_bytes(&ck.to_bytes().unwrap()).unwrap(), ck);
        }
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let bytes = sample(true).to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 8]).is_err());
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.bin");
        let ck = sample(false);
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
        assert!(matches!(
            Checkpoint::load(&dir.path().join("nope.bin")),
            Err(Error::MissingPath(_))
        ));
    }
}
