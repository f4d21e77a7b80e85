use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DendriteGradMode, NetworkConfig, DEFAULT_T_MAX};
use crate::data::{encode_ttfs, Task, TaskStream};
use crate::error::{Error, Result};
use crate::grad::{train_batch, AdamConfig, AdamState, Sample};
use crate::model::Network;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentMode {
    /// All tasks mixed together; the upper bound.
    InterleavedNoDendrites,
    /// Tasks one after another without dendrites; the forgetting baseline.
    SequentialNoDendrites,
    /// Tasks one after another with dendritic segments on hidden layers.
    SequentialWithDendrites,
}

impl ExperimentMode {
    pub const ALL: [ExperimentMode; 3] = [
        ExperimentMode::InterleavedNoDendrites,
        ExperimentMode::SequentialNoDendrites,
        ExperimentMode::SequentialWithDendrites,
    ];

    pub fn dendrites(self) -> bool {
        matches!(self, ExperimentMode::SequentialWithDendrites)
    }

    pub fn sequential(self) -> bool {
        !matches!(self, ExperimentMode::InterleavedNoDendrites)
    }

    /// Hidden width that gives every mode the same parameter budget: two
    /// 400-wide dendritic layers hold as many parameters as two 403-wide
    /// plain ones.
    pub fn hidden_width(self) -> usize {
        if self.dendrites() {
            400
        } else {
            403
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentMode::InterleavedNoDendrites => "interleaved-no-dendrites",
            ExperimentMode::SequentialNoDendrites => "sequential-no-dendrites",
            ExperimentMode::SequentialWithDendrites => "sequential-with-dendrites",
        }
    }
}

impl fmt::Display for ExperimentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub mode: ExperimentMode,
    /// Hidden layer widths; `None` uses the mode's parameter-matched pair.
    #[serde(default)]
    pub hidden: Option<Vec<usize>>,
    pub seeds: Vec<u64>,
    pub epochs_per_task: usize,
    pub batch_size: usize,
    pub strength: f64,
    pub t_max: f64,
    pub v_th: f64,
    pub dendrite_grad_mode: DendriteGradMode,
    pub adam: AdamConfig,
}

pub const DEFAULT_BATCH_SIZE: usize = 128;

impl ExperimentSpec {
    pub fn new(mode: ExperimentMode) -> Self {
        Self {
            mode,
            hidden: None,
            seeds: vec![0, 1, 2, 3, 4],
            epochs_per_task: 5,
            batch_size: DEFAULT_BATCH_SIZE,
            strength: 4.0,
            t_max: DEFAULT_T_MAX,
            v_th: 1.0,
            dendrite_grad_mode: DendriteGradMode::Scaled,
            adam: AdamConfig::default(),
        }
    }

    pub fn hidden_layers(&self) -> Vec<usize> {
        self.hidden
            .clone()
            .unwrap_or_else(|| vec![self.mode.hidden_width(); 2])
    }

    pub fn network_config(&self, input: usize, outputs: usize, n_tasks: usize) -> NetworkConfig {
        let mut sizes = vec![input];
        sizes.extend(self.hidden_layers());
        sizes.push(outputs);
        NetworkConfig {
            layer_sizes: sizes,
            t_max: self.t_max,
            v_th: self.v_th,
            strength: self.strength,
            n_tasks,
            dendrite_grad_mode: self.dendrite_grad_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.hidden_layers().contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        if !self.adam.lr.is_finite() || self.adam.lr <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        self.network_config(1, 2, 1).validate()
    }

    /// Total number of evaluation points of a run.
    pub fn total_epochs(&self, n_tasks: usize) -> usize {
        self.epochs_per_task * n_tasks
    }
}

/// Test accuracy of every task after every epoch of one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTrace {
    pub mode: ExperimentMode,
    pub seed: u64,
    pub epochs_per_task: usize,
    /// `accuracy[epoch][task]`.
    pub accuracy: Vec<Vec<f64>>,
    /// Per-task accuracy of the final model.
    pub final_accuracy: Vec<f64>,
}

impl AccuracyTrace {
    pub fn final_average(&self) -> f64 {
        mean(&self.final_accuracy)
    }

    /// Accuracy of `task` right after its own training finished, in a
    /// sequential run.
    pub fn after_own_training(&self, task: usize) -> Option<f64> {
        let epoch = (task + 1) * self.epochs_per_task;
        epoch.checked_sub(1).and_then(|e| self.accuracy.get(e)).map(|row| row[task])
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Everything needed to continue a run after an interruption.
#[derive(Clone, Debug, PartialEq)]
pub struct RunState {
    pub seed: u64,
    pub epochs_done: usize,
    pub network: Network,
    pub optimizer: AdamState,
    pub accuracy: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// Fraction of correct earliest-spike predictions on the task's test set.
pub fn evaluate(net: &Network, task: &Task) -> Result<f64> {
    if task.test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let correct: usize = task
        .test
        .par_iter()
        .map(|s| -> Result<usize> {
            let x = encode_ttfs(&s.pixels, &net.config);
            Ok((net.predict(&x, task.id)? == s.label) as usize)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(correct as f64 / task.test.len() as f64)
}

pub fn evaluate_all(net: &Network, data: &TaskStream) -> Result<Vec<f64>> {
    data.tasks.iter().map(|t| evaluate(net, t)).collect()
}

fn epoch_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const INIT_STREAM: u64 = 0;
const SEQUENTIAL_STREAM: u64 = 1 << 20;
const INTERLEAVED_STREAM: u64 = 2 << 20;

/// `(task, index)` pairs visited during global epoch `epoch`.
///
/// Sequential modes walk task `epoch / E` for `E` epochs, reshuffled every
/// epoch. The interleaved mode shuffles the union of all training sets once
/// per pass and visits one `1 / n_tasks` slice of that pass per epoch, so
/// both protocols take the same number of gradient steps and report the same
/// number of evaluation points.
pub fn epoch_order(spec: &ExperimentSpec, data: &TaskStream, seed: u64, epoch: usize) -> Vec<(usize, usize)> {
    let n_tasks = data.len();
    if spec.mode.sequential() {
        let task = epoch / spec.epochs_per_task;
        let mut idx: Vec<usize> = (0..data.tasks[task].train.len()).collect();
        idx.shuffle(&mut epoch_rng(seed, SEQUENTIAL_STREAM + epoch as u64));
        idx.into_iter().map(|i| (task, i)).collect()
    } else {
        let pass = epoch / n_tasks;
        let slice = epoch % n_tasks;
        let mut all: Vec<(usize, usize)> = data
            .tasks
            .iter()
            .flat_map(|t| (0..t.train.len()).map(move |i| (t.id, i)))
            .collect();
        all.shuffle(&mut epoch_rng(seed, INTERLEAVED_STREAM + pass as u64));
        let len = all.len();
        let (lo, hi) = (slice * len / n_tasks, (slice + 1) * len / n_tasks);
        all[lo..hi].to_vec()
    }
}

pub fn initial_state(spec: &ExperimentSpec, data: &TaskStream, seed: u64) -> Result<RunState> {
    spec.validate()?;
    let input = data
        .tasks
        .iter()
        .find_map(|t| t.train.first().or(t.test.first()))
        .map(|s| s.pixels.len())
        .ok_or_else(|| Error::Config("task stream holds no samples".into()))?;
    let cfg = spec.network_config(input, 2, data.len());
    let network = Network::init(cfg, spec.mode.dendrites(), &mut epoch_rng(seed, INIT_STREAM))?;
    let optimizer = AdamState::new(&network, spec.adam);
    Ok(RunState {
        seed,
        epochs_done: 0,
        network,
        optimizer,
        accuracy: Vec::new(),
    })
}

/// Trains one epoch of `state` in place and appends its evaluation row.
pub fn run_epoch(spec: &ExperimentSpec, data: &TaskStream, state: &mut RunState) -> Result<f64> {
    let order = epoch_order(spec, data, state.seed, state.epochs_done);
    let mut loss = 0.0;
    let mut batches = 0usize;
    for chunk in order.chunks(spec.batch_size) {
        let batch: Vec<Sample> = chunk
            .iter()
            .map(|&(t, i)| {
                let img = &data.tasks[t].train[i];
                Sample {
                    spikes: encode_ttfs(&img.pixels, &state.network.config),
                    label: img.label,
                    task: t,
                }
            })
            .collect();
        loss += train_batch(&mut state.network, &mut state.optimizer, &batch)?;
        batches += 1;
    }
    state.accuracy.push(evaluate_all(&state.network, data)?);
    state.epochs_done += 1;
    Ok(if batches == 0 { 0.0 } else { loss / batches as f64 })
}

/// Runs one seed of an experiment. `resume` continues from a saved state;
/// `on_epoch` sees the state after every epoch and may stop the run early.
pub fn run_experiment_with<F>(
    spec: &ExperimentSpec,
    data: &TaskStream,
    seed: u64,
    resume: Option<RunState>,
    mut on_epoch: F,
) -> Result<(AccuracyTrace, RunState)>
where
    F: FnMut(&RunState, f64) -> Result<Flow>,
{
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::Config("empty task stream".into()));
    }
    let mut state = match resume {
        Some(s) if s.seed == seed => s,
        Some(s) => {
            return Err(Error::Config(format!(
                "resume state belongs to seed {}, not {seed}",
                s.seed
            )))
        }
        None => initial_state(spec, data, seed)?,
    };
    let total = spec.total_epochs(data.len());
    while state.epochs_done < total {
        let loss = run_epoch(spec, data, &mut state)?;
        log::info!(
            "{} seed {} epoch {}/{} loss {:.4} acc {:?}",
            spec.mode,
            seed,
            state.epochs_done,
            total,
            loss,
            state.accuracy.last().unwrap()
        );
        if on_epoch(&state, loss)? == Flow::Stop {
            break;
        }
    }
    let final_accuracy = match state.accuracy.last() {
        Some(row) if state.epochs_done == total => row.clone(),
        _ => evaluate_all(&state.network, data)?,
    };
    let trace = AccuracyTrace {
        mode: spec.mode,
        seed,
        epochs_per_task: spec.epochs_per_task,
        accuracy: state.accuracy.clone(),
        final_accuracy,
    };
    Ok((trace, state))
}

pub fn run_experiment(spec: &ExperimentSpec, data: &TaskStream, seed: u64) -> Result<AccuracyTrace> {
    run_experiment_with(spec, data, seed, None, |_, _| Ok(Flow::Continue)).map(|(t, _)| t)
}
