//! The three continual-learning experiments, their metrics and checkpoints.

mod checkpoint;
mod experiment;
mod report;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use experiment::{
    epoch_order, evaluate, evaluate_all, initial_state, run_epoch, run_experiment, run_experiment_with, AccuracyTrace,
    ExperimentMode, ExperimentSpec, Flow, RunState, DEFAULT_BATCH_SIZE,
};
pub use report::{mean_std, summarize, traces_to_csv, Summary};
