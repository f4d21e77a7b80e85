use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::experiment::{mean, AccuracyTrace, ExperimentMode};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: ExperimentMode,
    pub seeds: Vec<u64>,
    pub final_average_per_seed: Vec<f64>,
    pub mean_final_accuracy: f64,
    /// Sample standard deviation across seeds; 0 for a single seed.
    pub std_final_accuracy: f64,
    /// Mean over seeds of `accuracy[epoch][task]`.
    pub mean_curve: Vec<Vec<f64>>,
    pub mean_final_per_task: Vec<f64>,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, var.sqrt())
}

pub fn summarize(traces: &[AccuracyTrace]) -> Result<Summary> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Config("nothing to summarize".into()))?;
    let finals: Vec<f64> = traces.iter().map(AccuracyTrace::final_average).collect();
    let (m, s) = mean_std(&finals);

    let epochs = traces.iter().map(|t| t.accuracy.len()).min().unwrap_or(0);
    let n_tasks = first.final_accuracy.len();
    let mean_curve = (0..epochs)
        .map(|e| {
            (0..n_tasks)
                .map(|k| mean(&traces.iter().map(|t| t.accuracy[e][k]).collect::<Vec<_>>()))
                .collect()
        })
        .collect();
    let mean_final_per_task = (0..n_tasks)
        .map(|k| mean(&traces.iter().map(|t| t.final_accuracy[k]).collect::<Vec<_>>()))
        .collect();
    Ok(Summary {
        mode: first.mode,
        seeds: traces.iter().map(|t| t.seed).collect(),
        final_average_per_seed: finals,
        mean_final_accuracy: m,
        std_final_accuracy: s,
        mean_curve,
        mean_final_per_task,
    })
}

/// `seed,epoch,task,accuracy`, one row per evaluation.
pub fn traces_to_csv(traces: &[AccuracyTrace]) -> String {
    let mut out = String::from("seed,epoch,task,accuracy\n");
    for t in traces {
        for (e, row) in t.accuracy.iter().enumerate() {
            for (k, acc) in row.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{:.6}", t.seed, e + 1, k, acc);
            }
        }
    }
    out
}
