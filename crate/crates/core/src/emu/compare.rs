use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pipeline::{EmulatorOptions, Pipeline};
use super::transcript::{EventKind, Transcript};
use crate::data::{encode_ttfs_steps, TaskStream};
use crate::error::{Error, Result};
use crate::quant::{quantized_inference, MemoryImage, QuantizedModel, QuantizedOutput, StepSpike};

/// An encoded test input with its task and label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepSample {
    pub spikes: Vec<StepSpike>,
    pub task: usize,
    pub label: usize,
}

/// Encodes up to `per_task` test images of every task (all if `None`).
pub fn test_step_samples(data: &TaskStream, t_max: u16, per_task: Option<usize>) -> Vec<StepSample> {
    data.tasks
        .iter()
        .flat_map(|task| {
            let n = per_task.unwrap_or(task.test.len()).min(task.test.len());
            task.test[..n].iter().map(move |s| StepSample {
                spikes: encode_ttfs_steps(&s.pixels, t_max),
                task: task.id,
                label: s.label,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub sample: usize,
    pub task: usize,
    pub layer: usize,
    pub address: usize,
    pub reference: StepSpike,
    pub emulated: StepSpike,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub samples: usize,
    pub mismatched_samples: usize,
    /// Total differing `(sample, layer, neuron)` spike records.
    pub mismatch_count: usize,
    /// The first few mismatches, for reporting.
    pub mismatches: Vec<Mismatch>,
    /// First differing spike line of the first mismatched sample.
    pub first_divergence: Option<String>,
    pub reference_accuracy: f64,
    pub emulated_accuracy: f64,
    /// Number of neurons that spiked more than once; always zero by design.
    pub repeated_spikes: usize,
}

const KEPT_MISMATCHES: usize = 20;

fn check_shapes(reference: &QuantizedModel, image: &MemoryImage) -> Result<()> {
    if reference.layers.len() != image.layers.len() {
        return Err(Error::dim("memory image layer count", reference.layers.len(), image.layers.len()));
    }
    for (l, (q, m)) in reference.layers.iter().zip(&image.layers).enumerate() {
        if (q.inputs, q.neurons) != (m.inputs, m.neurons) {
            return Err(Error::dim(format!("memory image layer {l} neurons"), q.neurons, m.neurons));
        }
    }
    if reference.n_tasks != image.n_tasks {
        return Err(Error::dim("memory image task rows", reference.n_tasks, image.n_tasks));
    }
    if reference.t_max != image.t_max {
        return Err(Error::dim("memory image T_max", reference.t_max as usize, image.t_max as usize));
    }
    Ok(())
}

fn spike_lines(layers: &[Vec<StepSpike>]) -> Vec<String> {
    let mut events: Vec<(u16, usize, usize)> = layers
        .iter()
        .enumerate()
        .flat_map(|(l, row)| row.iter().enumerate().filter_map(move |(a, s)| s.map(|t| (t, l, a))))
        .collect();
    events.sort_unstable();
    events.into_iter().map(|(t, l, a)| format!("{t},{l},spike,{a},{t}")).collect()
}

/// First spike line where the emulator transcript departs from the
/// reference spike sequence.
pub fn first_divergent_line(reference: &QuantizedOutput, transcript: &Transcript) -> Option<String> {
    let expected = spike_lines(&reference.layers);
    let got: Vec<String> = transcript
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Spike)
        .map(|e| e.to_string())
        .collect();
    let n = expected.len().max(got.len());
    (0..n).find_map(|k| match (expected.get(k), got.get(k)) {
        (Some(a), Some(b)) if a == b => None,
        (a, b) => Some(format!(
            "emulator: {}; reference: {}",
            b.map_or("<none>", String::as_str),
            a.map_or("<none>", String::as_str)
        )),
    })
}

struct SampleOutcome {
    mismatches: Vec<Mismatch>,
    reference_correct: bool,
    emulated_correct: bool,
    repeated: usize,
}

/// Runs the reference inference and the emulator on every sample and diffs
/// all per-layer spike timesteps.
pub fn compare(reference: &QuantizedModel, image: &MemoryImage, samples: &[StepSample]) -> Result<CompareReport> {
    check_shapes(reference, image)?;
    if samples.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let base = Pipeline::from_image(image, EmulatorOptions::default())?;
    let outcomes: Vec<SampleOutcome> = samples
        .par_iter()
        .enumerate()
        .map_init(
            || base.clone(),
            |pipe, (k, s)| -> Result<SampleOutcome> {
                let want = quantized_inference(reference, &s.spikes, s.task)?;
                let got = pipe.run_inference(&s.spikes, s.task)?;
                let mut mismatches = Vec::new();
                for (l, (a, b)) in want.layers.iter().zip(&got.layers).enumerate() {
                    for (j, (ra, rb)) in a.iter().zip(b).enumerate() {
                        if ra != rb {
                            mismatches.push(Mismatch {
                                sample: k,
                                task: s.task,
                                layer: l,
                                address: j,
                                reference: *ra,
                                emulated: *rb,
                            });
                        }
                    }
                }
                let emitted: u64 = got.counters.iter().map(|c| c.spikes_emitted).sum();
                let distinct = got.layers.iter().flatten().filter(|s| s.is_some()).count();
                let repeated = (emitted as usize).saturating_sub(distinct);
                Ok(SampleOutcome {
                    mismatches,
                    reference_correct: want.prediction == s.label,
                    emulated_correct: got.prediction == s.label,
                    repeated,
                })
            },
        )
        .collect::<Result<_>>()?;

    let mut report = CompareReport {
        samples: samples.len(),
        mismatched_samples: 0,
        mismatch_count: 0,
        mismatches: Vec::new(),
        first_divergence: None,
        reference_accuracy: 0.0,
        emulated_accuracy: 0.0,
        repeated_spikes: 0,
    };
    let (mut rc, mut ec) = (0usize, 0usize);
    for o in &outcomes {
        rc += o.reference_correct as usize;
        ec += o.emulated_correct as usize;
        report.repeated_spikes += o.repeated;
        if !o.mismatches.is_empty() {
            report.mismatched_samples += 1;
            report.mismatch_count += o.mismatches.len();
            let room = KEPT_MISMATCHES.saturating_sub(report.mismatches.len());
            report.mismatches.extend(o.mismatches.iter().take(room).cloned());
        }
    }
    report.reference_accuracy = rc as f64 / samples.len() as f64;
    report.emulated_accuracy = ec as f64 / samples.len() as f64;

    if let Some(first) = report.mismatches.first() {
        let s = &samples[first.sample];
        let want = quantized_inference(reference, &s.spikes, s.task)?;
        let mut pipe = Pipeline::from_image(
            image,
            EmulatorOptions {
                record_transcript: true,
                ..EmulatorOptions::default()
            },
        )?;
        let got = pipe.run_inference(&s.spikes, s.task)?;
        report.first_divergence = first_divergent_line(&want, &got.transcript);
    }
    Ok(report)
}
