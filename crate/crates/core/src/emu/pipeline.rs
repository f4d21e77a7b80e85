use serde::{Deserialize, Serialize};

use super::transcript::Transcript;
use super::unit::{AccessCounters, LayerUnit};
use crate::error::{Error, Result};
use crate::quant::{predict_steps, MemoryImage, StepSpike};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmulatorOptions {
    /// Delay inter-layer spikes by one timestep. Off by default; with it on
    /// the emulator no longer matches the reference inference.
    pub pipeline_latency: bool,
    pub record_transcript: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmulationResult {
    /// Spike timestep of every neuron, per layer.
    pub layers: Vec<Vec<StepSpike>>,
    /// Output-layer `(address, timestep)` pairs in emission order.
    pub output_spikes: Vec<(u32, u16)>,
    pub prediction: usize,
    pub counters: Vec<AccessCounters>,
    #[serde(skip)]
    pub transcript: Transcript,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pipeline {
    pub units: Vec<LayerUnit>,
    pub t_max: u16,
    pub n_tasks: usize,
    pub options: EmulatorOptions,
    pub transcript: Transcript,
    staged: Vec<Vec<u32>>,
    spikes: Vec<Vec<StepSpike>>,
}

impl Pipeline {
    pub fn from_image(image: &MemoryImage, options: EmulatorOptions) -> Result<Self> {
        for (l, pair) in image.layers.windows(2).enumerate() {
            if pair[0].neurons != pair[1].inputs {
                return Err(Error::dim(format!("memory image layer {} inputs", l + 1), pair[0].neurons, pair[1].inputs));
            }
        }
        if image.layers.is_empty() {
            return Err(Error::Format("memory image has no layers".into()));
        }
        let units: Vec<LayerUnit> = image
            .layers
            .iter()
            .enumerate()
            .map(|(l, m)| LayerUnit::new(l, m.clone()))
            .collect();
        Ok(Self {
            staged: vec![Vec::new(); units.len() + 1],
            spikes: units.iter().map(|u| vec![None; u.memory.neurons]).collect(),
            units,
            t_max: image.t_max,
            n_tasks: image.n_tasks,
            options,
            transcript: Transcript::new(options.record_transcript),
        })
    }

    pub fn input_size(&self) -> usize {
        self.units[0].memory.inputs
    }

    pub fn load_task(&mut self, task: usize) -> Result<()> {
        for unit in &mut self.units {
            unit.load_task(task, &mut self.transcript)?;
        }
        Ok(())
    }

    /// Runs the four-phase handshake on every layer for one timestep.
    /// `input` holds the addresses of input pixels spiking at `t`, ascending.
    pub fn step_timestep(&mut self, t: u16, input: &[u32]) -> Result<()> {
        if t > self.t_max {
            return Err(Error::Emulator(format!("timestep {t} beyond T_max {}", self.t_max)));
        }
        let mut previous = std::mem::take(&mut self.staged);
        let mut next = vec![Vec::new(); previous.len()];
        let mut carry: Vec<u32> = input.to_vec();
        for (l, unit) in self.units.iter_mut().enumerate() {
            let incoming = if l > 0 && self.options.pipeline_latency {
                std::mem::take(&mut previous[l])
            } else {
                std::mem::take(&mut carry)
            };
            unit.handshake(t, &incoming, &mut self.transcript)?;
            unit.fetch(t, &mut self.transcript)?;
            unit.integrate(t, &mut self.transcript)?;
            unit.emit(t, &mut self.transcript)?;
            let out = unit.acknowledge(t, &mut self.transcript)?;
            for &a in &out {
                self.spikes[l][a as usize] = Some(t);
            }
            carry = out.clone();
            next[l + 1] = out;
        }
        self.staged = next;
        Ok(())
    }

    fn reset(&mut self) {
        self.transcript = Transcript::new(self.options.record_transcript);
        self.staged.iter_mut().for_each(Vec::clear);
        for (row, unit) in self.spikes.iter_mut().zip(&mut self.units) {
            row.fill(None);
            unit.counters = AccessCounters::default();
        }
    }

    /// Loads the task on every layer, then steps `t = 0..=T_max`.
    pub fn run_inference(&mut self, input: &[StepSpike], task: usize) -> Result<EmulationResult> {
        if input.len() != self.input_size() {
            return Err(Error::dim("emulator input spikes", self.input_size(), input.len()));
        }
        let mut by_step = vec![Vec::new(); self.t_max as usize + 1];
        for (i, s) in input.iter().enumerate() {
            if let Some(t) = *s {
                let slot = by_step
                    .get_mut(t as usize)
                    .ok_or_else(|| Error::Config(format!("input {i} spikes at {t}, after T_max = {}", self.t_max)))?;
                slot.push(i as u32);
            }
        }
        self.reset();
        self.load_task(task)?;
        for (t, addrs) in by_step.iter().enumerate() {
            self.step_timestep(t as u16, addrs)?;
        }
        // Task loads precede every step; order the log by (timestep, layer).
        self.transcript.events.sort_by_key(|e| (e.timestep, e.layer));
        let output = self.spikes.last().expect("pipeline has layers");
        let mut output_spikes: Vec<(u32, u16)> = output
            .iter()
            .enumerate()
            .filter_map(|(a, s)| s.map(|t| (a as u32, t)))
            .collect();
        output_spikes.sort_by_key(|&(a, t)| (t, a));
        Ok(EmulationResult {
            prediction: predict_steps(output),
            layers: self.spikes.clone(),
            output_spikes,
            counters: self.units.iter().map(|u| u.counters).collect(),
            transcript: std::mem::take(&mut self.transcript),
        })
    }
}

/// Convenience wrapper: build a pipeline from an image and run one input.
pub fn run_inference(image: &MemoryImage, input: &[StepSpike], task: usize, options: EmulatorOptions) -> Result<EmulationResult> {
    Pipeline::from_image(image, options)?.run_inference(input, task)
}
