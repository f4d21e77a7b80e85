//! A fully-connected layer of dendrite-enhanced TTFS neurons.
//!
//! After a presynaptic spike at `t_i`, neuron `j` integrates `W_ij * (t - t_i)`.
//! With causal set `C` (all inputs that have arrived), the membrane crosses
//! the threshold at
//!
//! ```text
//! t_j = (V_th + sum_{i in C} W_ij t_i) / sum_{i in C} W_ij
//! ```
//!
//! and, when the layer carries dendritic segments, the emitted spike is
//! delayed by `f(u) = S / (1 + e^u)` for the segment selected by the task.
//! A neuron whose emitted time lands past `T_max` is dead.

use serde::{Deserialize, Serialize};

use super::spike::SpikeRecord;
use crate::config::{NetworkConfig, DENOM_EPS};
use crate::error::{Error, Result};

/// Dendritic delay `f(u) = S / (1 + e^u)`, strictly decreasing in `u`.
#[inline]
pub fn dendritic_delay(u: f64, strength: f64) -> f64 {
    strength / (1.0 + u.exp())
}

/// `f'(u) = -S e^u / (1 + e^u)^2`, evaluated without overflow.
#[inline]
pub fn dendritic_delay_slope(u: f64, strength: f64) -> f64 {
    let e = (-u.abs()).exp();
    -strength * e / ((1.0 + e) * (1.0 + e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DendriticLayer {
    pub inputs: usize,
    pub neurons: usize,
    /// Row-major `inputs x neurons`; row `i` holds every weight leaving input `i`.
    pub weights: Vec<f64>,
    /// Row-major `n_tasks x neurons`, present only on dendrite-enhanced layers.
    pub segments: Option<Vec<f64>>,
}

impl DendriticLayer {
    pub fn new(inputs: usize, neurons: usize, weights: Vec<f64>, segments: Option<Vec<f64>>) -> Result<Self> {
        if weights.len() != inputs * neurons {
            return Err(Error::dim("weight matrix", inputs * neurons, weights.len()));
        }
        if let Some(seg) = &segments {
            if neurons == 0 || seg.len() % neurons != 0 || seg.is_empty() {
                return Err(Error::dim("dendritic segment matrix", neurons, seg.len()));
            }
        }
        Ok(Self {
            inputs,
            neurons,
            weights,
            segments,
        })
    }

    #[inline]
    pub fn has_dendrites(&self) -> bool {
        self.segments.is_some()
    }

    pub fn n_segment_rows(&self) -> usize {
        self.segments.as_ref().map_or(0, |s| s.len() / self.neurons)
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.neurons + j]
    }

    #[inline]
    pub fn weight_row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.neurons..(i + 1) * self.neurons]
    }

    /// Segment row for `task`, if this layer has dendrites.
    pub fn segment_row(&self, task: usize) -> Option<&[f64]> {
        self.segments
            .as_ref()
            .map(|s| &s[task * self.neurons..(task + 1) * self.neurons])
    }

    fn check_task(&self, task: usize) -> Result<()> {
        let rows = self.n_segment_rows();
        if self.has_dendrites() && task >= rows {
            return Err(Error::TaskOutOfRange { task, n_tasks: rows });
        }
        Ok(())
    }
}

/// A run of simultaneous input spikes; `end` is the exclusive end of the run
/// within [`EventSchedule::order`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventGroup {
    pub time: f64,
    pub end: usize,
}

/// Non-dead inputs in ascending spike-time order, with equal times merged
/// into one event.
#[derive(Clone, Debug, PartialEq)]
pub struct EventSchedule {
    pub order: Vec<usize>,
    pub groups: Vec<EventGroup>,
}

impl EventSchedule {
    pub fn new(inputs: &[SpikeRecord]) -> Self {
        let mut order: Vec<usize> = (0..inputs.len()).filter(|&i| !inputs[i].is_dead()).collect();
        let time = |i: usize| inputs[i].time().unwrap_or(f64::INFINITY);
        order.sort_by(|&a, &b| time(a).total_cmp(&time(b)).then(a.cmp(&b)));

        let mut groups: Vec<EventGroup> = Vec::new();
        for (pos, &i) in order.iter().enumerate() {
            let t = time(i);
            match groups.last_mut() {
                Some(g) if g.time == t => g.end = pos + 1,
                _ => groups.push(EventGroup { time: t, end: pos + 1 }),
            }
        }
        Self { order, groups }
    }

    /// End of the acceptance window for a crossing found after `group`.
    #[inline]
    fn window_end(&self, group: usize) -> Option<f64> {
        self.groups.get(group + 1).map(|g| g.time)
    }
}

/// Per-neuron forward state retained for the backward pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NeuronTrace {
    Dead,
    Fired {
        /// Unmodulated threshold-crossing time.
        crossing: f64,
        /// Emitted time, crossing plus dendritic delay.
        spike: f64,
        /// Sum of causal weights, the slope of the membrane at the crossing.
        slope: f64,
        /// Time of the latest causal input; inputs at or before it are causal.
        causal_until: f64,
        /// Dendritic delay added to the crossing (0 without dendrites).
        delay: f64,
    },
}

impl NeuronTrace {
    pub fn record(&self) -> SpikeRecord {
        match *self {
            NeuronTrace::Dead => SpikeRecord::Dead,
            NeuronTrace::Fired { spike, .. } => SpikeRecord::Fired(spike),
        }
    }
}

/// Forward artifacts of one layer for one sample.
#[derive(Clone, Debug)]
pub struct LayerTrace {
    pub inputs: Vec<SpikeRecord>,
    pub schedule: EventSchedule,
    pub neurons: Vec<NeuronTrace>,
    pub task: usize,
}

impl LayerTrace {
    pub fn outputs(&self) -> Vec<SpikeRecord> {
        self.neurons.iter().map(NeuronTrace::record).collect()
    }
}

fn validate_inputs(inputs: &[SpikeRecord], layer: &DendriticLayer, cfg: &NetworkConfig, task: usize) -> Result<()> {
    if inputs.len() != layer.inputs {
        return Err(Error::dim("layer input spikes", layer.inputs, inputs.len()));
    }
    layer.check_task(task)?;
    if task >= cfg.n_tasks {
        return Err(Error::TaskOutOfRange {
            task,
            n_tasks: cfg.n_tasks,
        });
    }
    Ok(())
}

/// Event sweep over all neurons of the layer at once.
fn sweep(inputs: &[SpikeRecord], schedule: &EventSchedule, layer: &DendriticLayer, task: usize, cfg: &NetworkConfig) -> Vec<NeuronTrace> {
    let n = layer.neurons;
    let mut slope = vec![0.0; n];
    let mut weighted = vec![0.0; n];
    let mut traces = vec![NeuronTrace::Dead; n];
    let mut pending: Vec<usize> = (0..n).collect();
    let segments = layer.segment_row(task);

    let mut start = 0;
    for (g, group) in schedule.groups.iter().enumerate() {
        for &i in &schedule.order[start..group.end] {
            let t = inputs[i].time().expect("schedule holds live inputs");
            for ((s, w_t), &w) in slope.iter_mut().zip(weighted.iter_mut()).zip(layer.weight_row(i)) {
                *s += w;
                *w_t += w * t;
            }
        }
        start = group.end;

        let window_end = schedule.window_end(g);
        pending.retain(|&j| {
            let s = slope[j];
            if s <= DENOM_EPS {
                return true;
            }
            let crossing = (cfg.v_th + weighted[j]) / s;
            let inside = crossing >= group.time
                && match window_end {
                    Some(end) => crossing < end,
                    None => crossing <= cfg.t_max,
                };
            if !inside {
                return true;
            }
            let delay = segments.map_or(0.0, |u| dendritic_delay(u[j], cfg.strength));
            let spike = crossing + delay;
            if spike <= cfg.t_max {
                traces[j] = NeuronTrace::Fired {
                    crossing,
                    spike,
                    slope: s,
                    causal_until: group.time,
                    delay,
                };
            }
            false
        });
        if pending.is_empty() {
            break;
        }
    }
    traces
}

/// Spike times of every neuron in `layer` for the given input spikes.
pub fn layer_forward(inputs: &[SpikeRecord], layer: &DendriticLayer, task: usize, cfg: &NetworkConfig) -> Result<Vec<SpikeRecord>> {
    validate_inputs(inputs, layer, cfg, task)?;
    let schedule = EventSchedule::new(inputs);
    Ok(sweep(inputs, &schedule, layer, task, cfg)
        .iter()
        .map(NeuronTrace::record)
        .collect())
}

/// Like [`layer_forward`], keeping what the backward pass needs.
pub fn layer_forward_traced(inputs: &[SpikeRecord], layer: &DendriticLayer, task: usize, cfg: &NetworkConfig) -> Result<LayerTrace> {
    validate_inputs(inputs, layer, cfg, task)?;
    let schedule = EventSchedule::new(inputs);
    let neurons = sweep(inputs, &schedule, layer, task, cfg);
    Ok(LayerTrace {
        inputs: inputs.to_vec(),
        schedule,
        neurons,
        task,
    })
}

/// Distance from the current parameters to the nearest point where some
/// neuron's causal set or dead/alive status would change. Used to keep
/// finite-difference probes away from the discontinuities of the model.
pub fn boundary_margin(trace: &LayerTrace, layer: &DendriticLayer, cfg: &NetworkConfig) -> f64 {
    let schedule = &trace.schedule;
    let segments = layer.segment_row(trace.task);
    let mut margin = f64::INFINITY;
    for j in 0..layer.neurons {
        let mut slope = 0.0;
        let mut weighted = 0.0;
        let mut start = 0;
        for (g, group) in schedule.groups.iter().enumerate() {
            for &i in &schedule.order[start..group.end] {
                let w = layer.weight(i, j);
                slope += w;
                weighted += w * trace.inputs[i].time().expect("live input");
            }
            start = group.end;
            if slope.abs() < 1e-6 {
                return 0.0;
            }
            if slope <= DENOM_EPS {
                continue;
            }
            let crossing = (cfg.v_th + weighted) / slope;
            let window_end = schedule.window_end(g);
            let lo = crossing - group.time;
            let hi = window_end.unwrap_or(cfg.t_max) - crossing;
            margin = margin.min(lo.abs()).min(hi.abs());
            let accepted = lo >= 0.0 && if window_end.is_some() { hi > 0.0 } else { hi >= 0.0 };
            if accepted {
                let delay = segments.map_or(0.0, |u| dendritic_delay(u[j], cfg.strength));
                margin = margin.min((cfg.t_max - crossing - delay).abs());
                break;
            }
        }
    }
    margin
}
