use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::transcript::{EventKind, Transcript};
use crate::error::{Error, Result};
use crate::quant::{saturate, LayerMemory};

/// Registers of one neuron processing unit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NpuState {
    pub synaptic: i16,
    pub membrane: i16,
    /// Delay latched from the dendrite memory at task load.
    pub delay: u8,
    pub counter: u8,
    pub armed: bool,
    /// Pulses for the timestep in which the neuron spikes.
    pub spiked: bool,
    /// Set at the threshold crossing; freezes the membrane.
    pub crossed: bool,
    /// Set once the spike has been emitted; enforces a single spike.
    pub fired: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControllerState {
    #[default]
    Idle,
    Handshake,
    Fetch,
    Integrate,
    Emit,
}

impl ControllerState {
    pub fn code(self) -> i32 {
        self as i32
    }

    fn next(self) -> Self {
        match self {
            Self::Idle => Self::Handshake,
            Self::Handshake => Self::Fetch,
            Self::Fetch => Self::Integrate,
            Self::Integrate => Self::Emit,
            Self::Emit => Self::Idle,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressQueue {
    capacity: usize,
    items: VecDeque<u32>,
}

impl AddressQueue {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, addr: u32) -> Result<()> {
        if self.items.len() == self.capacity {
            return Err(Error::Emulator(format!("queue overflow at capacity {}", self.capacity)));
        }
        self.items.push_back(addr);
        Ok(())
    }

    pub fn pop(&mut self) -> Option<u32> {
        self.items.pop_front()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessCounters {
    pub synapse_reads: u64,
    pub dendrite_reads: u64,
    pub spikes_emitted: u64,
}

/// One layer: memories, queues, controller and its NPUs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerUnit {
    pub index: usize,
    pub memory: LayerMemory,
    pub input_queue: AddressQueue,
    pub output_queue: AddressQueue,
    pub controller: ControllerState,
    pub npus: Vec<NpuState>,
    pub task: Option<usize>,
    pub counters: AccessCounters,
    /// Scratch for one unpacked synapse word.
    word: Vec<i8>,
}

impl LayerUnit {
    pub fn new(index: usize, memory: LayerMemory) -> Self {
        Self::with_queue_depths(index, memory.inputs, memory.neurons, memory)
    }

    pub fn with_queue_depths(index: usize, input_depth: usize, output_depth: usize, memory: LayerMemory) -> Self {
        let n = memory.neurons;
        Self {
            index,
            input_queue: AddressQueue::with_capacity(input_depth),
            output_queue: AddressQueue::with_capacity(output_depth),
            controller: ControllerState::Idle,
            npus: vec![NpuState::default(); n],
            task: None,
            counters: AccessCounters::default(),
            word: vec![0; n],
            memory,
        }
    }

    fn advance(&mut self, to: ControllerState, t: u16, log: &mut Transcript) -> Result<()> {
        if self.controller.next() != to {
            return Err(Error::Emulator(format!(
                "layer {}: illegal controller transition {:?} -> {to:?}",
                self.index, self.controller
            )));
        }
        self.controller = to;
        log.record(t, self.index, EventKind::Phase, 0, to.code());
        Ok(())
    }

    /// One dendrite-memory read; every NPU latches its delay at once.
    /// Also clears the NPU registers for a fresh inference.
    pub fn load_task(&mut self, task: usize, log: &mut Transcript) -> Result<()> {
        if task >= self.memory.dendrite.depth {
            return Err(Error::TaskOutOfRange {
                task,
                n_tasks: self.memory.dendrite.depth,
            });
        }
        log.record(0, self.index, EventKind::LoadTask, task as u32, 0);
        let delays = self.memory.read_dendrite(task);
        self.counters.dendrite_reads += 1;
        log.record(0, self.index, EventKind::DendriteRead, task as u32, 0);
        for (npu, d) in self.npus.iter_mut().zip(delays) {
            *npu = NpuState {
                delay: d,
                ..NpuState::default()
            };
        }
        self.task = Some(task);
        self.controller = ControllerState::Idle;
        Ok(())
    }

    /// Handshake phase: accept the upstream spike addresses.
    pub fn handshake(&mut self, t: u16, addresses: &[u32], log: &mut Transcript) -> Result<()> {
        if self.task.is_none() {
            return Err(Error::Emulator(format!("layer {}: stepped before load_task", self.index)));
        }
        self.advance(ControllerState::Handshake, t, log)?;
        for &a in addresses {
            if a as usize >= self.memory.inputs {
                return Err(Error::Emulator(format!(
                    "layer {}: address {a} beyond {} presynaptic neurons",
                    self.index, self.memory.inputs
                )));
            }
            self.input_queue
                .push(a)
                .map_err(|e| Error::Emulator(format!("layer {} input: {e}", self.index)))?;
            log.record(t, self.index, EventKind::Push, a, 0);
        }
        Ok(())
    }

    /// Fetch phase: one synapse-memory read per popped address, all weight
    /// fields added to the synaptic registers in parallel.
    pub fn fetch(&mut self, t: u16, log: &mut Transcript) -> Result<()> {
        self.advance(ControllerState::Fetch, t, log)?;
        while let Some(a) = self.input_queue.pop() {
            log.record(t, self.index, EventKind::Pop, a, 0);
            self.memory.read_synapse_into(a as usize, &mut self.word);
            self.counters.synapse_reads += 1;
            log.record(t, self.index, EventKind::SynapseRead, a, 0);
            for (npu, &w) in self.npus.iter_mut().zip(&self.word) {
                npu.synaptic = saturate(npu.synaptic as i32 + w as i32) as i16;
            }
        }
        Ok(())
    }

    /// Integrate phase: membranes, threshold crossings and down counters.
    pub fn integrate(&mut self, t: u16, log: &mut Transcript) -> Result<()> {
        self.advance(ControllerState::Integrate, t, log)?;
        let theta = self.memory.threshold as i32;
        for (j, npu) in self.npus.iter_mut().enumerate() {
            if npu.armed {
                npu.counter -= 1;
                if npu.counter == 0 {
                    npu.armed = false;
                    npu.spiked = true;
                }
            }
            if npu.crossed {
                continue;
            }
            npu.membrane = saturate(npu.membrane as i32 + npu.synaptic as i32) as i16;
            if npu.membrane as i32 >= theta {
                npu.crossed = true;
                log.record(t, self.index, EventKind::Cross, j as u32, npu.membrane as i32);
                if npu.delay == 0 {
                    npu.spiked = true;
                } else {
                    npu.counter = npu.delay;
                    npu.armed = true;
                }
            }
        }
        Ok(())
    }

    /// Emit phase: spiking addresses go to the output queue in address order.
    pub fn emit(&mut self, t: u16, log: &mut Transcript) -> Result<()> {
        self.advance(ControllerState::Emit, t, log)?;
        for (j, npu) in self.npus.iter_mut().enumerate() {
            if !npu.spiked {
                continue;
            }
            npu.spiked = false;
            if npu.fired {
                return Err(Error::Emulator(format!("layer {} neuron {j} spiked twice", self.index)));
            }
            npu.fired = true;
            self.counters.spikes_emitted += 1;
            self.output_queue
                .push(j as u32)
                .map_err(|e| Error::Emulator(format!("layer {} output: {e}", self.index)))?;
            log.record(t, self.index, EventKind::Spike, j as u32, t as i32);
        }
        Ok(())
    }

    /// Acknowledge: hand the emitted addresses downstream and return to idle.
    pub fn acknowledge(&mut self, t: u16, log: &mut Transcript) -> Result<Vec<u32>> {
        self.advance(ControllerState::Idle, t, log)?;
        let mut out = Vec::with_capacity(self.output_queue.len());
        while let Some(a) = self.output_queue.pop() {
            out.push(a);
        }
        Ok(out)
    }
}
