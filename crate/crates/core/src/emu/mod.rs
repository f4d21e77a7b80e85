//! Transaction-level emulator of the layered spiking accelerator.
//!
//! Every layer has a synapse memory, a dendrite memory, address queues, a
//! controller and one NPU per neuron. Within a global timestep each layer
//! runs handshake, fetch, integrate and emit, and spikes reach the next layer
//! in the same timestep unless pipeline latency is enabled.

mod compare;
mod pipeline;
mod transcript;
mod unit;

pub use compare::{compare, first_divergent_line, test_step_samples, CompareReport, Mismatch, StepSample};
pub use pipeline::{run_inference, EmulationResult, EmulatorOptions, Pipeline};
pub use transcript::{Event, EventKind, Transcript};
pub use unit::{AccessCounters, AddressQueue, ControllerState, LayerUnit, NpuState};
