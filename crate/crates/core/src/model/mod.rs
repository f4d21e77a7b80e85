//! Continuous-time forward pass of the dendrite-enhanced TTFS network.

mod layer;
mod network;
mod spike;

pub use layer::{
    boundary_margin, dendritic_delay, dendritic_delay_slope, layer_forward, layer_forward_traced, DendriticLayer,
    EventGroup, EventSchedule, LayerTrace, NeuronTrace,
};
pub use network::{Network, NetworkTrace};
pub use spike::{predict_class, SpikeRecord};
