use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    LoadTask,
    DendriteRead,
    Phase,
    Push,
    Pop,
    SynapseRead,
    Cross,
    Spike,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::LoadTask => "load_task",
            Self::DendriteRead => "dendrite_read",
            Self::Phase => "phase",
            Self::Push => "push",
            Self::Pop => "pop",
            Self::SynapseRead => "synapse_read",
            Self::Cross => "cross",
            Self::Spike => "spike",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub timestep: u16,
    pub layer: usize,
    pub kind: EventKind,
    pub address: u32,
    pub value: i32,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{}",
            self.timestep,
            self.layer,
            self.kind.as_str(),
            self.address,
            self.value
        )
    }
}

/// Append-only event log. When disabled it drops events but keeps nothing,
/// so bulk comparisons do not pay for it.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub enabled: bool,
    pub events: Vec<Event>,
}

impl Transcript {
    pub fn new(enabled: bool) -> Self {
        Self {
            enabled,
            events: Vec::new(),
        }
    }

    #[inline]
    pub fn record(&mut self, timestep: u16, layer: usize, kind: EventKind, address: u32, value: i32) {
        if self.enabled {
            self.events.push(Event {
                timestep,
                layer,
                kind,
                address,
                value,
            });
        }
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn lines(&self) -> impl Iterator<Item = String> + '_ {
        self.events.iter().map(Event::to_string)
    }

    /// `timestep,layer,kind,address,value` with a header row.
    pub fn to_text(&self) -> String {
        let mut out = String::from("timestep,layer,kind,address,value\n");
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }
}
