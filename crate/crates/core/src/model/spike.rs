use serde::{Deserialize, Serialize};

/// Output of a neuron within one observation window: either the time of its
/// single spike or nothing at all.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SpikeRecord {
    Fired(f64),
    Dead,
}

impl SpikeRecord {
    #[inline]
    pub fn time(self) -> Option<f64> {
        match self {
            SpikeRecord::Fired(t) => Some(t),
            SpikeRecord::Dead => None,
        }
    }

    #[inline]
    pub fn is_dead(self) -> bool {
        matches!(self, SpikeRecord::Dead)
    }

    /// Spike time, with dead neurons pinned to the end of the window.
    #[inline]
    pub fn time_or(self, t_max: f64) -> f64 {
        self.time().unwrap_or(t_max)
    }
}

/// Index of the earliest spike. Ties go to the lowest index, and an all-dead
/// layer predicts class 0.
pub fn predict_class(outputs: &[SpikeRecord]) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (k, spike) in outputs.iter().enumerate() {
        if let SpikeRecord::Fired(t) = *spike {
            if best.is_none_or(|(_, bt)| t < bt) {
                best = Some((k, t));
            }
        }
    }
    best.map_or(0, |(k, _)| k)
}
