use serde::{Deserialize, Serialize};
use std::fmt;

/// Track label: an ordered pair of the birth step and a per-step index.
///
/// Labels are globally unique per track and totally ordered lexicographically,
/// so label sets have a canonical enumeration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Label {
    /// Time step at which the track was born.
    pub birth_time: u32,
    /// Index distinguishing tracks born at the same step (1-based).
    pub index: u32,
}

impl Label {
    pub fn new(birth_time: u32, index: u32) -> Self {
        Label { birth_time, index }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.birth_time, self.index)
    }
}
