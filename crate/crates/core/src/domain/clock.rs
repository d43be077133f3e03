use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SLOTS: usize = 96;
pub const DEFAULT_SLOT_SECONDS: u64 = 900;

/// Divides the horizon into slots of (possibly unequal) positive length.
///
/// `current` is the 0-based index of the open slot; it equals the slot count
/// once every slot has been closed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotClock {
    lengths: Vec<u64>,
    current: usize,
}

impl SlotClock {
    pub fn equal(num_slots: usize, slot_seconds: u64) -> Result<Self> {
        Self::with_lengths(vec![slot_seconds; num_slots])
    }

    pub fn with_lengths(lengths: Vec<u64>) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::invalid("slot clock needs at least one slot"));
        }
        if lengths.contains(&0) {
            return Err(Error::invalid("slot lengths must be positive"));
        }
        Ok(Self {
            lengths,
            current: 0,
        })
    }

    pub fn num_slots(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[u64] {
        &self.lengths
    }

    pub fn length(&self, slot: usize) -> u64 {
        self.lengths[slot]
    }

    pub fn horizon(&self) -> u64 {
        self.lengths.iter().sum()
    }

    /// Total length of slots `from..T`.
    pub fn remaining_length(&self, from: usize) -> u64 {
        self.lengths[from.min(self.lengths.len())..].iter().sum()
    }

    pub fn current(&self) -> usize {
        self.current
    }

    pub fn is_finished(&self) -> bool {
        self.current >= self.lengths.len()
    }

    pub fn advance(&mut self) -> Result<usize> {
        if self.is_finished() {
            return Err(Error::ClockExhausted(self.lengths.len()));
        }
        self.current += 1;
        Ok(self.current)
    }

    /// A fresh clock with the same slot layout, positioned at slot 0.
    pub fn restarted(&self) -> Self {
        Self {
            lengths: self.lengths.clone(),
            current: 0,
        }
    }
}

impl Default for SlotClock {
    fn default() -> Self {
        Self {
            lengths: vec![DEFAULT_SLOT_SECONDS; DEFAULT_SLOTS],
            current: 0,
        }
    }
}
