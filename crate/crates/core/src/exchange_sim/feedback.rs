use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{AdRequest, AuctionOutcome, EventKind};

/// Geometric delay in slots with the given mean (`p = 1 / (1 + mean)`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayModel {
    pub mean_slots: f64,
}

impl Default for DelayModel {
    fn default() -> Self {
        Self { mean_slots: 8.0 }
    }
}

impl DelayModel {
    /// Inverse-CDF draw from a uniform `u` in `[0, 1)`.
    pub fn delay_from_uniform(&self, u: f64) -> u64 {
        if self.mean_slots.is_nan() || self.mean_slots <= 0.0 {
            return 0;
        }
        let q = self.mean_slots / (1.0 + self.mean_slots);
        let d = ((1.0 - u).ln() / q.ln()).floor();
        if d.is_finite() && d > 0.0 {
            d as u64
        } else {
            0
        }
    }
}

/// A click or conversion attributed to one won impression.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeedbackEvent {
    pub impression_id: u64,
    pub kind: EventKind,
    pub request: AdRequest,
    pub outcome: AuctionOutcome,
    /// Global slot index (`day * T + slot`) of the impression.
    pub impression_slot: u64,
    /// Global slot index at which the event reaches the bidder; may fall on a
    /// later day.
    pub deliver_at_slot: u64,
}

/// Samples the impression's response from two uniforms: the event happens iff
/// `u_event < truth`, and `u_delay` sets the delay.
#[allow(clippy::too_many_arguments)]
pub fn sample_feedback_with(
    request: &AdRequest,
    outcome: &AuctionOutcome,
    truth: f64,
    kind: EventKind,
    impression_slot: u64,
    delay: &DelayModel,
    u_event: f64,
    u_delay: f64,
) -> Option<FeedbackEvent> {
    if !outcome.won || u_event >= truth {
        return None;
    }
    Some(FeedbackEvent {
        impression_id: request.id,
        kind,
        request: *request,
        outcome: *outcome,
        impression_slot,
        deliver_at_slot: impression_slot + delay.delay_from_uniform(u_delay),
    })
}

pub fn sample_feedback<R: Rng + ?Sized>(
    request: &AdRequest,
    outcome: &AuctionOutcome,
    truth: f64,
    kind: EventKind,
    impression_slot: u64,
    delay: &DelayModel,
    rng: &mut R,
) -> Option<FeedbackEvent> {
    let u_event: f64 = rng.random();
    let u_delay: f64 = rng.random();
    sample_feedback_with(request, outcome, truth, kind, impression_slot, delay, u_event, u_delay)
}

/// Pending events ordered by delivery slot, then by insertion.
#[derive(Clone, Debug, Default)]
pub struct FeedbackQueue {
    pending: BTreeMap<u64, Vec<FeedbackEvent>>,
    len: usize,
}

impl FeedbackQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, event: FeedbackEvent) {
        self.pending.entry(event.deliver_at_slot).or_default().push(event);
        self.len += 1;
    }

    /// Removes and returns every event due at or before `slot`.
    pub fn drain_due(&mut self, slot: u64) -> Vec<FeedbackEvent> {
        let later = self.pending.split_off(&(slot + 1));
        let due = std::mem::replace(&mut self.pending, later);
        let out: Vec<_> = due.into_values().flatten().collect();
        self.len -= out.len();
        out
    }

    pub fn drain_all(&mut self) -> Vec<FeedbackEvent> {
        self.len = 0;
        std::mem::take(&mut self.pending).into_values().flatten().collect()
    }
}
