use serde::{Deserialize, Serialize};

use super::auction::{clear_auction, CompetitorModel};
use super::feedback::{sample_feedback, DelayModel, FeedbackEvent, FeedbackQueue};
use super::traffic::{generate_requests, QualityFactors, SimRequest, TrafficProfile};
use crate::domain::{AuctionOutcome, EventKind, FeaturePath, Money, SlotClock, SlotSummary};
use crate::error::{Error, Result};
use crate::rng::{SeedStreams, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub num_slots: usize,
    pub slot_seconds: u64,
    pub traffic: TrafficProfile,
    pub competitor: CompetitorModel,
    pub delay: DelayModel,
    /// Advertiser path stamped on every request.
    pub advertiser: FeaturePath,
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_slots == 0 || self.slot_seconds == 0 {
            return Err(Error::invalid("world needs at least one slot of positive length"));
        }
        self.traffic.validate(self.num_slots)?;
        self.competitor.validate(self.num_slots)?;
        if !(self.delay.mean_slots.is_finite() && self.delay.mean_slots >= 0.0) {
            return Err(Error::invalid("delay mean must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn clock(&self) -> Result<SlotClock> {
        SlotClock::equal(self.num_slots, self.slot_seconds)
    }
}

/// The bidder side of a simulated slot.
pub trait Participant {
    /// Event kind the participant's goal is measured on.
    fn event_kind(&self) -> EventKind;
    fn begin_slot(&mut self, day: u32, slot: usize) -> Result<()>;
    /// Sees one request and returns the submitted bid, if any.
    fn decide(&mut self, request: &SimRequest) -> Result<Option<Money>>;
    fn record(&mut self, request: &SimRequest, outcome: &AuctionOutcome) -> Result<()>;
    fn feedback(&mut self, event: &FeedbackEvent) -> Result<()>;
    fn end_slot(&mut self) -> Result<SlotSummary>;
}

/// Result of one simulated slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotStep {
    pub summary: SlotSummary,
    /// Events caused by this slot's impressions, whenever they are delivered.
    pub attributed_events: u64,
}

pub struct World {
    config: WorldConfig,
    streams: SeedStreams,
    factors: QualityFactors,
    queue: FeedbackQueue,
    day: u32,
    slot: usize,
}

impl World {
    pub fn new(config: WorldConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let streams = SeedStreams::new(seed);
        let factors = QualityFactors::draw(&config.traffic, &streams);
        Ok(Self {
            config,
            streams,
            factors,
            queue: FeedbackQueue::new(),
            day: 0,
            slot: 0,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn streams(&self) -> &SeedStreams {
        &self.streams
    }

    /// The slot the next [`step_slot`](Self::step_slot) call simulates.
    pub fn position(&self) -> (u32, usize) {
        (self.day, self.slot)
    }

    pub fn global_slot(&self, day: u32, slot: usize) -> u64 {
        u64::from(day) * self.config.num_slots as u64 + slot as u64
    }

    pub fn requests(&self, day: u32, slot: usize) -> Vec<SimRequest> {
        generate_requests(
            &self.config.traffic,
            &self.factors,
            &self.config.competitor,
            self.config.advertiser,
            &self.streams,
            day,
            slot,
        )
    }

    pub fn pending_feedback(&self) -> usize {
        self.queue.len()
    }

    /// Removes every undelivered event, e.g. at the end of a run.
    pub fn drain_pending(&mut self) -> Vec<FeedbackEvent> {
        self.queue.drain_all()
    }

    /// Generates the slot's traffic, runs the participant's decision path and
    /// the auctions, delivers the feedback due this slot and closes the slot.
    pub fn step_slot<P: Participant + ?Sized>(&mut self, participant: &mut P) -> Result<SlotStep> {
        let (day, slot) = (self.day, self.slot);
        let global = self.global_slot(day, slot);
        let kind = participant.event_kind();
        participant.begin_slot(day, slot)?;
        let mut attributed = 0;
        for req in self.requests(day, slot) {
            let Some(bid) = participant.decide(&req)? else {
                continue;
            };
            let outcome = clear_auction(bid, req.competing_bid, self.config.competitor.floor);
            participant.record(&req, &outcome)?;
            if outcome.won {
                // keyed by request id so paired runs agree on shared wins
                let mut rng = self.streams.keyed(Stream::Feedback, req.request.id);
                if let Some(ev) = sample_feedback(
                    &req.request,
                    &outcome,
                    req.truth(),
                    kind,
                    global,
                    &self.config.delay,
                    &mut rng,
                ) {
                    attributed += 1;
                    self.queue.push(ev);
                }
            }
        }
        for ev in self.queue.drain_due(global) {
            participant.feedback(&ev)?;
        }
        let summary = participant.end_slot()?;
        self.slot += 1;
        if self.slot == self.config.num_slots {
            self.slot = 0;
            self.day += 1;
        }
        Ok(SlotStep {
            summary,
            attributed_events: attributed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SpendLedger;

    /// Bids a fixed price on every request unless paused.
    struct Fixed {
        bid: Money,
        paused: bool,
        ledger: SpendLedger,
        clock: SlotClock,
        delivered: Vec<FeedbackEvent>,
    }

    impl Fixed {
        fn new(bid: u64, paused: bool, t: usize) -> Self {
            Self {
                bid: Money::from_micros(bid),
                paused,
                ledger: SpendLedger::new(0, t),
                clock: SlotClock::equal(t, 900).unwrap(),
                delivered: Vec::new(),
            }
        }
    }

    impl Participant for Fixed {
        fn event_kind(&self) -> EventKind {
            EventKind::Click
        }
        fn begin_slot(&mut self, day: u32, _slot: usize) -> Result<()> {
            if self.clock.is_finished() {
                self.ledger = SpendLedger::new(day, self.clock.num_slots());
                self.clock = self.clock.restarted();
            }
            Ok(())
        }
        fn decide(&mut self, r: &SimRequest) -> Result<Option<Money>> {
            self.ledger.record_request(r.request.slot)?;
            Ok((!self.paused).then_some(self.bid))
        }
        fn record(&mut self, r: &SimRequest, o: &AuctionOutcome) -> Result<()> {
            self.ledger.record_auction(r.request.slot, o)
        }
        fn feedback(&mut self, e: &FeedbackEvent) -> Result<()> {
            self.delivered.push(*e);
            self.ledger.record_event(self.clock.current(), e.kind)
        }
        fn end_slot(&mut self) -> Result<SlotSummary> {
            self.ledger.close_slot(&mut self.clock)
        }
    }

    fn config(t: usize) -> WorldConfig {
        WorldConfig {
            num_slots: t,
            slot_seconds: 900,
            traffic: TrafficProfile::flat(t, 500, 0.05),
            competitor: CompetitorModel::constant(t, Money::from_micros(1000), 0.5),
            delay: DelayModel { mean_slots: 2.0 },
            advertiser: FeaturePath::ROOT,
        }
    }

    #[test]
    fn paused_participant_sees_requests_but_bids_nothing() {
        let mut w = World::new(config(2), 1).unwrap();
        let mut p = Fixed::new(5000, true, 2);
        let s = w.step_slot(&mut p).unwrap().summary;
        assert_eq!((s.counts.requests, s.counts.bids), (500, 0));
    }

    #[test]
    fn full_rate_bids_every_request() {
        let mut w = World::new(config(2), 1).unwrap();
        let mut p = Fixed::new(5000, false, 2);
        let s = w.step_slot(&mut p).unwrap().summary;
        assert_eq!(s.counts.bids, 500);
        assert!(s.counts.impressions > 400);
    }

    #[test]
    fn deterministic_and_feedback_conserved() {
        let run = || {
            let mut w = World::new(config(4), 9).unwrap();
            let mut p = Fixed::new(1500, false, 4);
            let mut out = Vec::new();
            let mut attributed = 0;
            for _ in 0..8 {
                let step = w.step_slot(&mut p).unwrap();
                attributed += step.attributed_events;
                out.push(step.summary);
            }
            let pending = w.drain_pending();
            (out, attributed, p.delivered, pending)
        };
        let (a, attributed, delivered, pending) = run();
        let (b, ..) = run();
        assert_eq!(a, b);
        assert_eq!(attributed as usize, delivered.len() + pending.len());
        assert!(delivered.iter().all(|e| e.deliver_at_slot >= e.impression_slot));
        let mut ids: Vec<_> = delivered.iter().chain(&pending).map(|e| e.impression_id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len() as u64, attributed);
        assert_eq!(a[4].day, 1);
    }
}
