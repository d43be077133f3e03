use serde::{Deserialize, Serialize};

use super::clock::SlotClock;
use super::money::Money;
use super::request::{AuctionOutcome, EventKind};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotCounts {
    pub requests: u64,
    pub bids: u64,
    pub impressions: u64,
    pub clicks: u64,
    pub conversions: u64,
}

impl SlotCounts {
    pub fn events(&self, kind: EventKind) -> u64 {
        match kind {
            EventKind::Click => self.clicks,
            EventKind::Conversion => self.conversions,
        }
    }

    fn add_event(&mut self, kind: EventKind) {
        match kind {
            EventKind::Click => self.clicks += 1,
            EventKind::Conversion => self.conversions += 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub planned: Money,
    pub spend: Money,
    pub counts: SlotCounts,
    pub closed: bool,
}

/// Frozen aggregates of one closed slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotSummary {
    pub day: u32,
    pub slot: usize,
    pub planned: Money,
    pub spend: Money,
    pub counts: SlotCounts,
    /// `impressions / bids`, zero when nothing was bid.
    pub win_rate: f64,
    /// Set when `bids == 0`; ratio forecasts treat the win rate as unknown.
    pub no_data: bool,
}

/// Per-slot spend and counts for one campaign-day.
///
/// Spend is integer micros, so totals are exact for any interleaving of
/// records.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpendLedger {
    day: u32,
    slots: Vec<SlotRecord>,
    open: usize,
    total_spend: Money,
    totals: SlotCounts,
}

impl SpendLedger {
    pub fn new(day: u32, num_slots: usize) -> Self {
        Self {
            day,
            slots: vec![SlotRecord::default(); num_slots],
            open: 0,
            total_spend: Money::ZERO,
            totals: SlotCounts::default(),
        }
    }

    pub fn day(&self) -> u32 {
        self.day
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn open_slot(&self) -> usize {
        self.open
    }

    pub fn slot(&self, slot: usize) -> &SlotRecord {
        &self.slots[slot]
    }

    pub fn slots(&self) -> &[SlotRecord] {
        &self.slots
    }

    pub fn total_spend(&self) -> Money {
        self.total_spend
    }

    pub fn totals(&self) -> &SlotCounts {
        &self.totals
    }

    /// Spend of slots `0..slot`.
    pub fn spent_before(&self, slot: usize) -> Money {
        self.slots[..slot.min(self.slots.len())]
            .iter()
            .map(|s| s.spend)
            .sum()
    }

    fn open_record(&mut self, slot: usize) -> Result<&mut SlotRecord> {
        if slot != self.open || slot >= self.slots.len() {
            return Err(Error::SlotNotOpen {
                slot,
                open: self.open,
            });
        }
        Ok(&mut self.slots[slot])
    }

    pub fn set_planned(&mut self, slot: usize, planned: Money) -> Result<()> {
        self.open_record(slot)?.planned = planned;
        Ok(())
    }

    pub fn record_request(&mut self, slot: usize) -> Result<()> {
        self.open_record(slot)?.counts.requests += 1;
        self.totals.requests += 1;
        Ok(())
    }

    /// Records one submitted bid. Losses count as bids but cost nothing.
    pub fn record_auction(&mut self, slot: usize, outcome: &AuctionOutcome) -> Result<()> {
        outcome.validate()?;
        let rec = self.open_record(slot)?;
        rec.counts.bids += 1;
        if outcome.won {
            rec.counts.impressions += 1;
            rec.spend += outcome.clearing_price;
        }
        self.totals.bids += 1;
        if outcome.won {
            self.totals.impressions += 1;
            self.total_spend += outcome.clearing_price;
        }
        Ok(())
    }

    /// Counts a feedback event delivered during the open slot.
    pub fn record_event(&mut self, slot: usize, kind: EventKind) -> Result<()> {
        self.open_record(slot)?.counts.add_event(kind);
        self.totals.add_event(kind);
        Ok(())
    }

    /// Freezes the open slot and advances `clock`.
    pub fn close_slot(&mut self, clock: &mut SlotClock) -> Result<SlotSummary> {
        if self.open >= self.slots.len() || clock.is_finished() {
            return Err(Error::ClockExhausted(self.slots.len()));
        }
        if clock.current() != self.open {
            return Err(Error::SlotNotOpen {
                slot: clock.current(),
                open: self.open,
            });
        }
        let slot = self.open;
        let rec = &mut self.slots[slot];
        rec.closed = true;
        let counts = rec.counts;
        let no_data = counts.bids == 0;
        let win_rate = if no_data {
            0.0
        } else {
            counts.impressions as f64 / counts.bids as f64
        };
        let summary = SlotSummary {
            day: self.day,
            slot,
            planned: rec.planned,
            spend: rec.spend,
            counts,
            win_rate,
            no_data,
        };
        clock.advance()?;
        self.open += 1;
        Ok(summary)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn m(x: u64) -> Money {
        Money::from_micros(x)
    }

    #[test]
    fn win_adds_spend_and_impression() {
        let mut l = SpendLedger::new(0, 4);
        l.record_auction(0, &AuctionOutcome::won(m(2_000_000), m(1_000_000))).unwrap();
        assert_eq!(l.slot(0).spend, m(1_000_000));
        assert_eq!(l.slot(0).counts.impressions, 1);
        assert_eq!(l.slot(0).counts.bids, 1);
    }

    #[test]
    fn loss_counts_bid_only() {
        let mut l = SpendLedger::new(0, 4);
        l.record_auction(0, &AuctionOutcome::lost(m(1_000_000))).unwrap();
        assert_eq!(l.slot(0).spend, Money::ZERO);
        assert_eq!(l.slot(0).counts.bids, 1);
        assert_eq!(l.slot(0).counts.impressions, 0);
    }

    #[test]
    fn two_half_wins_are_exact() {
        let mut l = SpendLedger::new(0, 4);
        for _ in 0..2 {
            l.record_auction(0, &AuctionOutcome::won(m(600_000), m(500_000))).unwrap();
        }
        assert_eq!(l.slot(0).spend, m(1_000_000));
    }

    #[test]
    fn closed_slot_rejects_records() {
        let mut l = SpendLedger::new(0, 2);
        let mut c = SlotClock::equal(2, 60).unwrap();
        l.close_slot(&mut c).unwrap();
        let err = l.record_auction(0, &AuctionOutcome::lost(m(1))).unwrap_err();
        assert!(matches!(err, Error::SlotNotOpen { slot: 0, open: 1 }));
    }

    #[test]
    fn summary_win_rate() {
        let mut l = SpendLedger::new(0, 3);
        let mut c = SlotClock::equal(3, 60).unwrap();
        for i in 0..4000 {
            let o = if i % 2 == 0 {
                AuctionOutcome::won(m(10_000), m(5_000))
            } else {
                AuctionOutcome::lost(m(10_000))
            };
            l.record_auction(0, &o).unwrap();
        }
        let s = l.close_slot(&mut c).unwrap();
        assert_eq!(s.win_rate, 0.5);
        assert_eq!(s.spend, m(10_000_000));
        assert!(!s.no_data);

        let s = l.close_slot(&mut c).unwrap();
        assert_eq!(s.win_rate, 0.0);
        assert!(s.no_data);
    }

    #[test]
    fn closing_past_the_end_fails() {
        let mut l = SpendLedger::new(0, 1);
        let mut c = SlotClock::equal(1, 60).unwrap();
        l.close_slot(&mut c).unwrap();
        assert!(matches!(l.close_slot(&mut c), Err(Error::ClockExhausted(1))));
    }

    proptest! {
        #[test]
        fn totals_are_exact_and_replayable(
            records in prop::collection::vec((0usize..3, any::<bool>(), 1u64..5_000_000), 0..300)
        ) {
            let replay = |records: &[(usize, bool, u64)]| {
                let mut l = SpendLedger::new(0, 3);
                let mut c = SlotClock::equal(3, 60).unwrap();
                let mut sorted = records.to_vec();
                sorted.sort_by_key(|r| r.0);
                let mut summaries = Vec::new();
                for slot in 0..3 {
                    for &(_, won, price) in sorted.iter().filter(|r| r.0 == slot) {
                        let o = if won {
                            AuctionOutcome::won(m(price), m(price / 2 + 1))
                        } else {
                            AuctionOutcome::lost(m(price))
                        };
                        l.record_auction(slot, &o).unwrap();
                    }
                    summaries.push(l.close_slot(&mut c).unwrap());
                }
                (l, summaries)
            };
            let (l, summaries) = replay(&records);
            let expected: u64 = records.iter().filter(|r| r.1).map(|r| r.2 / 2 + 1).sum();
            prop_assert_eq!(l.total_spend().micros(), expected);
            for s in &summaries {
                prop_assert!(s.counts.impressions <= s.counts.bids);
                prop_assert!((0.0..=1.0).contains(&s.win_rate));
            }
            let (l2, _) = replay(&records);
            prop_assert_eq!(l, l2);
        }
    }
}
