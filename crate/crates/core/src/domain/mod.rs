//! Core value types, the slot clock and the spend ledger.

mod clock;
mod config;
mod ledger;
mod money;
mod request;

pub use clock::{SlotClock, DEFAULT_SLOTS, DEFAULT_SLOT_SECONDS};
pub use config::{CampaignConfig, CampaignKind, GoalKind, PacingStrategy, RegionThresholds};
pub use ledger::{SlotCounts, SlotRecord, SlotSummary, SpendLedger};
pub use money::{floor_micros, Money, MICROS_PER_UNIT};
pub use request::{AdRequest, AuctionOutcome, EventKind, FeaturePath, MAX_PATH_DEPTH};
