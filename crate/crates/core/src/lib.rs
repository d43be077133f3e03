//! Budget pacing and real-time bid optimization for display advertising.
//!
//! The crate is organised around the control loop a demand-side platform runs
//! for every campaign:
//!
//! - [`pacing`] plans per-slot budgets and steers the pacing rate with a
//!   multiplicative feedback recursion.
//! - [`flat_selection`] picks high-quality requests for fixed-price campaigns
//!   with a histogram threshold and a confidence band.
//! - [`dcpm_bidding`] prices requests for dynamic-CPM campaigns (shading in the
//!   safe region, boosting in the danger region).
//! - [`estimator`] predicts response rates from hierarchy-smoothed counts.
//! - [`guards`] enforces the daily stop, interval pause, eCPM cap and
//!   cold-start exploration.
//! - [`exchange_sim`] is a deterministic second-price exchange used to drive
//!   the loop, and [`harness`] runs experiments and writes reports.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod bidder;
pub mod dcpm_bidding;
pub mod domain;
pub mod error;
pub mod estimator;
pub mod exchange_sim;
pub mod flat_selection;
pub mod guards;
pub mod harness;
pub mod pacing;
pub mod rng;

pub use crate::domain::{
    AdRequest, AuctionOutcome, CampaignConfig, CampaignKind, EventKind, FeaturePath, GoalKind,
    Money, PacingStrategy, RegionThresholds, SlotClock, SlotSummary, SpendLedger,
};
pub use crate::error::{Error, Result};
