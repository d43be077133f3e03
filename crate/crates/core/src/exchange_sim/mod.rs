//! Deterministic real-time-bidding world.
//!
//! Traffic is generated per slot, each bid is cleared in a second-price
//! auction against a log-normal highest competing bid, and clicks or
//! conversions arrive after a geometric delay. Every random draw comes from a
//! named [`SeedStreams`](crate::rng::SeedStreams) stream, so a run is a pure
//! function of its configuration and seed.

mod auction;
mod feedback;
mod traffic;
mod world;

pub use auction::{clear_auction, run_auction, CompetitorModel};
pub use feedback::{sample_feedback, sample_feedback_with, DelayModel, FeedbackEvent, FeedbackQueue};
pub use traffic::{generate_requests, request_id, QualityFactors, SimRequest, TrafficProfile};
pub use world::{Participant, SlotStep, World, WorldConfig};
