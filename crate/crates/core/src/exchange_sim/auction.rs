use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::domain::{AuctionOutcome, Money};
use crate::error::{Error, Result};

/// Highest competing bid per slot: log-normal with median `medians[t]` and
/// log-scale `sigmas[t]`, at least one micro.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompetitorModel {
    pub medians: Vec<Money>,
    pub sigmas: Vec<f64>,
    pub floor: Money,
}

impl CompetitorModel {
    pub fn constant(num_slots: usize, median: Money, sigma: f64) -> Self {
        Self {
            medians: vec![median; num_slots],
            sigmas: vec![sigma; num_slots],
            floor: Money::ZERO,
        }
    }

    pub fn validate(&self, num_slots: usize) -> Result<()> {
        for len in [self.medians.len(), self.sigmas.len()] {
            if len != num_slots {
                return Err(Error::LengthMismatch {
                    left: len,
                    right: num_slots,
                });
            }
        }
        if self.medians.iter().any(|m| m.is_zero()) {
            return Err(Error::invalid("competitor medians must be positive"));
        }
        if self.sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("competitor sigmas must be positive"));
        }
        Ok(())
    }

    pub fn sample_highest<R: Rng + ?Sized>(&self, slot: usize, rng: &mut R) -> Money {
        let z: f64 = rng.sample(StandardNormal);
        let mu = (self.medians[slot].micros() as f64).ln();
        let h = (mu + self.sigmas[slot] * z).exp().round();
        Money::from_micros(if h >= 1.0 { h.min(u64::MAX as f64) as u64 } else { 1 })
    }

    /// Probability that `bid` beats the competing bid in `slot` (floor aside).
    ///
    /// Competing bids are rounded to micros and ties lose, so this is
    /// `P(exp(N) < bid - 0.5)`.
    pub fn win_probability(&self, bid: Money, slot: usize) -> f64 {
        if bid.micros() <= 1 {
            return 0.0;
        }
        let x = (bid.micros() as f64 - 0.5).ln();
        let mu = (self.medians[slot].micros() as f64).ln();
        Normal::new(mu, self.sigmas[slot])
            .map(|n| n.cdf(x))
            .unwrap_or(0.0)
    }
}

/// Second-price clearing against a known highest competing bid. Ties lose.
pub fn clear_auction(bid: Money, highest_competing: Money, floor: Money) -> AuctionOutcome {
    let price = highest_competing.max(floor);
    if bid > price {
        AuctionOutcome::won(bid, price)
    } else {
        AuctionOutcome::lost(bid)
    }
}

/// Draws the highest competing bid and clears the auction.
pub fn run_auction<R: Rng + ?Sized>(
    bid: Money,
    competitor: &CompetitorModel,
    slot: usize,
    rng: &mut R,
) -> AuctionOutcome {
    let h = competitor.sample_highest(slot, rng);
    clear_auction(bid, h, competitor.floor)
}
