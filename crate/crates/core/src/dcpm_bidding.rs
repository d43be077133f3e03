//! Bid pricing for dynamic-CPM campaigns.
//!
//! The base price of a request is its predicted action rate times the goal
//! value. Where the pacing rate sits decides what happens to it: in the safe
//! region the price is shaded by `θ*`, a low percentile of paid-to-bid ratios
//! on converting impressions; in the critical region it is submitted as is;
//! in the danger region it is boosted by `ρ*`, which grows linearly from 1 to
//! `C / c*` as the pacing rate climbs from `β2` to 1.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{floor_micros, AuctionOutcome, CampaignConfig, Money, RegionThresholds};
use crate::error::{Error, Result};
use crate::pacing::PacingRate;

pub const DEFAULT_SHADING_PERCENTILE: f64 = 0.02;
pub const MIN_SHADING_SAMPLES: usize = 50;
pub const SHADING_WINDOW: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PacingRegion {
    Safe,
    Critical,
    Danger,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnderdeliveryCause {
    None,
    TargetingLimited,
    PriceLimited,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionAssessment {
    pub region: PacingRegion,
    pub cause: UnderdeliveryCause,
}

/// Places the pacing rate relative to `(β1, β2)`.
///
/// A targeting-limited campaign is never treated as safe: shading its price
/// cannot buy more reach.
pub fn classify_region(
    pacing: PacingRate,
    thresholds: &RegionThresholds,
    targeting_limited: bool,
) -> RegionAssessment {
    let rate = pacing.value();
    let limited = if targeting_limited {
        UnderdeliveryCause::TargetingLimited
    } else {
        UnderdeliveryCause::None
    };
    if rate <= thresholds.safe {
        if targeting_limited {
            RegionAssessment {
                region: PacingRegion::Critical,
                cause: limited,
            }
        } else {
            RegionAssessment {
                region: PacingRegion::Safe,
                cause: UnderdeliveryCause::None,
            }
        }
    } else if rate <= thresholds.danger {
        RegionAssessment {
            region: PacingRegion::Critical,
            cause: limited,
        }
    } else {
        RegionAssessment {
            region: PacingRegion::Danger,
            cause: if targeting_limited {
                limited
            } else {
                UnderdeliveryCause::PriceLimited
            },
        }
    }
}

/// `u = AR * G`, floored to micros.
pub fn base_bid(predicted_ar: f64, goal_value: Money) -> Money {
    goal_value.mul_floor(predicted_ar.clamp(0.0, 1.0))
}

/// Paid-to-bid ratios `θ = c / ĉ` of converting impressions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadingStats {
    samples: VecDeque<f64>,
    percentile: f64,
    window: usize,
    min_samples: usize,
}

impl ShadingStats {
    pub fn new(percentile: f64) -> Self {
        Self {
            samples: VecDeque::new(),
            percentile,
            window: SHADING_WINDOW,
            min_samples: MIN_SHADING_SAMPLES,
        }
    }

    pub fn with_limits(percentile: f64, window: usize, min_samples: usize) -> Self {
        Self {
            window: window.max(1),
            min_samples,
            ..Self::new(percentile)
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().copied()
    }

    /// Adds `θ` for a won impression that converted; other wins are ignored.
    pub fn record_win(&mut self, outcome: &AuctionOutcome, converted: bool) -> Result<()> {
        if !outcome.won {
            return Err(Error::InvalidOutcome("shading sample from a lost auction"));
        }
        if outcome.submitted_bid.is_zero() {
            return Err(Error::InvalidOutcome("shading sample with zero bid"));
        }
        outcome.validate()?;
        if !converted {
            return Ok(());
        }
        let theta = outcome.clearing_price.micros() as f64 / outcome.submitted_bid.micros() as f64;
        self.push(theta);
        Ok(())
    }

    pub fn push(&mut self, theta: f64) {
        if self.samples.len() == self.window {
            self.samples.pop_front();
        }
        self.samples.push_back(theta);
    }

    /// Nearest-rank percentile of the samples; 1 (no shading) until enough
    /// samples exist.
    pub fn theta_star(&self) -> f64 {
        if self.samples.len() < self.min_samples.max(1) {
            return 1.0;
        }
        let mut v: Vec<f64> = self.samples.iter().copied().collect();
        let k = nearest_rank(v.len(), self.percentile) - 1;
        let (_, nth, _) = v.select_nth_unstable_by(k, f64::total_cmp);
        nth.clamp(f64::MIN_POSITIVE, 1.0)
    }

    /// Writes `bin_low,bin_high,count` rows over 100 equal bins of `[0, 1]`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut counts = [0u64; 100];
        for s in &self.samples {
            counts[((s * 100.0) as usize).min(99)] += 1;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_low", "bin_high", "count"])?;
        for (i, c) in counts.iter().enumerate() {
            w.write_record([
                format!("{:.2}", i as f64 / 100.0),
                format!("{:.2}", (i + 1) as f64 / 100.0),
                c.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// 1-based nearest rank `ceil(p * n)`, at least 1.
pub fn nearest_rank(n: usize, percentile: f64) -> usize {
    let r = (percentile * n as f64 - 1e-9).ceil();
    (r.max(1.0) as usize).min(n)
}

/// Exponentially smoothed average clearing price per impression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostAverage {
    value: Option<f64>,
    alpha: f64,
}

impl CostAverage {
    /// Half-life of `half_life_slots` slots.
    pub fn new(half_life_slots: usize) -> Self {
        Self {
            value: None,
            alpha: 1.0 - 0.5f64.powf(1.0 / half_life_slots.max(1) as f64),
        }
    }

    /// Folds in a slot's average price; slots without impressions are skipped.
    pub fn observe_slot(&mut self, spend: Money, impressions: u64) {
        if impressions == 0 {
            return;
        }
        let avg = spend.micros() as f64 / impressions as f64;
        self.value = Some(match self.value {
            None => avg,
            Some(v) => v + self.alpha * (avg - v),
        });
    }

    pub fn value(&self) -> Option<Money> {
        self.value
            .map(|v| Money::from_micros(v.round().max(1.0) as u64))
    }
}

/// Danger-region multiplier `1 + (C/c* - 1) * (rate - β2) / (1 - β2)`.
///
/// Exactly 1 at or below `β2` (and whenever `β2 = 1`), exactly `C / c*` at a
/// full pacing rate, and never below 1.
pub fn boost_factor(pacing: PacingRate, cfg: &CampaignConfig, cost_avg: Money) -> Result<f64> {
    if cost_avg.is_zero() {
        return Err(Error::NoCostHistory);
    }
    let beta2 = cfg.regions.danger;
    let rate = pacing.value();
    let headroom = cfg.bid_cap.micros() as f64 / cost_avg.micros() as f64;
    if beta2 >= 1.0 || rate <= beta2 || headroom <= 1.0 {
        return Ok(1.0);
    }
    let progress = (rate - beta2) / (1.0 - beta2);
    if progress >= 1.0 {
        return Ok(headroom);
    }
    Ok((1.0 + (headroom - 1.0) * progress).min(headroom))
}

/// Final price for a request, clamped to `[0, C]`. Zero means no bid.
pub fn compute_bid(
    region: PacingRegion,
    base: Money,
    theta_star: f64,
    rho_star: f64,
    bid_cap: Money,
) -> Money {
    let price = match region {
        PacingRegion::Safe => floor_micros(base.micros() as f64 * theta_star.clamp(0.0, 1.0)),
        PacingRegion::Critical => base,
        PacingRegion::Danger => floor_micros(base.micros() as f64 * rho_star.max(1.0)),
    };
    price.min(bid_cap)
}
