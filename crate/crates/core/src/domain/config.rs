use serde::{Deserialize, Serialize};

use super::money::Money;
use super::request::EventKind;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalKind {
    Cpc,
    Cpa,
    Ctr,
    Ar,
}

impl GoalKind {
    /// The feedback event the goal is measured on.
    pub fn event_kind(self) -> EventKind {
        match self {
            GoalKind::Cpc | GoalKind::Ctr => EventKind::Click,
            GoalKind::Cpa | GoalKind::Ar => EventKind::Conversion,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CampaignKind {
    /// Submits the same price `c*` on every selected request.
    FlatCpm { fixed_bid: Money },
    /// Prices every request from its predicted rate and the goal value `G`.
    DynamicCpm { goal_value: Money },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PacingStrategy {
    Uniform,
    Performance,
    /// `weight` is the share given to the performance schedule.
    Blended { weight: f64 },
}

/// Pacing-rate thresholds `β1 <= β2` separating safe, critical and danger.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionThresholds {
    pub safe: f64,
    pub danger: f64,
}

impl Default for RegionThresholds {
    fn default() -> Self {
        Self {
            safe: 0.3,
            danger: 0.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub daily_budget: Money,
    pub kind: CampaignKind,
    pub goal: GoalKind,
    /// Average cost per thousand impressions must not exceed this.
    pub ecpm_cap: Option<Money>,
    /// Highest price the exchange accepts, `C`.
    pub bid_cap: Money,
    pub regions: RegionThresholds,
    pub strategy: PacingStrategy,
    /// Allowed overshoot of a slot's plan before bidding pauses, `δ_t`.
    pub interval_tolerance: Money,
    /// Per-slot overrides of `interval_tolerance`.
    pub slot_tolerances: Option<Vec<Money>>,
    /// `ε`: how close total spend must land to the budget to count as on target.
    pub daily_tolerance: Money,
    pub shading_percentile: f64,
    pub min_pacing_rate: f64,
    /// Rate multiplier applied after a slot with zero spend.
    pub growth_factor: f64,
}

impl CampaignConfig {
    /// A flat-CPM campaign with the default knobs for `num_slots` slots.
    pub fn flat(daily_budget: Money, fixed_bid: Money, num_slots: usize) -> Self {
        Self::with_kind(daily_budget, CampaignKind::FlatCpm { fixed_bid }, GoalKind::Ctr, num_slots)
    }

    /// A dynamic-CPM campaign with the default knobs for `num_slots` slots.
    pub fn dynamic(daily_budget: Money, goal_value: Money, num_slots: usize) -> Self {
        Self::with_kind(
            daily_budget,
            CampaignKind::DynamicCpm { goal_value },
            GoalKind::Cpa,
            num_slots,
        )
    }

    fn with_kind(daily_budget: Money, kind: CampaignKind, goal: GoalKind, num_slots: usize) -> Self {
        let per_slot = daily_budget.micros() / num_slots.max(1) as u64;
        let bid_cap = match kind {
            CampaignKind::FlatCpm { fixed_bid } => fixed_bid.max(Money::from_micros(10_000)),
            CampaignKind::DynamicCpm { .. } => Money::from_micros(10_000),
        };
        Self {
            daily_budget,
            kind,
            goal,
            ecpm_cap: None,
            bid_cap,
            regions: RegionThresholds::default(),
            strategy: PacingStrategy::Uniform,
            interval_tolerance: Money::from_micros(per_slot / 4),
            slot_tolerances: None,
            daily_tolerance: Money::from_micros(daily_budget.micros() / 100),
            shading_percentile: 0.02,
            min_pacing_rate: 1e-4,
            growth_factor: 2.0,
        }
    }

    pub fn fixed_bid(&self) -> Option<Money> {
        match self.kind {
            CampaignKind::FlatCpm { fixed_bid } => Some(fixed_bid),
            CampaignKind::DynamicCpm { .. } => None,
        }
    }

    pub fn goal_value(&self) -> Option<Money> {
        match self.kind {
            CampaignKind::DynamicCpm { goal_value } => Some(goal_value),
            CampaignKind::FlatCpm { .. } => None,
        }
    }

    pub fn interval_tolerance_for(&self, slot: usize) -> Money {
        self.slot_tolerances
            .as_ref()
            .and_then(|v| v.get(slot).copied())
            .unwrap_or(self.interval_tolerance)
    }

    pub fn validate(&self, num_slots: usize) -> Result<()> {
        let RegionThresholds { safe, danger } = self.regions;
        if !(0.0..=1.0).contains(&safe) || !(0.0..=1.0).contains(&danger) || safe > danger {
            return Err(Error::Config(format!(
                "region thresholds must satisfy 0 <= safe ({safe}) <= danger ({danger}) <= 1"
            )));
        }
        if !(self.min_pacing_rate > 0.0 && self.min_pacing_rate <= 1.0) {
            return Err(Error::Config(format!(
                "min_pacing_rate {} must lie in (0, 1]",
                self.min_pacing_rate
            )));
        }
        if !(self.growth_factor.is_finite() && self.growth_factor >= 1.0) {
            return Err(Error::Config("growth_factor must be finite and >= 1".into()));
        }
        if !(self.shading_percentile > 0.0 && self.shading_percentile <= 1.0) {
            return Err(Error::Config("shading_percentile must lie in (0, 1]".into()));
        }
        match self.kind {
            CampaignKind::FlatCpm { fixed_bid } => {
                if fixed_bid.is_zero() {
                    return Err(Error::Config("fixed_bid must be positive".into()));
                }
                if self.bid_cap < fixed_bid {
                    return Err(Error::Config("bid_cap must be >= fixed_bid".into()));
                }
            }
            CampaignKind::DynamicCpm { goal_value } => {
                if goal_value.is_zero() {
                    return Err(Error::Config("goal_value must be positive".into()));
                }
            }
        }
        if let PacingStrategy::Blended { weight } = self.strategy {
            if !(0.0..=1.0).contains(&weight) {
                return Err(Error::Config("blend weight must lie in [0, 1]".into()));
            }
        }
        if let Some(t) = &self.slot_tolerances {
            if t.len() != num_slots {
                return Err(Error::Config(format!(
                    "slot_tolerances has {} entries, expected {num_slots}",
                    t.len()
                )));
            }
        }
        Ok(())
    }
}
