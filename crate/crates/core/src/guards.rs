//! Hard budget safety, the eCPM cap and cold-start exploration.
//!
//! Per request the checks run in a fixed order: daily stop, interval pause,
//! eCPM cap, cold start, then the regular decision path.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{AdRequest, FeaturePath, Money};

pub const DEFAULT_RECOMMENDED_BOOST: f64 = 1.5;
pub const DEFAULT_MATURE_IMPRESSIONS: u64 = 100_000;
pub const DEFAULT_MATURE_EVENTS: u64 = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuardAction {
    Continue,
    PauseUntilNextSlot,
    /// Terminal for the rest of the day.
    StopCampaign,
    SuppressBid,
}

/// `StopCampaign` iff `total_spend >= budget`.
pub fn check_daily(total_spend: Money, budget: Money) -> GuardAction {
    if total_spend >= budget {
        GuardAction::StopCampaign
    } else {
        GuardAction::Continue
    }
}

/// Whether the day's spend landed within `tolerance` of the budget.
pub fn on_target(total_spend: Money, budget: Money, tolerance: Money) -> bool {
    total_spend.micros().abs_diff(budget.micros()) <= tolerance.micros()
}

/// `PauseUntilNextSlot` iff `slot_spend > planned + tolerance` (strict).
pub fn check_interval(slot_spend: Money, planned: Money, tolerance: Money) -> GuardAction {
    let limit = planned.micros() as u128 + tolerance.micros() as u128;
    if slot_spend.micros() as u128 > limit {
        GuardAction::PauseUntilNextSlot
    } else {
        GuardAction::Continue
    }
}

/// `SuppressBid` while `1000 * cost / impressions > cap`. Without impressions
/// the eCPM is undefined and bidding continues.
pub fn check_ecpm(cost: Money, impressions: u64, cap: Money) -> GuardAction {
    if impressions == 0 {
        return GuardAction::Continue;
    }
    // compare 1000 * cost > cap * impressions in integers
    let lhs = cost.micros() as u128 * 1000;
    let rhs = cap.micros() as u128 * impressions as u128;
    if lhs > rhs {
        GuardAction::SuppressBid
    } else {
        GuardAction::Continue
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColdStartPolicy {
    /// Exploration probability for a brand-new campaign.
    pub epsilon: f64,
    /// Publisher or user path prefixes that get a boosted exploration bid.
    pub recommended: Vec<FeaturePath>,
    pub mature_impressions: u64,
    pub mature_events: u64,
    pub exploration_bid: Money,
    pub recommended_boost: f64,
}

impl ColdStartPolicy {
    pub fn new(epsilon: f64, exploration_bid: Money) -> Self {
        Self {
            epsilon: epsilon.clamp(0.0, 1.0),
            recommended: Vec::new(),
            mature_impressions: DEFAULT_MATURE_IMPRESSIONS,
            mature_events: DEFAULT_MATURE_EVENTS,
            exploration_bid,
            recommended_boost: DEFAULT_RECOMMENDED_BOOST,
        }
    }

    /// Progress towards maturity in `[0, 1]`; whichever of impressions or
    /// events gets there first wins.
    pub fn maturity(&self, impressions: u64, events: u64) -> f64 {
        let frac = |n: u64, of: u64| if of == 0 { 1.0 } else { n as f64 / of as f64 };
        frac(impressions, self.mature_impressions)
            .max(frac(events, self.mature_events))
            .min(1.0)
    }

    /// Exploration probability after linear decay with maturity.
    pub fn effective_epsilon(&self, maturity: f64) -> f64 {
        (self.epsilon * (1.0 - maturity.clamp(0.0, 1.0))).clamp(0.0, 1.0)
    }

    pub fn is_recommended(&self, request: &AdRequest) -> bool {
        self.recommended
            .iter()
            .any(|p| request.publisher.starts_with(p) || request.user.starts_with(p))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColdStartDecision {
    ExploreBid(Money),
    DeferToModel,
    Skip,
}

pub fn cold_start_decide<R: Rng + ?Sized>(
    policy: &ColdStartPolicy,
    request: &AdRequest,
    maturity: f64,
    rng: &mut R,
) -> ColdStartDecision {
    cold_start_decide_with_coin(policy, request, maturity, rng.random())
}

/// [`cold_start_decide`] with the uniform draw supplied.
pub fn cold_start_decide_with_coin(
    policy: &ColdStartPolicy,
    request: &AdRequest,
    maturity: f64,
    coin: f64,
) -> ColdStartDecision {
    if maturity >= 1.0 {
        return ColdStartDecision::DeferToModel;
    }
    if policy.is_recommended(request) {
        return ColdStartDecision::ExploreBid(
            policy.exploration_bid.mul_floor(policy.recommended_boost),
        );
    }
    if coin < policy.effective_epsilon(maturity) {
        ColdStartDecision::ExploreBid(policy.exploration_bid)
    } else {
        ColdStartDecision::Skip
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuardKind {
    DailyStop,
    IntervalPause,
    EcpmSuppress,
}

impl fmt::Display for GuardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GuardKind::DailyStop => "daily-stop",
            GuardKind::IntervalPause => "interval-pause",
            GuardKind::EcpmSuppress => "ecpm-suppress",
        })
    }
}

/// A guard transition, logged once per trip rather than once per request.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardTrip {
    pub day: u32,
    pub slot: usize,
    pub kind: GuardKind,
    /// Spend that tripped the guard (day total, slot spend or cumulative cost).
    pub spend: Money,
    /// Budget, slot plan plus tolerance, or `cap * impressions / 1000`.
    pub limit: Money,
    pub impressions: u64,
}

/// Per-campaign guard state for one day.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardState {
    pub stopped: bool,
    pub paused: bool,
    suppressing: bool,
    trips: Vec<GuardTrip>,
}

/// What the guard layer lets through for the next request.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GuardInputs {
    pub day: u32,
    pub slot: usize,
    pub day_spend: Money,
    pub budget: Money,
    pub slot_spend: Money,
    pub planned: Money,
    pub tolerance: Money,
    pub lifetime_cost: Money,
    pub lifetime_impressions: u64,
    pub ecpm_cap: Option<Money>,
}

impl GuardState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn trips(&self) -> &[GuardTrip] {
        &self.trips
    }

    pub fn take_trips(&mut self) -> Vec<GuardTrip> {
        std::mem::take(&mut self.trips)
    }

    /// Clears the interval pause at a slot boundary.
    pub fn roll_slot(&mut self) {
        self.paused = false;
    }

    /// Clears every flag at a day boundary.
    pub fn roll_day(&mut self) {
        self.stopped = false;
        self.paused = false;
        self.suppressing = false;
    }

    /// Runs daily stop, interval pause and the eCPM cap in order and returns
    /// the first action that is not `Continue`.
    pub fn evaluate(&mut self, g: &GuardInputs) -> GuardAction {
        if self.stopped {
            return GuardAction::StopCampaign;
        }
        if check_daily(g.day_spend, g.budget) == GuardAction::StopCampaign {
            self.stopped = true;
            self.trips.push(GuardTrip {
                day: g.day,
                slot: g.slot,
                kind: GuardKind::DailyStop,
                spend: g.day_spend,
                limit: g.budget,
                impressions: g.lifetime_impressions,
            });
            return GuardAction::StopCampaign;
        }
        if self.paused {
            return GuardAction::PauseUntilNextSlot;
        }
        if check_interval(g.slot_spend, g.planned, g.tolerance) == GuardAction::PauseUntilNextSlot {
            self.paused = true;
            self.trips.push(GuardTrip {
                day: g.day,
                slot: g.slot,
                kind: GuardKind::IntervalPause,
                spend: g.slot_spend,
                limit: Money::from_micros(g.planned.micros().saturating_add(g.tolerance.micros())),
                impressions: g.lifetime_impressions,
            });
            return GuardAction::PauseUntilNextSlot;
        }
        if let Some(cap) = g.ecpm_cap {
            let action = check_ecpm(g.lifetime_cost, g.lifetime_impressions, cap);
            let suppress = action == GuardAction::SuppressBid;
            if suppress && !self.suppressing {
                let limit = cap.micros() as u128 * g.lifetime_impressions as u128 / 1000;
                self.trips.push(GuardTrip {
                    day: g.day,
                    slot: g.slot,
                    kind: GuardKind::EcpmSuppress,
                    spend: g.lifetime_cost,
                    limit: Money::from_micros(limit.min(u64::MAX as u128) as u64),
                    impressions: g.lifetime_impressions,
                });
            }
            self.suppressing = suppress;
            if suppress {
                return GuardAction::SuppressBid;
            }
        }
        GuardAction::Continue
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn m(x: u64) -> Money {
        Money::from_micros(x)
    }

    fn dollars(x: f64) -> Money {
        Money::from_units(x).unwrap()
    }

    fn req(publisher: &str, user: &str) -> AdRequest {
        AdRequest {
            id: 0,
            slot: 0,
            advertiser: "1".parse().unwrap(),
            publisher: publisher.parse().unwrap(),
            user: user.parse().unwrap(),
        }
    }

    #[test]
    fn daily_examples() {
        let b = dollars(100.0);
        assert_eq!(check_daily(b, b), GuardAction::StopCampaign);
        assert_eq!(check_daily(m(b.micros() - 1), b), GuardAction::Continue);
        assert_eq!(check_daily(Money::ZERO, b), GuardAction::Continue);
        assert!(on_target(dollars(99.5), b, dollars(1.0)));
        assert!(!on_target(dollars(98.0), b, dollars(1.0)));
    }

    #[test]
    fn interval_examples() {
        assert_eq!(
            check_interval(dollars(12.0), dollars(10.0), dollars(1.0)),
            GuardAction::PauseUntilNextSlot
        );
        assert_eq!(check_interval(dollars(10.5), dollars(10.0), dollars(1.0)), GuardAction::Continue);
        assert_eq!(check_interval(dollars(10.0), dollars(10.0), Money::ZERO), GuardAction::Continue);
    }

    #[test]
    fn ecpm_examples() {
        assert_eq!(check_ecpm(dollars(50.0), 8000, dollars(5.0)), GuardAction::SuppressBid);
        assert_eq!(check_ecpm(dollars(40.0), 8000, dollars(5.0)), GuardAction::Continue);
        assert_eq!(check_ecpm(dollars(50.0), 0, dollars(5.0)), GuardAction::Continue);
    }

    #[test]
    fn cold_start_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut policy = ColdStartPolicy::new(0.0, m(1000));
        policy.recommended.push("7".parse().unwrap());
        assert_eq!(
            cold_start_decide(&policy, &req("7/1", "1/1"), 1.0, &mut rng),
            ColdStartDecision::DeferToModel
        );
        assert_eq!(
            cold_start_decide(&policy, &req("7/1", "1/1"), 0.2, &mut rng),
            ColdStartDecision::ExploreBid(m(1500))
        );
        for _ in 0..1000 {
            assert_eq!(
                cold_start_decide(&policy, &req("8/1", "1/1"), 0.0, &mut rng),
                ColdStartDecision::Skip
            );
        }
    }

    #[test]
    fn maturity_and_decay() {
        let p = ColdStartPolicy::new(0.4, m(1000));
        assert_eq!(p.maturity(0, 0), 0.0);
        assert_eq!(p.maturity(50_000, 0), 0.5);
        assert_eq!(p.maturity(0, 50), 1.0);
        assert_eq!(p.effective_epsilon(0.5), 0.2);
        assert_eq!(p.effective_epsilon(1.0), 0.0);
    }

    #[test]
    fn exploration_rate_matches_epsilon() {
        let p = ColdStartPolicy::new(0.3, m(1000));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| {
                matches!(
                    cold_start_decide(&p, &req("2", "2"), 0.0, &mut rng),
                    ColdStartDecision::ExploreBid(_)
                )
            })
            .count() as f64;
        let sigma = (n as f64 * 0.3 * 0.7).sqrt();
        assert!((hits - 0.3 * n as f64).abs() < 4.0 * sigma);
    }

    fn inputs(day_spend: u64, slot_spend: u64) -> GuardInputs {
        GuardInputs {
            day: 0,
            slot: 3,
            day_spend: m(day_spend),
            budget: m(1000),
            slot_spend: m(slot_spend),
            planned: m(100),
            tolerance: m(10),
            lifetime_cost: Money::ZERO,
            lifetime_impressions: 0,
            ecpm_cap: None,
        }
    }

    #[test]
    fn state_order_and_latching() {
        let mut s = GuardState::new();
        assert_eq!(s.evaluate(&inputs(0, 50)), GuardAction::Continue);
        assert_eq!(s.evaluate(&inputs(500, 111)), GuardAction::PauseUntilNextSlot);
        // pause holds within the slot and is logged once
        assert_eq!(s.evaluate(&inputs(500, 0)), GuardAction::PauseUntilNextSlot);
        s.roll_slot();
        assert_eq!(s.evaluate(&inputs(500, 0)), GuardAction::Continue);
        // daily stop beats pause and is terminal
        assert_eq!(s.evaluate(&inputs(1000, 500)), GuardAction::StopCampaign);
        s.roll_slot();
        assert_eq!(s.evaluate(&inputs(0, 0)), GuardAction::StopCampaign);
        let kinds: Vec<_> = s.trips().iter().map(|t| t.kind).collect();
        assert_eq!(kinds, vec![GuardKind::IntervalPause, GuardKind::DailyStop]);
        s.roll_day();
        assert_eq!(s.evaluate(&inputs(0, 0)), GuardAction::Continue);
    }

    #[test]
    fn ecpm_trip_logged_on_transition() {
        let mut s = GuardState::new();
        let mut g = inputs(0, 0);
        g.ecpm_cap = Some(dollars(5.0));
        g.lifetime_cost = dollars(50.0);
        g.lifetime_impressions = 8000;
        assert_eq!(s.evaluate(&g), GuardAction::SuppressBid);
        assert_eq!(s.evaluate(&g), GuardAction::SuppressBid);
        g.lifetime_impressions = 10_000;
        assert_eq!(s.evaluate(&g), GuardAction::Continue);
        assert_eq!(s.trips().len(), 1);
        assert_eq!(s.trips()[0].limit, dollars(40.0));
    }

    proptest! {
        #[test]
        fn ecpm_matches_float_definition(cost in 0u64..1_000_000_000, imps in 1u64..1_000_000, cap in 1u64..100_000_000) {
            let ecpm = 1000.0 * cost as f64 / imps as f64;
            let action = check_ecpm(m(cost), imps, m(cap));
            // skip float ties
            prop_assume!((ecpm - cap as f64).abs() > 1e-6 * cap as f64);
            prop_assert_eq!(action == GuardAction::SuppressBid, ecpm > cap as f64);
        }

        #[test]
        fn interval_is_strict(planned in 0u64..1_000_000_000, tol in 0u64..1_000_000, extra in 0u64..10) {
            let limit = planned + tol;
            prop_assert_eq!(check_interval(m(limit), m(planned), m(tol)), GuardAction::Continue);
            prop_assert_eq!(
                check_interval(m(limit + 1 + extra), m(planned), m(tol)),
                GuardAction::PauseUntilNextSlot
            );
        }
    }
}
