//! Per-slot budget schedules and the pacing-rate feedback recursion.
//!
//! A day is cut into slots. Before each slot the planner decides how much of
//! the remaining budget that slot should spend (`b_t`), and the controller
//! rescales the pacing rate (the share of eligible requests to bid on) by the
//! ratio of planned to realised spend, corrected by forecasts of request
//! volume and win rate.

use serde::{Deserialize, Serialize};

use crate::domain::{floor_micros, CampaignConfig, Money, PacingStrategy, SlotClock, SlotSummary, SpendLedger};
use crate::error::{Error, Result};

/// Starting rate when nothing is known about the slot.
pub const DEFAULT_INITIAL_RATE: f64 = 0.1;

/// Discrete distribution of performance over the slots of a day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformancePdf {
    probs: Vec<f64>,
}

impl PerformancePdf {
    /// Normalises nonnegative weights into a distribution.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("performance pdf needs at least one slot"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("performance weights must be finite and >= 0"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("performance weights sum to zero"));
        }
        Ok(Self {
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(num_slots: usize) -> Self {
        Self {
            probs: vec![1.0 / num_slots as f64; num_slots],
        }
    }

    /// Two daily peaks (late morning and evening) over a small base level.
    ///
    /// Synthetic: stands in for a measured per-slot performance curve.
    pub fn synthetic_bimodal(num_slots: usize) -> Self {
        let n = num_slots as f64;
        let bump = |x: f64, centre: f64, width: f64| {
            let d = (x - centre).abs().min(1.0 - (x - centre).abs());
            (-0.5 * (d / width).powi(2)).exp()
        };
        let weights = (0..num_slots)
            .map(|t| {
                let x = (t as f64 + 0.5) / n;
                0.25 + bump(x, 10.5 / 24.0, 0.06) + 1.4 * bump(x, 20.5 / 24.0, 0.05)
            })
            .collect();
        Self::new(weights).expect("positive weights")
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, slot: usize) -> f64 {
        self.probs[slot]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Share of eligible requests a campaign bids on, within `[min, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PacingRate(f64);

impl PacingRate {
    pub const FULL: PacingRate = PacingRate(1.0);

    /// Clamps `rate` into `[min_rate, 1]`; NaN maps to `min_rate`.
    pub fn new(rate: f64, min_rate: f64) -> Self {
        let min_rate = min_rate.clamp(f64::MIN_POSITIVE, 1.0);
        if rate.is_nan() {
            return PacingRate(min_rate);
        }
        PacingRate(rate.clamp(min_rate, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `reqs(t)/reqs(t+1)` and `win_rate(t)/win_rate(t+1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioForecast {
    pub reqs_ratio: f64,
    pub win_rate_ratio: f64,
}

impl RatioForecast {
    pub const NEUTRAL: RatioForecast = RatioForecast {
        reqs_ratio: 1.0,
        win_rate_ratio: 1.0,
    };

    /// Non-positive or non-finite ratios are replaced by 1.
    pub fn new(reqs_ratio: f64, win_rate_ratio: f64) -> Self {
        let sane = |r: f64| if r.is_finite() && r > 0.0 { r } else { 1.0 };
        Self {
            reqs_ratio: sane(reqs_ratio),
            win_rate_ratio: sane(win_rate_ratio),
        }
    }
}

fn remaining_budget(budget: Money, ledger: &SpendLedger, completed: usize) -> Money {
    budget.saturating_sub(ledger.spent_before(completed))
}

fn check_next(clock: &SlotClock, completed: usize) -> Result<()> {
    if completed >= clock.num_slots() {
        return Err(Error::NoNextSlot {
            completed,
            num_slots: clock.num_slots(),
        });
    }
    Ok(())
}

/// Budget for slot `completed` (0-based) after `completed` slots have closed:
/// the remaining budget times the slot's share of the remaining time.
///
/// The last slot always receives the whole remainder, so flooring never loses
/// micros over a day.
pub fn uniform_next_budget(
    budget: Money,
    ledger: &SpendLedger,
    clock: &SlotClock,
    completed: usize,
) -> Result<Money> {
    check_next(clock, completed)?;
    let remaining = remaining_budget(budget, ledger, completed);
    Ok(uniform_share(remaining, clock, completed))
}

fn uniform_share(remaining: Money, clock: &SlotClock, slot: usize) -> Money {
    let rest = clock.remaining_length(slot) as u128;
    let share = remaining.micros() as u128 * clock.length(slot) as u128 / rest;
    Money::from_micros(share as u64)
}

/// Budget for slot `completed` weighted by the performance distribution.
///
/// Falls back to [`uniform_next_budget`] when no performance mass remains.
pub fn performance_next_budget(
    budget: Money,
    ledger: &SpendLedger,
    clock: &SlotClock,
    pdf: &PerformancePdf,
    completed: usize,
) -> Result<Money> {
    check_next(clock, completed)?;
    if pdf.len() != clock.num_slots() {
        return Err(Error::LengthMismatch {
            left: pdf.len(),
            right: clock.num_slots(),
        });
    }
    let remaining = remaining_budget(budget, ledger, completed);
    Ok(performance_share(remaining, clock, pdf, completed))
}

fn performance_share(remaining: Money, clock: &SlotClock, pdf: &PerformancePdf, slot: usize) -> Money {
    let weight = |m: usize| pdf.get(m) * clock.length(m) as f64;
    let mass: f64 = (slot..clock.num_slots()).map(weight).sum();
    if mass <= 0.0 {
        return uniform_share(remaining, clock, slot);
    }
    if slot + 1 == clock.num_slots() {
        return remaining;
    }
    let share = floor_micros(remaining.micros() as f64 * (weight(slot) / mass));
    share.min(remaining)
}

/// `w * perf + (1 - w) * uniform`, floored.
pub fn blended_next_budget(uniform_b: Money, perf_b: Money, weight: f64) -> Money {
    let w = weight.clamp(0.0, 1.0);
    if w == 0.0 {
        return uniform_b;
    }
    if w == 1.0 {
        return perf_b;
    }
    floor_micros(w * perf_b.micros() as f64 + (1.0 - w) * uniform_b.micros() as f64)
}

/// Budget for slot `completed` under `strategy`.
pub fn next_budget(
    strategy: PacingStrategy,
    budget: Money,
    ledger: &SpendLedger,
    clock: &SlotClock,
    pdf: &PerformancePdf,
    completed: usize,
) -> Result<Money> {
    match strategy {
        PacingStrategy::Uniform => uniform_next_budget(budget, ledger, clock, completed),
        PacingStrategy::Performance => performance_next_budget(budget, ledger, clock, pdf, completed),
        PacingStrategy::Blended { weight } => {
            let u = uniform_next_budget(budget, ledger, clock, completed)?;
            let p = performance_next_budget(budget, ledger, clock, pdf, completed)?;
            Ok(blended_next_budget(u, p, weight))
        }
    }
}

/// The schedule for slots `from..T` if every future slot spends exactly its
/// plan. Sums to `remaining` exactly.
pub fn plan_remaining(
    strategy: PacingStrategy,
    remaining: Money,
    clock: &SlotClock,
    pdf: &PerformancePdf,
    from: usize,
) -> Vec<Money> {
    let mut left = remaining;
    (from..clock.num_slots())
        .map(|slot| {
            let b = match strategy {
                PacingStrategy::Uniform => uniform_share(left, clock, slot),
                PacingStrategy::Performance => performance_share(left, clock, pdf, slot),
                PacingStrategy::Blended { weight } => {
                    if slot + 1 == clock.num_slots() {
                        left
                    } else {
                        blended_next_budget(
                            uniform_share(left, clock, slot),
                            performance_share(left, clock, pdf, slot),
                            weight,
                        )
                    }
                }
            };
            left = left.saturating_sub(b);
            b
        })
        .collect()
}

/// One step of the multiplicative rate recursion.
///
/// `rate' = rate * (b_next / s_prev) * reqs_ratio * win_rate_ratio`, clamped to
/// `[min_pacing_rate, 1]`. With zero realised spend the ratio is undefined and
/// the rate grows by `growth_factor` instead.
pub fn update_pacing_rate(
    prev: PacingRate,
    b_next: Money,
    s_prev: Money,
    forecast: RatioForecast,
    cfg: &CampaignConfig,
) -> PacingRate {
    if s_prev.is_zero() {
        return PacingRate::new(prev.value() * cfg.growth_factor, cfg.min_pacing_rate);
    }
    let spend_ratio = b_next.micros() as f64 / s_prev.micros() as f64;
    PacingRate::new(
        prev.value() * spend_ratio * forecast.reqs_ratio * forecast.win_rate_ratio,
        cfg.min_pacing_rate,
    )
}

/// Rate for the first slot of a day.
///
/// `b / (reqs * cost_per_impression * win_rate)` when all three estimates are
/// known, [`DEFAULT_INITIAL_RATE`] otherwise.
pub fn initial_pacing_rate(
    first_budget: Money,
    expected_requests: Option<f64>,
    cost_per_impression: Option<Money>,
    expected_win_rate: Option<f64>,
    min_rate: f64,
) -> PacingRate {
    match (expected_requests, cost_per_impression, expected_win_rate) {
        (Some(r), Some(c), Some(w)) if r > 0.0 && !c.is_zero() && w > 0.0 => PacingRate::new(
            (first_budget.micros() as f64 / (r * c.micros() as f64 * w)).min(1.0),
            min_rate,
        ),
        _ => PacingRate::new(DEFAULT_INITIAL_RATE, min_rate),
    }
}

/// Forecast of the volume and win-rate ratios between the slot that just
/// closed (`next_slot - 1` of `day`) and `next_slot`.
///
/// With at least one earlier day in `history`, both sides of each ratio come
/// from the same slots averaged over those days. Otherwise the prediction for
/// `next_slot` is the trailing three-slot average of the current day. Missing
/// data yields a neutral ratio.
pub fn forecast_ratios(history: &[SlotSummary], day: u32, next_slot: usize) -> RatioForecast {
    if next_slot == 0 {
        return RatioForecast::NEUTRAL;
    }
    let current = next_slot - 1;
    let prior = |slot: usize| history.iter().filter(move |s| s.day < day && s.slot == slot);
    let mean = |v: Vec<f64>| {
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    };
    let ratio = |num: Option<f64>, den: Option<f64>| match (num, den) {
        (Some(n), Some(d)) if n > 0.0 && d > 0.0 => n / d,
        _ => 1.0,
    };

    let prior_reqs = |slot| mean(prior(slot).map(|s| s.counts.requests as f64).collect());
    let prior_win = |slot| {
        mean(
            prior(slot)
                .filter(|s| !s.no_data)
                .map(|s| s.win_rate)
                .collect(),
        )
    };
    let has_prior = prior(current).next().is_some() && prior(next_slot).next().is_some();
    if has_prior {
        return RatioForecast::new(
            ratio(prior_reqs(current), prior_reqs(next_slot)),
            ratio(prior_win(current), prior_win(next_slot)),
        );
    }

    let today: Vec<&SlotSummary> = history
        .iter()
        .filter(|s| s.day == day && s.slot <= current && s.slot + 3 > current)
        .collect();
    let Some(last) = today.iter().find(|s| s.slot == current) else {
        return RatioForecast::NEUTRAL;
    };
    let reqs_ratio = ratio(
        Some(last.counts.requests as f64),
        mean(today.iter().map(|s| s.counts.requests as f64).collect()),
    );
    let win_ratio = if last.no_data {
        1.0
    } else {
        ratio(
            Some(last.win_rate),
            mean(today.iter().filter(|s| !s.no_data).map(|s| s.win_rate).collect()),
        )
    };
    RatioForecast::new(reqs_ratio, win_ratio)
}
