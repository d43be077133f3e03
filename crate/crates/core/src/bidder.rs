//! One campaign's control loop.
//!
//! [`Campaign`] plans each slot's budget, updates the pacing rate, and turns
//! every request into a bid or a skip: guards first, then cold start, then
//! flat-CPM selection or dynamic-CPM pricing. It implements
//! [`Participant`](crate::exchange_sim::Participant) so the simulator can
//! drive it slot by slot.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dcpm_bidding::{
    base_bid, boost_factor, classify_region, compute_bid, CostAverage, PacingRegion, ShadingStats,
};
use crate::domain::{
    AuctionOutcome, CampaignConfig, CampaignKind, EventKind, FeaturePath, Money, SlotClock,
    SlotSummary, SpendLedger,
};
use crate::error::{Error, Result};
use crate::estimator::{noisy_oracle_with_draw, EstimatorKind, TreeCounts, TreeSet, RATE_FLOOR};
use crate::exchange_sim::{FeedbackEvent, Participant, SimRequest};
use crate::flat_selection::{
    decide_flat, required_requests, solve_threshold, ConfidenceBand, FlatDecision,
    QualityHistogram, ThresholdStats, DEFAULT_CRITICAL_VALUE,
};
use crate::guards::{
    cold_start_decide_with_coin, ColdStartDecision, ColdStartPolicy, GuardAction, GuardInputs,
    GuardState, GuardTrip,
};
use crate::harness::learn_performance_pdf;
use crate::pacing::{
    forecast_ratios, initial_pacing_rate, next_budget, update_pacing_rate, PacingRate,
    PerformancePdf,
};

pub const DEFAULT_LOOKBACK_DAYS: u32 = 7;

/// How a flat-CPM campaign picks the requests it bids on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    /// Bid on each eligible request with probability equal to the pacing rate.
    Paced,
    /// Histogram threshold with a confidence band; the pacing rate only
    /// applies inside the band.
    Threshold,
    /// Bid with a fixed probability per global slot, ignoring quality.
    RandomMatched(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum PdfSource {
    Fixed(PerformancePdf),
    /// Re-learned every day from earlier days' spend and events; uniform on
    /// the first day.
    Learned,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignSetup {
    pub name: String,
    pub config: CampaignConfig,
    pub selection: SelectionMode,
    pub estimator: EstimatorKind,
    pub pdf: PdfSource,
    pub guards: bool,
    pub cold_start: Option<ColdStartPolicy>,
    /// `d` for the threshold band and the histogram history.
    pub lookback_days: u32,
    pub critical_value: f64,
    /// Publisher or user prefixes the campaign may bid on; empty means all.
    pub targeting: Vec<FeaturePath>,
}

impl CampaignSetup {
    pub fn new(name: impl Into<String>, config: CampaignConfig) -> Self {
        Self {
            name: name.into(),
            config,
            selection: SelectionMode::Paced,
            estimator: EstimatorKind::NoisyOracle {
                sigma: 0.0,
                bias: 1.0,
            },
            pdf: PdfSource::Fixed(PerformancePdf::uniform(1)),
            guards: true,
            cold_start: None,
            lookback_days: DEFAULT_LOOKBACK_DAYS,
            critical_value: DEFAULT_CRITICAL_VALUE,
            targeting: Vec::new(),
        }
    }

    pub fn validate(&self, num_slots: usize) -> Result<()> {
        self.config.validate(num_slots)?;
        if let PdfSource::Fixed(pdf) = &self.pdf {
            if pdf.len() != num_slots {
                return Err(Error::LengthMismatch {
                    left: pdf.len(),
                    right: num_slots,
                });
            }
        }
        match (&self.selection, self.config.kind) {
            (SelectionMode::Threshold | SelectionMode::RandomMatched(_), CampaignKind::DynamicCpm { .. }) => {
                return Err(Error::Config(format!(
                    "campaign {}: only flat-CPM campaigns support threshold or random selection",
                    self.name
                )))
            }
            (SelectionMode::RandomMatched(p), _) if p.iter().any(|x| !(0.0..=1.0).contains(x)) => {
                return Err(Error::Config(format!(
                    "campaign {}: random selection probabilities must lie in [0, 1]",
                    self.name
                )))
            }
            _ => {}
        }
        if let Some(cs) = &self.cold_start {
            if !(0.0..=1.0).contains(&cs.epsilon) {
                return Err(Error::Config("cold-start epsilon must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }
}

/// State for flat-CPM threshold selection.
struct ThresholdState {
    today: Vec<QualityHistogram>,
    /// Finished days, most recent last.
    past: VecDeque<Vec<QualityHistogram>>,
    stats: Vec<ThresholdStats>,
    band: Option<ConfidenceBand>,
}

pub struct Campaign {
    setup: CampaignSetup,
    clock: SlotClock,
    ledger: SpendLedger,
    history: Vec<SlotSummary>,
    pdf: PerformancePdf,
    rate: PacingRate,
    day: u32,
    slot: usize,
    in_slot: bool,
    guards: GuardState,
    trips: Vec<GuardTrip>,
    lifetime_cost: Money,
    lifetime_impressions: u64,
    lifetime_events: u64,
    trees: Option<TreeSet>,
    tree_counts: TreeCounts,
    threshold: Option<ThresholdState>,
    shading: ShadingStats,
    cost_avg: CostAverage,
    targeting_limited: bool,
    region: PacingRegion,
    theta_star: f64,
    rho_star: f64,
    spend_by_slot: Vec<Money>,
    events_by_slot: Vec<u64>,
}

impl Campaign {
    pub fn new(setup: CampaignSetup, clock: SlotClock) -> Result<Self> {
        let t = clock.num_slots();
        setup.validate(t)?;
        let pdf = match &setup.pdf {
            PdfSource::Fixed(p) => p.clone(),
            PdfSource::Learned => PerformancePdf::uniform(t),
        };
        let threshold = (setup.selection == SelectionMode::Threshold).then(|| ThresholdState {
            today: vec![QualityHistogram::new(); t],
            past: VecDeque::new(),
            stats: vec![ThresholdStats::new(setup.lookback_days, setup.critical_value); t],
            band: None,
        });
        let min_rate = setup.config.min_pacing_rate;
        let percentile = setup.config.shading_percentile;
        Ok(Self {
            ledger: SpendLedger::new(0, t),
            clock: clock.restarted(),
            history: Vec::new(),
            pdf,
            rate: PacingRate::new(1.0, min_rate),
            day: 0,
            slot: 0,
            in_slot: false,
            guards: GuardState::new(),
            trips: Vec::new(),
            lifetime_cost: Money::ZERO,
            lifetime_impressions: 0,
            lifetime_events: 0,
            trees: None,
            tree_counts: TreeCounts::default(),
            threshold,
            shading: ShadingStats::new(percentile),
            cost_avg: CostAverage::new(t),
            targeting_limited: false,
            region: PacingRegion::Critical,
            theta_star: 1.0,
            rho_star: 1.0,
            spend_by_slot: vec![Money::ZERO; t],
            events_by_slot: vec![0; t],
            setup,
        })
    }

    pub fn setup(&self) -> &CampaignSetup {
        &self.setup
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.setup.config
    }

    pub fn ledger(&self) -> &SpendLedger {
        &self.ledger
    }

    pub fn history(&self) -> &[SlotSummary] {
        &self.history
    }

    /// Pacing rate in effect for the open (or last) slot.
    pub fn pacing_rate(&self) -> PacingRate {
        self.rate
    }

    pub fn performance_pdf(&self) -> &PerformancePdf {
        &self.pdf
    }

    pub fn region(&self) -> PacingRegion {
        self.region
    }

    pub fn theta_star(&self) -> f64 {
        self.theta_star
    }

    pub fn rho_star(&self) -> f64 {
        self.rho_star
    }

    pub fn shading(&self) -> &ShadingStats {
        &self.shading
    }

    pub fn band(&self) -> Option<ConfidenceBand> {
        self.threshold.as_ref().and_then(|t| t.band)
    }

    pub fn guard_trips(&self) -> &[GuardTrip] {
        &self.trips
    }

    pub fn lifetime_impressions(&self) -> u64 {
        self.lifetime_impressions
    }

    pub fn lifetime_events(&self) -> u64 {
        self.lifetime_events
    }

    fn begin_day(&mut self, day: u32) {
        let t = self.clock.num_slots();
        self.day = day;
        self.ledger = SpendLedger::new(day, t);
        self.clock = self.clock.restarted();
        self.guards.roll_day();
        if day > 0 {
            if let PdfSource::Learned = self.setup.pdf {
                self.pdf = learn_performance_pdf(&self.spend_by_slot, &self.events_by_slot);
            }
            if let EstimatorKind::Hierarchical { prior_strength } = self.setup.estimator {
                self.trees = Some(self.tree_counts.build(prior_strength));
            }
        }
    }

    fn prior_days(&self, slot: usize) -> impl Iterator<Item = &SlotSummary> + '_ {
        let day = self.day;
        self.history
            .iter()
            .filter(move |s| s.day < day && s.slot == slot)
    }

    fn expected_win_rate(&self, slot: usize) -> Option<f64> {
        let prior: Vec<f64> = self
            .prior_days(slot)
            .filter(|s| !s.no_data)
            .map(|s| s.win_rate)
            .collect();
        if !prior.is_empty() {
            return Some(prior.iter().sum::<f64>() / prior.len() as f64);
        }
        self.history
            .iter()
            .rev()
            .find(|s| !s.no_data)
            .map(|s| s.win_rate)
    }

    fn initial_rate(&self, planned: Money) -> PacingRate {
        let reqs: Vec<f64> = self.prior_days(0).map(|s| s.counts.requests as f64).collect();
        let expected_reqs = (!reqs.is_empty()).then(|| reqs.iter().sum::<f64>() / reqs.len() as f64);
        let cost = match self.setup.config.kind {
            CampaignKind::FlatCpm { .. } => self.cost_avg.value(),
            CampaignKind::DynamicCpm { .. } => None,
        };
        initial_pacing_rate(
            planned,
            expected_reqs,
            cost,
            self.expected_win_rate(0),
            self.setup.config.min_pacing_rate,
        )
    }

    fn plan_threshold(&mut self, slot: usize, planned: Money) -> Result<()> {
        let Some(ts) = self.threshold.as_ref() else {
            return Ok(());
        };
        let mut merged: Option<QualityHistogram> = None;
        let mut days = 0u64;
        for past in &ts.past {
            match &mut merged {
                None => merged = Some(past[slot].clone()),
                Some(m) => m.merge(&past[slot])?,
            }
            days += 1;
        }
        if merged.is_none() && slot > 0 {
            merged = Some(ts.today[slot - 1].clone());
            days = 1;
        }
        let cost = self
            .cost_avg
            .value()
            .or(self.setup.config.fixed_bid())
            .unwrap_or(Money::from_micros(1));
        let win_rate = self.expected_win_rate(slot).filter(|w| *w > 0.0).unwrap_or(1.0);
        let band = match merged {
            Some(hist) if hist.total() > 0 => {
                let sizing = required_requests(planned, cost, win_rate, self.rate)?;
                let tau = solve_threshold(&hist, sizing.bids.saturating_mul(days))?;
                let ts = self.threshold.as_mut().expect("threshold state");
                ts.stats[slot].update(tau);
                ts.stats[slot].confidence_bounds()
            }
            _ => None,
        };
        self.threshold.as_mut().expect("threshold state").band = band;
        Ok(())
    }

    fn predict(&self, req: &SimRequest) -> f64 {
        match self.setup.estimator {
            EstimatorKind::NoisyOracle { sigma, bias } => {
                noisy_oracle_with_draw(req.truth(), sigma, bias, req.estimator_z)
            }
            EstimatorKind::Hierarchical { .. } => self
                .trees
                .as_ref()
                .map_or(RATE_FLOOR, |t| t.predict_rate(&req.request)),
        }
    }

    fn eligible(&self, req: &SimRequest) -> bool {
        let t = &self.setup.targeting;
        t.is_empty()
            || t.iter()
                .any(|p| req.request.publisher.starts_with(p) || req.request.user.starts_with(p))
    }

    fn guard_action(&mut self) -> GuardAction {
        let cfg = &self.setup.config;
        let rec = self.ledger.slot(self.slot);
        let inputs = GuardInputs {
            day: self.day,
            slot: self.slot,
            day_spend: self.ledger.total_spend(),
            budget: cfg.daily_budget,
            slot_spend: rec.spend,
            planned: rec.planned,
            tolerance: cfg.interval_tolerance_for(self.slot),
            lifetime_cost: self.lifetime_cost,
            lifetime_impressions: self.lifetime_impressions,
            ecpm_cap: cfg.ecpm_cap,
        };
        let action = self.guards.evaluate(&inputs);
        self.trips.extend(self.guards.take_trips());
        action
    }

    /// Selection and pricing once guards and cold start have passed.
    fn model_bid(&mut self, req: &SimRequest, predicted: f64) -> Option<Money> {
        let cfg = &self.setup.config;
        match cfg.kind {
            CampaignKind::FlatCpm { fixed_bid } => match &self.setup.selection {
                SelectionMode::Paced => (req.coin < self.rate.value()).then_some(fixed_bid),
                SelectionMode::RandomMatched(p) => {
                    let g = self.day as usize * self.clock.num_slots() + self.slot;
                    let prob = p.get(g).copied().unwrap_or(0.0);
                    (req.coin < prob).then_some(fixed_bid)
                }
                SelectionMode::Threshold => match self.band() {
                    Some(band) => decide_flat(predicted, band, self.rate, fixed_bid).resolve(req.coin),
                    None => FlatDecision::Probabilistic {
                        price: fixed_bid,
                        probability: self.rate.value(),
                    }
                    .resolve(req.coin),
                },
            },
            CampaignKind::DynamicCpm { goal_value } => {
                if req.coin >= self.rate.value() {
                    return None;
                }
                let base = base_bid(predicted, goal_value);
                let bid = compute_bid(self.region, base, self.theta_star, self.rho_star, cfg.bid_cap);
                (!bid.is_zero()).then_some(bid)
            }
        }
    }

    /// The full per-request decision path: predict, guards, cold start, then
    /// selection or pricing. Returns the submitted bid.
    pub fn decide_request(&mut self, req: &SimRequest) -> Result<Option<Money>> {
        if !self.in_slot {
            return Err(Error::SlotNotOpen {
                slot: req.request.slot,
                open: self.slot,
            });
        }
        if !self.eligible(req) {
            return Ok(None);
        }
        self.ledger.record_request(self.slot)?;
        let predicted = self.predict(req);
        if let Some(ts) = self.threshold.as_mut() {
            ts.today[self.slot].add(predicted);
        }
        if self.setup.config.daily_budget.is_zero() {
            return Ok(None);
        }
        if self.setup.guards && self.guard_action() != GuardAction::Continue {
            return Ok(None);
        }
        if let Some(policy) = &self.setup.cold_start {
            let maturity = policy.maturity(self.lifetime_impressions, self.lifetime_events);
            match cold_start_decide_with_coin(policy, &req.request, maturity, req.coin) {
                ColdStartDecision::DeferToModel => {}
                ColdStartDecision::ExploreBid(price) => {
                    return Ok(Some(price.min(self.setup.config.bid_cap)).filter(|p| !p.is_zero()))
                }
                ColdStartDecision::Skip => return Ok(None),
            }
        }
        Ok(self.model_bid(req, predicted))
    }
}

impl Participant for Campaign {
    fn event_kind(&self) -> EventKind {
        self.setup.config.goal.event_kind()
    }

    fn begin_slot(&mut self, day: u32, slot: usize) -> Result<()> {
        if slot == 0 {
            self.begin_day(day);
        } else if day != self.day || slot != self.clock.current() {
            return Err(Error::SlotNotOpen {
                slot,
                open: self.clock.current(),
            });
        }
        self.slot = slot;
        let cfg = &self.setup.config;
        let planned = next_budget(
            cfg.strategy,
            cfg.daily_budget,
            &self.ledger,
            &self.clock,
            &self.pdf,
            slot,
        )?;
        self.rate = if slot == 0 {
            self.initial_rate(planned)
        } else {
            let prev = self.ledger.slot(slot - 1).spend;
            let forecast = forecast_ratios(&self.history, day, slot);
            update_pacing_rate(self.rate, planned, prev, forecast, cfg)
        };
        self.ledger.set_planned(slot, planned)?;
        self.guards.roll_slot();
        self.plan_threshold(slot, planned)?;

        if let CampaignKind::DynamicCpm { .. } = self.setup.config.kind {
            let cfg = &self.setup.config;
            self.region = classify_region(self.rate, &cfg.regions, self.targeting_limited).region;
            self.theta_star = self.shading.theta_star();
            self.rho_star = match self.cost_avg.value() {
                Some(c) => boost_factor(self.rate, cfg, c)?,
                None => 1.0,
            };
        }
        self.in_slot = true;
        Ok(())
    }

    fn decide(&mut self, request: &SimRequest) -> Result<Option<Money>> {
        self.decide_request(request)
    }

    fn record(&mut self, request: &SimRequest, outcome: &AuctionOutcome) -> Result<()> {
        self.ledger.record_auction(self.slot, outcome)?;
        if outcome.won {
            self.lifetime_cost += outcome.clearing_price;
            self.lifetime_impressions += 1;
            if matches!(self.setup.estimator, EstimatorKind::Hierarchical { .. }) {
                self.tree_counts.add_impression(&request.request);
            }
        }
        Ok(())
    }

    fn feedback(&mut self, event: &FeedbackEvent) -> Result<()> {
        self.ledger.record_event(self.slot, event.kind)?;
        self.lifetime_events += 1;
        let t = self.clock.num_slots() as u64;
        self.events_by_slot[(event.impression_slot % t) as usize] += 1;
        if matches!(self.setup.estimator, EstimatorKind::Hierarchical { .. }) {
            self.tree_counts.add_action(&event.request);
        }
        if let CampaignKind::DynamicCpm { .. } = self.setup.config.kind {
            self.shading.record_win(&event.outcome, true)?;
        }
        Ok(())
    }

    fn end_slot(&mut self) -> Result<SlotSummary> {
        let summary = self.ledger.close_slot(&mut self.clock)?;
        self.in_slot = false;
        self.cost_avg
            .observe_slot(summary.spend, summary.counts.impressions);
        self.spend_by_slot[summary.slot] += summary.spend;
        self.targeting_limited = self.rate.value() >= 1.0
            && (summary.spend.micros() as u128) * 2 < summary.planned.micros() as u128;
        if self.clock.is_finished() {
            if let Some(ts) = self.threshold.as_mut() {
                let done = std::mem::replace(&mut ts.today, vec![QualityHistogram::new(); self.clock.num_slots()]);
                ts.past.push_back(done);
                while ts.past.len() > self.setup.lookback_days as usize {
                    ts.past.pop_front();
                }
            }
        }
        self.history.push(summary.clone());
        Ok(summary)
    }
}
