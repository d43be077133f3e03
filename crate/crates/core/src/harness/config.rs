//! Experiment configuration file (TOML).
//!
//! ```toml
//! seed = 7
//! days = 1
//!
//! [world]
//! slots = 96
//! base_volume = 10000
//! volume = { kind = "flat" }
//! rates = { kind = "diurnal", mean = 0.01, swing = 0.6667, peak_slot = 60 }
//!
//! [world.competitor]
//! median = 0.001     # currency units
//! sigma = 0.4
//!
//! [[campaign]]
//! name = "uniform"
//! kind = "flat"
//! daily_budget = 100.0
//! fixed_bid = 0.002
//! ```
//!
//! Money is written in currency units and stored as micros. Unknown keys are
//! rejected everywhere.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bidder::{CampaignSetup, PdfSource, SelectionMode, DEFAULT_LOOKBACK_DAYS};
use crate::domain::{
    CampaignConfig, FeaturePath, GoalKind, Money, PacingStrategy, RegionThresholds,
    DEFAULT_SLOTS, DEFAULT_SLOT_SECONDS,
};
use crate::error::{Error, Result};
use crate::estimator::EstimatorKind;
use crate::exchange_sim::{CompetitorModel, DelayModel, TrafficProfile, WorldConfig};
use crate::flat_selection::DEFAULT_CRITICAL_VALUE;
use crate::guards::ColdStartPolicy;
use crate::pacing::PerformancePdf;

fn money(field: &str, units: f64) -> Result<Money> {
    Money::from_units(units).map_err(|e| Error::Config(format!("{field}: {e}")))
}

/// A per-slot curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    Flat {
        #[serde(default = "one")]
        value: f64,
    },
    /// `mean * (1 + swing * cos(2π (t - peak_slot) / T))`.
    Diurnal {
        mean: f64,
        swing: f64,
        peak_slot: usize,
    },
    Values {
        values: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl Profile {
    pub fn curve(&self, num_slots: usize) -> Result<Vec<f64>> {
        match self {
            Profile::Flat { value } => Ok(vec![*value; num_slots]),
            Profile::Diurnal {
                mean,
                swing,
                peak_slot,
            } => Ok((0..num_slots)
                .map(|t| {
                    let phase = TAU * (t as f64 - *peak_slot as f64) / num_slots as f64;
                    mean * (1.0 + swing * phase.cos())
                })
                .collect()),
            Profile::Values { values } if values.len() == num_slots => Ok(values.clone()),
            Profile::Values { values } => Err(Error::Config(format!(
                "profile has {} values for {num_slots} slots",
                values.len()
            ))),
        }
    }
}

/// Multiplies one slot's volume, e.g. to inject a traffic spike.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Burst {
    pub slot: usize,
    pub factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompetitorSection {
    /// Median highest competing bid, currency units.
    pub median: f64,
    pub sigma: f64,
    /// Per-slot multipliers of the median.
    #[serde(default = "flat_profile")]
    pub median_profile: Profile,
    #[serde(default)]
    pub floor: f64,
}

fn flat_profile() -> Profile {
    Profile::Flat { value: 1.0 }
}

fn default_slots() -> usize {
    DEFAULT_SLOTS
}

fn default_slot_seconds() -> u64 {
    DEFAULT_SLOT_SECONDS
}

fn default_delay() -> f64 {
    DelayModel::default().mean_slots
}

fn default_advertiser() -> String {
    "1".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSection {
    #[serde(default = "default_slots")]
    pub slots: usize,
    #[serde(default = "default_slot_seconds")]
    pub slot_seconds: u64,
    pub base_volume: u64,
    #[serde(default = "flat_profile")]
    pub volume: Profile,
    #[serde(default)]
    pub bursts: Vec<Burst>,
    /// Mean true response probability per slot.
    pub rates: Profile,
    #[serde(default = "default_dispersion")]
    pub rate_dispersion: f64,
    #[serde(default = "default_groups")]
    pub publisher_groups: u32,
    #[serde(default = "default_sites")]
    pub sites_per_group: u32,
    #[serde(default = "default_pub_sigma")]
    pub publisher_sigma: f64,
    #[serde(default = "default_segments")]
    pub user_segments: u32,
    #[serde(default = "default_buckets")]
    pub user_buckets: u32,
    #[serde(default = "default_user_sigma")]
    pub user_sigma: f64,
    pub competitor: CompetitorSection,
    #[serde(default = "default_delay")]
    pub delay_mean_slots: f64,
    #[serde(default = "default_advertiser")]
    pub advertiser: String,
}

fn default_dispersion() -> f64 {
    0.5
}
fn default_groups() -> u32 {
    20
}
fn default_sites() -> u32 {
    50
}
fn default_pub_sigma() -> f64 {
    0.5
}
fn default_segments() -> u32 {
    10
}
fn default_buckets() -> u32 {
    20
}
fn default_user_sigma() -> f64 {
    0.3
}

impl WorldSection {
    pub fn build(&self) -> Result<WorldConfig> {
        let t = self.slots;
        let mut multipliers = self.volume.curve(t)?;
        for b in &self.bursts {
            let m = multipliers
                .get_mut(b.slot)
                .ok_or_else(|| Error::Config(format!("burst slot {} out of range", b.slot)))?;
            *m *= b.factor;
        }
        let median = money("world.competitor.median", self.competitor.median)?;
        let medians = self
            .competitor
            .median_profile
            .curve(t)?
            .into_iter()
            .map(|f| median.mul_floor(f).max(Money::from_micros(1)))
            .collect();
        let cfg = WorldConfig {
            num_slots: t,
            slot_seconds: self.slot_seconds,
            traffic: TrafficProfile {
                base_volume: self.base_volume,
                multipliers,
                rate_means: self.rates.curve(t)?,
                dispersion: self.rate_dispersion,
                publisher_groups: self.publisher_groups,
                sites_per_group: self.sites_per_group,
                publisher_sigma: self.publisher_sigma,
                user_segments: self.user_segments,
                user_buckets: self.user_buckets,
                user_sigma: self.user_sigma,
            },
            competitor: CompetitorModel {
                medians,
                sigmas: vec![self.competitor.sigma; t],
                floor: money("world.competitor.floor", self.competitor.floor)?,
            },
            delay: DelayModel {
                mean_slots: self.delay_mean_slots,
            },
            advertiser: self
                .advertiser
                .parse::<FeaturePath>()
                .map_err(|e| Error::Config(format!("world.advertiser: {e}")))?,
        };
        cfg.validate()
            .map_err(|e| Error::Config(format!("world: {e}")))?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindSpec {
    Flat,
    Dynamic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategySpec {
    Uniform,
    Performance,
    Blended,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionSpec {
    Paced,
    Threshold,
}

/// `"uniform"`, `"synthetic-bimodal"`, `"learned"`, or explicit weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PdfSpec {
    Named(String),
    Weights(Vec<f64>),
}

impl Default for PdfSpec {
    fn default() -> Self {
        PdfSpec::Named("synthetic-bimodal".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColdStartSection {
    pub epsilon: f64,
    pub exploration_bid: f64,
    #[serde(default)]
    pub recommended: Vec<String>,
    pub mature_impressions: Option<u64>,
    pub mature_events: Option<u64>,
    pub boost: Option<f64>,
}

fn default_true() -> bool {
    true
}

fn default_goal() -> GoalKind {
    GoalKind::Ctr
}

fn default_estimator() -> EstimatorKind {
    EstimatorKind::NoisyOracle {
        sigma: 0.0,
        bias: 1.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSection {
    pub name: String,
    pub kind: KindSpec,
    pub daily_budget: f64,
    pub fixed_bid: Option<f64>,
    pub goal_value: Option<f64>,
    #[serde(default = "default_goal")]
    pub goal: GoalKind,
    #[serde(default = "default_strategy")]
    pub strategy: StrategySpec,
    pub blend_weight: Option<f64>,
    #[serde(default)]
    pub performance_pdf: PdfSpec,
    #[serde(default = "default_selection")]
    pub selection: SelectionSpec,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    #[serde(default = "default_true")]
    pub guards: bool,
    pub bid_cap: Option<f64>,
    pub ecpm_cap: Option<f64>,
    pub interval_tolerance: Option<f64>,
    pub slot_tolerances: Option<Vec<f64>>,
    pub daily_tolerance: Option<f64>,
    pub min_pacing_rate: Option<f64>,
    pub growth_factor: Option<f64>,
    pub shading_percentile: Option<f64>,
    pub safe_threshold: Option<f64>,
    pub danger_threshold: Option<f64>,
    pub lookback_days: Option<u32>,
    pub critical_value: Option<f64>,
    #[serde(default)]
    pub targeting: Vec<String>,
    pub cold_start: Option<ColdStartSection>,
}

fn default_strategy() -> StrategySpec {
    StrategySpec::Uniform
}

fn default_selection() -> SelectionSpec {
    SelectionSpec::Paced
}

fn paths(field: &str, raw: &[String]) -> Result<Vec<FeaturePath>> {
    raw.iter()
        .map(|p| {
            p.parse::<FeaturePath>()
                .map_err(|e| Error::Config(format!("{field}: {e}")))
        })
        .collect()
}

impl CampaignSection {
    pub fn build(&self, num_slots: usize) -> Result<CampaignSetup> {
        let f = |k: &str| format!("campaign {}: {k}", self.name);
        let budget = money(&f("daily_budget"), self.daily_budget)?;
        let mut cfg = match self.kind {
            KindSpec::Flat => {
                let bid = self
                    .fixed_bid
                    .ok_or_else(|| Error::Config(f("flat campaigns need fixed_bid")))?;
                CampaignConfig::flat(budget, money(&f("fixed_bid"), bid)?, num_slots)
            }
            KindSpec::Dynamic => {
                let g = self
                    .goal_value
                    .ok_or_else(|| Error::Config(f("dynamic campaigns need goal_value")))?;
                CampaignConfig::dynamic(budget, money(&f("goal_value"), g)?, num_slots)
            }
        };
        cfg.goal = self.goal;
        cfg.strategy = match self.strategy {
            StrategySpec::Uniform => PacingStrategy::Uniform,
            StrategySpec::Performance => PacingStrategy::Performance,
            StrategySpec::Blended => PacingStrategy::Blended {
                weight: self
                    .blend_weight
                    .ok_or_else(|| Error::Config(f("blended strategy needs blend_weight")))?,
            },
        };
        if let Some(c) = self.bid_cap {
            cfg.bid_cap = money(&f("bid_cap"), c)?;
        }
        cfg.ecpm_cap = self.ecpm_cap.map(|c| money(&f("ecpm_cap"), c)).transpose()?;
        if let Some(d) = self.interval_tolerance {
            cfg.interval_tolerance = money(&f("interval_tolerance"), d)?;
        }
        cfg.slot_tolerances = self
            .slot_tolerances
            .as_ref()
            .map(|v| v.iter().map(|&d| money(&f("slot_tolerances"), d)).collect())
            .transpose()?;
        if let Some(e) = self.daily_tolerance {
            cfg.daily_tolerance = money(&f("daily_tolerance"), e)?;
        }
        if let Some(r) = self.min_pacing_rate {
            cfg.min_pacing_rate = r;
        }
        if let Some(g) = self.growth_factor {
            cfg.growth_factor = g;
        }
        if let Some(p) = self.shading_percentile {
            cfg.shading_percentile = p;
        }
        cfg.regions = RegionThresholds {
            safe: self.safe_threshold.unwrap_or(cfg.regions.safe),
            danger: self.danger_threshold.unwrap_or(cfg.regions.danger),
        };

        let pdf = match &self.performance_pdf {
            PdfSpec::Named(n) => match n.as_str() {
                "uniform" => PdfSource::Fixed(PerformancePdf::uniform(num_slots)),
                "synthetic-bimodal" => PdfSource::Fixed(PerformancePdf::synthetic_bimodal(num_slots)),
                "learned" => PdfSource::Learned,
                other => {
                    return Err(Error::Config(f(&format!("unknown performance_pdf {other:?}"))))
                }
            },
            PdfSpec::Weights(w) => PdfSource::Fixed(
                PerformancePdf::new(w.clone())
                    .map_err(|e| Error::Config(f(&format!("performance_pdf: {e}"))))?,
            ),
        };

        let cold_start = match &self.cold_start {
            None => None,
            Some(cs) => {
                let mut p = ColdStartPolicy::new(
                    cs.epsilon,
                    money(&f("cold_start.exploration_bid"), cs.exploration_bid)?,
                );
                if !(0.0..=1.0).contains(&cs.epsilon) {
                    return Err(Error::Config(f("cold_start.epsilon must lie in [0, 1]")));
                }
                p.recommended = paths(&f("cold_start.recommended"), &cs.recommended)?;
                if let Some(n) = cs.mature_impressions {
                    p.mature_impressions = n;
                }
                if let Some(n) = cs.mature_events {
                    p.mature_events = n;
                }
                if let Some(b) = cs.boost {
                    p.recommended_boost = b;
                }
                Some(p)
            }
        };

        let setup = CampaignSetup {
            name: self.name.clone(),
            config: cfg,
            selection: match self.selection {
                SelectionSpec::Paced => SelectionMode::Paced,
                SelectionSpec::Threshold => SelectionMode::Threshold,
            },
            estimator: self.estimator,
            pdf,
            guards: self.guards,
            cold_start,
            lookback_days: self.lookback_days.unwrap_or(DEFAULT_LOOKBACK_DAYS),
            critical_value: self.critical_value.unwrap_or(DEFAULT_CRITICAL_VALUE),
            targeting: paths(&f("targeting"), &self.targeting)?,
        };
        setup
            .validate(num_slots)
            .map_err(|e| Error::Config(f(&e.to_string())))?;
        Ok(setup)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

fn default_days() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_days")]
    pub days: u32,
    pub world: WorldSection,
    pub campaign: Vec<CampaignSection>,
    pub output: Option<OutputSection>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Checks everything [`build`](Self::build) would.
    pub fn validate(&self) -> Result<()> {
        self.build().map(|_| ())
    }

    /// The world and one setup per campaign.
    pub fn build(&self) -> Result<(WorldConfig, Vec<CampaignSetup>)> {
        if self.days == 0 {
            return Err(Error::Config("days must be >= 1".into()));
        }
        if self.campaign.is_empty() {
            return Err(Error::Config("at least one [[campaign]] is required".into()));
        }
        let mut names: Vec<&str> = self.campaign.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("campaign names must be unique".into()));
        }
        if names
            .iter()
            .any(|n| n.is_empty() || n.contains(['/', '\\']) || n.starts_with('.'))
        {
            return Err(Error::Config("campaign names must be plain file stems".into()));
        }
        let world = self.world.build()?;
        let setups = self
            .campaign
            .iter()
            .map(|c| c.build(world.num_slots))
            .collect::<Result<_>>()?;
        Ok((world, setups))
    }

    /// Hex SHA-256 of the canonical JSON form, independent of formatting and
    /// comments in the source file.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}
