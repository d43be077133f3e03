use std::path::Path;

use crate::bidder::{Campaign, CampaignSetup};
use crate::domain::EventKind;
use crate::error::Result;
use crate::exchange_sim::{Participant, World, WorldConfig};

use super::config::ExperimentConfig;
use super::report::{quantize6, Metrics, RunReport, SlotRow};

/// Runs one campaign alone in a fresh world for `days` days.
///
/// Events still in flight at the end are counted against their impression's
/// slot, so the series holds every event the campaign's impressions caused.
pub fn run_campaign(
    world: &WorldConfig,
    seed: u64,
    days: u32,
    setup: CampaignSetup,
    config_hash: &str,
) -> Result<RunReport> {
    let mut sim = World::new(world.clone(), seed)?;
    let name = setup.name.clone();
    let budget = setup.config.daily_budget;
    let mut campaign = Campaign::new(setup, world.clock()?)?;
    let kind = campaign.event_kind();
    let t = world.num_slots;
    let mut series = Vec::with_capacity(t * days as usize);
    for day in 0..days {
        for slot in 0..t {
            let step = sim.step_slot(&mut campaign)?;
            let s = &step.summary;
            let (clicks, conversions) = match kind {
                EventKind::Click => (step.attributed_events, 0),
                EventKind::Conversion => (0, step.attributed_events),
            };
            series.push(SlotRow {
                slot: day as usize * t + slot,
                ideal_spend: s.planned,
                actual_spend: s.spend,
                pacing_rate: quantize6(campaign.pacing_rate().value()),
                win_rate: quantize6(s.win_rate),
                requests: s.counts.requests,
                bids: s.counts.bids,
                impressions: s.counts.impressions,
                clicks,
                conversions,
            });
        }
    }
    sim.drain_pending();
    let metrics = Metrics::from_series(&series, budget)?;
    Ok(RunReport {
        name,
        seed,
        config_hash: config_hash.to_string(),
        daily_budget: budget,
        num_slots: t,
        days,
        metrics,
        guard_trips: campaign.guard_trips().to_vec(),
        series,
    })
}

/// Runs every campaign of the config, each in its own copy of the same world.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunReport>> {
    run_experiment_with_seed(config, config.seed)
}

pub fn run_experiment_with_seed(config: &ExperimentConfig, seed: u64) -> Result<Vec<RunReport>> {
    let (world, setups) = config.build()?;
    let mut hashed = config.clone();
    hashed.seed = seed;
    let hash = hashed.hash();
    setups
        .into_iter()
        .map(|s| run_campaign(&world, seed, config.days, s, &hash))
        .collect()
}

pub fn write_reports(reports: &[RunReport], dir: &Path) -> Result<()> {
    reports.iter().try_for_each(|r| r.write_to_dir(dir))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CampaignConfig, FeaturePath, Money};
    use crate::exchange_sim::{CompetitorModel, DelayModel, TrafficProfile};
    use crate::pacing::PerformancePdf;

    fn world() -> WorldConfig {
        WorldConfig {
            num_slots: 12,
            slot_seconds: 900,
            traffic: TrafficProfile::flat(12, 2000, 0.02),
            competitor: CompetitorModel::constant(12, Money::from_micros(1000), 0.4),
            delay: DelayModel { mean_slots: 3.0 },
            advertiser: FeaturePath::ROOT,
        }
    }

    fn setup(budget_units: f64) -> CampaignSetup {
        let cfg = CampaignConfig::flat(
            Money::from_units(budget_units).unwrap(),
            Money::from_micros(2000),
            12,
        );
        let mut s = CampaignSetup::new("c", cfg);
        s.pdf = crate::bidder::PdfSource::Fixed(PerformancePdf::uniform(12));
        s
    }

    #[test]
    fn series_has_one_row_per_slot_and_metrics_recompute() {
        let r = run_campaign(&world(), 1, 2, setup(6.0), "h").unwrap();
        assert_eq!(r.series.len(), 24);
        assert_eq!(r.metrics, Metrics::from_series(&r.series, r.daily_budget).unwrap());
        assert!(r.metrics.clicks > 0);
    }

    #[test]
    fn zero_budget_gives_zero_series() {
        let r = run_campaign(&world(), 1, 1, setup(0.0), "h").unwrap();
        assert!(r.series.iter().all(|row| row.actual_spend.is_zero()));
    }

    #[test]
    fn deterministic() {
        let a = run_campaign(&world(), 5, 1, setup(3.0), "h").unwrap();
        let b = run_campaign(&world(), 5, 1, setup(3.0), "h").unwrap();
        assert_eq!(a, b);
    }
}
