use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bidder::CampaignSetup;
use crate::error::{Error, Result};
use crate::exchange_sim::WorldConfig;

use super::config::ExperimentConfig;
use super::report::{Metrics, RunReport};
use super::run::run_campaign;

/// Relative change of each metric against the baseline; positive is better.
///
/// Cost metrics use `(baseline - candidate) / baseline`, rate metrics
/// `(candidate - baseline) / baseline`. `None` when either side is undefined
/// or the baseline is zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Lifts {
    pub ecpm: Option<f64>,
    pub ecpc: Option<f64>,
    pub ecpa: Option<f64>,
    pub ctr: Option<f64>,
    pub ar: Option<f64>,
}

fn cost_lift(base: Option<f64>, cand: Option<f64>) -> Option<f64> {
    match (base, cand) {
        (Some(b), Some(c)) if b != 0.0 => Some((b - c) / b),
        _ => None,
    }
}

fn rate_lift(base: Option<f64>, cand: Option<f64>) -> Option<f64> {
    match (base, cand) {
        (Some(b), Some(c)) if b != 0.0 => Some((c - b) / b),
        _ => None,
    }
}

pub fn lifts(baseline: &Metrics, candidate: &Metrics) -> Lifts {
    Lifts {
        ecpm: cost_lift(baseline.ecpm, candidate.ecpm),
        ecpc: cost_lift(baseline.ecpc, candidate.ecpc),
        ecpa: cost_lift(baseline.ecpa, candidate.ecpa),
        ctr: rate_lift(baseline.ctr, candidate.ctr),
        ar: rate_lift(baseline.ar, candidate.ar),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    /// The first report is the baseline.
    pub reports: Vec<RunReport>,
    pub lifts: Vec<Lifts>,
}

impl Comparison {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "strategy",
            "total_spend_micros",
            "impressions",
            "clicks",
            "conversions",
            "ecpm",
            "ecpc",
            "ecpa",
            "ctr",
            "ar",
            "pacing_error_fraction",
            "lift_ecpm",
            "lift_ecpc",
            "lift_ecpa",
            "lift_ctr",
            "lift_ar",
        ])?;
        let f = |x: Option<f64>| x.map_or_else(String::new, |v| format!("{v:.6}"));
        for (r, l) in self.reports.iter().zip(&self.lifts) {
            let m = &r.metrics;
            w.write_record([
                r.name.clone(),
                m.total_spend.micros().to_string(),
                m.impressions.to_string(),
                m.clicks.to_string(),
                m.conversions.to_string(),
                f(m.ecpm),
                f(m.ecpc),
                f(m.ecpa),
                f(m.ctr),
                f(m.ar),
                format!("{:.6}", m.pacing_error_fraction),
                f(l.ecpm),
                f(l.ecpc),
                f(l.ecpa),
                f(l.ctr),
                f(l.ar),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Runs each setup over the same world and seed, so all of them see the same
/// requests and competing bids; the first setup is the baseline.
pub fn compare_setups(
    world: &WorldConfig,
    seed: u64,
    days: u32,
    setups: Vec<CampaignSetup>,
    config_hash: &str,
) -> Result<Comparison> {
    if setups.len() < 2 {
        return Err(Error::Config("a comparison needs at least two campaigns".into()));
    }
    let reports = setups
        .into_iter()
        .map(|s| run_campaign(world, seed, days, s, config_hash))
        .collect::<Result<Vec<_>>>()?;
    let lifts = reports
        .iter()
        .map(|r| lifts(&reports[0].metrics, &r.metrics))
        .collect();
    Ok(Comparison { reports, lifts })
}

/// Compares the campaigns of several configs that share one world, seed and
/// day count. Campaigns are taken in file order, then campaign order.
pub fn compare_strategies(configs: &[ExperimentConfig]) -> Result<Comparison> {
    let first = configs
        .first()
        .ok_or_else(|| Error::Config("no configs to compare".into()))?;
    for c in &configs[1..] {
        if c.world != first.world {
            return Err(Error::IncompatibleWorlds("world sections differ".into()));
        }
        if c.seed != first.seed || c.days != first.days {
            return Err(Error::IncompatibleWorlds("seed or day count differs".into()));
        }
    }
    let mut world = None;
    let mut setups = Vec::new();
    for c in configs {
        let (w, s) = c.build()?;
        world.get_or_insert(w);
        setups.extend(s);
    }
    let mut names: Vec<_> = setups.iter().map(|s| s.name.clone()).collect();
    names.sort();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("campaign names must be unique across compared configs".into()));
    }
    let hash = first.hash();
    compare_setups(&world.expect("at least one config"), first.seed, first.days, setups, &hash)
}
