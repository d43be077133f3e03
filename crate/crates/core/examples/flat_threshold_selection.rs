//! Flat-CPM request selection by a quality threshold.
//!
//! The first part solves a threshold on a hand-built histogram. The second
//! runs a two-day campaign against a random selector bidding on the same
//! share of requests in every slot.
//!
//! Run with `cargo run --release --example flat_threshold_selection`.

use bidpace::bidder::SelectionMode;
use bidpace::flat_selection::{
    decide_flat, required_requests, solve_threshold, QualityHistogram, ThresholdStats,
};
use bidpace::harness::{lifts, run_campaign, ExperimentConfig};
use bidpace::pacing::PacingRate;
use bidpace::Money;

fn main() -> bidpace::Result<()> {
    let mut hist = QualityHistogram::new();
    for i in 0..10_000 {
        hist.add(0.0005 + 0.004 * (i as f64 / 10_000.0).powi(3));
    }
    let sizing = required_requests(
        Money::from_units(0.5)?,
        Money::from_micros(1_000),
        0.6,
        PacingRate::new(0.8, 1e-4),
    )?;
    let tau = solve_threshold(&hist, sizing.bids)?;
    println!("{sizing:?} -> threshold {tau:.6}");

    let mut stats = ThresholdStats::new(7, 1.96);
    for day in 0..7 {
        stats.update(tau * (1.0 + 0.05 * f64::from(day % 3) - 0.05));
    }
    let band = stats.confidence_bounds().expect("observed");
    println!("band [{:.6}, {:.6}]", band.lower, band.upper);
    for rate in [0.0005, tau, 0.004] {
        let d = decide_flat(rate, band, PacingRate::new(0.8, 1e-4), Money::from_micros(2000));
        println!("  predicted {rate:.6}: {d:?}");
    }

    let cfg = ExperimentConfig::from_toml(include_str!("../configs/ab_ctr_threshold.toml"))?;
    let (world, mut setups) = cfg.build()?;
    let threshold = setups.remove(0);
    let cand = run_campaign(&world, cfg.seed, cfg.days, threshold.clone(), "")?;
    let mut random = threshold;
    random.selection = SelectionMode::RandomMatched(cand.bid_fractions());
    let base = run_campaign(&world, cfg.seed, cfg.days, random, "")?;
    for (name, r) in [("random", &base), ("threshold", &cand)] {
        println!(
            "{name:>10}: spend {} clicks {} ctr {:.5}",
            r.metrics.total_spend,
            r.metrics.clicks,
            r.metrics.ctr.unwrap_or(0.0)
        );
    }
    println!("ctr lift {:+.1}%", 100.0 * lifts(&base.metrics, &cand.metrics).ctr.unwrap_or(0.0));
    Ok(())
}
