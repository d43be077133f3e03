//! Dynamic-CPM pricing: region logic, shading and boost, then a three-day
//! comparison against a uniformly paced fixed bid.
//!
//! Run with `cargo run --release --example dcpm_bidding`.

use bidpace::dcpm_bidding::{base_bid, boost_factor, classify_region, compute_bid, ShadingStats};
use bidpace::harness::{compare_setups, ExperimentConfig};
use bidpace::pacing::PacingRate;
use bidpace::{CampaignConfig, Money};

fn main() -> bidpace::Result<()> {
    let mut cfg = CampaignConfig::dynamic(Money::from_units(30.0)?, Money::from_units(0.6)?, 96);
    cfg.bid_cap = Money::from_units(0.01)?;
    let cost = Money::from_micros(1_100);

    let mut shading = ShadingStats::new(cfg.shading_percentile);
    for i in 0..200 {
        shading.push(0.3 + 0.7 * f64::from(i) / 200.0);
    }
    let base = base_bid(0.004, Money::from_units(0.6)?);
    println!("base bid {base}, theta* {:.3}", shading.theta_star());
    for rate in [0.1, 0.5, 0.8, 0.9, 1.0] {
        let pacing = PacingRate::new(rate, cfg.min_pacing_rate);
        let region = classify_region(pacing, &cfg.regions, false).region;
        let rho = boost_factor(pacing, &cfg, cost)?;
        let bid = compute_bid(region, base, shading.theta_star(), rho, cfg.bid_cap);
        println!("  rate {rate:.1}: {region:?} rho* {rho:.3} bid {bid}");
    }

    let exp = ExperimentConfig::from_toml(include_str!("../configs/ab_cpa_dcpm.toml"))?;
    let (world, setups) = exp.build()?;
    let cmp = compare_setups(&world, exp.seed, exp.days, setups, &exp.hash())?;
    for (r, l) in cmp.reports.iter().zip(&cmp.lifts) {
        println!(
            "{:>9}: spend {} conversions {} ecpa {:.4} lift {:+.1}%",
            r.name,
            r.metrics.total_spend,
            r.metrics.conversions,
            r.metrics.ecpa.unwrap_or(f64::NAN),
            100.0 * l.ecpa.unwrap_or(0.0)
        );
    }
    Ok(())
}
