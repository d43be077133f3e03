//! Performance-weighted pacing: the daily budget follows a bimodal
//! distribution of expected response quality instead of the clock.
//!
//! Run with `cargo run --release --example performance_pacing`.

use bidpace::harness::{run_experiment, ExperimentConfig};
use bidpace::pacing::PerformancePdf;

fn main() -> bidpace::Result<()> {
    let cfg = ExperimentConfig::from_toml(include_str!("../configs/performance_pacing.toml"))?;
    let pdf = PerformancePdf::synthetic_bimodal(cfg.world.slots);
    let report = run_experiment(&cfg)?.remove(0);
    let budget = report.daily_budget.as_units();

    println!("{:>4} {:>8} {:>10} {:>10}  share", "slot", "pdf", "ideal", "actual");
    for (t, row) in report.series.iter().enumerate().step_by(6) {
        let share = row.actual_spend.as_units() / budget;
        println!(
            "{t:>4} {:>8.5} {:>10.4} {:>10.4}  {}",
            pdf.get(t),
            row.ideal_spend.as_units(),
            row.actual_spend.as_units(),
            "#".repeat((share * 2000.0).round() as usize)
        );
    }
    println!(
        "spent {}, mean slot error {:.3}% of budget",
        report.metrics.total_spend,
        100.0 * report.metrics.pacing_error_fraction
    );
    Ok(())
}
