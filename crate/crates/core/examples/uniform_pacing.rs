//! Uniform pacing of a $100 daily budget over 96 slots.
//!
//! Run with `cargo run --release --example uniform_pacing`.

use bidpace::harness::{run_experiment, ExperimentConfig};

fn main() -> bidpace::Result<()> {
    let cfg = ExperimentConfig::from_toml(include_str!("../configs/uniform_pacing.toml"))?;
    let report = run_experiment(&cfg)?.remove(0);

    println!("{:>4} {:>12} {:>12} {:>8} {:>8}", "slot", "ideal", "actual", "rate", "win");
    for row in report.series.iter().step_by(8) {
        println!(
            "{:>4} {:>12} {:>12} {:>8.4} {:>8.4}",
            row.slot,
            row.ideal_spend.to_string(),
            row.actual_spend.to_string(),
            row.pacing_rate,
            row.win_rate
        );
    }
    let m = &report.metrics;
    println!(
        "spent {} of {}, mean slot error {} ({:.3}% of budget)",
        m.total_spend,
        report.daily_budget,
        m.pacing_error,
        100.0 * m.pacing_error_fraction
    );
    Ok(())
}
