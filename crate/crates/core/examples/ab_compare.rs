//! Paired comparison of uniform and performance pacing over several seeds.
//!
//! Every seed gives both strategies the same requests, competing bids and
//! feedback draws, so the differences come from the strategies alone.
//!
//! Run with `cargo run --release --example ab_compare`.

use bidpace::harness::{compare_strategies, ExperimentConfig};

fn main() -> bidpace::Result<()> {
    let uniform = ExperimentConfig::from_toml(include_str!("../configs/uniform_pacing.toml"))?;
    let performance = ExperimentConfig::from_toml(include_str!("../configs/performance_pacing.toml"))?;
    println!("{:>4} {:>10} {:>10} {:>10} {:>10}", "seed", "ctr base", "ctr perf", "ctr lift", "ecpc lift");
    for seed in 1..=5 {
        let (mut a, mut b) = (uniform.clone(), performance.clone());
        a.seed = seed;
        b.seed = seed;
        let cmp = compare_strategies(&[a, b])?;
        let pct = |x: Option<f64>| x.map_or_else(|| "-".into(), |v| format!("{:+.1}%", 100.0 * v));
        println!(
            "{seed:>4} {:>10.5} {:>10.5} {:>10} {:>10}",
            cmp.reports[0].metrics.ctr.unwrap_or(0.0),
            cmp.reports[1].metrics.ctr.unwrap_or(0.0),
            pct(cmp.lifts[1].ctr),
            pct(cmp.lifts[1].ecpc)
        );
        if seed == 1 {
            cmp.write_csv(std::io::stdout())?;
        }
    }
    Ok(())
}
