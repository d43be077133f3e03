//! Spend guards and cold-start exploration.
//!
//! Run with `cargo run --release --example budget_guards`.

use bidpace::guards::{cold_start_decide_with_coin, ColdStartPolicy, GuardInputs, GuardState};
use bidpace::harness::{run_experiment, ExperimentConfig};
use bidpace::{AdRequest, FeaturePath, Money};

fn main() -> bidpace::Result<()> {
    let mut guards = GuardState::new();
    let mut inputs = GuardInputs {
        day: 0,
        slot: 7,
        day_spend: Money::from_units(10.0)?,
        budget: Money::from_units(100.0)?,
        slot_spend: Money::from_units(1.0)?,
        planned: Money::from_units(1.0)?,
        tolerance: Money::from_units(0.25)?,
        lifetime_cost: Money::from_units(10.0)?,
        lifetime_impressions: 10_000,
        ecpm_cap: Some(Money::from_units(1.5)?),
    };
    println!("on plan: {:?}", guards.evaluate(&inputs));
    inputs.slot_spend = Money::from_units(1.3)?;
    println!("over slot plan: {:?}", guards.evaluate(&inputs));
    guards.roll_slot();
    inputs.slot_spend = Money::ZERO;
    inputs.lifetime_impressions = 5_000;
    println!("expensive impressions: {:?}", guards.evaluate(&inputs));
    inputs.day_spend = Money::from_units(100.0)?;
    println!("budget spent: {:?}", guards.evaluate(&inputs));
    for trip in guards.trips() {
        println!("  trip {} at slot {}: {} vs {}", trip.kind, trip.slot, trip.spend, trip.limit);
    }

    let mut policy = ColdStartPolicy::new(0.3, Money::from_micros(2_000));
    policy.recommended = vec![FeaturePath::new(&[3])?];
    let req = |publisher: u32| AdRequest {
        id: 1,
        slot: 0,
        advertiser: FeaturePath::ROOT,
        publisher: FeaturePath::new(&[publisher, 0]).expect("path"),
        user: FeaturePath::new(&[0, 0]).expect("path"),
    };
    for imps in [0, 25_000, 50_000, 100_000] {
        let maturity = policy.maturity(imps, 0);
        println!(
            "{imps:>7} imps: maturity {maturity:.2} epsilon {:.3} plain {:?} recommended {:?}",
            policy.effective_epsilon(maturity),
            cold_start_decide_with_coin(&policy, &req(1), maturity, 0.1),
            cold_start_decide_with_coin(&policy, &req(3), maturity, 0.9),
        );
    }

    let cfg = ExperimentConfig::from_toml(include_str!("../configs/budget_burst.toml"))?;
    for r in run_experiment(&cfg)? {
        let burst = &r.series[40];
        println!(
            "{:>14}: total {} of {}, burst slot {} requests, spend {} vs plan {}, {} trips",
            r.name,
            r.metrics.total_spend,
            r.daily_budget,
            burst.requests,
            burst.actual_spend,
            burst.ideal_spend,
            r.guard_trips.len()
        );
    }
    Ok(())
}
