use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, DiscreteCDF};

use bidpace::bidder::{Campaign, CampaignSetup, SelectionMode};
use bidpace::dcpm_bidding::{boost_factor, ShadingStats};
use bidpace::exchange_sim::{run_auction, CompetitorModel, Participant, World, WorldConfig};
use bidpace::flat_selection::{solve_threshold, QualityHistogram, ThresholdStats};
use bidpace::harness::{lifts, run_campaign, ExperimentConfig, RunReport};
use bidpace::pacing::{plan_remaining, update_pacing_rate, PacingRate, PerformancePdf, RatioForecast};
use bidpace::{CampaignConfig, Money, PacingStrategy, SlotClock};

const UNIFORM: &str = include_str!("../configs/uniform_pacing.toml");
const PERFORMANCE: &str = include_str!("../configs/performance_pacing.toml");
const BURST: &str = include_str!("../configs/budget_burst.toml");
const AB_CTR: &str = include_str!("../configs/ab_ctr_threshold.toml");
const AB_CPA: &str = include_str!("../configs/ab_cpa_dcpm.toml");

const RUNS: u64 = 20;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).expect("shipped config parses")
}

fn with_seed(cfg: &ExperimentConfig, i: u64) -> (ExperimentConfig, WorldConfig, Vec<CampaignSetup>) {
    let mut c = cfg.clone();
    c.seed = cfg.seed * 1000 + i;
    let (world, setups) = c.build().expect("config builds");
    (c, world, setups)
}

fn run(cfg: &ExperimentConfig, world: &WorldConfig, setup: CampaignSetup) -> RunReport {
    run_campaign(world, cfg.seed, cfg.days, setup, &cfg.hash()).expect("run succeeds")
}

fn pacing_accuracy(text: &str, limit: f64) -> Outcome {
    let cfg = config(text);
    let start = Instant::now();
    let errors: Vec<f64> = (0..RUNS)
        .map(|i| {
            let (c, world, mut setups) = with_seed(&cfg, i);
            run(&c, &world, setups.remove(0)).metrics.pacing_error_fraction
        })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let ok = errors.iter().filter(|&&e| e < limit).count();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    outcome(
        ok >= 18 && secs < 30.0,
        format!(
            "{ok}/{RUNS} runs under {:.0}% of B, worst {:.3}%, {secs:.2} s total",
            100.0 * limit,
            100.0 * worst
        ),
    )
}

fn c1() -> Outcome {
    pacing_accuracy(UNIFORM, 0.01)
}

fn c2() -> Outcome {
    pacing_accuracy(PERFORMANCE, 0.03 + 1e-12)
}

fn c3() -> Outcome {
    let cfg = config(BURST);
    let mut violations = Vec::new();
    let mut worst_total = f64::MIN;
    let mut worst_slot = f64::MIN;
    let mut burst_ratio = f64::MAX;
    for i in 0..RUNS {
        let (c, world, setups) = with_seed(&cfg, i);
        for setup in setups {
            let cc = setup.config.clone();
            let max_bid = cc.fixed_bid().map_or(cc.bid_cap, |b| b.min(cc.bid_cap)).micros();
            let r = run(&c, &world, setup);
            let t = r.num_slots;
            burst_ratio = burst_ratio
                .min(r.series[40].requests as f64 / r.series[39].requests.max(1) as f64);
            for day in r.series.chunks(t) {
                let total: Money = day.iter().map(|row| row.actual_spend).sum();
                let limit = cc.daily_budget.micros() + max_bid;
                worst_total = worst_total.max(total.micros() as f64 - limit as f64);
                if total.micros() > limit {
                    violations.push(format!("{} total {}", r.name, total));
                }
                for row in day {
                    let slot = row.slot % t;
                    let limit = row.ideal_spend.micros()
                        + cc.interval_tolerance_for(slot).micros()
                        + max_bid;
                    worst_slot = worst_slot.max(row.actual_spend.micros() as f64 - limit as f64);
                    if row.actual_spend.micros() > limit {
                        violations.push(format!("{} slot {}", r.name, row.slot));
                    }
                }
            }
        }
    }
    outcome(
        violations.is_empty() && burst_ratio > 9.0,
        format!(
            "{} violations over {RUNS} seeds x 3 campaigns, burst {:.1}x, worst total margin {:.0} micros, worst slot margin {:.0} micros",
            violations.len(),
            burst_ratio,
            -worst_total,
            -worst_slot
        ),
    )
}

fn sign_test_p(wins: u64, n: u64) -> f64 {
    if wins == 0 {
        return 1.0;
    }
    Binomial::new(0.5, n).expect("valid binomial").sf(wins - 1)
}

fn c4a() -> Outcome {
    let cfg = config(AB_CTR);
    let mut lift_values = Vec::new();
    let mut max_spend_gap = 0.0f64;
    for i in 0..RUNS {
        let (c, world, mut setups) = with_seed(&cfg, i);
        let threshold = setups.remove(0);
        let cand = run(&c, &world, threshold.clone());
        let mut random = threshold;
        random.name = "random".into();
        random.selection = SelectionMode::RandomMatched(cand.bid_fractions());
        let base = run(&c, &world, random);
        let (bs, cs) = (base.metrics.total_spend.as_units(), cand.metrics.total_spend.as_units());
        max_spend_gap = max_spend_gap.max((cs - bs).abs() / bs);
        lift_values.push(lifts(&base.metrics, &cand.metrics).ctr.unwrap_or(f64::NEG_INFINITY));
    }
    let wins = lift_values.iter().filter(|&&l| l > 0.0).count() as u64;
    lift_values.sort_by(f64::total_cmp);
    let median = 0.5 * (lift_values[9] + lift_values[10]);
    let p = sign_test_p(wins, RUNS);
    outcome(
        median > 0.0 && p < 0.05 && max_spend_gap < 0.05,
        format!(
            "median CTR lift {:+.1}%, {wins}/{RUNS} positive, sign test p = {p:.2e}, max spend gap {:.2}%",
            100.0 * median,
            100.0 * max_spend_gap
        ),
    )
}

fn c4b() -> Outcome {
    let cfg = config(AB_CPA);
    let mut ok = 0;
    let mut lift_values = Vec::new();
    for i in 0..RUNS {
        let (c, world, setups) = with_seed(&cfg, i);
        let reports: Vec<_> = setups.into_iter().map(|s| run(&c, &world, s)).collect();
        let (base, cand) = (&reports[0].metrics, &reports[1].metrics);
        if let (Some(b), Some(d)) = (base.ecpa, cand.ecpa) {
            if d <= b {
                ok += 1;
            }
        }
        lift_values.push(lifts(base, cand).ecpa.unwrap_or(f64::NEG_INFINITY));
    }
    lift_values.sort_by(f64::total_cmp);
    outcome(
        ok >= 15,
        format!(
            "eCPA at or below baseline in {ok}/{RUNS} runs, median eCPA lift {:+.1}%",
            100.0 * 0.5 * (lift_values[9] + lift_values[10])
        ),
    )
}

fn oracle_threshold(h: &QualityHistogram, target: u64) -> f64 {
    let counts = h.counts();
    let total: u64 = counts.iter().sum();
    if target == 0 {
        return 1.0;
    }
    if target >= total {
        return h.edges()[0];
    }
    let mut best_edge = 0;
    let mut best_gap = u64::MAX;
    for k in 0..=counts.len() {
        let tail: u64 = counts[k..].iter().sum();
        let gap = tail.abs_diff(target);
        if gap <= best_gap {
            best_gap = gap;
            best_edge = k;
        }
    }
    h.edges()[best_edge]
}

fn c5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();

    for case in 0..1000 {
        let mut h = QualityHistogram::new();
        let occupied = rng.random_range(1..60);
        for _ in 0..occupied {
            let bin = rng.random_range(0..h.num_bins());
            h.add_count(bin, rng.random_range(1..500));
        }
        let total = h.total();
        for target in [0, 1, total / 2, total, total + 3, rng.random_range(0..=total)] {
            let got = solve_threshold(&h, target).expect("non-empty histogram");
            if got != oracle_threshold(&h, target) {
                failures.push(format!("threshold case {case} target {target}"));
            }
        }
    }

    for case in 0..1000 {
        let k = if case % 2 == 0 { 2 } else { rng.random_range(1..100u64) };
        let n = rng.random_range(50..3000usize);
        let mut stats = ShadingStats::new(k as f64 / 100.0);
        let mut sorted: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
        sorted.iter().for_each(|&s| stats.push(s));
        sorted.sort_by(f64::total_cmp);
        let rank = ((k * n as u64).div_ceil(100)).max(1) as usize;
        if stats.theta_star() != sorted[rank - 1] {
            failures.push(format!("theta case {case} n {n} k {k}"));
        }
    }

    let mut worst_rel = 0.0f64;
    for len in [2usize, 10, 100, 1000, 10_000, 100_000] {
        let offset = rng.random_range(0.0..0.01);
        let xs: Vec<f64> = (0..len).map(|_| offset + rng.random::<f64>() * 0.001).collect();
        let mut stats = ThresholdStats::new(7, 1.96);
        xs.iter().for_each(|&x| stats.update(x));
        let mean = xs.iter().sum::<f64>() / len as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / len as f64;
        let rel_m = (stats.mean() - mean).abs() / mean.abs();
        let rel_v = (stats.variance() - var).abs() / var;
        worst_rel = worst_rel.max(rel_m).max(rel_v);
        if rel_m > 1e-9 || rel_v > 1e-9 {
            failures.push(format!("stats len {len}: {rel_m:e} {rel_v:e}"));
        }
    }

    let competitor = CompetitorModel {
        medians: vec![Money::from_micros(1000)],
        sigmas: vec![0.45],
        floor: Money::from_micros(300),
    };
    for trial in 0..200u64 {
        let grid: Vec<Money> = (1..=100).map(|i| Money::from_micros(i * 40)).collect();
        let mut won_before = false;
        for &bid in &grid {
            let mut rng = ChaCha8Rng::seed_from_u64(trial);
            let h = competitor.sample_highest(0, &mut rng);
            let mut rng = ChaCha8Rng::seed_from_u64(trial);
            let out = run_auction(bid, &competitor, 0, &mut rng);
            let price = h.max(competitor.floor);
            let (won, pays) = if bid > price { (true, price) } else { (false, Money::ZERO) };
            let paid = if out.won { out.clearing_price } else { Money::ZERO };
            if out.won != won || paid != pays || paid > bid || (won_before && !out.won) {
                failures.push(format!("auction trial {trial} bid {bid}"));
            }
            won_before |= out.won;
        }
    }

    outcome(
        failures.is_empty(),
        format!(
            "{} mismatches; 6000 threshold solves, 1000 percentiles, stats to 1e5 (worst rel {worst_rel:.1e}), 200 x 100 auction grid",
            failures.len()
        ),
    )
}

fn c6() -> Outcome {
    let mut failures = Vec::new();

    let mut cfg = CampaignConfig::dynamic(Money::from_micros(100_000_000), Money::from_micros(600_000), 96);
    cfg.bid_cap = Money::from_micros(10_000);
    for cost in [1u64, 137, 999, 2_500, 9_999] {
        let c_star = Money::from_micros(cost);
        let at_b2 = boost_factor(PacingRate::new(cfg.regions.danger, 1e-6), &cfg, c_star).unwrap();
        let at_1 = boost_factor(PacingRate::new(1.0, 1e-6), &cfg, c_star).unwrap();
        if at_b2 != 1.0 || at_1 != 10_000.0 / cost as f64 {
            failures.push(format!("boost c* {cost}: {at_b2} {at_1}"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let clock = SlotClock::equal(96, 900).unwrap();
    let pdf = PerformancePdf::uniform(96);
    let mut worst = 0u64;
    for _ in 0..1000 {
        let remaining = Money::from_micros(rng.random_range(0..1_000_000_000));
        let from = rng.random_range(0..96);
        let u = plan_remaining(PacingStrategy::Uniform, remaining, &clock, &pdf, from);
        let p = plan_remaining(PacingStrategy::Performance, remaining, &clock, &pdf, from);
        for (a, b) in u.iter().zip(&p) {
            worst = worst.max(a.micros().abs_diff(b.micros()));
        }
    }
    let base = config(UNIFORM);
    let (c, world, mut setups) = with_seed(&base, 0);
    let uniform = setups.remove(0);
    let mut perf = uniform.clone();
    perf.config.strategy = PacingStrategy::Performance;
    let (ru, rp) = (run(&c, &world, uniform), run(&c, &world, perf));
    for (a, b) in ru.series.iter().zip(&rp.series) {
        worst = worst.max(a.ideal_spend.micros().abs_diff(b.ideal_spend.micros()));
    }
    if worst > 1 {
        failures.push(format!("uniform pdf schedule differs by {worst} micros"));
    }

    let flat = CampaignConfig::flat(Money::from_micros(100_000_000), Money::from_micros(2000), 96);
    for i in 1..=100 {
        let r = i as f64 / 100.0;
        let b = Money::from_micros(rng.random_range(1..10_000_000));
        let next = update_pacing_rate(PacingRate::new(r, 1e-6), b, b, RatioForecast::NEUTRAL, &flat);
        if next.value() != r {
            failures.push(format!("fixed point at {r}: {}", next.value()));
        }
        let per_unit = 3_000_000.0;
        let target = Money::from_micros(1_000_000);
        let mut rate = PacingRate::new(r, 1e-6);
        for _ in 0..5 {
            let spend = Money::from_micros((rate.value() * per_unit).round().max(1.0) as u64);
            rate = update_pacing_rate(rate, target, spend, RatioForecast::NEUTRAL, &flat);
        }
        if (rate.value() - 1.0 / 3.0).abs() > 1e-6 {
            failures.push(format!("linear response from {r} settles at {}", rate.value()));
        }
    }

    outcome(
        failures.is_empty(),
        format!(
            "{} mismatches; boost exact at both ends, uniform-pdf schedule within {worst} micro, recursion fixed point holds",
            failures.len()
        ),
    )
}

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .expect("output dir exists")
        .map(|e| {
            let p = e.expect("dir entry").path();
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, fs::read(&p).expect("readable output"))
        })
        .collect();
    files.sort();
    files
}

fn c7() -> Outcome {
    let config_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/budget_burst.toml");
    let tmp = tempfile::tempdir().expect("tempdir");
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_bidpace"))
            .args(["simulate", "--seed", "42", "--config"])
            .arg(&config_path)
            .arg("--out")
            .arg(&out)
            .output()
            .expect("binary runs");
        if !status.status.success() {
            return outcome(false, String::from_utf8_lossy(&status.stderr).into_owned());
        }
        outputs.push(dir_files(&out));
    }
    let n = outputs[0].len();
    let kinds = outputs[0].iter().filter(|(n, _)| n.ends_with(".csv") || n.ends_with(".json")).count();
    outcome(
        outputs[0] == outputs[1] && n == 6 && kinds == 6,
        format!("{n} files per run, byte-identical: {}", outputs[0] == outputs[1]),
    )
}

fn decisions_per_second(text: &str) -> f64 {
    let cfg = config(text);
    let (_, world, setups) = with_seed(&cfg, 0);
    let setup = setups.into_iter().last().expect("campaign");
    let sim = World::new(world.clone(), 1).expect("world");
    let requests: Vec<_> = (0..4).flat_map(|slot| sim.requests(0, slot)).collect();
    let mut campaign = Campaign::new(setup, world.clock().unwrap()).expect("campaign");
    campaign.begin_slot(0, 0).expect("slot opens");
    let rounds = 10;
    let start = Instant::now();
    let mut bids = 0usize;
    for _ in 0..rounds {
        for r in &requests {
            bids += usize::from(campaign.decide(std::hint::black_box(r)).expect("decides").is_some());
        }
    }
    std::hint::black_box(bids);
    (rounds * requests.len()) as f64 / start.elapsed().as_secs_f64()
}

fn c8() -> Outcome {
    let flat = decisions_per_second(AB_CTR);
    let dynamic = decisions_per_second(AB_CPA);
    let slowest = flat.min(dynamic);
    outcome(
        slowest >= 1e5,
        format!("flat threshold {flat:.3e}/s, dynamic CPM {dynamic:.3e}/s single-threaded"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1  uniform pacing accuracy", c1),
        ("2  performance pacing accuracy", c2),
        ("3  budget safety under burst", c3),
        ("4a threshold selection vs matched random", c4a),
        ("4b dynamic CPM vs uniform fixed bid", c4b),
        ("5  oracle equivalences", c5),
        ("6  formula spot checks", c6),
        ("7  determinism", c7),
        ("8  decision throughput", c8),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "{} {name}: {} ({:.2} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
