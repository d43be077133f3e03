use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bidpace::harness::{compare_strategies, run_experiment_with_seed, write_reports, ExperimentConfig, RunReport};
use bidpace::{Error, Result};

#[derive(Parser)]
#[command(name = "bidpace", version, about = "Budget pacing and bid optimization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every campaign of a config and write one CSV and JSON per campaign.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the campaigns of several configs over the same world and write a
    /// comparison table.
    Compare {
        #[arg(long, num_args = 2.., required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the metrics of every report in a run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.6}"))
}

fn print_table(reports: &[RunReport]) {
    println!(
        "{:<20} {:>14} {:>10} {:>8} {:>8} {:>10} {:>10} {:>10} {:>10} {:>10} {:>9}",
        "campaign", "spend", "imps", "clicks", "convs", "ecpm", "ecpc", "ecpa", "ctr", "ar", "pace_err%"
    );
    for r in reports {
        let m = &r.metrics;
        println!(
            "{:<20} {:>14} {:>10} {:>8} {:>8} {:>10} {:>10} {:>10} {:>10} {:>10} {:>9.3}",
            r.name,
            m.total_spend.to_string(),
            m.impressions,
            m.clicks,
            m.conversions,
            opt(m.ecpm),
            opt(m.ecpc),
            opt(m.ecpa),
            opt(m.ctr),
            opt(m.ar),
            100.0 * m.pacing_error_fraction
        );
        for t in &r.guard_trips {
            println!(
                "  guard {} day {} slot {}: spend {} limit {}",
                t.kind, t.day, t.slot, t.spend, t.limit
            );
        }
    }
}

fn simulate(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let out = out
        .or_else(|| cfg.output.as_ref().map(|o| o.dir.clone()))
        .ok_or_else(|| Error::Config("no --out given and no [output] dir in the config".into()))?;
    let reports = run_experiment_with_seed(&cfg, seed.unwrap_or(cfg.seed))?;
    write_reports(&reports, &out)?;
    print_table(&reports);
    Ok(())
}

fn compare(configs: &[PathBuf], out: &Path) -> Result<()> {
    let cfgs = configs
        .iter()
        .map(|p| ExperimentConfig::load(p))
        .collect::<Result<Vec<_>>>()?;
    let cmp = compare_strategies(&cfgs)?;
    write_reports(&cmp.reports, out)?;
    let path = out.join("comparison.csv");
    let f = fs::File::create(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    cmp.write_csv(f)?;
    print_table(&cmp.reports);
    Ok(())
}

fn report(run: &Path) -> Result<()> {
    let entries = fs::read_dir(run).map_err(|e| Error::Io {
        path: run.to_path_buf(),
        source: e,
    })?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::Config(format!("no reports in {}", run.display())));
    }
    let reports = names
        .iter()
        .map(|n| RunReport::read_from_dir(run, n))
        .collect::<Result<Vec<_>>>()?;
    print_table(&reports);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out, seed } => simulate(&config, out, seed),
        Command::Compare { configs, out } => compare(&configs, &out),
        Command::Report { run } => report(&run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
