//! Experiment runner: config loading, simulation runs, strategy comparisons
//! and CSV/JSON reports.

mod compare;
mod config;
mod pdf;
mod report;
mod run;

pub use compare::{compare_setups, compare_strategies, lifts, Comparison, Lifts};
pub use config::{
    Burst, CampaignSection, ColdStartSection, CompetitorSection, ExperimentConfig, KindSpec,
    OutputSection, PdfSpec, Profile, SelectionSpec, StrategySpec, WorldSection,
};
pub use pdf::{learn_from_report, learn_performance_pdf, EMPTY_SLOT_MASS};
pub use report::{
    pacing_error, quantize6, read_series_csv, write_series_csv, Metrics, RunReport, SlotRow,
    CSV_HEADER,
};
pub use run::{run_campaign, run_experiment, run_experiment_with_seed, write_reports};
