//! Experiment files, sweeps and CSV output.

mod config;
mod runner;

pub use config::{
    parse_config, BaseSystem, ExperimentSpec, MethodChoice, Scenario, SweepAxis, TrackingChoice, EXAMPLE_CONFIG,
};
pub use runner::{
    read_rows, run_experiment, write_rows, ExperimentSummary, Metric, ResultRow, COMBINED_FILE, SCHEMA_HEADER,
};
