//! Library surface of the experiment harness; the binary in `main.rs` is a
//! thin argument-parsing layer over these commands.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_landscape, cmd_oracle_compare, cmd_run, cmd_sample_study, objectives_listing, read_csv,
    write_csv, AggregateRow, LandscapeRow, OracleCurveRow, RunOutcome, SampleStudyRow,
};
pub use config::{ExperimentConfig, NoiseModeConfig, ENV_PREFIX};
