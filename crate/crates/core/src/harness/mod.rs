//! Scenario configuration, sweeps, reports and the command-line interface.

pub mod cli;
pub mod config;
pub mod report;
pub mod scenarios;
pub mod sweep;

pub use config::{
    load_config, ConfigError, ControllerAssignment, DemandSource, Scenario, ScenarioConfig,
};
pub use report::{emit_report, read_results, Format, ReportError};
pub use sweep::{run_sweep, RunKey, RunRecord, RunSummary, SweepResults, SweepSpec};
