//! Scenario configuration, experiment drivers and run reports.

pub mod config;
pub mod report;
pub mod runs;

pub use config::{Format, ScenarioConfig, SweepGrid, Tolerances};
pub use report::{PhaseCell, Row, RunReport};
pub use runs::{run_ergodicity, run_gradient_check, run_membership_sweep, run_moment_check, run_tv_decay};
