//! Batch orchestration for the CAM broadcast simulator: run scenarios,
//! generate lookup tables, estimate, fit and validate. The binary in this
//! crate is a thin argument parser over [`commands`].

pub mod commands;
pub mod config;

pub use commands::{
    cmd_estimate, cmd_fit, cmd_hidden_sweep, cmd_lut_gen, cmd_simulate, cmd_validate,
    EstimateReport, LutGenOptions, SimulateReport, SweepOptions, SweepReport, ValidationReport,
};
pub use config::{ScenarioSettings, Settings};
