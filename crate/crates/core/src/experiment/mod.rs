//! Configured end-to-end runs and their reports.

mod config;
mod report;
mod scenario;

use thiserror::Error;

pub use config::{DefenseKind, ExperimentConfig, Knobs, Paths, ScenarioKind};
pub use report::{report_render, PearsonRow, PrecisionTable, ReportBundle, Row, Series, Table};
pub use scenario::{run_scenario, score_padding};

/// A failure inside a scenario, tagged with the stage that raised it.
#[derive(Debug, Error)]
#[error("stage `{stage}` failed: {message}")]
pub struct ScenarioError {
    pub stage: String,
    pub message: String,
}

impl ScenarioError {
    pub fn new(stage: &str, message: String) -> Self {
        ScenarioError {
            stage: stage.to_owned(),
            message,
        }
    }
}
