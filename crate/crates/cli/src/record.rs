//! The JSON run record every command prints.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

pub const SCHEMA: &str = "racml.run/1";

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub schema: &'static str,
    /// Arguments after the program name.
    pub command: Vec<String>,
    /// Every setting the command ran with, defaults resolved.
    pub config: Value,
    pub seed: Option<u64>,
    pub wall_seconds: f64,
    pub status: String,
    pub iterations: Option<usize>,
    /// Final residuals, or `{}` for commands without a solver loop.
    pub residuals: Value,
    /// Losses and accuracies, or `{}`.
    pub metrics: Value,
    /// Files written.
    pub artifacts: Vec<String>,
    /// Command-specific output.
    pub result: Value,
}

impl RunRecord {
    pub fn new(command: &[String], config: Value, seed: Option<u64>) -> Self {
        Self {
            schema: SCHEMA,
            command: command.to_vec(),
            config,
            seed,
            wall_seconds: 0.0,
            status: "ok".into(),
            iterations: None,
            residuals: Value::Object(Default::default()),
            metrics: Value::Object(Default::default()),
            artifacts: Vec::new(),
            result: Value::Null,
        }
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.display().to_string());
    }
}
