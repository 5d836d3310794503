use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::MetricsReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

/// JSON run report written as `<task>_<seed>.report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub task: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    /// Named metric sets, e.g. `validation`, `eval`, `baseline`, `augmented`.
    pub metrics: serde_json::Map<String, serde_json::Value>,
    pub timings_seconds: serde_json::Map<String, serde_json::Value>,
}

impl RunReport {
    pub fn new(task: impl Into<String>, seed: u64, config: serde_json::Value) -> Self {
        RunReport {
            task: task.into(),
            seed,
            config,
            epochs: Vec::new(),
            best_epoch: None,
            metrics: serde_json::Map::new(),
            timings_seconds: serde_json::Map::new(),
        }
    }

    pub fn add_metrics(&mut self, name: &str, m: &MetricsReport) {
        self.metrics.insert(name.to_string(), serde_json::to_value(m).expect("metrics serialize"));
    }

    pub fn add_timing(&mut self, name: &str, seconds: f64) {
        self.timings_seconds.insert(name.to_string(), serde_json::json!(seconds));
    }

    pub fn file_name(&self) -> String {
        format!("{}_{}.report.json", self.task, self.seed)
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join(self.file_name());
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(&path, json + "\n")?;
        Ok(path)
    }
}
