//! Machine-readable run reports.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::Result;

/// One experiment: method, data source, score, timing and the full resolved
/// configuration (seeds included), so a report suffices to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub method: String,
    pub dataset: Value,
    /// Absent when no ground-truth labels were available.
    pub nmi: Option<f64>,
    pub wall_clock_seconds: f64,
    pub config: Value,
    /// Method-specific outputs such as the selected weights or objective.
    #[serde(default)]
    pub extras: Map<String, Value>,
    pub version: String,
}

impl Report {
    pub fn new(method: impl Into<String>, dataset: Value, config: Value) -> Self {
        Self {
            method: method.into(),
            dataset,
            nmi: None,
            wall_clock_seconds: 0.0,
            config,
            extras: Map::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn extra(&mut self, key: &str, value: impl Serialize) -> Result<&mut Self> {
        self.extras.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(self)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        self.write(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}
