use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub iteration: u64,
    pub metric: String,
    pub method: String,
    pub value: f64,
}

/// Long-format metric table with a free-form metadata echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub rows: Vec<MetricRow>,
    pub metadata: serde_json::Value,
}

impl MetricSeries {
    pub fn new(metadata: serde_json::Value) -> Self {
        Self { rows: Vec::new(), metadata }
    }

    /// Appends a row. Iterations must strictly increase for each
    /// `(metric, method)` pair.
    pub fn push(&mut self, iteration: u64, metric: &str, method: &str, value: f64) -> Result<()> {
        let prev = self.rows.iter().rev().find(|r| r.metric == metric && r.method == method);
        if let Some(p) = prev {
            if p.iteration >= iteration {
                return Err(Error::InvalidConfig(format!(
                    "iteration {iteration} does not follow {} for {metric}/{method}",
                    p.iteration
                )));
            }
        }
        self.rows.push(MetricRow { iteration, metric: metric.into(), method: method.into(), value });
        Ok(())
    }

    /// `(iteration, value)` pairs of one series.
    pub fn series(&self, metric: &str, method: &str) -> Vec<(u64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric && r.method == method)
            .map(|r| (r.iteration, r.value))
            .collect()
    }

    pub fn value_at(&self, metric: &str, method: &str, iteration: u64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.method == method && r.iteration == iteration)
            .map(|r| r.value)
    }

    pub fn last(&self, metric: &str, method: &str) -> Option<f64> {
        self.rows.iter().rev().find(|r| r.metric == metric && r.method == method).map(|r| r.value)
    }

    /// Distinct method labels in first-appearance order.
    pub fn methods(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method.as_str()) {
                out.push(&r.method);
            }
        }
        out
    }

    pub fn extend(&mut self, other: MetricSeries) -> Result<()> {
        for r in other.rows {
            self.push(r.iteration, &r.metric, &r.method, r.value)?;
        }
        Ok(())
    }

    /// CSV with header `iteration,metric,method,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        if self.rows.is_empty() {
            out.write_record(["iteration", "metric", "method", "value"])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
