//! Monitoring plane: synthetic workloads, scraping of the simulated
//! infrastructure into fixed-width frames, datasets and their normalization,
//! and CSV import/export.

mod catalog;
mod csv_io;
mod dataset;
mod scrape;
mod workload;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use catalog::{Catalog, Container, ContainerRole, MetricSpec, Response, PAPER_CPU_METRIC};
pub use csv_io::{export_csv, import_csv, import_csv_with_catalog, read_csv, write_csv};
pub use dataset::{denormalize, normalize_minmax, Dataset, Scaler, Split};
pub use scrape::{scrape, simulate_dataset};
pub use workload::{generate_workload, Periodic, Segment, Shape, WorkloadProfile};

/// Dot-namespaced metric family bound to a node or container scope,
/// written `family{scope}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MetricName {
    pub family: String,
    pub scope: String,
}

impl MetricName {
    pub fn new(family: impl Into<String>, scope: impl Into<String>) -> Self {
        MetricName { family: family.into(), scope: scope.into() }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{{{}}}", self.family, self.scope)
    }
}

impl FromStr for MetricName {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MetricsError::BadMetricName(s.to_owned());
        let (family, rest) = s.split_once('{').ok_or_else(bad)?;
        let scope = rest.strip_suffix('}').ok_or_else(bad)?;
        if family.is_empty() || scope.is_empty() {
            return Err(bad());
        }
        Ok(MetricName::new(family, scope))
    }
}

/// One scrape: a value per catalog entry, in catalog order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricFrame {
    /// Seconds since scenario start.
    pub timestamp: f64,
    pub values: Vec<f64>,
}

/// Uniformly sampled series of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub metric: MetricName,
    pub samples: Vec<(f64, f64)>,
}

impl TimeSeries {
    pub fn new(metric: MetricName, samples: Vec<(f64, f64)>) -> Self {
        TimeSeries { metric, samples }
    }

    pub fn from_values(metric: MetricName, start: f64, interval: f64, values: &[f64]) -> Self {
        let samples = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (start + i as f64 * interval, v))
            .collect();
        TimeSeries { metric, samples }
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.1).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Strictly increasing timestamps with a constant step.
    pub fn is_uniform(&self) -> bool {
        if self.samples.len() < 2 {
            return true;
        }
        let step = self.samples[1].0 - self.samples[0].0;
        step > 0.0
            && self
                .samples
                .windows(2)
                .all(|w| ((w[1].0 - w[0].0) - step).abs() <= 1e-9 * step.max(1.0))
    }
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid workload segment {index}: {reason}")]
    InvalidSegment { index: usize, reason: String },
    #[error("segments {first} and {second} overlap with contradictory constant levels")]
    ContradictorySegments { first: usize, second: usize },
    #[error("invalid workload profile: {0}")]
    InvalidProfile(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow { line: u64, expected: usize, found: usize },
    #[error("line {line}, column `{column}`: `{value}` is not a number")]
    NonNumeric { line: u64, column: String, value: String },
    #[error("dataset has {found} metric columns, catalog has {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("malformed metric name `{0}`")]
    BadMetricName(String),
    #[error("scaler width {scaler} does not match dataset width {dataset}")]
    ScalerWidth { scaler: usize, dataset: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_name_round_trip() {
        let m = MetricName::new("node.cpu", "wat-vm6");
        assert_eq!(m.to_string(), "node.cpu{wat-vm6}");
        assert_eq!("node.cpu{wat-vm6}".parse::<MetricName>().unwrap(), m);
        assert!("node.cpu".parse::<MetricName>().is_err());
    }

    #[test]
    fn uniform_series() {
        let s = TimeSeries::from_values(MetricName::new("x", "y"), 0.0, 1.0, &[1.0, 2.0, 3.0]);
        assert!(s.is_uniform());
        let bad = TimeSeries::new(MetricName::new("x", "y"), vec![(0.0, 1.0), (2.0, 1.0), (1.0, 1.0)]);
        assert!(!bad.is_uniform());
    }
}
