//! Scenario runner: builds a scenario from a config file, runs it, writes
//! plot-ready CSVs plus `summary.txt`, and returns a [`RunReport`].
//!
//! | scenario | what it does |
//! |---|---|
//! | `compress` | metric dataset, autoencoder training, reconstruction error of the cpu metric |
//! | `adaptive-vnf` | traffic to cpu fit, traffic forecaster, cpu-resizing loop |
//! | `conflict-demo` | opposing loops on one knob, without and with arbitration |
//!
//! Every random draw is derived from the config seed, and nothing
//! time-dependent is written, so a rerun reproduces every file byte for byte.

mod compress;
mod config;
mod conflict;
mod report;
mod vnf;

use std::path::Path;

use thiserror::Error;

use crate::control::ControlError;
use crate::engines::EngineError;
use crate::metrics::MetricsError;

pub use compress::{run_compress, PAPER_COMPRESSION_RATIO};
pub use config::{
    derive_seed, CompressSection, ConflictSection, Scenario, ScenarioConfig, TopologySource, VnfSection, WorkloadSource,
};
pub use conflict::run_conflict_demo;
pub use report::{Check, FileEntry, RunReport};
pub use vnf::run_adaptive_vnf;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Control(#[from] ControlError),
}

impl HarnessError {
    fn from_engine(e: EngineError) -> Self {
        match e {
            EngineError::Diverged { .. } => HarnessError::Diverged(e.to_string()),
            EngineError::InvalidConfig(m) => HarnessError::Config(m),
            other => HarnessError::Engine(other),
        }
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Diverged(_) => 3,
            _ => 1,
        }
    }
}

/// Runs the scenario named in `cfg`.
pub fn run(cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunReport, HarnessError> {
    cfg.validate()?;
    match cfg.scenario {
        Scenario::Compress => run_compress(cfg, out_dir),
        Scenario::AdaptiveVnf => run_adaptive_vnf(cfg, out_dir),
        Scenario::ConflictDemo => run_conflict_demo(cfg, out_dir),
    }
}
