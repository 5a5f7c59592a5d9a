//! The orchestrator: loop lifecycle, per-tier scheduling, conflict handling
//! between parallel loops and sandboxed dry runs.
//!
//! A tick of a loop only proposes knob writes. The [`Orchestrator`] gathers
//! the proposals of every loop due at an instant, detects conflicts among
//! them, arbitrates by priority, optionally replays the outcome on a copy of
//! itself, and only then writes the live state.

mod conflict;
mod functions;
mod instance;
mod live;
mod sandbox;
mod scheduler;

use thiserror::Error;

use crate::chain::EmbedError;
use crate::sdi::SdiError;

pub use conflict::{arbitrate, detect_conflicts, reservation_delta, Arbitration, Conflict, ConflictKind, ConflictReport, Decision};
pub use functions::{
    Blackboard, Environment, ModelHandle, Registry, SampledSeries, StepContext, StepFunction,
};
pub use instance::{
    ActionRecord, ActionStatus, Fcaps, InstanceSnapshot, InstanceState, KnowledgeEntry, KnowledgeStore, MklInstance,
};
pub use live::{Backing, Knob, KnobKey, KnobSpec, LiveState};
pub use sandbox::{count_reversals, SandboxConfig, SandboxResult, Verdict};
pub use scheduler::{KnobChange, Orchestrator, Policy, TierScheduler, TraceEvent};

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("knob: {0}")]
    Knob(String),
    #[error("capacity: {0}")]
    Capacity(String),
    #[error(transparent)]
    Sdi(#[from] SdiError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("unknown step function `{0}`")]
    UnknownFunction(String),
    #[error("cannot {op} an instance that is {state:?}")]
    IllegalTransition { op: &'static str, state: InstanceState },
    #[error("tick at {t_ms} ms is not a multiple of the period {period_ms} ms")]
    Misaligned { t_ms: u64, period_ms: u64 },
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("scheduler: {0}")]
    Schedule(String),
}
