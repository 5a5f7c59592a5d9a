//! Software-defined infrastructure model.
//!
//! A [`Topology`] is an immutable graph of compute nodes, forwarding-only
//! switches and links. A [`TopologyState`] layers resource reservations on top
//! of it. All resource quantities are integers in fixed units (millicores,
//! mebibytes, megabits per second) so conservation can be checked exactly.

mod path;
mod preset;
mod spec;
mod state;
mod topology;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use path::{path_metrics, PathMetrics};
pub use preset::{paper_spec, paper_topology, preset, PAPER_REGIONS};
pub use spec::{AllocationRecord, LinkSpec, NodeSpec, SwitchSpec, TopologySpec};
pub use state::TopologyState;
pub use topology::{build_topology, Topology};

/// Infrastructure tier. Depth grows from the core towards the access edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Core,
    Edge,
    Access,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Core, Tier::Edge, Tier::Access];

    pub fn depth(self) -> u32 {
        match self {
            Tier::Core => 0,
            Tier::Edge => 1,
            Tier::Access => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Core => "core",
            Tier::Edge => "edge",
            Tier::Access => "access",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

/// Multi-dimensional resource quantity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResourceVector {
    /// Millicores.
    #[serde(default)]
    pub cpu: u64,
    /// Mebibytes.
    #[serde(default)]
    pub mem: u64,
    /// Mebibytes.
    #[serde(default)]
    pub storage: u64,
    /// Megabits per second.
    #[serde(default)]
    pub bandwidth: u64,
}

impl ResourceVector {
    pub const ZERO: ResourceVector = ResourceVector { cpu: 0, mem: 0, storage: 0, bandwidth: 0 };

    pub fn new(cpu: u64, mem: u64, storage: u64, bandwidth: u64) -> Self {
        ResourceVector { cpu, mem, storage, bandwidth }
    }

    pub fn cpu(cpu: u64) -> Self {
        ResourceVector { cpu, ..Self::ZERO }
    }

    pub fn components(&self) -> [(&'static str, u64); 4] {
        [
            ("cpu", self.cpu),
            ("mem", self.mem),
            ("storage", self.storage),
            ("bandwidth", self.bandwidth),
        ]
    }

    /// Name of the first component where `self` exceeds `limit`.
    pub fn first_exceeding(&self, limit: &ResourceVector) -> Option<&'static str> {
        self.components()
            .into_iter()
            .zip(limit.components())
            .find(|((_, want), (_, have))| want > have)
            .map(|((name, _), _)| name)
    }

    pub fn fits_within(&self, limit: &ResourceVector) -> bool {
        self.first_exceeding(limit).is_none()
    }

    pub fn checked_add(&self, other: &ResourceVector) -> Option<ResourceVector> {
        Some(ResourceVector {
            cpu: self.cpu.checked_add(other.cpu)?,
            mem: self.mem.checked_add(other.mem)?,
            storage: self.storage.checked_add(other.storage)?,
            bandwidth: self.bandwidth.checked_add(other.bandwidth)?,
        })
    }

    pub fn checked_sub(&self, other: &ResourceVector) -> Option<ResourceVector> {
        Some(ResourceVector {
            cpu: self.cpu.checked_sub(other.cpu)?,
            mem: self.mem.checked_sub(other.mem)?,
            storage: self.storage.checked_sub(other.storage)?,
            bandwidth: self.bandwidth.checked_sub(other.bandwidth)?,
        })
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }
}

impl std::ops::Add for ResourceVector {
    type Output = ResourceVector;

    fn add(self, rhs: ResourceVector) -> ResourceVector {
        self.checked_add(&rhs).expect("resource vector overflow")
    }
}

impl std::ops::Sub for ResourceVector {
    type Output = ResourceVector;

    fn sub(self, rhs: ResourceVector) -> ResourceVector {
        self.checked_sub(&rhs).expect("resource vector underflow")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeNode {
    pub id: NodeId,
    pub region: String,
    pub tier: Tier,
    /// `bandwidth` is the node's interface capacity.
    pub capacity: ResourceVector,
    pub reliability: f64,
}

/// Index into [`Topology::links`].
pub type LinkId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    /// Megabits per second.
    pub bandwidth: u64,
    pub latency_ms: f64,
    pub reliability: f64,
}

impl Link {
    pub fn other(&self, end: &NodeId) -> &NodeId {
        if &self.a == end {
            &self.b
        } else {
            &self.a
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AllocationId(pub u64);

impl fmt::Display for AllocationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "alloc-{}", self.0)
    }
}

/// Where an allocation's resources were taken from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Site {
    Node(NodeId),
    Link(LinkId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub id: AllocationId,
    pub site: Site,
    pub resources: ResourceVector,
    /// MKL instance that holds the reservation.
    pub owner: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum SdiError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(NodeId),
    #[error("duplicate link between `{0}` and `{1}`")]
    DuplicateLink(NodeId, NodeId),
    #[error("link endpoint `{0}` is not declared")]
    DanglingEndpoint(NodeId),
    #[error("link from `{0}` to itself")]
    SelfLoop(NodeId),
    #[error("node `{node}` references undeclared region `{region}`")]
    UnknownRegion { node: NodeId, region: String },
    #[error("topology is disconnected: `{0}` is unreachable")]
    Disconnected(NodeId),
    #[error("topology has no nodes")]
    Empty,
    #[error("invalid attribute on `{item}`: {reason}")]
    InvalidAttribute { item: String, reason: String },
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("unknown link {0}")]
    UnknownLink(LinkId),
    #[error("insufficient {component} on `{site}`: requested {requested}, available {available}")]
    InsufficientCapacity {
        site: String,
        component: &'static str,
        requested: u64,
        available: u64,
    },
    #[error("unknown allocation {0}")]
    UnknownAllocation(AllocationId),
    #[error("no path from `{0}` to `{1}`")]
    Unreachable(NodeId, NodeId),
    #[error("unknown topology preset `{0}`")]
    UnknownPreset(String),
    #[error("topology file: {0}")]
    Format(String),
}

pub type Result<T, E = SdiError> = std::result::Result<T, E>;
