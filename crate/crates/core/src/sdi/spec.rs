//! TOML schema for topology descriptions and serialized topology state.
//!
//! ```toml
//! regions = ["core", "toronto"]
//!
//! [[nodes]]
//! id = "core-vm1"
//! region = "core"
//! tier = "core"
//! cpu = 8000          # millicores
//! mem = 16384         # MiB
//! storage = 102400    # MiB
//! bandwidth = 10000   # Mb/s, interface capacity (optional, default 1000)
//! reliability = 0.999
//!
//! [[switches]]
//! id = "core-sw1"
//! region = "core"
//! tier = "core"
//!
//! [[links]]
//! a = "core-vm1"
//! b = "core-sw1"
//! bandwidth = 1000    # Mb/s
//! latency = 1.0       # ms
//! reliability = 0.999
//!
//! # state files only
//! [[allocations]]
//! id = 3
//! node = "core-vm1"   # or `link = <index>`
//! owner = "mkl-1"
//! cpu = 500
//! ```

use serde::{Deserialize, Serialize};

use super::{NodeId, SdiError, Tier};

fn default_bandwidth() -> u64 {
    1000
}

fn default_reliability() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    pub region: String,
    pub tier: Tier,
    pub cpu: u64,
    pub mem: u64,
    pub storage: u64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: u64,
    #[serde(default = "default_reliability")]
    pub reliability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchSpec {
    pub id: NodeId,
    pub region: String,
    pub tier: Tier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub a: NodeId,
    pub b: NodeId,
    pub bandwidth: u64,
    pub latency: f64,
    #[serde(default = "default_reliability")]
    pub reliability: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationRecord {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<usize>,
    pub owner: String,
    #[serde(default)]
    pub cpu: u64,
    #[serde(default)]
    pub mem: u64,
    #[serde(default)]
    pub storage: u64,
    #[serde(default)]
    pub bandwidth: u64,
}

/// Topology description. State files add an `allocations` section.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    #[serde(default)]
    pub regions: Vec<String>,
    #[serde(default)]
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub switches: Vec<SwitchSpec>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub allocations: Vec<AllocationRecord>,
}

impl TopologySpec {
    pub fn from_toml(text: &str) -> Result<Self, SdiError> {
        toml::from_str(text).map_err(|e| SdiError::Format(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("topology spec serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SdiError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SdiError::Format(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}
