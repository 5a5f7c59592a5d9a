//! MKL-chains: the steps of a MAPE-K loop arranged as a DAG, each step naming
//! the function it runs and the QoS it needs from the infrastructure.
//!
//! A chain is validated ([`validate_chain`]), embedded onto compute nodes
//! ([`embed`]), and its Analyze outputs are turned into knob writes by an
//! [`ActionCatalog`].

mod catalog;
mod embed;
mod validate;

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::cmp::Reverse;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sdi::{NodeId, ResourceVector, Tier, Topology};

pub use catalog::{catalog_translate, ActionCatalog, ActionProposal, AnalysisOutput, CatalogEntry, CatalogError, KnobView};
pub use embed::{
    embed, embed_bruteforce, embed_with_budget, plan_embedding, reserve_embedding, verify_embedding, EdgeRoute, EmbedError, Embedding,
    StepPlacement, BRUTEFORCE_LIMIT, DEFAULT_EXPANSION_BUDGET,
};
pub use validate::{validate_chain, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Monitor,
    Analyze,
    Plan,
    Execute,
    Knowledge,
}

impl StepKind {
    pub const ALL: [StepKind; 5] =
        [StepKind::Monitor, StepKind::Analyze, StepKind::Plan, StepKind::Execute, StepKind::Knowledge];

    /// Position in the M, A, P, E order; Knowledge is outside it.
    pub fn rank(self) -> Option<u8> {
        match self {
            StepKind::Monitor => Some(0),
            StepKind::Analyze => Some(1),
            StepKind::Plan => Some(2),
            StepKind::Execute => Some(3),
            StepKind::Knowledge => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Monitor => "monitor",
            StepKind::Analyze => "analyze",
            StepKind::Plan => "plan",
            StepKind::Execute => "execute",
            StepKind::Knowledge => "knowledge",
        }
    }
}

impl std::fmt::Display for StepKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a step needs from the node it runs on and from the path that feeds it.
///
/// Latency, bandwidth and reliability bounds apply to every incoming edge of
/// the step; reliability is also required of the hosting node.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct QosRequirements {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_latency_ms: Option<f64>,
    /// Mb/s reserved on every link of each incoming path.
    pub min_bandwidth: u64,
    /// Millicores.
    pub cpu: u64,
    /// MiB.
    pub mem: u64,
    /// MiB.
    pub storage: u64,
    pub min_reliability: f64,
    /// Regions the step may run in; empty means anywhere.
    pub coverage: Vec<String>,
}

impl QosRequirements {
    pub fn demand(&self) -> ResourceVector {
        ResourceVector::new(self.cpu, self.mem, self.storage, 0)
    }
}

pub type Params = toml::Table;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MklStep {
    pub name: String,
    pub kind: StepKind,
    /// Registered function name, prefixed by its kind (`analyze.setpoint`).
    pub function: String,
    #[serde(default)]
    pub qos: QosRequirements,
    #[serde(default, skip_serializing_if = "toml::Table::is_empty")]
    pub params: Params,
}

impl MklStep {
    pub fn new(name: &str, kind: StepKind, function: &str) -> Self {
        MklStep { name: name.into(), kind, function: function.into(), qos: QosRequirements::default(), params: Params::new() }
    }

    pub fn with_qos(mut self, qos: QosRequirements) -> Self {
        self.qos = qos;
        self
    }

    pub fn with_param(mut self, key: &str, value: impl Into<toml::Value>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    pub fn param_f64(&self, key: &str) -> Option<f64> {
        match self.params.get(key)? {
            toml::Value::Float(f) => Some(*f),
            toml::Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn param_str(&self, key: &str) -> Option<&str> {
        self.params.get(key)?.as_str()
    }
}

/// Nodes and regions a chain's data comes from or acts upon.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Domain {
    pub nodes: Vec<NodeId>,
    pub regions: Vec<String>,
}

impl Domain {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.regions.is_empty()
    }

    /// Compute nodes named directly or lying in a listed region, sorted.
    pub fn resolve(&self, topology: &Topology) -> Vec<NodeId> {
        let set: BTreeSet<NodeId> = topology
            .compute_nodes()
            .filter(|n| self.nodes.contains(&n.id) || self.regions.contains(&n.region))
            .map(|n| n.id.clone())
            .collect();
        set.into_iter().collect()
    }
}

/// Network-application-level loops act inside the operator's domain;
/// over-the-top loops serve applications outside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    #[default]
    Nal,
    Ott,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MklChain {
    pub id: String,
    #[serde(default)]
    pub category: Category,
    /// Lower value takes precedence in arbitration.
    pub priority: u32,
    /// Falls back to the tier's period when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tick_period_ms: Option<u64>,
    #[serde(default = "default_tier")]
    pub tier: Tier,
    #[serde(default)]
    pub source_domain: Domain,
    #[serde(default)]
    pub destination_domain: Domain,
    pub steps: Vec<MklStep>,
    /// Data-flow edges by step name. When absent, steps form a line in
    /// declaration order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[String; 2]>>,
}

fn default_tier() -> Tier {
    Tier::Edge
}

#[derive(Debug, Error)]
pub enum ChainFileError {
    #[error("chain file {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("chain file: {0}")]
    Parse(String),
}

impl MklChain {
    pub fn linear(id: &str, priority: u32, steps: Vec<MklStep>) -> Self {
        MklChain {
            id: id.into(),
            category: Category::Nal,
            priority,
            tick_period_ms: None,
            tier: Tier::Edge,
            source_domain: Domain::default(),
            destination_domain: Domain::default(),
            steps,
            edges: None,
        }
    }

    pub fn step_index(&self, name: &str) -> Option<usize> {
        self.steps.iter().position(|s| s.name == name)
    }

    pub fn has_kind(&self, kind: StepKind) -> bool {
        self.steps.iter().any(|s| s.kind == kind)
    }

    /// Edges as step indices. Edges naming unknown steps are dropped; the
    /// validator reports them.
    pub fn edge_indices(&self) -> Vec<(usize, usize)> {
        match &self.edges {
            None => (1..self.steps.len()).map(|i| (i - 1, i)).collect(),
            Some(edges) => edges
                .iter()
                .filter_map(|[a, b]| Some((self.step_index(a)?, self.step_index(b)?)))
                .collect(),
        }
    }

    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut preds = vec![Vec::new(); self.steps.len()];
        for (a, b) in self.edge_indices() {
            preds[b].push(a);
        }
        preds
    }

    /// Topological order, smallest declaration index first among ready
    /// steps; `None` if the edges contain a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.steps.len();
        let mut indegree = vec![0usize; n];
        let mut succ: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (a, b) in self.edge_indices() {
            indegree[b] += 1;
            succ.entry(a).or_default().push(b);
        }
        let mut ready: BinaryHeap<Reverse<usize>> =
            (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(i)) = ready.pop() {
            order.push(i);
            for &j in succ.get(&i).map(Vec::as_slice).unwrap_or(&[]) {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.push(Reverse(j));
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn from_toml(text: &str) -> Result<Self, ChainFileError> {
        toml::from_str(text).map_err(|e| ChainFileError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("chain serializes")
    }

    pub fn load(path: &Path) -> Result<Self, ChainFileError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ChainFileError::Read { path: path.display().to_string(), reason: e.to_string() })?;
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn mape_k() -> MklChain {
        MklChain::linear(
            "loop",
            1,
            vec![
                MklStep::new("m", StepKind::Monitor, "monitor.knob"),
                MklStep::new("a", StepKind::Analyze, "analyze.setpoint"),
                MklStep::new("p", StepKind::Plan, "plan.catalog"),
                MklStep::new("e", StepKind::Execute, "execute.apply"),
                MklStep::new("k", StepKind::Knowledge, "knowledge.store"),
            ],
        )
    }

    #[test]
    fn default_edges_follow_declaration() {
        let c = mape_k();
        assert_eq!(c.edge_indices(), vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
        assert_eq!(c.topological_order(), Some(vec![0, 1, 2, 3, 4]));
    }

    #[test]
    fn cycle_has_no_order() {
        let mut c = mape_k();
        c.edges = Some(vec![["m".into(), "a".into()], ["a".into(), "m".into()]]);
        assert_eq!(c.topological_order(), None);
    }

    #[test]
    fn toml_round_trip() {
        let mut c = mape_k();
        c.steps[1] = c.steps[1].clone().with_param("setpoint", 1500).with_qos(QosRequirements {
            max_latency_ms: Some(20.0),
            cpu: 250,
            coverage: vec!["toronto".into()],
            ..Default::default()
        });
        c.tick_period_ms = Some(10);
        c.destination_domain.nodes.push(NodeId::from("tor-vm4"));
        let back = MklChain::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.steps[1].param_f64("setpoint"), Some(1500.0));
    }

    #[test]
    fn domain_resolves_regions_and_nodes() {
        let topo = crate::sdi::paper_topology();
        let d = Domain { nodes: vec!["core-vm1".into()], regions: vec!["calgary".into()] };
        let r = d.resolve(&topo);
        assert_eq!(r.len(), 6);
        assert!(r.iter().all(|n| !topo.is_switch(n)));
    }
}
