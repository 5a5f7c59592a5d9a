use std::collections::BTreeMap;
use std::sync::Arc;

use super::spec::{AllocationRecord, TopologySpec};
use super::topology::build_topology;
use super::{
    Allocation, AllocationId, LinkId, NodeId, ResourceVector, Result, SdiError, Site, Topology,
};

/// A topology plus the reservations currently held on it.
///
/// Cloning yields an independent copy: the graph itself is immutable and
/// shared, every mutable table is owned per clone.
#[derive(Debug, Clone)]
pub struct TopologyState {
    topology: Arc<Topology>,
    allocations: BTreeMap<AllocationId, Allocation>,
    node_used: BTreeMap<NodeId, ResourceVector>,
    link_used: Vec<u64>,
    next_id: u64,
}

impl PartialEq for TopologyState {
    fn eq(&self, other: &Self) -> bool {
        // The id counter is bookkeeping, not state.
        self.topology == other.topology
            && self.allocations == other.allocations
            && self.node_used == other.node_used
            && self.link_used == other.link_used
    }
}

impl TopologyState {
    pub fn new(topology: Topology) -> Self {
        Self::from_shared(Arc::new(topology))
    }

    pub fn from_shared(topology: Arc<Topology>) -> Self {
        let link_used = vec![0; topology.links().len()];
        TopologyState {
            topology,
            allocations: BTreeMap::new(),
            node_used: BTreeMap::new(),
            link_used,
            next_id: 1,
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn shared_topology(&self) -> Arc<Topology> {
        Arc::clone(&self.topology)
    }

    pub fn allocations(&self) -> impl Iterator<Item = &Allocation> {
        self.allocations.values()
    }

    pub fn allocation(&self, id: AllocationId) -> Option<&Allocation> {
        self.allocations.get(&id)
    }

    pub fn used(&self, node: &NodeId) -> ResourceVector {
        self.node_used.get(node).copied().unwrap_or_default()
    }

    pub fn residual(&self, node: &NodeId) -> Result<ResourceVector> {
        let n = self
            .topology
            .node(node)
            .ok_or_else(|| SdiError::UnknownNode(node.clone()))?;
        Ok(n.capacity - self.used(node))
    }

    pub fn link_used(&self, link: LinkId) -> u64 {
        self.link_used.get(link).copied().unwrap_or(0)
    }

    pub fn link_residual(&self, link: LinkId) -> Result<u64> {
        let l = self.topology.link(link).ok_or(SdiError::UnknownLink(link))?;
        Ok(l.bandwidth - self.link_used[link])
    }

    /// Smallest residual bandwidth along a list of links (`u64::MAX` if empty).
    pub fn path_residual_bandwidth(&self, links: &[LinkId]) -> u64 {
        links
            .iter()
            .map(|&l| self.topology.links()[l].bandwidth - self.link_used[l])
            .min()
            .unwrap_or(u64::MAX)
    }

    /// Reserves `resources` on a node for `owner`.
    pub fn allocate(
        &mut self,
        node: &NodeId,
        resources: ResourceVector,
        owner: &str,
    ) -> Result<Allocation> {
        let residual = self.residual(node)?;
        if let Some(component) = resources.first_exceeding(&residual) {
            let pick = |r: &ResourceVector| {
                r.components().into_iter().find(|(n, _)| *n == component).unwrap().1
            };
            return Err(SdiError::InsufficientCapacity {
                site: node.to_string(),
                component,
                requested: pick(&resources),
                available: pick(&residual),
            });
        }
        let used = self.node_used.entry(node.clone()).or_default();
        *used = *used + resources;
        Ok(self.record(Site::Node(node.clone()), resources, owner))
    }

    /// Reserves bandwidth on a single link for `owner`.
    pub fn reserve_link(&mut self, link: LinkId, bandwidth: u64, owner: &str) -> Result<Allocation> {
        let available = self.link_residual(link)?;
        if bandwidth > available {
            return Err(SdiError::InsufficientCapacity {
                site: format!("link {link}"),
                component: "bandwidth",
                requested: bandwidth,
                available,
            });
        }
        self.link_used[link] += bandwidth;
        Ok(self.record(Site::Link(link), ResourceVector { bandwidth, ..ResourceVector::ZERO }, owner))
    }

    fn record(&mut self, site: Site, resources: ResourceVector, owner: &str) -> Allocation {
        let id = AllocationId(self.next_id);
        self.next_id += 1;
        let alloc = Allocation { id, site, resources, owner: owner.to_owned() };
        self.allocations.insert(id, alloc.clone());
        alloc
    }

    /// Returns an allocation's resources to its site.
    pub fn release(&mut self, id: AllocationId) -> Result<()> {
        let alloc = self.allocations.remove(&id).ok_or(SdiError::UnknownAllocation(id))?;
        match &alloc.site {
            Site::Node(node) => {
                let used = self.node_used.get_mut(node).expect("allocation node tracked");
                *used = *used - alloc.resources;
                if used.is_zero() {
                    self.node_used.remove(node);
                }
            }
            Site::Link(link) => self.link_used[*link] -= alloc.resources.bandwidth,
        }
        Ok(())
    }

    /// Releases every allocation held by `owner`.
    pub fn release_owner(&mut self, owner: &str) -> usize {
        let ids: Vec<_> = self
            .allocations
            .values()
            .filter(|a| a.owner == owner)
            .map(|a| a.id)
            .collect();
        for id in &ids {
            self.release(*id).expect("listed allocation exists");
        }
        ids.len()
    }

    /// Deep copy for sandbox evaluation.
    pub fn clone_state(&self) -> TopologyState {
        self.clone()
    }

    /// Checks that residual + reservations = capacity on every node and link
    /// and that nothing is over-committed. Returns a description of the
    /// first violation.
    pub fn check_conservation(&self) -> std::result::Result<(), String> {
        let mut node_sum: BTreeMap<&NodeId, ResourceVector> = BTreeMap::new();
        let mut link_sum = vec![0u64; self.link_used.len()];
        for a in self.allocations.values() {
            match &a.site {
                Site::Node(n) => {
                    let e = node_sum.entry(n).or_default();
                    *e = e.checked_add(&a.resources).ok_or("overflow")?;
                }
                Site::Link(l) => link_sum[*l] += a.resources.bandwidth,
            }
        }
        for node in self.topology.nodes() {
            let sum = node_sum.get(&node.id).copied().unwrap_or_default();
            if sum != self.used(&node.id) {
                return Err(format!("node {} bookkeeping drift", node.id));
            }
            if let Some(c) = sum.first_exceeding(&node.capacity) {
                return Err(format!("node {} over capacity on {c}", node.id));
            }
        }
        for (i, link) in self.topology.links().iter().enumerate() {
            if link_sum[i] != self.link_used[i] {
                return Err(format!("link {i} bookkeeping drift"));
            }
            if link_sum[i] > link.bandwidth {
                return Err(format!("link {i} over capacity"));
            }
        }
        Ok(())
    }

    pub fn to_spec(&self) -> TopologySpec {
        let mut spec = self.topology.to_spec();
        spec.allocations = self
            .allocations
            .values()
            .map(|a| {
                let (node, link) = match &a.site {
                    Site::Node(n) => (Some(n.clone()), None),
                    Site::Link(l) => (None, Some(*l)),
                };
                AllocationRecord {
                    id: a.id.0,
                    node,
                    link,
                    owner: a.owner.clone(),
                    cpu: a.resources.cpu,
                    mem: a.resources.mem,
                    storage: a.resources.storage,
                    bandwidth: a.resources.bandwidth,
                }
            })
            .collect();
        spec
    }

    /// Serialized form: the topology description plus an allocations section.
    pub fn serialize(&self) -> String {
        self.to_spec().to_toml()
    }

    pub fn from_spec(spec: &TopologySpec) -> Result<Self> {
        let mut state = TopologyState::new(build_topology(spec)?);
        let mut max_id = 0;
        for rec in &spec.allocations {
            let resources = ResourceVector::new(rec.cpu, rec.mem, rec.storage, rec.bandwidth);
            let alloc = match (&rec.node, rec.link) {
                (Some(node), None) => state.allocate(node, resources, &rec.owner)?,
                (None, Some(link)) => state.reserve_link(link, rec.bandwidth, &rec.owner)?,
                _ => {
                    return Err(SdiError::Format(format!(
                        "allocation {} must name exactly one of node/link",
                        rec.id
                    )))
                }
            };
            // Re-key under the recorded id.
            let mut alloc = state.allocations.remove(&alloc.id).expect("just inserted");
            alloc.id = AllocationId(rec.id);
            if state.allocations.insert(alloc.id, alloc).is_some() {
                return Err(SdiError::Format(format!("duplicate allocation id {}", rec.id)));
            }
            max_id = max_id.max(rec.id);
        }
        state.next_id = max_id + 1;
        Ok(state)
    }
}
