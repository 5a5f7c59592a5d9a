use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::spec::{LinkSpec, NodeSpec, SwitchSpec, TopologySpec};
use super::{ComputeNode, Link, LinkId, NodeId, ResourceVector, Result, SdiError};

/// Validated, connected infrastructure graph.
///
/// Switches are stored as ordinary nodes with zero capacity and are also
/// listed in [`Topology::switches`].
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    regions: Vec<String>,
    nodes: BTreeMap<NodeId, ComputeNode>,
    switches: BTreeSet<NodeId>,
    links: Vec<Link>,
    adjacency: BTreeMap<NodeId, Vec<LinkId>>,
}

impl Topology {
    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ComputeNode> {
        self.nodes.values()
    }

    pub fn node(&self, id: &NodeId) -> Option<&ComputeNode> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_switch(&self, id: &NodeId) -> bool {
        self.switches.contains(id)
    }

    pub fn switches(&self) -> &BTreeSet<NodeId> {
        &self.switches
    }

    /// Nodes that can host workloads, in id order.
    pub fn compute_nodes(&self) -> impl Iterator<Item = &ComputeNode> {
        self.nodes.values().filter(|n| !self.switches.contains(&n.id))
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> Option<&Link> {
        self.links.get(id)
    }

    /// Links incident to `id`, in declaration order.
    pub fn incident(&self, id: &NodeId) -> &[LinkId] {
        self.adjacency.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn to_spec(&self) -> TopologySpec {
        let mut spec = TopologySpec { regions: self.regions.clone(), ..Default::default() };
        for node in self.nodes.values() {
            if self.switches.contains(&node.id) {
                spec.switches.push(SwitchSpec {
                    id: node.id.clone(),
                    region: node.region.clone(),
                    tier: node.tier,
                });
            } else {
                spec.nodes.push(NodeSpec {
                    id: node.id.clone(),
                    region: node.region.clone(),
                    tier: node.tier,
                    cpu: node.capacity.cpu,
                    mem: node.capacity.mem,
                    storage: node.capacity.storage,
                    bandwidth: node.capacity.bandwidth,
                    reliability: node.reliability,
                });
            }
        }
        spec.links = self
            .links
            .iter()
            .map(|l| LinkSpec {
                a: l.a.clone(),
                b: l.b.clone(),
                bandwidth: l.bandwidth,
                latency: l.latency_ms,
                reliability: l.reliability,
            })
            .collect();
        spec
    }
}

fn check_probability(item: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SdiError::InvalidAttribute {
            item: item.to_owned(),
            reason: format!("reliability {p} outside [0, 1]"),
        })
    }
}

/// Validates a description and builds the topology graph.
pub fn build_topology(spec: &TopologySpec) -> Result<Topology> {
    let regions: BTreeSet<&str> = spec.regions.iter().map(String::as_str).collect();
    let check_region = |id: &NodeId, region: &str| {
        if regions.is_empty() || regions.contains(region) {
            Ok(())
        } else {
            Err(SdiError::UnknownRegion { node: id.clone(), region: region.to_owned() })
        }
    };

    let mut nodes = BTreeMap::new();
    let mut switches = BTreeSet::new();
    for n in &spec.nodes {
        check_region(&n.id, &n.region)?;
        check_probability(n.id.as_str(), n.reliability)?;
        let node = ComputeNode {
            id: n.id.clone(),
            region: n.region.clone(),
            tier: n.tier,
            capacity: ResourceVector::new(n.cpu, n.mem, n.storage, n.bandwidth),
            reliability: n.reliability,
        };
        if nodes.insert(n.id.clone(), node).is_some() {
            return Err(SdiError::DuplicateNode(n.id.clone()));
        }
    }
    for s in &spec.switches {
        check_region(&s.id, &s.region)?;
        let node = ComputeNode {
            id: s.id.clone(),
            region: s.region.clone(),
            tier: s.tier,
            capacity: ResourceVector::ZERO,
            reliability: 1.0,
        };
        if nodes.insert(s.id.clone(), node).is_some() {
            return Err(SdiError::DuplicateNode(s.id.clone()));
        }
        switches.insert(s.id.clone());
    }
    if nodes.is_empty() {
        return Err(SdiError::Empty);
    }

    let mut links = Vec::with_capacity(spec.links.len());
    let mut adjacency: BTreeMap<NodeId, Vec<LinkId>> = BTreeMap::new();
    let mut seen_pairs = BTreeSet::new();
    for l in &spec.links {
        for end in [&l.a, &l.b] {
            if !nodes.contains_key(end) {
                return Err(SdiError::DanglingEndpoint(end.clone()));
            }
        }
        if l.a == l.b {
            return Err(SdiError::SelfLoop(l.a.clone()));
        }
        let item = format!("{}-{}", l.a, l.b);
        if l.bandwidth == 0 {
            return Err(SdiError::InvalidAttribute { item, reason: "bandwidth must be > 0".into() });
        }
        if !(l.latency.is_finite() && l.latency >= 0.0) {
            return Err(SdiError::InvalidAttribute { item, reason: "latency must be >= 0".into() });
        }
        check_probability(&item, l.reliability)?;
        let pair = if l.a < l.b { (l.a.clone(), l.b.clone()) } else { (l.b.clone(), l.a.clone()) };
        if !seen_pairs.insert(pair) {
            return Err(SdiError::DuplicateLink(l.a.clone(), l.b.clone()));
        }
        let id = links.len();
        adjacency.entry(l.a.clone()).or_default().push(id);
        adjacency.entry(l.b.clone()).or_default().push(id);
        links.push(Link {
            a: l.a.clone(),
            b: l.b.clone(),
            bandwidth: l.bandwidth,
            latency_ms: l.latency,
            reliability: l.reliability,
        });
    }

    let topology = Topology {
        regions: spec.regions.clone(),
        nodes,
        switches,
        links,
        adjacency,
    };
    check_connected(&topology)?;
    Ok(topology)
}

fn check_connected(t: &Topology) -> Result<()> {
    let start = t.nodes.keys().next().expect("non-empty");
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(n) = queue.pop_front() {
        for &l in t.incident(&n) {
            let next = t.links[l].other(&n);
            if seen.insert(next.clone()) {
                queue.push_back(next.clone());
            }
        }
    }
    match t.nodes.keys().find(|id| !seen.contains(*id)) {
        Some(missing) => Err(SdiError::Disconnected(missing.clone())),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdi::Tier;

    fn node(id: &str) -> NodeSpec {
        NodeSpec {
            id: id.into(),
            region: "r".into(),
            tier: Tier::Edge,
            cpu: 4000,
            mem: 4096,
            storage: 1024,
            bandwidth: 1000,
            reliability: 0.99,
        }
    }

    fn link(a: &str, b: &str) -> LinkSpec {
        LinkSpec { a: a.into(), b: b.into(), bandwidth: 100, latency: 5.0, reliability: 0.99 }
    }

    #[test]
    fn single_node_is_valid() {
        let spec = TopologySpec { nodes: vec![node("a")], ..Default::default() };
        let t = build_topology(&spec).unwrap();
        assert_eq!(t.node_count(), 1);
        assert!(t.links().is_empty());
    }

    #[test]
    fn dangling_endpoint_rejected() {
        let spec = TopologySpec {
            nodes: vec![node("a")],
            links: vec![link("a", "ghost")],
            ..Default::default()
        };
        assert_eq!(build_topology(&spec), Err(SdiError::DanglingEndpoint("ghost".into())));
    }

    #[test]
    fn duplicate_and_disconnected_rejected() {
        let dup = TopologySpec { nodes: vec![node("a"), node("a")], ..Default::default() };
        assert_eq!(build_topology(&dup), Err(SdiError::DuplicateNode("a".into())));

        let split = TopologySpec { nodes: vec![node("a"), node("b")], ..Default::default() };
        assert_eq!(build_topology(&split), Err(SdiError::Disconnected("b".into())));
    }

    #[test]
    fn switches_have_zero_capacity() {
        let spec = TopologySpec {
            nodes: vec![node("a")],
            switches: vec![SwitchSpec { id: "s".into(), region: "r".into(), tier: Tier::Core }],
            links: vec![link("a", "s")],
            ..Default::default()
        };
        let t = build_topology(&spec).unwrap();
        assert!(t.is_switch(&"s".into()));
        assert!(t.node(&"s".into()).unwrap().capacity.is_zero());
        assert_eq!(t.compute_nodes().count(), 1);
    }

    #[test]
    fn spec_round_trip() {
        let spec = TopologySpec {
            regions: vec!["r".into()],
            nodes: vec![node("a"), node("b")],
            links: vec![link("a", "b")],
            ..Default::default()
        };
        let t = build_topology(&spec).unwrap();
        let again = build_topology(&TopologySpec::from_toml(&t.to_spec().to_toml()).unwrap()).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn bad_attributes_rejected() {
        let mut n = node("a");
        n.reliability = 1.5;
        assert!(matches!(
            build_topology(&TopologySpec { nodes: vec![n], ..Default::default() }),
            Err(SdiError::InvalidAttribute { .. })
        ));
        let mut l = link("a", "b");
        l.bandwidth = 0;
        assert!(matches!(
            build_topology(&TopologySpec {
                nodes: vec![node("a"), node("b")],
                links: vec![l],
                ..Default::default()
            }),
            Err(SdiError::InvalidAttribute { .. })
        ));
    }
}
