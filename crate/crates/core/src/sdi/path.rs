use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::{LinkId, NodeId, Result, SdiError, Topology};

/// Metrics of the minimum-latency path between two nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMetrics {
    pub latency_ms: f64,
    /// Bottleneck link capacity in Mb/s; `u64::MAX` for a zero-hop path.
    pub min_bandwidth: u64,
    pub reliability: f64,
    pub hops: Vec<NodeId>,
    pub links: Vec<LinkId>,
}

impl PathMetrics {
    fn local(node: &NodeId) -> Self {
        PathMetrics {
            latency_ms: 0.0,
            min_bandwidth: u64::MAX,
            reliability: 1.0,
            hops: vec![node.clone()],
            links: Vec::new(),
        }
    }
}

#[derive(Clone)]
struct Label {
    latency: f64,
    hops: Vec<NodeId>,
    links: Vec<LinkId>,
}

impl Label {
    fn better_than(&self, other: &Label) -> bool {
        match self.latency.total_cmp(&other.latency) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.hops < other.hops,
        }
    }
}

/// Minimum-latency path from `src` to `dst`.
///
/// Latencies add, bandwidth is the minimum over links and reliabilities
/// multiply. Equal-latency paths are resolved by the lexicographically
/// smallest node-id sequence.
pub fn path_metrics(topology: &Topology, src: &NodeId, dst: &NodeId) -> Result<PathMetrics> {
    for id in [src, dst] {
        if !topology.contains(id) {
            return Err(SdiError::UnknownNode(id.clone()));
        }
    }
    if src == dst {
        return Ok(PathMetrics::local(src));
    }

    // Dense label-setting search; graphs here are tens of nodes.
    let mut best: BTreeMap<NodeId, Label> = BTreeMap::new();
    let mut settled: BTreeMap<NodeId, Label> = BTreeMap::new();
    best.insert(src.clone(), Label { latency: 0.0, hops: vec![src.clone()], links: Vec::new() });

    while let Some(current) = pick_min(&best) {
        let label = best.remove(&current).expect("present");
        if &current == dst {
            settled.insert(current, label);
            break;
        }
        for &lid in topology.incident(&current) {
            let link = &topology.links()[lid];
            let next = link.other(&current);
            if settled.contains_key(next) || label.hops.contains(next) {
                continue;
            }
            let mut hops = label.hops.clone();
            hops.push(next.clone());
            let mut links = label.links.clone();
            links.push(lid);
            let candidate = Label { latency: label.latency + link.latency_ms, hops, links };
            let replace = best.get(next).map_or(true, |cur| candidate.better_than(cur));
            if replace {
                best.insert(next.clone(), candidate);
            }
        }
        settled.insert(current, label);
    }

    let label = settled
        .remove(dst)
        .ok_or_else(|| SdiError::Unreachable(src.clone(), dst.clone()))?;
    Ok(metrics_of(topology, label.hops, label.links))
}

fn pick_min(frontier: &BTreeMap<NodeId, Label>) -> Option<NodeId> {
    let mut it = frontier.iter();
    let (mut id, mut label) = it.next()?;
    for (i, l) in it {
        if l.better_than(label) {
            id = i;
            label = l;
        }
    }
    Some(id.clone())
}

pub(crate) fn metrics_of(topology: &Topology, hops: Vec<NodeId>, links: Vec<LinkId>) -> PathMetrics {
    let mut latency_ms = 0.0;
    let mut min_bandwidth = u64::MAX;
    let mut reliability = 1.0;
    for &l in &links {
        let link = &topology.links()[l];
        latency_ms += link.latency_ms;
        min_bandwidth = min_bandwidth.min(link.bandwidth);
        reliability *= link.reliability;
    }
    PathMetrics { latency_ms, min_bandwidth, reliability, hops, links }
}
