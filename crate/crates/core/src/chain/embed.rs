//! Placement of chain steps onto compute nodes.
//!
//! The objective is total latency: the sum over data-flow edges of the
//! minimum-latency path between the hosting nodes, plus, for steps without
//! predecessors, the latency from the nearest source-domain node. Each edge
//! reserves the downstream step's `min_bandwidth` on every link of its path.
//! Switches never host steps.
//!
//! [`embed`] walks the steps in topological order and tries candidate nodes in
//! increasing added latency, then by how many of the following steps the node
//! could also host, then spare cpu, then node id, backtracking on dead ends. Search
//! depth never exceeds the number of steps; the number of node expansions is
//! capped, and exhausting the cap yields [`EmbedError::InfeasibleBySearch`]
//! rather than a proof of infeasibility. [`embed_bruteforce`] enumerates every
//! assignment and serves as the oracle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{validate_chain, MklChain};
use crate::sdi::{path_metrics, AllocationId, LinkId, NodeId, PathMetrics, ResourceVector, SdiError, TopologyState};

pub const DEFAULT_EXPANSION_BUDGET: usize = 200_000;
/// Largest `nodes^steps` the exhaustive search accepts.
pub const BRUTEFORCE_LIMIT: u128 = 1_000_000;

const STATIC_CONSTRAINTS: [&str; 5] = ["cpu", "mem", "storage", "coverage", "reliability"];

#[derive(Debug, Error, PartialEq)]
pub enum EmbedError {
    #[error("chain is invalid: {0}")]
    InvalidChain(String),
    #[error("infeasible: step `{step}` cannot satisfy {constraint}")]
    Infeasible { step: String, constraint: &'static str },
    #[error("no placement found within {0} expansions")]
    InfeasibleBySearch(usize),
    #[error("{0} assignments exceed the exhaustive-search limit")]
    TooLarge(u128),
    #[error(transparent)]
    Sdi(#[from] SdiError),
}

impl EmbedError {
    /// True for verdicts that prove no placement exists.
    pub fn is_proven_infeasible(&self) -> bool {
        matches!(self, EmbedError::Infeasible { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPlacement {
    pub step: String,
    pub node: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRoute {
    pub from: String,
    pub to: String,
    pub hops: Vec<NodeId>,
    pub links: Vec<LinkId>,
    pub latency_ms: f64,
    pub reliability: f64,
    /// Reserved on each link of the path.
    pub bandwidth: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub chain_id: String,
    /// In step declaration order.
    pub placements: Vec<StepPlacement>,
    pub routes: Vec<EdgeRoute>,
    pub attach_latency_ms: f64,
    pub total_latency_ms: f64,
    /// Reservations made for this embedding; empty for a dry plan.
    #[serde(default)]
    pub allocations: Vec<AllocationId>,
}

impl Embedding {
    pub fn node_of(&self, step: &str) -> Option<&NodeId> {
        self.placements.iter().find(|p| p.step == step).map(|p| &p.node)
    }
}

struct Problem<'a> {
    chain: &'a MklChain,
    nodes: Vec<NodeId>,
    region: Vec<String>,
    reliability: Vec<f64>,
    residual: Vec<ResourceVector>,
    link_residual: Vec<u64>,
    paths: Vec<Vec<PathMetrics>>,
    /// `[step][node]` latency from the source domain; zero for steps with
    /// predecessors or when the domain is empty.
    attach: Vec<Vec<f64>>,
    preds: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    order: Vec<usize>,
}

impl<'a> Problem<'a> {
    fn new(chain: &'a MklChain, state: &TopologyState) -> Result<Self, EmbedError> {
        let report = validate_chain(chain);
        if !report.is_valid() {
            return Err(EmbedError::InvalidChain(report.violations.join("; ")));
        }
        let topo = state.topology();
        let compute: Vec<_> = topo.compute_nodes().collect();
        let nodes: Vec<NodeId> = compute.iter().map(|n| n.id.clone()).collect();
        let mut paths = Vec::with_capacity(nodes.len());
        for a in &nodes {
            let row = nodes.iter().map(|b| path_metrics(topo, a, b)).collect::<Result<Vec<_>, _>>()?;
            paths.push(row);
        }
        let sources: Vec<usize> = chain
            .source_domain
            .resolve(topo)
            .iter()
            .filter_map(|id| nodes.iter().position(|n| n == id))
            .collect();
        let preds = chain.predecessors();
        let attach = (0..chain.steps.len())
            .map(|s| {
                (0..nodes.len())
                    .map(|n| {
                        if !preds[s].is_empty() || sources.is_empty() {
                            0.0
                        } else {
                            sources.iter().map(|&src| paths[src][n].latency_ms).fold(f64::INFINITY, f64::min)
                        }
                    })
                    .collect()
            })
            .collect();
        let residual = nodes.iter().map(|n| state.residual(n)).collect::<Result<Vec<_>, _>>()?;
        let link_residual = (0..topo.links().len()).map(|l| state.link_residual(l)).collect::<Result<Vec<_>, _>>()?;
        Ok(Problem {
            chain,
            region: compute.iter().map(|n| n.region.clone()).collect(),
            reliability: compute.iter().map(|n| n.reliability).collect(),
            nodes,
            residual,
            link_residual,
            paths,
            attach,
            preds,
            edges: chain.edge_indices(),
            order: chain.topological_order().expect("validated chains are acyclic"),
        })
    }

    fn static_fail(&self, s: usize, n: usize, used: &ResourceVector) -> Option<&'static str> {
        let q = &self.chain.steps[s].qos;
        let total = used.checked_add(&q.demand()).unwrap_or(ResourceVector::new(u64::MAX, u64::MAX, u64::MAX, 0));
        if let Some(c) = total.first_exceeding(&self.residual[n]) {
            return Some(c);
        }
        if !q.coverage.is_empty() && !q.coverage.contains(&self.region[n]) {
            return Some("coverage");
        }
        if self.reliability[n] < q.min_reliability {
            return Some("reliability");
        }
        None
    }

    fn path_fail(&self, s: usize, path: &PathMetrics) -> Option<&'static str> {
        let q = &self.chain.steps[s].qos;
        if q.max_latency_ms.is_some_and(|max| path.latency_ms > max) {
            return Some("latency");
        }
        if path.reliability < q.min_reliability {
            return Some("reliability");
        }
        None
    }

    /// The first constraint, in a fixed order, that no node meets on its own
    /// for some step.
    fn unsatisfiable(&self) -> Option<EmbedError> {
        for step in &self.chain.steps {
            let q = &step.qos;
            for c in STATIC_CONSTRAINTS {
                let ok = (0..self.nodes.len()).any(|n| match c {
                    "cpu" => q.cpu <= self.residual[n].cpu,
                    "mem" => q.mem <= self.residual[n].mem,
                    "storage" => q.storage <= self.residual[n].storage,
                    "coverage" => q.coverage.is_empty() || q.coverage.contains(&self.region[n]),
                    _ => self.reliability[n] >= q.min_reliability,
                });
                if !ok {
                    return Some(EmbedError::Infeasible { step: step.name.clone(), constraint: c });
                }
            }
        }
        None
    }

    fn cost(&self, assign: &[usize]) -> f64 {
        let mut total = 0.0;
        for s in 0..assign.len() {
            total += self.attach[s][assign[s]];
        }
        for &(a, b) in &self.edges {
            total += self.paths[assign[a]][assign[b]].latency_ms;
        }
        total
    }

    fn build(&self, assign: &[usize]) -> Embedding {
        let steps = &self.chain.steps;
        let placements = steps
            .iter()
            .zip(assign)
            .map(|(s, &n)| StepPlacement { step: s.name.clone(), node: self.nodes[n].clone() })
            .collect();
        let routes = self
            .edges
            .iter()
            .map(|&(a, b)| {
                let p = &self.paths[assign[a]][assign[b]];
                EdgeRoute {
                    from: steps[a].name.clone(),
                    to: steps[b].name.clone(),
                    hops: p.hops.clone(),
                    links: p.links.clone(),
                    latency_ms: p.latency_ms,
                    reliability: p.reliability,
                    bandwidth: steps[b].qos.min_bandwidth,
                }
            })
            .collect();
        let attach_latency_ms = (0..assign.len()).map(|s| self.attach[s][assign[s]]).sum();
        Embedding {
            chain_id: self.chain.id.clone(),
            placements,
            routes,
            attach_latency_ms,
            total_latency_ms: self.cost(assign),
            allocations: Vec::new(),
        }
    }
}

struct Search<'p, 'a> {
    p: &'p Problem<'a>,
    assign: Vec<Option<usize>>,
    node_used: Vec<ResourceVector>,
    link_used: Vec<u64>,
    expansions: usize,
    budget: usize,
    deepest: Option<(usize, usize, &'static str)>,
}

enum Outcome {
    Found,
    Exhausted,
    OutOfBudget,
}

impl Search<'_, '_> {
    /// Added latency of placing `s` on `n`, or the violated constraint.
    fn try_place(&self, s: usize, n: usize) -> Result<(f64, Vec<(LinkId, u64)>), &'static str> {
        if let Some(c) = self.p.static_fail(s, n, &self.node_used[n]) {
            return Err(c);
        }
        let bw = self.p.chain.steps[s].qos.min_bandwidth;
        let mut added = self.p.attach[s][n];
        let mut links: Vec<(LinkId, u64)> = Vec::new();
        for &pred in &self.p.preds[s] {
            let m = self.assign[pred].expect("predecessors are placed first");
            let path = &self.p.paths[m][n];
            if let Some(c) = self.p.path_fail(s, path) {
                return Err(c);
            }
            added += path.latency_ms;
            if bw > 0 {
                links.extend(path.links.iter().map(|&l| (l, bw)));
            }
        }
        let mut extra: Vec<(LinkId, u64)> = Vec::new();
        for (l, b) in links {
            match extra.iter_mut().find(|(x, _)| *x == l) {
                Some(e) => e.1 += b,
                None => extra.push((l, b)),
            }
        }
        if extra.iter().any(|&(l, b)| self.link_used[l] + b > self.p.link_residual[l]) {
            return Err("bandwidth");
        }
        Ok((added, extra))
    }

    fn run(&mut self, depth: usize) -> Outcome {
        if depth == self.p.order.len() {
            return Outcome::Found;
        }
        let s = self.p.order[depth];
        let mut candidates = Vec::new();
        for n in 0..self.p.nodes.len() {
            match self.try_place(s, n) {
                Ok((added, links)) => candidates.push((added, n, links)),
                Err(c) => {
                    if self.deepest.is_none_or(|(d, _, _)| depth >= d) {
                        self.deepest = Some((depth, s, c));
                    }
                }
            }
        }
        // Among equal added latency, prefer the node that could also host
        // the most of the following steps, then the one with most cpu left.
        let demand = self.p.chain.steps[s].qos.demand();
        let lookahead = |n: usize| {
            let mut used = self.node_used[n] + demand;
            let mut fits = 0usize;
            for &next in &self.p.order[depth + 1..] {
                match used.checked_add(&self.p.chain.steps[next].qos.demand()) {
                    Some(u) if u.fits_within(&self.p.residual[n]) => {
                        used = u;
                        fits += 1;
                    }
                    _ => break,
                }
            }
            (fits, self.p.residual[n].cpu - used.cpu)
        };
        let mut keyed: Vec<_> = candidates.into_iter().map(|c| (lookahead(c.1), c)).collect();
        keyed.sort_by(|(ka, a), (kb, b)| a.0.total_cmp(&b.0).then(kb.cmp(ka)).then(a.1.cmp(&b.1)));
        let candidates = keyed.into_iter().map(|(_, c)| c);
        for (_, n, links) in candidates {
            self.expansions += 1;
            if self.expansions > self.budget {
                return Outcome::OutOfBudget;
            }
            self.assign[s] = Some(n);
            self.node_used[n] = self.node_used[n] + demand;
            links.iter().for_each(|&(l, b)| self.link_used[l] += b);
            match self.run(depth + 1) {
                Outcome::Exhausted => {}
                other => return other,
            }
            links.iter().for_each(|&(l, b)| self.link_used[l] -= b);
            self.node_used[n] = self.node_used[n] - demand;
            self.assign[s] = None;
        }
        Outcome::Exhausted
    }
}

/// Greedy placement without reserving anything.
pub fn plan_embedding(chain: &MklChain, state: &TopologyState, budget: usize) -> Result<Embedding, EmbedError> {
    let p = Problem::new(chain, state)?;
    if let Some(e) = p.unsatisfiable() {
        return Err(e);
    }
    let mut search = Search {
        assign: vec![None; chain.steps.len()],
        node_used: vec![ResourceVector::ZERO; p.nodes.len()],
        link_used: vec![0; p.link_residual.len()],
        expansions: 0,
        budget,
        deepest: None,
        p: &p,
    };
    match search.run(0) {
        Outcome::Found => {
            let assign: Vec<usize> = search.assign.iter().map(|a| a.expect("complete")).collect();
            Ok(p.build(&assign))
        }
        Outcome::OutOfBudget => Err(EmbedError::InfeasibleBySearch(budget)),
        Outcome::Exhausted => {
            let (_, s, c) = search.deepest.expect("an exhausted search saw a failure");
            Err(EmbedError::Infeasible { step: chain.steps[s].name.clone(), constraint: c })
        }
    }
}

/// Greedy placement with backtracking; reserves node resources and link
/// bandwidth for the chain, all or nothing.
pub fn embed(chain: &MklChain, state: &mut TopologyState) -> Result<Embedding, EmbedError> {
    embed_with_budget(chain, state, DEFAULT_EXPANSION_BUDGET)
}

pub fn embed_with_budget(chain: &MklChain, state: &mut TopologyState, budget: usize) -> Result<Embedding, EmbedError> {
    let mut emb = plan_embedding(chain, state, budget)?;
    emb.allocations = reserve_embedding(chain, state, &emb)?;
    Ok(emb)
}

/// Reserves the node resources and link bandwidth an embedding calls for,
/// all or nothing.
pub fn reserve_embedding(chain: &MklChain, state: &mut TopologyState, emb: &Embedding) -> Result<Vec<AllocationId>, EmbedError> {
    let mut made = Vec::new();
    let mut attempt = |state: &mut TopologyState| -> Result<(), SdiError> {
        for (step, place) in chain.steps.iter().zip(&emb.placements) {
            let demand = step.qos.demand();
            if !demand.is_zero() {
                made.push(state.allocate(&place.node, demand, &chain.id)?.id);
            }
        }
        for route in emb.routes.iter().filter(|r| r.bandwidth > 0) {
            for &l in &route.links {
                made.push(state.reserve_link(l, route.bandwidth, &chain.id)?.id);
            }
        }
        Ok(())
    };
    match attempt(state) {
        Ok(()) => Ok(made),
        Err(e) => {
            for id in made {
                state.release(id).expect("rollback of a fresh allocation");
            }
            Err(e.into())
        }
    }
}

/// Exhaustive search over every step-to-node assignment. Returns the
/// minimum-latency feasible one, ties going to the lexicographically first
/// assignment in step declaration order. Nothing is reserved.
pub fn embed_bruteforce(chain: &MklChain, state: &TopologyState) -> Result<Embedding, EmbedError> {
    let p = Problem::new(chain, state)?;
    let (n, k) = (p.nodes.len(), chain.steps.len());
    let total = (n as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if total > BRUTEFORCE_LIMIT {
        return Err(EmbedError::TooLarge(total));
    }
    if let Some(e) = p.unsatisfiable() {
        return Err(e);
    }
    let mut assign = vec![0usize; k];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        if feasible(&p, &assign) {
            let cost = p.cost(&assign);
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                best = Some((cost, assign.clone()));
            }
        }
        let mut i = k;
        loop {
            if i == 0 {
                return match best {
                    Some((_, a)) => Ok(p.build(&a)),
                    None => Err(EmbedError::Infeasible { step: "*".into(), constraint: "combined" }),
                };
            }
            i -= 1;
            assign[i] += 1;
            if assign[i] < n {
                break;
            }
            assign[i] = 0;
        }
    }
}

fn feasible(p: &Problem, assign: &[usize]) -> bool {
    let mut used = vec![ResourceVector::ZERO; p.nodes.len()];
    for (s, &n) in assign.iter().enumerate() {
        if p.static_fail(s, n, &ResourceVector::ZERO).is_some() {
            return false;
        }
        match used[n].checked_add(&p.chain.steps[s].qos.demand()) {
            Some(u) => used[n] = u,
            None => return false,
        }
    }
    if used.iter().zip(&p.residual).any(|(u, r)| !u.fits_within(r)) {
        return false;
    }
    let mut link_add = vec![0u64; p.link_residual.len()];
    for &(a, b) in &p.edges {
        let path = &p.paths[assign[a]][assign[b]];
        if p.path_fail(b, path).is_some() {
            return false;
        }
        let bw = p.chain.steps[b].qos.min_bandwidth;
        for &l in &path.links {
            link_add[l] += bw;
        }
    }
    link_add.iter().zip(&p.link_residual).all(|(a, r)| a <= r)
}

/// Rechecks an embedding against `before`, the state it was computed on,
/// using only the topology: every step hosted on a compute node with room
/// for the combined demand, every route a real path between the hosting
/// nodes within the latency, reliability and bandwidth bounds, coverage
/// respected and the reported latency reproduced.
pub fn verify_embedding(chain: &MklChain, before: &TopologyState, emb: &Embedding) -> Result<(), String> {
    let topo = before.topology();
    if emb.placements.len() != chain.steps.len() {
        return Err("placement count differs from step count".into());
    }
    let mut demand: std::collections::BTreeMap<&NodeId, ResourceVector> = Default::default();
    for (step, place) in chain.steps.iter().zip(&emb.placements) {
        if place.step != step.name {
            return Err(format!("placement for `{}` out of order", step.name));
        }
        let node = topo.node(&place.node).ok_or(format!("unknown node `{}`", place.node))?;
        if topo.is_switch(&place.node) {
            return Err(format!("step `{}` placed on switch `{}`", step.name, place.node));
        }
        if !step.qos.coverage.is_empty() && !step.qos.coverage.contains(&node.region) {
            return Err(format!("step `{}` outside its coverage", step.name));
        }
        if node.reliability < step.qos.min_reliability {
            return Err(format!("node `{}` below step `{}` reliability", node.id, step.name));
        }
        let d = demand.entry(&place.node).or_default();
        *d = *d + step.qos.demand();
    }
    for (node, d) in &demand {
        let residual = before.residual(node).map_err(|e| e.to_string())?;
        if let Some(c) = d.first_exceeding(&residual) {
            return Err(format!("node `{node}` over capacity in {c}"));
        }
    }

    let edges = chain.edge_indices();
    if emb.routes.len() != edges.len() {
        return Err("route count differs from edge count".into());
    }
    let mut link_load = vec![0u64; topo.links().len()];
    let mut total = 0.0;
    for (&(a, b), route) in edges.iter().zip(&emb.routes) {
        let (sa, sb) = (&chain.steps[a], &chain.steps[b]);
        let (na, nb) = (&emb.placements[a].node, &emb.placements[b].node);
        if route.from != sa.name || route.to != sb.name {
            return Err(format!("route {} -> {} out of order", route.from, route.to));
        }
        if route.hops.first() != Some(na) || route.hops.last() != Some(nb) {
            return Err(format!("route {} -> {} does not join the hosting nodes", sa.name, sb.name));
        }
        if route.links.len() + 1 != route.hops.len() {
            return Err("route hop and link counts disagree".into());
        }
        let mut latency = 0.0;
        let mut reliability = 1.0;
        for (i, &l) in route.links.iter().enumerate() {
            let link = topo.link(l).ok_or(format!("unknown link {l}"))?;
            let (x, y) = (&route.hops[i], &route.hops[i + 1]);
            if !((&link.a == x && &link.b == y) || (&link.a == y && &link.b == x)) {
                return Err(format!("link {l} does not join `{x}` and `{y}`"));
            }
            latency += link.latency_ms;
            reliability *= link.reliability;
            link_load[l] += sb.qos.min_bandwidth;
        }
        if sb.qos.max_latency_ms.is_some_and(|m| latency > m) {
            return Err(format!("edge {} -> {} latency {latency} over bound", sa.name, sb.name));
        }
        if reliability < sb.qos.min_reliability {
            return Err(format!("edge {} -> {} reliability below bound", sa.name, sb.name));
        }
        total += latency;
    }
    for (l, load) in link_load.iter().enumerate() {
        if *load > before.link_residual(l).map_err(|e| e.to_string())? {
            return Err(format!("link {l} bandwidth oversubscribed"));
        }
    }

    let sources = chain.source_domain.resolve(topo);
    let preds = chain.predecessors();
    for (s, place) in emb.placements.iter().enumerate() {
        if preds[s].is_empty() && !sources.is_empty() {
            let mut best = f64::INFINITY;
            for src in &sources {
                best = best.min(path_metrics(topo, src, &place.node).map_err(|e| e.to_string())?.latency_ms);
            }
            total += best;
        }
    }
    if (total - emb.total_latency_ms).abs() > 1e-9 * total.abs().max(1.0) {
        return Err(format!("reported latency {} differs from recomputed {total}", emb.total_latency_ms));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::{MklChain, MklStep, QosRequirements, StepKind};
    use super::*;
    use crate::sdi::paper_topology;

    fn step(name: &str, kind: StepKind, cpu: u64) -> MklStep {
        let f = format!("{}.x", kind.as_str());
        MklStep::new(name, kind, &f).with_qos(QosRequirements { cpu, ..Default::default() })
    }

    fn paper_state() -> TopologyState {
        TopologyState::new(paper_topology())
    }

    #[test]
    fn single_step_lands_next_to_source() {
        let mut chain = MklChain::linear("one", 1, vec![step("m", StepKind::Monitor, 100)]);
        chain.source_domain.nodes.push("cal-vm4".into());
        let mut state = paper_state();
        let emb = embed(&chain, &mut state).unwrap();
        assert_eq!(emb.node_of("m"), Some(&NodeId::from("cal-vm4")));
        assert_eq!(emb.total_latency_ms, 0.0);
        assert_eq!(state.used(&"cal-vm4".into()).cpu, 100);
    }

    #[test]
    fn oversized_cpu_named() {
        let chain = MklChain::linear("big", 1, vec![step("a", StepKind::Analyze, 1_000_000)]);
        let mut state = paper_state();
        let before = state.clone();
        let err = embed(&chain, &mut state).unwrap_err();
        assert_eq!(err, EmbedError::Infeasible { step: "a".into(), constraint: "cpu" });
        assert_eq!(state, before);
    }

    #[test]
    fn steps_share_a_node_when_it_fits() {
        let chain = MklChain::linear(
            "pair",
            1,
            vec![step("m", StepKind::Monitor, 1000), step("a", StepKind::Analyze, 1000)],
        );
        let state = paper_state();
        let emb = plan_embedding(&chain, &state, DEFAULT_EXPANSION_BUDGET).unwrap();
        assert_eq!(emb.placements[0].node, emb.placements[1].node);
        verify_embedding(&chain, &state, &emb).unwrap();
    }

    #[test]
    fn failed_reservation_rolls_back() {
        let chain = MklChain::linear("c", 1, vec![step("m", StepKind::Monitor, 500)]);
        let mut state = paper_state();
        let mut emb = plan_embedding(&chain, &state, DEFAULT_EXPANSION_BUDGET).unwrap();
        emb.routes.push(EdgeRoute {
            from: "m".into(),
            to: "m".into(),
            hops: vec![],
            links: vec![0],
            latency_ms: 0.0,
            reliability: 1.0,
            bandwidth: u64::MAX,
        });
        let before = state.clone();
        assert!(reserve_embedding(&chain, &mut state, &emb).is_err());
        assert_eq!(state, before);
    }
}
