#![allow(dead_code)]
pub mod gradcheck;

use aiaas::chain::{
    embed_bruteforce, plan_embedding, verify_embedding, EmbedError, MklChain, MklStep, QosRequirements, StepKind,
    DEFAULT_EXPANSION_BUDGET,
};
use aiaas::sdi::{build_topology, LinkSpec, NodeId, NodeSpec, ResourceVector, Tier, TopologySpec, TopologyState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random small embedding instance: 2-6 compute nodes, a connected link set,
/// some background reservations, and a chain of 1-5 steps.
pub fn random_instance(seed: u64) -> (TopologyState, MklChain) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let regions = vec!["r0".to_string(), "r1".to_string()];
    let n = rng.random_range(2..=6usize);
    let nodes: Vec<NodeSpec> = (0..n)
        .map(|i| NodeSpec {
            id: NodeId::new(format!("n{i}")),
            region: regions[rng.random_range(0..2)].clone(),
            tier: [Tier::Core, Tier::Edge, Tier::Access][rng.random_range(0..3)],
            cpu: rng.random_range(5..=30) * 100,
            mem: rng.random_range(1..=8) * 512,
            storage: rng.random_range(1..=10) * 1000,
            bandwidth: 1000,
            reliability: rng.random_range(0.95..1.0),
        })
        .collect();
    let mut links = Vec::new();
    let has = |a: usize, b: usize, links: &mut Vec<LinkSpec>, rng: &mut ChaCha8Rng| {
        let (a, b) = (a.min(b), a.max(b));
        if links.iter().any(|l: &LinkSpec| l.a.0 == format!("n{a}") && l.b.0 == format!("n{b}")) {
            return;
        }
        links.push(LinkSpec {
            a: NodeId::new(format!("n{a}")),
            b: NodeId::new(format!("n{b}")),
            bandwidth: rng.random_range(1..=10) * 50,
            latency: rng.random_range(1..=20) as f64,
            reliability: rng.random_range(0.97..1.0),
        });
    };
    for i in 1..n {
        let j = rng.random_range(0..i);
        has(j, i, &mut links, &mut rng);
    }
    for _ in 0..rng.random_range(0..=n) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            has(a, b, &mut links, &mut rng);
        }
    }
    let spec = TopologySpec { regions: regions.clone(), nodes, switches: vec![], links, allocations: vec![] };
    let mut state = TopologyState::new(build_topology(&spec).expect("generated topology is valid"));
    for i in 0..n {
        if rng.random_bool(0.4) {
            let id = NodeId::new(format!("n{i}"));
            let cap = state.residual(&id).unwrap();
            let r = ResourceVector::new(cap.cpu / rng.random_range(2..5), cap.mem / 4, 0, 0);
            state.allocate(&id, r, "background").unwrap();
        }
    }

    let k = rng.random_range(1..=5usize);
    let mut kinds: Vec<StepKind> = (0..k).map(|_| StepKind::ALL[rng.random_range(0..4)]).collect();
    kinds.sort_by_key(|s| s.rank());
    let steps = kinds
        .iter()
        .enumerate()
        .map(|(i, kind)| {
            let qos = QosRequirements {
                max_latency_ms: rng.random_bool(0.5).then(|| rng.random_range(5..=40) as f64),
                min_bandwidth: if rng.random_bool(0.5) { rng.random_range(1..=6) * 25 } else { 0 },
                cpu: rng.random_range(1..=15) * 100,
                mem: rng.random_range(1..=8) * 128,
                storage: rng.random_range(0..=3) * 1000,
                min_reliability: if rng.random_bool(0.3) { rng.random_range(0.9..0.99) } else { 0.0 },
                coverage: if rng.random_bool(0.2) { vec![regions[rng.random_range(0..2)].clone()] } else { vec![] },
            };
            MklStep::new(&format!("s{i}"), *kind, &format!("{}.f", kind.as_str())).with_qos(qos)
        })
        .collect();
    let mut chain = MklChain::linear(&format!("inst{seed}"), 1, steps);
    if rng.random_bool(0.3) {
        chain.source_domain.nodes.push(NodeId::new(format!("n{}", rng.random_range(0..n))));
    }
    (state, chain)
}

#[derive(Debug, Default)]
pub struct Agreement {
    pub instances: usize,
    pub verdicts_equal: usize,
    pub feasible: usize,
    pub within_ratio: usize,
    pub unsound: usize,
}

/// Greedy versus exhaustive search on `count` seeded instances.
pub fn embedding_agreement(count: u64) -> Agreement {
    let mut a = Agreement::default();
    for seed in 0..count {
        let (state, chain) = random_instance(seed);
        let greedy = plan_embedding(&chain, &state, DEFAULT_EXPANSION_BUDGET);
        let brute = embed_bruteforce(&chain, &state);
        a.instances += 1;
        match (&greedy, &brute) {
            (Ok(g), Ok(b)) => {
                a.verdicts_equal += 1;
                a.feasible += 1;
                if g.total_latency_ms <= 1.5 * b.total_latency_ms + 1e-9 {
                    a.within_ratio += 1;
                }
                if verify_embedding(&chain, &state, g).is_err() || verify_embedding(&chain, &state, b).is_err() {
                    a.unsound += 1;
                }
            }
            (Err(g), Err(EmbedError::Infeasible { .. })) if g.is_proven_infeasible() => a.verdicts_equal += 1,
            _ => {}
        }
    }
    a
}

pub const KNOB: &str = "vnf.cpu.millicores";
pub const KNOB_NODE: &str = "tor-vm4";

/// A loop that drives the shared knob to `setpoint` every `period_ms`.
pub fn setpoint_chain(id: &str, priority: u32, setpoint: f64, period_ms: u64) -> MklChain {
    let mut c = MklChain::linear(
        id,
        priority,
        vec![
            MklStep::new("m", StepKind::Monitor, "monitor.knob").with_param("knob", KNOB),
            MklStep::new("a", StepKind::Analyze, "analyze.setpoint").with_param("setpoint", setpoint),
            MklStep::new("p", StepKind::Plan, "plan.catalog"),
            MklStep::new("e", StepKind::Execute, "execute.apply"),
            MklStep::new("k", StepKind::Knowledge, "knowledge.store"),
        ],
    );
    for s in &mut c.steps {
        s.qos.cpu = 50;
    }
    c.tick_period_ms = Some(period_ms);
    c.destination_domain.nodes.push(NodeId::from(KNOB_NODE));
    c
}

/// Orchestrator over the preset topology with one cpu-backed knob at 1000.
pub fn knob_orchestrator(policy: aiaas::control::Policy) -> aiaas::control::Orchestrator {
    use aiaas::chain::{ActionCatalog, CatalogEntry};
    use aiaas::control::*;
    let mut live = LiveState::new(TopologyState::new(aiaas::sdi::paper_topology()));
    live.add_knob(&KnobSpec {
        node: KNOB_NODE.into(),
        name: KNOB.into(),
        backing: Some(Backing::Cpu),
        initial: 1000.0,
        min: 0.0,
        max: 3000.0,
    })
    .unwrap();
    let mut env = Environment::default();
    env.catalogs.insert(
        "default".into(),
        ActionCatalog::new(vec![CatalogEntry {
            output_kind: "knob.target".into(),
            target: "*".into(),
            knob: KNOB.into(),
            scale: 1.0,
            offset: 0.0,
            min: 0.0,
            max: 3000.0,
            round: true,
        }]),
    );
    Orchestrator::new(live, env, Registry::builtin(), TierScheduler::default(), policy)
}
