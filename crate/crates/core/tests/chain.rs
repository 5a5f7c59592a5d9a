mod common;

use aiaas::chain::{
    embed, embed_bruteforce, plan_embedding, validate_chain, verify_embedding, EmbedError, MklChain, MklStep,
    QosRequirements, StepKind, DEFAULT_EXPANSION_BUDGET,
};
use aiaas::sdi::{paper_topology, NodeId, TopologyState};

fn step(name: &str, kind: StepKind, qos: QosRequirements) -> MklStep {
    MklStep::new(name, kind, &format!("{}.x", kind.as_str())).with_qos(qos)
}

#[test]
fn greedy_agrees_with_exhaustive_search() {
    let a = common::embedding_agreement(200);
    assert_eq!(a.verdicts_equal, 200, "{a:?}");
    assert_eq!(a.unsound, 0, "{a:?}");
    assert!(a.feasible >= 40 && a.feasible <= 190, "instance mix is degenerate: {a:?}");
    assert!(a.within_ratio * 10 >= a.feasible * 9, "{a:?}");
}

#[test]
fn embeds_are_all_or_nothing() {
    for seed in 0..200 {
        let (mut state, chain) = common::random_instance(seed);
        let before = state.serialize();
        match embed(&chain, &mut state) {
            Ok(emb) => {
                assert!(state.check_conservation().is_ok());
                for id in &emb.allocations {
                    assert!(state.allocation(*id).is_some());
                }
                assert_eq!(state.release_owner(&chain.id), emb.allocations.len());
                assert_eq!(state.serialize(), before);
            }
            Err(_) => assert_eq!(state.serialize(), before),
        }
    }
}

#[test]
fn two_by_two_enumeration_picks_minimum() {
    let (state, _) = common::random_instance(0);
    let nodes: Vec<NodeId> = state.topology().compute_nodes().map(|n| n.id.clone()).collect();
    let chain = MklChain::linear(
        "two",
        1,
        vec![
            step("m", StepKind::Monitor, QosRequirements { cpu: 1, ..Default::default() }),
            step("a", StepKind::Analyze, QosRequirements { cpu: 1, ..Default::default() }),
        ],
    );
    let b = embed_bruteforce(&chain, &state).unwrap();
    // Co-location costs nothing; the first node in id order wins the tie.
    assert_eq!(b.total_latency_ms, 0.0);
    assert_eq!(b.node_of("m"), Some(&nodes[0]));
    assert_eq!(b.node_of("a"), Some(&nodes[0]));
}

#[test]
fn paper_examples_cross_checked_on_a_region() {
    let topo = paper_topology();
    let state = TopologyState::new(topo);
    // Too large for exhaustive search over the whole topology.
    let wide = MklChain::linear(
        "w",
        1,
        (0..5).map(|i| step(&format!("s{i}"), StepKind::Monitor, QosRequirements::default())).collect(),
    );
    assert!(matches!(embed_bruteforce(&wide, &state), Err(EmbedError::TooLarge(_))));

    let mut chain = MklChain::linear(
        "uc2",
        1,
        vec![
            step("m", StepKind::Monitor, QosRequirements { cpu: 3000, ..Default::default() }),
            step(
                "a",
                StepKind::Analyze,
                QosRequirements { cpu: 3000, max_latency_ms: Some(2.0), min_bandwidth: 100, ..Default::default() },
            ),
            step("p", StepKind::Plan, QosRequirements { cpu: 3000, max_latency_ms: Some(2.0), ..Default::default() }),
        ],
    );
    chain.source_domain.nodes.push("wat-vm4".into());
    let greedy = plan_embedding(&chain, &state, DEFAULT_EXPANSION_BUDGET).unwrap();
    let brute = embed_bruteforce(&chain, &state).unwrap();
    verify_embedding(&chain, &state, &greedy).unwrap();
    verify_embedding(&chain, &state, &brute).unwrap();
    assert_eq!(greedy.total_latency_ms, brute.total_latency_ms);
    assert_eq!(greedy.node_of("m"), Some(&NodeId::from("wat-vm4")));
    // Each step needs most of a 4000 mc node, so all three are spread out.
    let mut hosts: Vec<&NodeId> = greedy.placements.iter().map(|p| &p.node).collect();
    hosts.dedup();
    assert_eq!(hosts.len(), 3);
}

#[test]
fn validation_examples() {
    let ok = MklChain::linear(
        "c",
        1,
        ["monitor", "analyze", "plan", "execute", "knowledge"]
            .iter()
            .zip(StepKind::ALL)
            .map(|(n, k)| step(n, k, QosRequirements::default()))
            .collect(),
    );
    assert!(validate_chain(&ok).is_valid());
}

