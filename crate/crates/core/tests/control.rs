mod common;

use std::collections::BTreeMap;

use aiaas::chain::{ActionProposal, MklStep, StepKind};
use aiaas::control::*;
use aiaas::sdi::{paper_topology, ResourceVector, Tier, TopologyState};
use common::{knob_orchestrator, setpoint_chain, KNOB, KNOB_NODE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn key() -> KnobKey {
    KnobKey::new(KNOB_NODE, KNOB)
}

fn no_arbitration() -> Policy {
    Policy { arbitration: false, ..Policy::default() }
}

#[test]
fn lifecycle_reserves_and_releases() {
    let mut o = knob_orchestrator(Policy::default());
    let before = o.live.sdi.clone();
    let snap = o.instantiate(setpoint_chain("a", 1, 1500.0, 10)).unwrap();
    assert_eq!(snap.state, InstanceState::Running);
    assert_ne!(o.live.sdi, before);

    o.scale("a", 2.0).unwrap();
    let a = o.instance("a").unwrap();
    assert_eq!(a.chain.steps[1].qos.cpu, 100);
    assert_eq!(a.chain.steps[0].qos.cpu, 50);
    o.live.sdi.check_conservation().unwrap();

    o.terminate("a").unwrap();
    assert_eq!(o.live.sdi, before);
    assert!(matches!(o.scale("a", 2.0), Err(ControlError::IllegalTransition { .. })));
    assert!(matches!(o.terminate("a"), Err(ControlError::IllegalTransition { .. })));
}

#[test]
fn infeasible_scale_keeps_the_old_reservation() {
    let mut o = knob_orchestrator(Policy::default());
    o.instantiate(setpoint_chain("a", 1, 1500.0, 10)).unwrap();
    let before = o.live.sdi.clone();
    assert!(o.scale("a", 1000.0).is_err());
    assert_eq!(o.live.sdi, before);
    assert_eq!(o.query("a").unwrap().state, InstanceState::Running);
}

#[test]
fn analysis_only_tick_proposes_nothing() {
    let mut o = knob_orchestrator(Policy::default());
    let mut c = setpoint_chain("watch", 1, 1500.0, 10);
    c.steps.retain(|s| matches!(s.kind, StepKind::Monitor | StepKind::Analyze | StepKind::Knowledge));
    o.instantiate(c).unwrap();
    o.step(0).unwrap();
    let inst = o.instance("watch").unwrap();
    assert!(inst.action_log.is_empty());
    let k = inst.knowledge.latest().unwrap();
    assert_eq!(k.outputs.len(), 1);
    assert_eq!(k.outputs[0].value, 1500.0);
    assert_eq!(o.live.knob(&key()).unwrap().value, 1000.0);
}

#[test]
fn monitor_fault_counts_and_yields_nothing() {
    let mut o = knob_orchestrator(Policy::default());
    o.instantiate(setpoint_chain("a", 1, 1500.0, 10)).unwrap();
    o.inject_fault("a", StepKind::Monitor).unwrap();
    o.step(0).unwrap();
    let a = o.instance("a").unwrap();
    assert_eq!(a.fcaps.fault, 1);
    assert!(a.action_log.is_empty());
    assert!(o.changes.is_empty());
    o.step(10).unwrap();
    assert_eq!(o.live.knob(&key()).unwrap().value, 1500.0);
}

#[test]
fn misaligned_tick_is_refused() {
    let mut live = LiveState::new(TopologyState::new(paper_topology()));
    let c = setpoint_chain("a", 1, 1500.0, 10);
    let mut inst = MklInstance::instantiate(c, &mut live, &Registry::builtin(), 10).unwrap();
    assert!(matches!(inst.tick(5, &live, &Environment::default()), Err(ControlError::Misaligned { .. })));
}

#[test]
fn unknown_or_mismatched_function_is_refused() {
    let mut o = knob_orchestrator(Policy::default());
    let mut c = setpoint_chain("a", 1, 1500.0, 10);
    c.steps[1] = MklStep::new("a", StepKind::Analyze, "analyze.nothing");
    assert!(matches!(o.instantiate(c), Err(ControlError::UnknownFunction(_))));
}

#[test]
fn periods_set_tick_counts_and_order() {
    let mut o = knob_orchestrator(Policy::default());
    let mut fast = setpoint_chain("fast", 1, 1500.0, 10);
    fast.tier = Tier::Access;
    fast.steps.retain(|s| s.kind != StepKind::Execute);
    let mut slow = setpoint_chain("slow", 2, 1500.0, 100);
    slow.steps.retain(|s| s.kind != StepKind::Execute);
    o.instantiate(slow).unwrap();
    o.instantiate(fast).unwrap();
    o.run(0, 1000).unwrap();
    assert_eq!(o.instance("fast").unwrap().fcaps.accounting, 100);
    assert_eq!(o.instance("slow").unwrap().fcaps.accounting, 10);
    let ticks: Vec<(u64, &str)> =
        o.trace.iter().filter(|e| e.kind == "tick").map(|e| (e.time_ms, e.chain.as_str())).collect();
    assert_eq!(&ticks[..3], &[(0, "fast"), (0, "slow"), (10, "fast")]);
    assert!(ticks.windows(2).all(|w| w[0].0 <= w[1].0));
}

#[test]
fn tier_periods_must_nest() {
    assert!(TierScheduler::new(1000, 100, 10).is_ok());
    assert!(TierScheduler::new(100, 1000, 10).is_err());
    assert!(TierScheduler::new(1000, 100, 0).is_err());
}

fn opposing(policy: Policy) -> Orchestrator {
    let mut o = knob_orchestrator(policy);
    o.instantiate(setpoint_chain("a", 1, 1500.0, 10)).unwrap();
    o.instantiate(setpoint_chain("b", 2, 500.0, 10)).unwrap();
    o
}

#[test]
fn unarbitrated_opposing_loops_oscillate() {
    let mut o = opposing(no_arbitration());
    o.run(0, 1000).unwrap();
    assert!(o.reversals_since(None) >= 10, "{}", o.reversals_since(None));
    assert_eq!(o.capacity_violations, 0);
}

#[test]
fn arbitration_stops_reversals_after_first_decision() {
    let mut o = opposing(Policy::default());
    o.run(0, 1000).unwrap();
    let first = o.decisions.first().expect("a decision").clone();
    assert_eq!(first.winner, "a");
    assert!(!first.tie_break);
    assert_eq!(o.reversals_since(Some(first.time_ms)), 0);
    assert_eq!(o.live.knob(&key()).unwrap().value, 1500.0);
    assert_eq!(o.owner_of(&key()), Some("a"));
    assert!(o.instance("b").unwrap().fcaps.security > 0);
    assert_eq!(o.capacity_violations, 0);
}

#[test]
fn equal_priority_ties_go_to_smaller_id() {
    let mut o = knob_orchestrator(Policy::default());
    o.instantiate(setpoint_chain("b", 1, 1500.0, 10)).unwrap();
    o.instantiate(setpoint_chain("a", 1, 500.0, 10)).unwrap();
    o.step(0).unwrap();
    assert_eq!(o.decisions[0].winner, "a");
    assert!(o.decisions[0].tie_break);
    assert_eq!(o.live.knob(&key()).unwrap().value, 500.0);
}

#[test]
fn same_config_same_trace() {
    let run = || {
        let mut o = opposing(Policy { sandbox: Some(SandboxConfig::default()), ..Policy::default() });
        o.run(0, 500).unwrap();
        (o.trace_csv(), o.fcaps_csv())
    };
    assert_eq!(run(), run());
}

#[test]
fn single_loop_dry_run_is_stable() {
    let mut o = knob_orchestrator(Policy::default());
    o.instantiate(setpoint_chain("a", 1, 1500.0, 10)).unwrap();
    let p = ActionProposal {
        target: KNOB_NODE.into(),
        knob: KNOB.into(),
        value: 1500.0,
        direction: 1,
        issued_by: "a".into(),
        timestamp_ms: 0,
        clamped: false,
    };
    let before = o.live.serialize();
    let r = o.sandbox_dryrun(0, &[p], 10).unwrap();
    assert_eq!(r.oscillation_count, 0);
    assert_eq!(r.verdict, Verdict::Stable);
    assert_eq!(o.live.serialize(), before);
}

#[test]
fn opposing_dry_run_is_unstable_and_isolated() {
    let o = opposing(no_arbitration());
    let before = o.live.serialize();
    let trace_len = o.trace.len();
    let r = o.sandbox_dryrun(0, &[], 10).unwrap();
    assert!(r.oscillation_count >= 5, "{r:?}");
    assert_eq!(r.verdict, Verdict::Unstable);
    assert_eq!(o.live.serialize(), before);
    assert_eq!(o.trace.len(), trace_len);

    let empty = knob_orchestrator(Policy::default());
    let before = empty.live.serialize();
    let r = empty.sandbox_dryrun(0, &[], 10).unwrap();
    assert_eq!((r.oscillation_count, r.verdict), (0, Verdict::Stable));
    assert_eq!(empty.live.serialize(), before);
}

#[test]
fn unstable_verdict_withholds_the_tick() {
    let mut o = opposing(Policy { arbitration: false, sandbox: Some(SandboxConfig::default()), conflict_window_ms: 0 });
    let before = o.live.serialize();
    o.step(0).unwrap();
    assert_eq!(o.live.serialize(), before);
    let a = o.instance("a").unwrap();
    assert_eq!(a.action_log.last().unwrap().status, ActionStatus::Withheld);
    assert_eq!(o.sandbox_runs[0].1.verdict, Verdict::Unstable);
}

#[test]
fn writes_beyond_capacity_are_refused() {
    let mut o = knob_orchestrator(Policy::default());
    let node = KNOB_NODE.into();
    o.live.sdi.allocate(&node, ResourceVector::cpu(2500), "tenant").unwrap();
    o.instantiate(setpoint_chain("a", 1, 3000.0, 10)).unwrap();
    o.run(0, 100).unwrap();
    assert!(o.refused_capacity > 0);
    assert_eq!(o.capacity_violations, 0);
    o.live.check_capacity().unwrap();
}

fn random_proposals(seed: u64) -> (LiveState, Vec<ActionProposal>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut live = LiveState::new(TopologyState::new(paper_topology()));
    let nodes = ["tor-vm2", "tor-vm3"];
    let knobs = [("k.cpu", Some(Backing::Cpu)), ("k.mem", Some(Backing::Mem)), ("k.free", None)];
    for n in nodes {
        for (k, b) in knobs {
            live.add_knob(&KnobSpec { node: n.into(), name: k.into(), backing: b, initial: 200.0, min: 0.0, max: 1e6 })
                .unwrap();
        }
        let r = live.sdi.residual(&n.into()).unwrap();
        let bg = ResourceVector::new(r.cpu - rng.random_range(0..1200), r.mem - rng.random_range(0..1200), 0, 0);
        live.sdi.allocate(&n.into(), bg, "bg").unwrap();
    }
    let count = rng.random_range(0..12);
    let proposals = (0..count)
        .map(|_| {
            let value = rng.random_range(0..8) as f64 * 100.0;
            ActionProposal {
                target: nodes[rng.random_range(0..2)].into(),
                knob: knobs[rng.random_range(0..3)].0.into(),
                value,
                direction: (value as i64 - 200).signum() as i8,
                issued_by: ["a", "b", "c"][rng.random_range(0..3)].into(),
                timestamp_ms: rng.random_range(0..30),
                clamped: false,
            }
        })
        .collect();
    (live, proposals)
}

/// Pairwise recheck of the conflict definitions.
fn oracle(pending: &[ActionProposal], window: u64, live: &LiveState) -> Vec<Conflict> {
    let raise = |p: &ActionProposal| -> Option<(Backing, u64)> {
        let k = live.knob(&KnobKey::new(p.target.clone(), &p.knob))?;
        let extra = p.value as i64 - k.value as i64;
        Some((k.backing?, u64::try_from(extra).ok().filter(|&e| e > 0)?))
    };
    let mut out = Vec::new();
    for i in 0..pending.len() {
        for j in 0..pending.len() {
            if i >= j {
                continue;
            }
            let (a, b) = (&pending[i], &pending[j]);
            let close = a.timestamp_ms.abs_diff(b.timestamp_ms) <= window;
            if a.issued_by == b.issued_by || !close {
                continue;
            }
            if a.target == b.target && a.knob == b.knob && a.direction * b.direction == -1 {
                out.push(Conflict { kind: ConflictKind::SameKnobOpposing, a: i, b: j });
            }
            if let (Some((ba, _)), Some((bb, _))) = (raise(a), raise(b)) {
                if a.target == b.target && ba == bb {
                    let total: u64 = pending
                        .iter()
                        .filter(|p| p.target == a.target)
                        .filter_map(|p| raise(p))
                        .filter(|(bp, _)| *bp == ba)
                        .map(|(_, d)| d)
                        .sum();
                    let r = live.sdi.residual(&a.target).unwrap();
                    let left = match ba {
                        Backing::Cpu => r.cpu,
                        Backing::Mem => r.mem,
                        Backing::Storage => r.storage,
                    };
                    if total > left {
                        out.push(Conflict { kind: ConflictKind::Oversubscription, a: i, b: j });
                    }
                }
            }
        }
    }
    out.sort();
    out
}

#[test]
fn conflict_report_matches_pairwise_recheck() {
    let mut nonempty = 0;
    let mut over = 0;
    for seed in 0..100 {
        let (live, pending) = random_proposals(seed);
        let report = detect_conflicts(&pending, 10, &live);
        assert_eq!(report.conflicts, oracle(&pending, 10, &live), "seed {seed}");
        nonempty += !report.is_empty() as usize;
        over += report.conflicts.iter().any(|c| c.kind == ConflictKind::Oversubscription) as usize;
        for c in &report.conflicts {
            assert_ne!(pending[c.a].issued_by, pending[c.b].issued_by);
        }
        // Every conflict set keeps exactly one chain.
        let pr: BTreeMap<String, u32> = [("a".into(), 2), ("b".into(), 1), ("c".into(), 2)].into();
        let arb = arbitrate(&pending, &report, &pr);
        assert_eq!(arb.approved.len() + arb.rejected.len(), pending.len());
        assert!(detect_conflicts(&arb.approved, 10, &live).is_empty(), "seed {seed}");
    }
    assert!(nonempty > 30 && over > 5, "{nonempty} {over}");
}
