use std::collections::BTreeMap;

use serde::Serialize;

use super::{Backing, KnobKey, LiveState};
use crate::chain::ActionProposal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum ConflictKind {
    SameKnobOpposing,
    Oversubscription,
}

impl ConflictKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConflictKind::SameKnobOpposing => "same-knob-opposing",
            ConflictKind::Oversubscription => "oversubscription",
        }
    }
}

/// A pair of pending proposals, by index, with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Conflict {
    pub kind: ConflictKind,
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ConflictReport {
    pub window_ms: u64,
    /// Sorted by (kind, a, b).
    pub conflicts: Vec<Conflict>,
}

impl ConflictReport {
    pub fn is_empty(&self) -> bool {
        self.conflicts.is_empty()
    }
}

fn key_of(p: &ActionProposal) -> KnobKey {
    KnobKey::new(p.target.clone(), &p.knob)
}

/// Extra reservation a proposal needs on its knob's node, if the knob is
/// resource-backed and the proposal raises it.
pub fn reservation_delta(p: &ActionProposal, live: &LiveState) -> Option<(Backing, u64)> {
    let knob = live.knob(&key_of(p))?;
    let backing = knob.backing?;
    let new = p.value.round() as u64;
    let old = knob.value.round() as u64;
    (new > old).then(|| (backing, new - old))
}

fn residual_of(live: &LiveState, p: &ActionProposal, b: Backing) -> u64 {
    let r = live.sdi.residual(&p.target).unwrap_or_default();
    match b {
        Backing::Cpu => r.cpu,
        Backing::Mem => r.mem,
        Backing::Storage => r.storage,
    }
}

/// Flags opposing writes to one knob by different chains within `window_ms`,
/// and groups of raises by different chains whose extra reservations jointly
/// exceed what their node has left.
pub fn detect_conflicts(pending: &[ActionProposal], window_ms: u64, live: &LiveState) -> ConflictReport {
    let mut conflicts = Vec::new();
    for i in 0..pending.len() {
        for j in i + 1..pending.len() {
            let (a, b) = (&pending[i], &pending[j]);
            if a.issued_by != b.issued_by
                && a.target == b.target
                && a.knob == b.knob
                && (a.direction as i32) * (b.direction as i32) < 0
                && a.timestamp_ms.abs_diff(b.timestamp_ms) <= window_ms
            {
                conflicts.push(Conflict { kind: ConflictKind::SameKnobOpposing, a: i, b: j });
            }
        }
    }

    let mut groups: BTreeMap<(String, u8), Vec<(usize, u64)>> = BTreeMap::new();
    for (i, p) in pending.iter().enumerate() {
        if let Some((backing, d)) = reservation_delta(p, live) {
            groups.entry((p.target.to_string(), backing as u8)).or_default().push((i, d));
        }
    }
    for members in groups.values() {
        let (first, _) = members[0];
        let backing = reservation_delta(&pending[first], live).unwrap().0;
        let total: u64 = members.iter().map(|&(_, d)| d).sum();
        if total <= residual_of(live, &pending[first], backing) {
            continue;
        }
        for (x, &(i, _)) in members.iter().enumerate() {
            for &(j, _) in &members[x + 1..] {
                let (a, b) = (&pending[i], &pending[j]);
                if a.issued_by != b.issued_by && a.timestamp_ms.abs_diff(b.timestamp_ms) <= window_ms {
                    conflicts.push(Conflict { kind: ConflictKind::Oversubscription, a: i.min(j), b: i.max(j) });
                }
            }
        }
    }
    conflicts.sort();
    ConflictReport { window_ms, conflicts }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub time_ms: u64,
    pub winner: String,
    pub loser: String,
    /// Equal priorities; the smaller chain id won.
    pub tie_break: bool,
    pub kind: ConflictKind,
    /// Knobs the loser proposed to write.
    pub knobs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Arbitration {
    pub approved: Vec<ActionProposal>,
    pub rejected: Vec<(ActionProposal, String)>,
    pub decisions: Vec<Decision>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Within each connected set of conflicting proposals only the chain with
/// the lowest (priority, chain id) keeps its proposals. Chains missing from
/// `priorities` rank last.
pub fn arbitrate(pending: &[ActionProposal], report: &ConflictReport, priorities: &BTreeMap<String, u32>) -> Arbitration {
    let n = pending.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for c in &report.conflicts {
        let (ra, rb) = (find(&mut parent, c.a), find(&mut parent, c.b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut in_conflict = vec![false; n];
    let mut kind_of: BTreeMap<usize, ConflictKind> = BTreeMap::new();
    for c in &report.conflicts {
        in_conflict[c.a] = true;
        in_conflict[c.b] = true;
        let r = find(&mut parent, c.a);
        kind_of.entry(r).and_modify(|k| *k = (*k).min(c.kind)).or_insert(c.kind);
    }
    let rank = |chain: &str| (priorities.get(chain).copied().unwrap_or(u32::MAX), chain.to_string());
    let mut winners: BTreeMap<usize, (u32, String)> = BTreeMap::new();
    for i in (0..n).filter(|&i| in_conflict[i]) {
        let r = find(&mut parent, i);
        let cand = rank(&pending[i].issued_by);
        winners.entry(r).and_modify(|w| *w = (*w).clone().min(cand.clone())).or_insert(cand);
    }

    let mut out = Arbitration::default();
    let mut losers: BTreeMap<(usize, String), Vec<String>> = BTreeMap::new();
    for (i, p) in pending.iter().enumerate() {
        if !in_conflict[i] {
            out.approved.push(p.clone());
            continue;
        }
        let r = find(&mut parent, i);
        let (wp, winner) = &winners[&r];
        if p.issued_by == *winner {
            out.approved.push(p.clone());
        } else {
            let reason = format!("{} conflict lost to `{winner}` (priority {wp})", kind_of[&r].as_str());
            out.rejected.push((p.clone(), reason));
            losers.entry((r, p.issued_by.clone())).or_default().push(key_of(p).to_string());
        }
    }
    let time_ms = pending.iter().map(|p| p.timestamp_ms).max().unwrap_or(0);
    for ((r, loser), knobs) in losers {
        let (wp, winner) = &winners[&r];
        out.decisions.push(Decision {
            time_ms,
            winner: winner.clone(),
            tie_break: rank(&loser).0 == *wp,
            loser,
            kind: kind_of[&r],
            knobs,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::KnobSpec;
    use crate::sdi::{paper_topology, TopologyState};

    fn live() -> LiveState {
        let mut l = LiveState::new(TopologyState::new(paper_topology()));
        l.add_knob(&KnobSpec {
            node: "tor-vm4".into(),
            name: "vnf.cpu.millicores".into(),
            backing: Some(Backing::Cpu),
            initial: 1000.0,
            min: 0.0,
            max: 10000.0,
        })
        .unwrap();
        l
    }

    fn prop(chain: &str, value: f64, current: f64) -> ActionProposal {
        ActionProposal {
            target: "tor-vm4".into(),
            knob: "vnf.cpu.millicores".into(),
            value,
            direction: (value - current).signum() as i8 * (value != current) as i8,
            issued_by: chain.into(),
            timestamp_ms: 0,
            clamped: false,
        }
    }

    #[test]
    fn opposing_writes_conflict() {
        let l = live();
        let p = vec![prop("a", 1500.0, 1000.0), prop("b", 700.0, 1000.0)];
        let r = detect_conflicts(&p, 0, &l);
        assert_eq!(r.conflicts, vec![Conflict { kind: ConflictKind::SameKnobOpposing, a: 0, b: 1 }]);
    }

    #[test]
    fn disjoint_knobs_do_not_conflict() {
        let l = live();
        let mut q = prop("b", 700.0, 1000.0);
        q.knob = "other".into();
        assert!(detect_conflicts(&[prop("a", 1500.0, 1000.0), q], 0, &l).is_empty());
    }

    #[test]
    fn priority_then_id_decides() {
        let l = live();
        let p = vec![prop("b", 1500.0, 1000.0), prop("a", 700.0, 1000.0)];
        let r = detect_conflicts(&p, 0, &l);
        let pr: BTreeMap<String, u32> = [("a".into(), 2), ("b".into(), 1)].into();
        let out = arbitrate(&p, &r, &pr);
        assert_eq!(out.approved, vec![p[0].clone()]);
        assert!(!out.decisions[0].tie_break);

        let pr: BTreeMap<String, u32> = [("a".into(), 1), ("b".into(), 1)].into();
        let out = arbitrate(&p, &r, &pr);
        assert_eq!(out.approved, vec![p[1].clone()]);
        assert!(out.decisions[0].tie_break);
        assert_eq!(out.rejected.len(), 1);
    }

    #[test]
    fn no_conflicts_approves_everything() {
        let l = live();
        let p = vec![prop("a", 1500.0, 1000.0), prop("b", 1600.0, 1000.0)];
        let r = detect_conflicts(&p, 0, &l);
        assert!(r.is_empty());
        assert_eq!(arbitrate(&p, &r, &BTreeMap::new()).approved, p);
    }
}
