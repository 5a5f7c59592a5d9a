use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::conflict::{arbitrate, detect_conflicts, Decision};
use super::functions::{Environment, Registry};
use super::instance::{ActionStatus, InstanceSnapshot, InstanceState, MklInstance};
use super::sandbox::{count_reversals, SandboxConfig, SandboxResult, Verdict};
use super::{ControlError, KnobKey, LiveState};
use crate::chain::{ActionProposal, MklChain};
use crate::sdi::Tier;

/// Tick periods per tier. Access schedulers report to edge schedulers, edge
/// to core, and the core level doubles as the end-to-end scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TierScheduler {
    pub core_ms: u64,
    pub edge_ms: u64,
    pub access_ms: u64,
}

impl Default for TierScheduler {
    fn default() -> Self {
        TierScheduler { core_ms: 1000, edge_ms: 100, access_ms: 10 }
    }
}

impl TierScheduler {
    pub fn new(core_ms: u64, edge_ms: u64, access_ms: u64) -> Result<Self, ControlError> {
        let s = TierScheduler { core_ms, edge_ms, access_ms };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        if self.core_ms == 0 || self.edge_ms == 0 || self.access_ms == 0 {
            return Err(ControlError::Schedule("tier periods must be positive".into()));
        }
        if self.edge_ms > self.core_ms || self.access_ms > self.edge_ms {
            return Err(ControlError::Schedule("a child tier's period exceeds its parent's".into()));
        }
        Ok(())
    }

    pub fn period(&self, tier: Tier) -> u64 {
        match tier {
            Tier::Core => self.core_ms,
            Tier::Edge => self.edge_ms,
            Tier::Access => self.access_ms,
        }
    }

    pub fn parent(tier: Tier) -> Option<Tier> {
        match tier {
            Tier::Core => None,
            Tier::Edge => Some(Tier::Core),
            Tier::Access => Some(Tier::Edge),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Policy {
    pub arbitration: bool,
    pub sandbox: Option<SandboxConfig>,
    pub conflict_window_ms: u64,
}

impl Default for Policy {
    fn default() -> Self {
        Policy { arbitration: true, sandbox: None, conflict_window_ms: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEvent {
    pub time_ms: u64,
    /// Tier name, or `e2e` for decisions across tiers.
    pub tier: String,
    pub chain: String,
    pub kind: String,
    pub summary: String,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnobChange {
    pub time_ms: u64,
    pub key: KnobKey,
    pub old: f64,
    pub new: f64,
    pub chain: String,
}

/// Owns the live state and every running loop; the only writer of either.
#[derive(Debug, Clone)]
pub struct Orchestrator {
    pub live: LiveState,
    pub env: Arc<Environment>,
    pub registry: Registry,
    pub scheduler: TierScheduler,
    pub policy: Policy,
    instances: BTreeMap<String, MklInstance>,
    /// Knobs granted to the winner of a same-knob arbitration.
    owners: BTreeMap<KnobKey, String>,
    pub trace: Vec<TraceEvent>,
    pub changes: Vec<KnobChange>,
    pub decisions: Vec<Decision>,
    pub conflicts_seen: usize,
    /// Ticks at which the capacity check failed.
    pub capacity_violations: usize,
    /// Writes refused because the node could not back them.
    pub refused_capacity: usize,
    pub sandbox_runs: Vec<(u64, SandboxResult)>,
}

impl Orchestrator {
    pub fn new(live: LiveState, env: Environment, registry: Registry, scheduler: TierScheduler, policy: Policy) -> Self {
        Orchestrator {
            live,
            env: Arc::new(env),
            registry,
            scheduler,
            policy,
            instances: BTreeMap::new(),
            owners: BTreeMap::new(),
            trace: Vec::new(),
            changes: Vec::new(),
            decisions: Vec::new(),
            conflicts_seen: 0,
            capacity_violations: 0,
            refused_capacity: 0,
            sandbox_runs: Vec::new(),
        }
    }

    fn event(&mut self, time_ms: u64, tier: &str, chain: &str, kind: &str, summary: String, verdict: &str) {
        self.trace.push(TraceEvent {
            time_ms,
            tier: tier.into(),
            chain: chain.into(),
            kind: kind.into(),
            summary,
            verdict: verdict.into(),
        });
    }

    pub fn instantiate(&mut self, chain: MklChain) -> Result<InstanceSnapshot, ControlError> {
        if self.instances.get(&chain.id).is_some_and(|i| i.state() != InstanceState::Terminated) {
            return Err(ControlError::InvalidChain(format!("chain `{}` already running", chain.id)));
        }
        let period = chain.tick_period_ms.unwrap_or(self.scheduler.period(chain.tier));
        let inst = MklInstance::instantiate(chain, &mut self.live, &self.registry, period)?;
        let snap = inst.query();
        self.instances.insert(inst.id.clone(), inst);
        Ok(snap)
    }

    fn instance_mut(&mut self, id: &str) -> Result<&mut MklInstance, ControlError> {
        self.instances.get_mut(id).ok_or_else(|| ControlError::UnknownInstance(id.into()))
    }

    pub fn update(&mut self, chain: MklChain) -> Result<(), ControlError> {
        let registry = self.registry.clone();
        let id = chain.id.clone();
        let mut inst = self.instance_mut(&id)?.clone();
        inst.update(chain, &mut self.live, &registry)?;
        self.instances.insert(id, inst);
        Ok(())
    }

    pub fn scale(&mut self, id: &str, factor: f64) -> Result<(), ControlError> {
        let mut inst = self.instance_mut(id)?.clone();
        inst.scale(factor, &mut self.live)?;
        self.instances.insert(id.into(), inst);
        Ok(())
    }

    /// Stops a loop, releases its reservations and the knobs it owned.
    pub fn terminate(&mut self, id: &str) -> Result<(), ControlError> {
        let mut inst = self.instance_mut(id)?.clone();
        inst.terminate(&mut self.live)?;
        self.instances.insert(id.into(), inst);
        self.owners.retain(|_, owner| owner != id);
        Ok(())
    }

    pub fn query(&self, id: &str) -> Result<InstanceSnapshot, ControlError> {
        self.instances.get(id).map(MklInstance::query).ok_or_else(|| ControlError::UnknownInstance(id.into()))
    }

    pub fn instance(&self, id: &str) -> Option<&MklInstance> {
        self.instances.get(id)
    }

    /// Makes the loop's next tick fail at its first step of `kind`.
    pub fn inject_fault(&mut self, id: &str, kind: crate::chain::StepKind) -> Result<(), ControlError> {
        self.instance_mut(id)?.inject_fault(kind);
        Ok(())
    }

    pub fn instances(&self) -> impl Iterator<Item = &MklInstance> {
        self.instances.values()
    }

    pub fn owner_of(&self, key: &KnobKey) -> Option<&str> {
        self.owners.get(key).map(String::as_str)
    }

    fn priorities(&self) -> BTreeMap<String, u32> {
        self.instances.iter().map(|(id, i)| (id.clone(), i.chain.priority)).collect()
    }

    fn running(&self) -> impl Iterator<Item = &MklInstance> {
        self.instances.values().filter(|i| i.state() == InstanceState::Running)
    }

    /// Smallest tick period among running loops.
    pub fn fastest_period(&self) -> Option<u64> {
        self.running().map(|i| i.period_ms).min()
    }

    fn record(&mut self, p: &ActionProposal, status: ActionStatus, reason: &str) {
        if let Some(inst) = self.instances.get_mut(&p.issued_by) {
            inst.log(p.clone(), status, reason);
            match status {
                ActionStatus::Applied => inst.fcaps.configuration += 1,
                ActionStatus::Rejected if reason.starts_with("knob owned") => inst.fcaps.security += 1,
                _ => {}
            }
        }
    }

    /// Detects and, when enabled, arbitrates one batch of proposals.
    fn settle(&mut self, t: u64, level: &str, pending: Vec<ActionProposal>) -> Vec<ActionProposal> {
        let report = detect_conflicts(&pending, self.policy.conflict_window_ms, &self.live);
        self.conflicts_seen += report.conflicts.len();
        for c in &report.conflicts {
            let (a, b) = (&pending[c.a], &pending[c.b]);
            let summary = format!("{} {} vs {} {}", a.issued_by, a.summary(), b.issued_by, b.summary());
            self.event(t, level, &a.issued_by, "conflict", summary, c.kind.as_str());
        }
        if !self.policy.arbitration || report.is_empty() {
            return pending;
        }
        let out = arbitrate(&pending, &report, &self.priorities());
        for (p, reason) in &out.rejected {
            self.record(p, ActionStatus::Rejected, reason);
            self.event(t, level, &p.issued_by, "reject", p.summary(), "rejected");
        }
        for d in &out.decisions {
            if d.kind == super::ConflictKind::SameKnobOpposing {
                for p in out.approved.iter().filter(|p| p.issued_by == d.winner) {
                    self.owners.insert(KnobKey::new(p.target.clone(), &p.knob), d.winner.clone());
                }
            }
            let summary = format!("{} over {}{}", d.winner, d.loser, if d.tie_break { " (tie-break)" } else { "" });
            self.event(t, level, &d.winner, "decision", summary, d.kind.as_str());
        }
        self.decisions.extend(out.decisions);
        out.approved
    }

    fn tier_of(&self, chain: &str) -> &'static str {
        self.instances.get(chain).map_or("", |i| i.chain.tier.as_str())
    }

    fn apply(&mut self, t: u64, approved: &[ActionProposal]) {
        for p in approved {
            let key = KnobKey::new(p.target.clone(), &p.knob);
            match self.live.set_knob(&key, p.value) {
                Ok(old) => {
                    if old != p.value {
                        self.changes.push(KnobChange { time_ms: t, key, old, new: p.value, chain: p.issued_by.clone() });
                    }
                    self.record(p, ActionStatus::Applied, "");
                    let tier = self.tier_of(&p.issued_by);
                    self.event(t, tier, &p.issued_by, "apply", p.summary(), "applied");
                }
                Err(e) => {
                    if matches!(e, ControlError::Capacity(_)) {
                        self.refused_capacity += 1;
                    }
                    let reason = e.to_string();
                    self.record(p, ActionStatus::Rejected, &reason);
                    let tier = self.tier_of(&p.issued_by);
                    self.event(t, tier, &p.issued_by, "refuse", p.summary(), "rejected");
                }
            }
        }
    }

    /// Runs every loop due at `t`: deeper tiers first, each tier settling its
    /// own conflicts before the end-to-end level settles those across tiers.
    /// Approved proposals pass the sandbox (when enabled) and are applied.
    pub fn step(&mut self, t: u64) -> Result<(), ControlError> {
        let mut due: Vec<(Tier, String)> =
            self.running().filter(|i| i.is_due(t)).map(|i| (i.chain.tier, i.id.clone())).collect();
        due.sort_by(|a, b| b.0.depth().cmp(&a.0.depth()).then_with(|| a.1.cmp(&b.1)));
        if due.is_empty() {
            return Ok(());
        }
        let env = Arc::clone(&self.env);
        let mut tiers: Vec<Tier> = Vec::new();
        let mut survivors = Vec::new();
        let mut i = 0;
        while i < due.len() {
            let tier = due[i].0;
            tiers.push(tier);
            let mut pending = Vec::new();
            while i < due.len() && due[i].0 == tier {
                let id = due[i].1.clone();
                let inst = self.instances.get_mut(&id).expect("due instance exists");
                let proposals = inst.tick(t, &self.live, &env)?;
                let faulted = inst.knowledge.latest().and_then(|k| k.fault.clone());
                let summary = match faulted {
                    Some(f) => f,
                    None => proposals.iter().map(ActionProposal::summary).collect::<Vec<_>>().join(";"),
                };
                self.event(t, tier.as_str(), &id, "tick", summary, "");
                for p in proposals {
                    let key = KnobKey::new(p.target.clone(), &p.knob);
                    match self.owners.get(&key) {
                        Some(owner) if *owner != p.issued_by => {
                            let reason = format!("knob owned by `{owner}`");
                            self.record(&p, ActionStatus::Rejected, &reason);
                            self.event(t, tier.as_str(), &id, "reject", p.summary(), "owned");
                        }
                        _ => pending.push(p),
                    }
                }
                i += 1;
            }
            survivors.extend(self.settle(t, tier.as_str(), pending));
        }
        let approved = if tiers.len() > 1 { self.settle(t, "e2e", survivors) } else { survivors };

        if let Some(cfg) = self.policy.sandbox {
            if !approved.is_empty() {
                let result = self.sandbox_dryrun(t, &approved, cfg.horizon_ticks)?;
                self.sandbox_runs.push((t, result));
                let summary = format!("reversals={} violations={}", result.oscillation_count, result.violation_count);
                self.event(t, "e2e", "", "sandbox", summary, result.verdict.as_str());
                if result.verdict == Verdict::Unstable {
                    for p in &approved {
                        self.record(p, ActionStatus::Withheld, "sandbox verdict unstable");
                        self.event(t, "e2e", &p.issued_by, "withhold", p.summary(), "withheld");
                    }
                    return self.check(t);
                }
            }
        }
        self.apply(t, &approved);
        self.check(t)
    }

    fn check(&mut self, t: u64) -> Result<(), ControlError> {
        if let Err(e) = self.live.check_capacity() {
            self.capacity_violations += 1;
            self.event(t, "e2e", "", "violation", e, "");
        }
        Ok(())
    }

    /// Applies `approved` to a copy of the orchestrator at time `t` and
    /// replays every running loop for `horizon` ticks of the fastest one.
    /// The copy runs without a sandbox of its own; `self` is not modified.
    pub fn sandbox_dryrun(&self, t: u64, approved: &[ActionProposal], horizon: u32) -> Result<SandboxResult, ControlError> {
        let cfg = self.policy.sandbox.unwrap_or_default();
        let mut twin = self.clone();
        twin.policy.sandbox = None;
        let first = twin.changes.len();
        let (cap0, refused0) = (twin.capacity_violations, twin.refused_capacity);
        twin.apply(t, approved);
        twin.check(t)?;
        if let Some(f) = twin.fastest_period() {
            twin.run(t + 1, f * u64::from(horizon.max(1)))?;
        }
        let reversals = count_reversals(&twin.changes[first..], None);
        let violations = (twin.capacity_violations - cap0) + (twin.refused_capacity - refused0);
        Ok(SandboxResult::judge(reversals, violations as u32, &cfg))
    }

    /// Steps every instant in `[start, start + duration)` at which some
    /// running loop is due.
    pub fn run(&mut self, start: u64, duration: u64) -> Result<(), ControlError> {
        let end = start + duration;
        let periods: BTreeSet<u64> = self.running().map(|i| i.period_ms).collect();
        let mut times = BTreeSet::new();
        for p in periods {
            let mut t = start.div_ceil(p) * p;
            while t < end {
                times.insert(t);
                t += p;
            }
        }
        for t in times {
            self.step(t)?;
        }
        Ok(())
    }

    /// Knob sign reversals among applied changes after `after_ms`.
    pub fn reversals_since(&self, after_ms: Option<u64>) -> u32 {
        count_reversals(&self.changes, after_ms)
    }

    pub fn trace_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["time_ms", "tier", "chain", "event", "summary", "verdict"]).unwrap();
        for e in &self.trace {
            w.write_record([&e.time_ms.to_string(), &e.tier, &e.chain, &e.kind, &e.summary, &e.verdict]).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn fcaps_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["chain", "state", "fault", "configuration", "accounting", "performance", "security"]).unwrap();
        for i in self.instances.values() {
            let f = i.fcaps;
            let state = serde_json::to_value(i.state()).unwrap();
            w.write_record([
                i.id.clone(),
                state.as_str().unwrap().to_string(),
                f.fault.to_string(),
                f.configuration.to_string(),
                f.accounting.to_string(),
                f.performance.to_string(),
                f.security.to_string(),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}
