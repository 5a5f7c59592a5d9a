use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use super::functions::{Blackboard, Environment, Registry, StepContext, StepFunction};
use super::{ControlError, LiveState};
use crate::chain::{
    embed, reserve_embedding, validate_chain, ActionProposal, AnalysisOutput, Embedding, MklChain, StepKind,
    StepPlacement,
};
use crate::sdi::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceState {
    Instantiated,
    Running,
    Scaling,
    Terminated,
}

/// Element-management counters.
///
/// `fault`: step failures. `configuration`: applied knob writes and
/// lifecycle changes. `accounting`: ticks executed. `performance`: proposals
/// submitted. `security`: proposals refused because another loop holds the
/// knob.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Fcaps {
    pub fault: u64,
    pub configuration: u64,
    pub accounting: u64,
    pub performance: u64,
    pub security: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionStatus {
    Applied,
    Rejected,
    Withheld,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionRecord {
    pub proposal: ActionProposal,
    pub status: ActionStatus,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeEntry {
    pub t_ms: u64,
    /// Last value of each signal.
    pub signals: BTreeMap<String, f64>,
    pub outputs: Vec<AnalysisOutput>,
    pub proposals: Vec<ActionProposal>,
    pub fault: Option<String>,
}

/// Per-loop history of what was observed, concluded and proposed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeStore {
    entries: Vec<KnowledgeEntry>,
}

impl KnowledgeStore {
    pub fn entries(&self) -> &[KnowledgeEntry] {
        &self.entries
    }

    pub fn latest(&self) -> Option<&KnowledgeEntry> {
        self.entries.last()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Read-only view returned by [`MklInstance::query`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceSnapshot {
    pub id: String,
    pub state: InstanceState,
    pub priority: u32,
    pub period_ms: u64,
    pub placements: Vec<StepPlacement>,
    pub fcaps: Fcaps,
    pub actions: usize,
    pub knowledge_entries: usize,
}

/// A running MAPE-K loop: its chain, where it was placed and what it did.
#[derive(Clone)]
pub struct MklInstance {
    pub id: String,
    pub chain: MklChain,
    pub embedding: Embedding,
    state: InstanceState,
    functions: Vec<Arc<dyn StepFunction>>,
    order: Vec<usize>,
    destination: Vec<NodeId>,
    pub period_ms: u64,
    pub action_log: Vec<ActionRecord>,
    pub fcaps: Fcaps,
    pub knowledge: KnowledgeStore,
    pending_fault: Option<StepKind>,
}

impl std::fmt::Debug for MklInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MklInstance").field("id", &self.id).field("state", &self.state).finish_non_exhaustive()
    }
}

fn resolve(chain: &MklChain, registry: &Registry) -> Result<Vec<Arc<dyn StepFunction>>, ControlError> {
    let report = validate_chain(chain);
    if !report.is_valid() {
        return Err(ControlError::InvalidChain(report.violations.join("; ")));
    }
    chain
        .steps
        .iter()
        .map(|s| {
            let f = registry.get(&s.function).ok_or_else(|| ControlError::UnknownFunction(s.function.clone()))?;
            if f.kind() != s.kind {
                return Err(ControlError::UnknownFunction(format!("{} is not a {} function", s.function, s.kind)));
            }
            Ok(f)
        })
        .collect()
}

impl MklInstance {
    /// Validates and embeds `chain`, reserving its resources, and starts it.
    pub fn instantiate(
        chain: MklChain,
        live: &mut LiveState,
        registry: &Registry,
        period_ms: u64,
    ) -> Result<Self, ControlError> {
        if period_ms == 0 {
            return Err(ControlError::InvalidChain("tick period must be positive".into()));
        }
        let functions = resolve(&chain, registry)?;
        let embedding = embed(&chain, &mut live.sdi)?;
        let mut inst = MklInstance {
            id: chain.id.clone(),
            order: chain.topological_order().expect("validated"),
            destination: chain.destination_domain.resolve(live.sdi.topology()),
            chain,
            embedding,
            state: InstanceState::Instantiated,
            functions,
            period_ms,
            action_log: Vec::new(),
            fcaps: Fcaps::default(),
            knowledge: KnowledgeStore::default(),
            pending_fault: None,
        };
        inst.state = InstanceState::Running;
        Ok(inst)
    }

    pub fn state(&self) -> InstanceState {
        self.state
    }

    pub fn destination(&self) -> &[NodeId] {
        &self.destination
    }

    fn require_running(&self, op: &'static str) -> Result<(), ControlError> {
        if self.state != InstanceState::Running {
            return Err(ControlError::IllegalTransition { op, state: self.state });
        }
        Ok(())
    }

    pub fn query(&self) -> InstanceSnapshot {
        InstanceSnapshot {
            id: self.id.clone(),
            state: self.state,
            priority: self.chain.priority,
            period_ms: self.period_ms,
            placements: self.embedding.placements.clone(),
            fcaps: self.fcaps,
            actions: self.action_log.len(),
            knowledge_entries: self.knowledge.len(),
        }
    }

    /// Replaces the chain definition, re-embedding it. On failure the
    /// instance and the reservations are left as they were.
    pub fn update(&mut self, chain: MklChain, live: &mut LiveState, registry: &Registry) -> Result<(), ControlError> {
        self.require_running("update")?;
        if chain.id != self.id {
            return Err(ControlError::InvalidChain(format!("update of `{}` with chain `{}`", self.id, chain.id)));
        }
        let functions = resolve(&chain, registry)?;
        let saved = live.sdi.clone();
        live.sdi.release_owner(&self.id);
        match embed(&chain, &mut live.sdi) {
            Ok(embedding) => {
                self.order = chain.topological_order().expect("validated");
                self.destination = chain.destination_domain.resolve(live.sdi.topology());
                self.functions = functions;
                self.chain = chain;
                self.embedding = embedding;
                self.fcaps.configuration += 1;
                Ok(())
            }
            Err(e) => {
                live.sdi = saved;
                Err(e.into())
            }
        }
    }

    /// Multiplies the Analyze and Execute steps' resource demands by
    /// `factor`. The current placement is kept when the nodes can hold the
    /// new demand; otherwise the chain is embedded afresh.
    pub fn scale(&mut self, factor: f64, live: &mut LiveState) -> Result<(), ControlError> {
        self.require_running("scale")?;
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(ControlError::InvalidChain(format!("scale factor {factor}")));
        }
        self.state = InstanceState::Scaling;
        let mut scaled = self.chain.clone();
        for s in scaled.steps.iter_mut().filter(|s| matches!(s.kind, StepKind::Analyze | StepKind::Execute)) {
            let q = &mut s.qos;
            q.cpu = (q.cpu as f64 * factor).round() as u64;
            q.mem = (q.mem as f64 * factor).round() as u64;
            q.storage = (q.storage as f64 * factor).round() as u64;
        }
        let saved = live.sdi.clone();
        live.sdi.release_owner(&self.id);
        let result = match reserve_embedding(&scaled, &mut live.sdi, &self.embedding) {
            Ok(ids) => {
                let mut emb = self.embedding.clone();
                emb.allocations = ids;
                Ok(emb)
            }
            Err(_) => embed(&scaled, &mut live.sdi),
        };
        self.state = InstanceState::Running;
        match result {
            Ok(emb) => {
                self.chain = scaled;
                self.embedding = emb;
                self.fcaps.configuration += 1;
                Ok(())
            }
            Err(e) => {
                live.sdi = saved;
                Err(e.into())
            }
        }
    }

    /// Releases every reservation the loop holds.
    pub fn terminate(&mut self, live: &mut LiveState) -> Result<(), ControlError> {
        if matches!(self.state, InstanceState::Terminated | InstanceState::Scaling) {
            return Err(ControlError::IllegalTransition { op: "terminate", state: self.state });
        }
        live.sdi.release_owner(&self.id);
        self.embedding.allocations.clear();
        self.state = InstanceState::Terminated;
        Ok(())
    }

    /// Makes the next tick fail at the first step of `kind`.
    pub fn inject_fault(&mut self, kind: StepKind) {
        self.pending_fault = Some(kind);
    }

    pub fn is_due(&self, t_ms: u64) -> bool {
        self.state == InstanceState::Running && t_ms % self.period_ms == 0
    }

    /// Runs the steps in topological order and returns the proposals of the
    /// tick without applying them. A failing step counts a fault and yields
    /// no proposals. Proposals are returned only when the chain has an
    /// Execute step; otherwise they are kept as knowledge.
    pub fn tick(&mut self, t_ms: u64, live: &LiveState, env: &Environment) -> Result<Vec<ActionProposal>, ControlError> {
        self.require_running("tick")?;
        if t_ms % self.period_ms != 0 {
            return Err(ControlError::Misaligned { t_ms, period_ms: self.period_ms });
        }
        self.fcaps.accounting += 1;
        let mut board = Blackboard::default();
        let mut fault = None;
        for &i in &self.order {
            let step = &self.chain.steps[i];
            if self.pending_fault == Some(step.kind) {
                self.pending_fault = None;
                fault = Some(format!("injected fault in `{}`", step.name));
                break;
            }
            let ctx = StepContext { t_ms, chain: &self.chain, step, live, env, destination: &self.destination };
            if let Err(e) = self.functions[i].run(&ctx, &mut board) {
                fault = Some(format!("{}: {e}", step.name));
                break;
            }
        }
        let entry = KnowledgeEntry {
            t_ms,
            signals: board.signals.iter().filter_map(|(k, v)| Some((k.clone(), *v.last()?))).collect(),
            outputs: board.outputs.clone(),
            proposals: board.proposals.clone(),
            fault: fault.clone(),
        };
        self.knowledge.entries.push(entry);
        if fault.is_some() {
            self.fcaps.fault += 1;
            return Ok(Vec::new());
        }
        let proposals = if board.execute { board.proposals } else { Vec::new() };
        self.fcaps.performance += proposals.len() as u64;
        Ok(proposals)
    }

    pub(crate) fn log(&mut self, proposal: ActionProposal, status: ActionStatus, reason: &str) {
        self.action_log.push(ActionRecord { proposal, status, reason: reason.into() });
    }
}
