use std::path::Path;
use std::time::Instant;

use super::config::ScenarioConfig;
use super::report::{fmt, Check, Outputs, RunReport};
use super::HarnessError;
use crate::control::{Environment, LiveState, Orchestrator, Policy, Registry};
use crate::sdi::TopologyState;

struct Mode {
    reversals: u32,
    reversals_after_decision: u32,
    conflicts: usize,
    decisions: usize,
    capacity_violations: usize,
}

fn run_mode(cfg: &ScenarioConfig, policy: Policy, tag: &str, out: &mut Outputs) -> Result<Mode, HarnessError> {
    let mut live = LiveState::new(TopologyState::new(cfg.topology()?));
    for k in &cfg.knobs {
        live.add_knob(k)?;
    }
    let env = Environment { catalogs: cfg.load_catalogs()?, ..Environment::default() };
    let mut orch = Orchestrator::new(live, env, Registry::builtin(), cfg.scheduler, policy);
    for c in cfg.load_chains()? {
        orch.instantiate(c)?;
    }
    let period = orch.fastest_period().expect("chains are running");
    orch.run(0, cfg.conflict.ticks * period)?;

    let first = orch.decisions.first().map(|d| d.time_ms);
    let mode = Mode {
        reversals: orch.reversals_since(None),
        reversals_after_decision: first.map_or(0, |t| orch.reversals_since(Some(t))),
        conflicts: orch.conflicts_seen,
        decisions: orch.decisions.len(),
        capacity_violations: orch.capacity_violations,
    };
    out.text(&format!("trace_{tag}.csv"), &orch.trace_csv(), orch.trace.len())?;
    out.text(&format!("fcaps_{tag}.csv"), &orch.fcaps_csv(), orch.instances().count())?;
    out.csv(
        &format!("knob_{tag}.csv"),
        &["time_ms", "knob", "old", "new", "chain"],
        orch.changes.iter().map(|c| [c.time_ms.to_string(), c.key.to_string(), fmt(c.old), fmt(c.new), c.chain.clone()]),
    )?;
    out.csv(
        &format!("decisions_{tag}.csv"),
        &["time_ms", "winner", "loser", "tie_break", "kind", "knobs"],
        orch.decisions.iter().map(|d| {
            [d.time_ms.to_string(), d.winner.clone(), d.loser.clone(), d.tie_break.to_string(), d.kind.as_str().into(), d.knobs.join(";")]
        }),
    )?;
    Ok(mode)
}

/// Runs the configured loops twice, without and then with arbitration, and
/// counts knob sign reversals in each run.
pub fn run_conflict_demo(cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunReport, HarnessError> {
    let started = Instant::now();
    let seed = cfg.seed()?;
    let mut out = Outputs::new(out_dir)?;
    let off = run_mode(cfg, Policy { arbitration: false, sandbox: None, ..cfg.conflict.policy }, "off", &mut out)?;
    let on_policy = Policy { arbitration: true, ..cfg.conflict.policy };
    let on = run_mode(cfg, on_policy, "on", &mut out)?;
    let chains = cfg.chains.len();

    let metrics = vec![
        ("chains".to_string(), chains as f64),
        ("ticks".to_string(), cfg.conflict.ticks as f64),
        ("reversals_off".to_string(), off.reversals as f64),
        ("conflicts_off".to_string(), off.conflicts as f64),
        ("reversals_on".to_string(), on.reversals as f64),
        ("reversals_on_after_first_decision".to_string(), on.reversals_after_decision as f64),
        ("conflicts_on".to_string(), on.conflicts as f64),
        ("decisions_on".to_string(), on.decisions as f64),
        ("capacity_violations".to_string(), (off.capacity_violations + on.capacity_violations) as f64),
    ];
    let mut checks = Vec::new();
    if chains >= 2 {
        checks.push(Check::new("reversals_off", off.reversals as f64, ">=", cfg.conflict.min_reversals as f64));
        checks.push(Check::new("reversals_on_after_first_decision", on.reversals_after_decision as f64, "==", 0.0));
    } else {
        checks.push(Check::new("conflicts_off", off.conflicts as f64, "==", 0.0));
        checks.push(Check::new("conflicts_on", on.conflicts as f64, "==", 0.0));
    }
    checks.push(Check::new(
        "capacity_violations",
        (off.capacity_violations + on.capacity_violations) as f64,
        "==",
        0.0,
    ));
    out.finish("conflict-demo", seed, metrics, checks, started.elapsed())
}
