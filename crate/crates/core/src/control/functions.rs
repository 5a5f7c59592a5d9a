//! Step functions and the environment they observe.
//!
//! Steps of one tick share a [`Blackboard`]: Monitor steps write signals,
//! Analyze steps turn signals into [`AnalysisOutput`]s, Plan steps turn
//! outputs into proposals and the Execute step marks them for submission.
//!
//! | name | kind | params |
//! |---|---|---|
//! | `monitor.knob` | monitor | `knob`; writes signal `knob` |
//! | `monitor.signal` | monitor | `signal`, `window` (1), `into` |
//! | `monitor.scrape` | monitor | writes signal `frame` from series `workload` |
//! | `analyze.setpoint` | analyze | `setpoint`, `gain` (1), `input` (`knob`), `output` (`knob.target`) |
//! | `analyze.forecast` | analyze | `model`, `input` (`window`), `reduce` (`max`), `output` (`traffic.forecast`) |
//! | `analyze.compress` | analyze | `model`, `input` (`frame`); emits `compression.mse` |
//! | `plan.catalog` | plan | `catalog` (`default`) |
//! | `execute.apply` | execute | |
//! | `knowledge.store` | knowledge | |

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::chain::{catalog_translate, ActionCatalog, ActionProposal, AnalysisOutput, MklChain, MklStep, StepKind};
use crate::engines::{Autoencoder, LinearModel, RecurrentModel};
use crate::metrics::{scrape, Catalog, Scaler};
use crate::sdi::NodeId;

use super::LiveState;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Blackboard {
    pub signals: BTreeMap<String, Vec<f64>>,
    pub outputs: Vec<AnalysisOutput>,
    pub proposals: Vec<ActionProposal>,
    pub execute: bool,
}

/// A series sampled at a fixed interval from time 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSeries {
    pub interval_ms: u64,
    pub values: Vec<f64>,
}

impl SampledSeries {
    fn index_at(&self, t_ms: u64) -> usize {
        ((t_ms / self.interval_ms) as usize).min(self.values.len().saturating_sub(1))
    }

    pub fn value_at(&self, t_ms: u64) -> Option<f64> {
        self.values.get(self.index_at(t_ms)).copied()
    }

    /// The `n` samples ending at the one current at `t_ms`.
    pub fn window(&self, t_ms: u64, n: usize) -> Option<&[f64]> {
        let end = self.index_at(t_ms) + 1;
        (end >= n && end <= self.values.len()).then(|| &self.values[end - n..end])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelHandle {
    Autoencoder { model: Autoencoder, scaler: Scaler },
    Recurrent(RecurrentModel),
    Linear(LinearModel),
}

/// Everything outside the live state that step functions may read.
#[derive(Debug, Clone, Default)]
pub struct Environment {
    pub series: BTreeMap<String, SampledSeries>,
    pub models: BTreeMap<String, ModelHandle>,
    pub catalogs: BTreeMap<String, ActionCatalog>,
    pub metric_catalog: Option<Catalog>,
}

pub struct StepContext<'a> {
    pub t_ms: u64,
    pub chain: &'a MklChain,
    pub step: &'a MklStep,
    pub live: &'a LiveState,
    pub env: &'a Environment,
    /// Resolved destination-domain nodes.
    pub destination: &'a [NodeId],
}

pub trait StepFunction: Send + Sync {
    fn kind(&self) -> StepKind;
    fn run(&self, ctx: &StepContext, board: &mut Blackboard) -> Result<(), String>;
}

struct Builtin<F> {
    kind: StepKind,
    f: F,
}

impl<F> StepFunction for Builtin<F>
where
    F: Fn(&StepContext, &mut Blackboard) -> Result<(), String> + Send + Sync,
{
    fn kind(&self) -> StepKind {
        self.kind
    }

    fn run(&self, ctx: &StepContext, board: &mut Blackboard) -> Result<(), String> {
        (self.f)(ctx, board)
    }
}

/// Named step functions.
#[derive(Clone, Default)]
pub struct Registry {
    functions: BTreeMap<String, Arc<dyn StepFunction>>,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.functions.keys()).finish()
    }
}

fn param_or<'a>(step: &'a MklStep, key: &str, default: &'a str) -> &'a str {
    step.param_str(key).unwrap_or(default)
}

fn last_signal(board: &Blackboard, name: &str) -> Result<f64, String> {
    board.signals.get(name).and_then(|v| v.last().copied()).ok_or(format!("missing signal `{name}`"))
}

impl Registry {
    pub fn empty() -> Self {
        Registry::default()
    }

    pub fn register(
        &mut self,
        name: &str,
        kind: StepKind,
        f: impl Fn(&StepContext, &mut Blackboard) -> Result<(), String> + Send + Sync + 'static,
    ) {
        self.functions.insert(name.into(), Arc::new(Builtin { kind, f }));
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn StepFunction>> {
        self.functions.get(name).cloned()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.functions.keys().map(String::as_str)
    }

    pub fn builtin() -> Self {
        let mut r = Registry::empty();
        r.register("monitor.knob", StepKind::Monitor, |ctx, board| {
            let knob = ctx.step.param_str("knob").ok_or("monitor.knob needs `knob`")?;
            let value = ctx
                .destination
                .iter()
                .find_map(|n| crate::chain::KnobView::knob_value(ctx.live, n, knob))
                .ok_or(format!("no destination node exposes `{knob}`"))?;
            board.signals.insert("knob".into(), vec![value]);
            Ok(())
        });
        r.register("monitor.signal", StepKind::Monitor, |ctx, board| {
            let name = ctx.step.param_str("signal").ok_or("monitor.signal needs `signal`")?;
            let n = ctx.step.param_f64("window").unwrap_or(1.0) as usize;
            let series = ctx.env.series.get(name).ok_or(format!("unknown series `{name}`"))?;
            let w = series.window(ctx.t_ms, n).ok_or(format!("series `{name}` has fewer than {n} samples at t"))?;
            board.signals.insert(param_or(ctx.step, "into", name).into(), w.to_vec());
            Ok(())
        });
        r.register("monitor.scrape", StepKind::Monitor, |ctx, board| {
            let catalog = ctx.env.metric_catalog.as_ref().ok_or("no metric catalog")?;
            let w = ctx.env.series.get("workload").and_then(|s| s.value_at(ctx.t_ms)).ok_or("no workload series")?;
            let frame = scrape(&ctx.live.sdi, w, catalog, ctx.t_ms as f64 / 1000.0);
            board.signals.insert("frame".into(), frame.values);
            Ok(())
        });
        r.register("analyze.setpoint", StepKind::Analyze, |ctx, board| {
            let current = last_signal(board, param_or(ctx.step, "input", "knob"))?;
            let setpoint = ctx.step.param_f64("setpoint").ok_or("analyze.setpoint needs `setpoint`")?;
            let gain = ctx.step.param_f64("gain").unwrap_or(1.0);
            let kind = param_or(ctx.step, "output", "knob.target");
            board.outputs.push(AnalysisOutput::new(kind, current + gain * (setpoint - current)));
            Ok(())
        });
        r.register("analyze.forecast", StepKind::Analyze, |ctx, board| {
            let name = ctx.step.param_str("model").ok_or("analyze.forecast needs `model`")?;
            let Some(ModelHandle::Recurrent(model)) = ctx.env.models.get(name) else {
                return Err(format!("`{name}` is not a recurrent model"));
            };
            let input = param_or(ctx.step, "input", "window");
            let window = board.signals.get(input).ok_or(format!("missing signal `{input}`"))?;
            let forecast = model.predict(window).map_err(|e| e.to_string())?;
            let value = match param_or(ctx.step, "reduce", "max") {
                "max" => forecast.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                "mean" => forecast.iter().sum::<f64>() / forecast.len() as f64,
                "last" => *forecast.last().unwrap(),
                other => return Err(format!("unknown reduction `{other}`")),
            };
            board.outputs.push(AnalysisOutput::new(param_or(ctx.step, "output", "traffic.forecast"), value));
            Ok(())
        });
        r.register("analyze.compress", StepKind::Analyze, |ctx, board| {
            let name = ctx.step.param_str("model").ok_or("analyze.compress needs `model`")?;
            let Some(ModelHandle::Autoencoder { model, scaler }) = ctx.env.models.get(name) else {
                return Err(format!("`{name}` is not an autoencoder"));
            };
            let input = param_or(ctx.step, "input", "frame");
            let frame = board.signals.get(input).ok_or(format!("missing signal `{input}`"))?;
            if frame.len() != scaler.width() {
                return Err(format!("frame width {} but scaler width {}", frame.len(), scaler.width()));
            }
            let x = scaler.transform_row(frame);
            let mse = model.sample_loss(&x).map_err(|e| e.to_string())?;
            board.outputs.push(AnalysisOutput::new("compression.mse", mse));
            Ok(())
        });
        r.register("plan.catalog", StepKind::Plan, |ctx, board| {
            let name = param_or(ctx.step, "catalog", "default");
            let catalog = ctx.env.catalogs.get(name).ok_or(format!("unknown catalog `{name}`"))?;
            for out in &board.outputs {
                let p = catalog_translate(catalog, out, ctx.destination, ctx.live, &ctx.chain.id, ctx.t_ms)
                    .map_err(|e| e.to_string())?;
                board.proposals.extend(p);
            }
            Ok(())
        });
        r.register("execute.apply", StepKind::Execute, |_, board| {
            board.execute = true;
            Ok(())
        });
        r.register("knowledge.store", StepKind::Knowledge, |_, _| Ok(()));
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_carry_their_kind_prefix() {
        let r = Registry::builtin();
        for name in r.names() {
            let kind = r.get(name).unwrap().kind();
            assert!(name.starts_with(&format!("{}.", kind.as_str())), "{name}");
        }
    }

    #[test]
    fn series_windows() {
        let s = SampledSeries { interval_ms: 1000, values: (0..10).map(f64::from).collect() };
        assert_eq!(s.window(2999, 3), Some(&[0.0, 1.0, 2.0][..]));
        assert_eq!(s.window(1000, 3), None);
        assert_eq!(s.value_at(1_000_000), Some(9.0));
    }
}
