use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{derive_seed, ScenarioConfig};
use super::report::{fmt, Check, Outputs, RunReport};
use super::HarnessError;
use crate::chain::{ActionCatalog, CatalogEntry};
use crate::control::{Backing, Environment, KnobKey, KnobSpec, LiveState, ModelHandle, Orchestrator, Registry, SampledSeries};
use crate::engines::{forecast_mse, linfit, rnn_train, ModelFile, StoredModel};
use crate::metrics::generate_workload;
use crate::sdi::TopologyState;

/// Knob value in force at each sample time, starting from `initial`.
fn timeline(initial: f64, changes: &[(u64, f64)], times: impl Iterator<Item = u64>) -> Vec<f64> {
    let mut value = initial;
    let mut next = 0;
    times
        .map(|t| {
            while next < changes.len() && changes[next].0 <= t {
                value = changes[next].1;
                next += 1;
            }
            value
        })
        .collect()
}

/// Fits the traffic to cpu relation, trains the traffic forecaster on the
/// first part of the series, then runs the resizing loop over the rest and
/// compares its allocation with static peak provisioning.
pub fn run_adaptive_vnf(cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunReport, HarnessError> {
    let started = Instant::now();
    let seed = cfg.seed()?;
    let v = &cfg.vnf;
    let profile = cfg.workload(derive_seed(seed, "workload"))?;
    let interval_ms = (profile.interval * 1000.0).round() as u64;
    let traffic = generate_workload(&profile)?.values();
    let (lo, hi) = traffic.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let norm: Vec<f64> = traffic.iter().map(|x| (x - lo) / (hi - lo)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "planted"));
    let cpu: Vec<f64> = norm
        .iter()
        .map(|x| {
            let e: f64 = StandardNormal.sample(&mut rng);
            v.slope * x + v.intercept + v.noise * e
        })
        .collect();
    let need: Vec<f64> = cpu.iter().map(|c| (c * v.full_scale).max(0.0)).collect();

    let mut out = Outputs::new(out_dir)?;
    out.csv(
        "traffic.csv",
        &["time_ms", "traffic", "traffic_norm", "cpu_norm", "cpu_need_mc"],
        (0..traffic.len()).map(|i| {
            [(i as u64 * interval_ms).to_string(), fmt(traffic[i]), fmt(norm[i]), fmt(cpu[i]), fmt(need[i])]
        }),
    )?;

    let fit = linfit(&norm, &cpu)?;
    let slope_error = (fit.slope - v.slope).abs() / v.slope.abs();
    out.csv(
        "fit.csv",
        &["traffic_norm", "cpu_norm", "fitted"],
        norm.iter().zip(&cpu).map(|(x, y)| [fmt(*x), fmt(*y), fmt(fit.predict(*x))]),
    )?;
    let linear_json = ModelFile::new(StoredModel::Linear(fit.clone()), None).to_json();
    out.text("linear.json", &linear_json, linear_json.lines().count())?;

    let cut = ((norm.len() as f64) * v.train_fraction).round() as usize;
    let mut rnn_cfg = v.rnn.clone();
    rnn_cfg.train.seed = derive_seed(seed, "rnn");
    let (model, history) = rnn_train(&norm[..cut], &rnn_cfg).map_err(HarnessError::from_engine)?;
    let (model_mse, persistence_mse) = forecast_mse(&model, &norm[cut..])?;
    let ratio = model_mse / persistence_mse;
    out.csv("rnn_loss.csv", &["epoch", "loss"], history.iter().enumerate().map(|(i, l)| [i.to_string(), fmt(*l)]))?;
    let lstm_json = ModelFile::new(StoredModel::Recurrent(model.clone()), Some(rnn_cfg.train.clone())).to_json();
    out.text("lstm.json", &lstm_json, lstm_json.lines().count())?;
    let (w, h) = (model.window, model.horizon);
    let mut forecast_rows = Vec::new();
    let mut origin = cut + w;
    while origin + h <= norm.len() {
        let f = model.predict(&norm[origin - w..origin])?;
        for k in 0..h {
            let i = origin + k;
            forecast_rows.push([(i as u64 * interval_ms).to_string(), fmt(norm[i]), fmt(f[k]), fmt(norm[origin - 1])]);
        }
        origin += h;
    }
    out.csv("forecast.csv", &["time_ms", "actual", "forecast", "persistence"], forecast_rows)?;

    // Closed loop over the held-out period.
    let static_peak = need[cut..].iter().copied().fold(0.0, f64::max).ceil();
    let key = KnobKey::new(v.knob_node.as_str(), &v.knob);
    let mut live = LiveState::new(TopologyState::new(cfg.topology()?));
    live.add_knob(&KnobSpec {
        node: key.node.clone(),
        name: key.name.clone(),
        backing: Some(Backing::Cpu),
        initial: static_peak.min(v.full_scale),
        min: 0.0,
        max: v.full_scale,
    })?;
    let mut env = Environment::default();
    env.series.insert("traffic".into(), SampledSeries { interval_ms, values: norm.clone() });
    env.models.insert("lstm".into(), ModelHandle::Recurrent(model));
    let entry = CatalogEntry::from_linear_model(
        "traffic.forecast",
        key.node.as_str(),
        &key.name,
        &fit,
        0.0,
        1.0,
        v.full_scale,
        (0.0, v.full_scale),
    );
    env.catalogs.insert("vnf".into(), ActionCatalog::new(vec![entry]));
    for (name, c) in cfg.load_catalogs()? {
        env.catalogs.entry(name).or_insert(c);
    }
    let chain = cfg.load_chains()?.remove(0);
    let mut orch = Orchestrator::new(live, env, Registry::builtin(), cfg.scheduler, cfg.policy);
    let initial = static_peak.min(v.full_scale);
    orch.instantiate(chain)?;
    let start_ms = cut as u64 * interval_ms;
    orch.run(start_ms, (norm.len() - cut) as u64 * interval_ms)?;

    let changes: Vec<(u64, f64)> = orch.changes.iter().filter(|c| c.key == key).map(|c| (c.time_ms, c.new)).collect();
    let times = (cut..norm.len()).map(|i| i as u64 * interval_ms);
    let adaptive = timeline(initial, &changes, times.clone());
    let span = &need[cut..];
    let n = span.len() as f64;
    let mean_adaptive = adaptive.iter().sum::<f64>() / n;
    let over_adaptive = adaptive.iter().zip(span).map(|(a, d)| (a - d).max(0.0)).sum::<f64>() / n;
    let over_static = span.iter().map(|d| (static_peak - d).max(0.0)).sum::<f64>() / n;
    let under = adaptive.iter().zip(span).filter(|(a, d)| a < d).count() as f64 / n;
    let shortfall = adaptive.iter().zip(span).map(|(a, d)| (d - a).max(0.0)).sum::<f64>() / n;
    out.csv(
        "allocation.csv",
        &["time_ms", "need_mc", "adaptive_mc", "static_mc"],
        times.zip(span).zip(&adaptive).map(|((t, d), a)| [t.to_string(), fmt(*d), fmt(*a), fmt(static_peak)]),
    )?;
    out.text("trace.csv", &orch.trace_csv(), orch.trace.len())?;
    out.text("fcaps.csv", &orch.fcaps_csv(), orch.instances().count())?;

    let metrics = vec![
        ("samples".to_string(), norm.len() as f64),
        ("planted_slope".to_string(), v.slope),
        ("fit_slope".to_string(), fit.slope),
        ("fit_intercept".to_string(), fit.intercept),
        ("slope_relative_error".to_string(), slope_error),
        ("fit_mse".to_string(), fit.fit_mse),
        ("forecast_mse".to_string(), model_mse),
        ("persistence_mse".to_string(), persistence_mse),
        ("forecast_ratio".to_string(), ratio),
        ("loop_ticks".to_string(), orch.trace.iter().filter(|e| e.kind == "tick").count() as f64),
        ("knob_changes".to_string(), changes.len() as f64),
        ("mean_adaptive_mc".to_string(), mean_adaptive),
        ("static_peak_mc".to_string(), static_peak),
        ("mean_overprovision_adaptive_mc".to_string(), over_adaptive),
        ("mean_overprovision_static_mc".to_string(), over_static),
        ("underprovisioned_fraction".to_string(), under),
        ("mean_shortfall_mc".to_string(), shortfall),
        ("capacity_violations".to_string(), orch.capacity_violations as f64),
    ];
    let checks = vec![
        Check::new("slope_relative_error", slope_error, "<=", 0.01),
        Check::new("fit_mse", fit.fit_mse, "<", v.max_mse),
        Check::new("forecast_ratio", ratio, "<", v.max_forecast_ratio),
        Check::new("mean_adaptive_mc", mean_adaptive, "<", static_peak),
        Check::new("capacity_violations", orch.capacity_violations as f64, "==", 0.0),
    ];
    out.finish("adaptive-vnf", seed, metrics, checks, started.elapsed())
}
