use std::path::Path;
use std::time::Instant;

use super::config::{derive_seed, ScenarioConfig};
use super::report::{fmt, Check, Outputs, RunReport};
use super::HarnessError;
use crate::chain::embed;
use crate::control::{Environment, LiveState, ModelHandle, Orchestrator, Registry, SampledSeries};
use crate::engines::{
    ae_init, ae_train, relative_error_distribution_with, relative_errors, ModelFile, StoredModel, DEFAULT_EPSILON,
    PAPER_WIDTHS,
};
use crate::metrics::{export_csv, generate_workload, simulate_dataset, Catalog, Scaler, PAPER_CPU_METRIC};
use crate::sdi::TopologyState;

/// Bottleneck width over input width of the served autoencoder.
pub const PAPER_COMPRESSION_RATIO: f64 = 75.0 / 111.0;

/// Generates the metric dataset, trains the autoencoder on its first part
/// and measures reconstruction of the rest. With a chain configured, the
/// trained model is also served by a running loop over the held-out period.
pub fn run_compress(cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunReport, HarnessError> {
    let started = Instant::now();
    let seed = cfg.seed()?;
    let topology = cfg.topology()?;
    let catalog = Catalog::paper(&topology, derive_seed(seed, "metric-noise"));
    if catalog.width() != PAPER_WIDTHS[0] {
        return Err(HarnessError::Config(format!(
            "the autoencoder takes {} metrics but the topology yields {}",
            PAPER_WIDTHS[0],
            catalog.width()
        )));
    }
    let profile = cfg.workload(derive_seed(seed, "workload"))?;
    let chain = cfg.compress.chain.as_deref().map(|p| cfg.load_chain(p)).transpose()?;

    // Metrics are scraped from the state the serving loop will run in.
    let mut sdi = TopologyState::new(topology);
    let base = sdi.clone();
    if let Some(c) = &chain {
        embed(c, &mut sdi).map_err(|e| HarnessError::Config(e.to_string()))?;
    }
    let dataset = simulate_dataset(&sdi, &profile, &catalog)?;
    let mut out = Outputs::new(out_dir)?;
    export_csv(&dataset, &out.path("dataset.csv"))?;
    out.record("dataset.csv", dataset.len());

    let (train, valid) = dataset.split_chronological(cfg.compress.train_fraction);
    let scaler = Scaler::fit(&train)?;
    let train_rows = scaler.transform(&train)?.rows;
    let valid_rows = scaler.transform(&valid)?.rows;
    let mut model = ae_init(derive_seed(seed, "ae-init"));
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = derive_seed(seed, "ae-train");
    let history = ae_train(&mut model, &train_rows, &train_cfg).map_err(HarnessError::from_engine)?;
    out.csv("loss.csv", &["epoch", "loss"], history.iter().enumerate().map(|(i, l)| [i.to_string(), fmt(*l)]))?;
    let model_json = ModelFile::new(StoredModel::Autoencoder(model.clone()), Some(train_cfg)).to_json();
    out.text("model.json", &model_json, model_json.lines().count())?;

    let cpu = dataset.column_index(PAPER_CPU_METRIC).expect("paper catalog has the cpu metric");
    let mut real = Vec::with_capacity(valid.len());
    let mut recon = Vec::with_capacity(valid.len());
    for (row, x) in valid.rows.iter().zip(&valid_rows) {
        let y = scaler.inverse_row(&model.forward(x)?);
        real.push(row[cpu]);
        recon.push(y[cpu]);
    }
    let threshold = cfg.compress.threshold;
    let dist = relative_error_distribution_with(&real, &recon, threshold, DEFAULT_EPSILON)?;
    let etas = relative_errors(&real, &recon, DEFAULT_EPSILON);
    out.csv(
        "reconstruction.csv",
        &["time_s", "real", "reconstructed", "eta"],
        valid.timestamps.iter().zip(&real).zip(&recon).zip(&etas).map(|(((t, r), x), e)| {
            [fmt(*t), fmt(*r), fmt(*x), e.map(fmt).unwrap_or_default()]
        }),
    )?;
    out.csv(
        "error_histogram.csv",
        &["lower", "upper", "count"],
        dist.histogram.rows().into_iter().map(|(lo, hi, c)| [fmt(lo), fmt(hi), c.to_string()]),
    )?;
    let valid_mse = model.mse(&valid_rows)?;

    let mut metrics = vec![
        ("rows".to_string(), dataset.len() as f64),
        ("metrics".to_string(), dataset.width() as f64),
        ("train_rows".to_string(), train.len() as f64),
        ("validation_rows".to_string(), valid.len() as f64),
        ("final_train_loss".to_string(), *history.last().unwrap()),
        ("validation_mse".to_string(), valid_mse),
        ("cpu_fraction_below_threshold".to_string(), dist.fraction_below),
        ("cpu_evaluated".to_string(), dist.evaluated as f64),
        ("cpu_excluded".to_string(), dist.excluded as f64),
        ("eta_underflow".to_string(), dist.histogram.underflow as f64),
        ("eta_overflow".to_string(), dist.histogram.overflow as f64),
        ("compression_ratio".to_string(), model.compression_ratio()),
    ];
    let mut checks = vec![
        Check::new("cpu_fraction_below_threshold", dist.fraction_below, ">=", cfg.compress.min_fraction),
        Check::new("compression_ratio", model.compression_ratio(), "==", PAPER_COMPRESSION_RATIO),
    ];

    if let Some(chain) = chain {
        let workload = generate_workload(&profile)?.values();
        let mut env = Environment::default();
        env.series.insert(
            "workload".into(),
            SampledSeries { interval_ms: (profile.interval * 1000.0).round() as u64, values: workload },
        );
        env.metric_catalog = Some(catalog);
        env.models.insert("autoencoder".into(), ModelHandle::Autoencoder { model, scaler });
        let mut orch = Orchestrator::new(LiveState::new(base), env, Registry::builtin(), cfg.scheduler, cfg.policy);
        let id = chain.id.clone();
        orch.instantiate(chain)?;
        let start_ms = (valid.timestamps[0] * 1000.0).round() as u64;
        let end_ms = (valid.timestamps.last().unwrap() * 1000.0).round() as u64 + 1;
        orch.run(start_ms, end_ms - start_ms)?;
        let inst = orch.instance(&id).expect("instantiated");
        let served: Vec<f64> = inst
            .knowledge
            .entries()
            .iter()
            .flat_map(|k| k.outputs.iter().filter(|o| o.kind == "compression.mse").map(|o| o.value))
            .collect();
        let served_mse = served.iter().sum::<f64>() / served.len().max(1) as f64;
        out.csv(
            "served.csv",
            &["time_ms", "mse"],
            inst.knowledge.entries().iter().filter_map(|k| {
                let o = k.outputs.iter().find(|o| o.kind == "compression.mse")?;
                Some([k.t_ms.to_string(), fmt(o.value)])
            }),
        )?;
        let trace = orch.trace_csv();
        out.text("trace.csv", &trace, orch.trace.len())?;
        out.text("fcaps.csv", &orch.fcaps_csv(), orch.instances().count())?;
        metrics.push(("served_ticks".into(), served.len() as f64));
        metrics.push(("served_mse".into(), served_mse));
        metrics.push(("served_faults".into(), inst.fcaps.fault as f64));
        metrics.push(("capacity_violations".into(), orch.capacity_violations as f64));
        checks.push(Check::new("served_ticks", served.len() as f64, "==", valid.len() as f64));
        checks.push(Check::new("capacity_violations", orch.capacity_violations as f64, "==", 0.0));
    }

    out.finish("compress", seed, metrics, checks, started.elapsed())
}
