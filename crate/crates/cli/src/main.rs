use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aiaas::chain::{embed_bruteforce, MklChain};
use aiaas::harness::{self, HarnessError, Scenario, ScenarioConfig};
use aiaas::sdi::{TopologySpec, TopologyState};
use clap::{Parser, Subcommand};

/// Overrides the output directory when `--out` is not given.
const OUT_ENV: &str = "AIAAS_OUT_DIR";

#[derive(Parser)]
#[command(name = "aiaas", version, about = "Closed-loop AI-as-a-service scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its outputs.
    Run {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        config: PathBuf,
        /// Output directory; falls back to $AIAAS_OUT_DIR, then the config's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        /// Exit with 4 when an acceptance check fails.
        #[arg(long)]
        strict: bool,
    },
    /// Check a config and every file it references.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Reference computations.
    Oracle {
        #[command(subcommand)]
        which: Oracle,
    },
}

#[derive(Subcommand)]
enum Oracle {
    /// Exhaustive minimum-latency embedding of a chain.
    Embed {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        chain: PathBuf,
    },
}

fn fail(e: &HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn run(scenario: &str, config: &Path, out: Option<PathBuf>, seed: u64, strict: bool) -> ExitCode {
    let mut cfg = match ScenarioConfig::load(config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if Scenario::parse(scenario) != Some(cfg.scenario) {
        return fail(&HarnessError::Config(format!(
            "--scenario {scenario} but the config describes `{}`",
            cfg.scenario.as_str()
        )));
    }
    cfg.seed = Some(seed);
    let out_dir = out
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| cfg.out.as_ref().map(|p| cfg.resolve(p)))
        .unwrap_or_else(|| PathBuf::from("out").join(scenario));
    match harness::run(&cfg, &out_dir) {
        Ok(report) => {
            print!("{}", report.summary_text());
            println!("\nwall_clock_s = {:.3}", report.wall_clock.as_secs_f64());
            println!("out = {}", out_dir.display());
            if strict && !report.all_pass() {
                eprintln!("acceptance check failed");
                return ExitCode::from(4);
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn oracle_embed(topology: &Path, chain: &Path) -> ExitCode {
    let state = TopologySpec::load(topology)
        .and_then(|spec| TopologyState::from_spec(&spec))
        .map_err(|e| HarnessError::Config(e.to_string()));
    let state = match state {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let chain = match MklChain::load(chain) {
        Ok(c) => c,
        Err(e) => return fail(&HarnessError::Config(e.to_string())),
    };
    match embed_bruteforce(&chain, &state) {
        Ok(emb) => {
            println!("feasible");
            for p in &emb.placements {
                println!("{} -> {}", p.step, p.node);
            }
            println!("total_latency_ms = {:?}", emb.total_latency_ms);
            ExitCode::SUCCESS
        }
        Err(e) if e.is_proven_infeasible() => {
            println!("infeasible: {e}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(&HarnessError::Config(e.to_string())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, config, out, seed, strict } => run(&scenario, &config, out, seed, strict),
        Command::Validate { config } => match ScenarioConfig::load(&config).and_then(|c| c.validate()) {
            Ok(()) => {
                println!("ok");
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Oracle { which: Oracle::Embed { topology, chain } } => oracle_embed(&topology, &chain),
    }
}
