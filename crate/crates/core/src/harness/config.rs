use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::HarnessError;
use crate::chain::{validate_chain, ActionCatalog, MklChain};
use crate::control::{KnobSpec, Policy, TierScheduler};
use crate::engines::{RnnConfig, TrainConfig};
use crate::metrics::WorkloadProfile;
use crate::sdi::{build_topology, preset, Topology, TopologySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Compress,
    AdaptiveVnf,
    ConflictDemo,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Compress => "compress",
            Scenario::AdaptiveVnf => "adaptive-vnf",
            Scenario::ConflictDemo => "conflict-demo",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Scenario::Compress, Scenario::AdaptiveVnf, Scenario::ConflictDemo].into_iter().find(|x| x.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySource {
    pub preset: Option<String>,
    pub file: Option<PathBuf>,
}

impl Default for TopologySource {
    fn default() -> Self {
        TopologySource { preset: Some("paper".into()), file: None }
    }
}

/// A named profile, or a full profile inline. The profile seed is always
/// derived from the scenario seed.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSource {
    pub preset: Option<String>,
    pub profile: Option<WorkloadProfile>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompressSection {
    pub train_fraction: f64,
    pub threshold: f64,
    /// Acceptance bound on the share of cpu-metric samples below `threshold`.
    pub min_fraction: f64,
    /// Chain serving the trained model over the validation period.
    pub chain: Option<PathBuf>,
}

impl Default for CompressSection {
    fn default() -> Self {
        CompressSection { train_fraction: 0.8, threshold: 0.1, min_fraction: 0.8, chain: None }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VnfSection {
    /// Planted relation on normalized data: `cpu = slope * traffic + intercept + noise`.
    pub slope: f64,
    pub intercept: f64,
    pub noise: f64,
    /// Millicores corresponding to a normalized cpu of 1.
    pub full_scale: f64,
    pub knob_node: String,
    pub knob: String,
    pub train_fraction: f64,
    pub rnn: RnnConfig,
    pub max_mse: f64,
    pub max_forecast_ratio: f64,
}

impl Default for VnfSection {
    fn default() -> Self {
        VnfSection {
            slope: 0.7,
            intercept: 0.1,
            noise: 1e-3,
            full_scale: 3000.0,
            knob_node: "tor-vm4".into(),
            knob: "vnf.cpu.millicores".into(),
            train_fraction: 0.8,
            rnn: RnnConfig::default(),
            max_mse: 1e-5,
            max_forecast_ratio: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConflictSection {
    pub ticks: u64,
    pub min_reversals: u32,
    /// Policy of the arbitrated run; the other run disables arbitration and
    /// the sandbox.
    pub policy: Policy,
}

impl Default for ConflictSection {
    fn default() -> Self {
        ConflictSection { ticks: 100, min_reversals: 10, policy: Policy::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub seed: Option<u64>,
    #[serde(default)]
    pub topology: TopologySource,
    pub workload: Option<WorkloadSource>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub chains: Vec<PathBuf>,
    #[serde(default)]
    pub catalogs: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub knobs: Vec<KnobSpec>,
    #[serde(default)]
    pub scheduler: TierScheduler,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default)]
    pub compress: CompressSection,
    #[serde(default)]
    pub vnf: VnfSection,
    #[serde(default)]
    pub conflict: ConflictSection,
    pub out: Option<PathBuf>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ScenarioConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let mut c: ScenarioConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        c.base_dir = base_dir.to_path_buf();
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn seed(&self) -> Result<u64, HarnessError> {
        self.seed.ok_or_else(|| invalid("seed is mandatory"))
    }

    pub fn topology(&self) -> Result<Topology, HarnessError> {
        match (&self.topology.preset, &self.topology.file) {
            (Some(name), None) => preset(name).map_err(|e| invalid(e.to_string())),
            (None, Some(file)) => {
                let spec = TopologySpec::load(&self.resolve(file)).map_err(|e| invalid(e.to_string()))?;
                build_topology(&spec).map_err(|e| invalid(e.to_string()))
            }
            _ => Err(invalid("topology needs exactly one of `preset` or `file`")),
        }
    }

    /// The workload profile with its seed set to `seed`.
    pub fn workload(&self, seed: u64) -> Result<WorkloadProfile, HarnessError> {
        let default = match self.scenario {
            Scenario::AdaptiveVnf => "traffic48h",
            _ => "paper30min",
        };
        let mut profile = match &self.workload {
            None => named_profile(default, seed)?,
            Some(WorkloadSource { preset: Some(name), profile: None }) => named_profile(name, seed)?,
            Some(WorkloadSource { preset: None, profile: Some(p) }) => p.clone(),
            Some(_) => return Err(invalid("workload needs exactly one of `preset` or `profile`")),
        };
        profile.seed = seed;
        profile.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(profile)
    }

    pub fn load_chains(&self) -> Result<Vec<MklChain>, HarnessError> {
        self.chains.iter().map(|p| self.load_chain(p)).collect()
    }

    pub fn load_chain(&self, p: &Path) -> Result<MklChain, HarnessError> {
        let chain = MklChain::load(&self.resolve(p)).map_err(|e| invalid(e.to_string()))?;
        let report = validate_chain(&chain);
        if !report.is_valid() {
            return Err(invalid(format!("chain `{}`: {}", chain.id, report.violations.join("; "))));
        }
        Ok(chain)
    }

    pub fn load_catalogs(&self) -> Result<BTreeMap<String, ActionCatalog>, HarnessError> {
        self.catalogs
            .iter()
            .map(|(name, p)| {
                let c = ActionCatalog::load(&self.resolve(p)).map_err(|e| invalid(e.to_string()))?;
                Ok((name.clone(), c))
            })
            .collect()
    }

    /// Everything checkable without running: referenced files parse, the
    /// seed is present and the scenario has what it needs.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.seed()?;
        let topology = self.topology()?;
        self.workload(0)?;
        self.train.validate().map_err(|e| invalid(e.to_string()))?;
        self.scheduler.validate().map_err(|e| invalid(e.to_string()))?;
        let chains = self.load_chains()?;
        self.load_catalogs()?;
        if let Some(p) = &self.compress.chain {
            self.load_chain(p)?;
        }
        for k in &self.knobs {
            if topology.node(&k.node).is_none() {
                return Err(invalid(format!("knob `{}` on unknown node `{}`", k.name, k.node)));
            }
        }
        match self.scenario {
            Scenario::Compress => {
                let f = self.compress.train_fraction;
                if !(f > 0.0 && f < 1.0) {
                    return Err(invalid("compress.train_fraction must lie in (0, 1)"));
                }
            }
            Scenario::AdaptiveVnf => {
                if chains.len() != 1 {
                    return Err(invalid("adaptive-vnf needs exactly one chain"));
                }
                if topology.node(&self.vnf.knob_node.as_str().into()).is_none() {
                    return Err(invalid(format!("vnf.knob_node `{}` is not a node", self.vnf.knob_node)));
                }
                self.vnf.rnn.train.validate().map_err(|e| invalid(e.to_string()))?;
            }
            Scenario::ConflictDemo => {
                if chains.is_empty() || self.knobs.is_empty() {
                    return Err(invalid("conflict-demo needs chains and knobs"));
                }
                if self.conflict.ticks == 0 {
                    return Err(invalid("conflict.ticks must be positive"));
                }
            }
        }
        Ok(())
    }
}

fn named_profile(name: &str, seed: u64) -> Result<WorkloadProfile, HarnessError> {
    match name {
        "paper30min" => Ok(WorkloadProfile::paper30min(seed)),
        "traffic48h" => Ok(WorkloadProfile::traffic48h(seed)),
        other => Err(invalid(format!("unknown workload preset `{other}`"))),
    }
}

/// Independent seed for one use (`tag`) of the scenario seed.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
