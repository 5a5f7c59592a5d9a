//! Translation of Analyze outputs into knob writes.
//!
//! Each entry maps an output kind onto a knob of the destination-domain nodes
//! matching a glob selector, through `value = scale * output + offset`,
//! optionally rounded, then clamped into the knob's range.

use std::path::Path;

use glob::Pattern;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engines::LinearModel;
use crate::sdi::NodeId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOutput {
    pub kind: String,
    pub value: f64,
    /// Restricts the output to one node when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<NodeId>,
}

impl AnalysisOutput {
    pub fn new(kind: &str, value: f64) -> Self {
        AnalysisOutput { kind: kind.into(), value, target: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionProposal {
    pub target: NodeId,
    pub knob: String,
    pub value: f64,
    /// Sign of `value - current` when proposed.
    pub direction: i8,
    pub issued_by: String,
    pub timestamp_ms: u64,
    /// Set when the catalog value fell outside the knob range.
    pub clamped: bool,
}

impl ActionProposal {
    pub fn summary(&self) -> String {
        format!("{}@{}={}", self.knob, self.target, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub output_kind: String,
    /// Glob over node ids, e.g. `*-vm4`.
    pub target: String,
    pub knob: String,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub offset: f64,
    pub min: f64,
    pub max: f64,
    #[serde(default = "yes")]
    pub round: bool,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl CatalogEntry {
    /// Entry realizing a regression fitted on min-max normalized data:
    /// `out_norm = slope * in_norm + intercept`, with the input normalized
    /// over `[in_min, in_max]` and the output expressed as a fraction of
    /// `full_scale` knob units.
    #[allow(clippy::too_many_arguments)]
    pub fn from_linear_model(
        output_kind: &str,
        target: &str,
        knob: &str,
        model: &LinearModel,
        in_min: f64,
        in_max: f64,
        full_scale: f64,
        range: (f64, f64),
    ) -> Self {
        let span = in_max - in_min;
        CatalogEntry {
            output_kind: output_kind.into(),
            target: target.into(),
            knob: knob.into(),
            scale: model.slope * full_scale / span,
            offset: (model.intercept - model.slope * in_min / span) * full_scale,
            min: range.0,
            max: range.1,
            round: true,
        }
    }

    /// Knob value for an output, and whether it was clamped.
    pub fn map(&self, output: f64) -> (f64, bool) {
        let mut v = self.scale * output + self.offset;
        if self.round {
            v = v.round();
        }
        if v > self.max {
            (self.max, true)
        } else if v < self.min {
            (self.min, true)
        } else {
            (v, false)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionCatalog {
    #[serde(default)]
    pub entries: Vec<CatalogEntry>,
}

#[derive(Debug, Error, PartialEq)]
pub enum CatalogError {
    #[error("no catalog entry for output kind `{0}`")]
    NoEntry(String),
    #[error("no destination node exposes knob `{knob}` for output `{kind}`")]
    NoTarget { kind: String, knob: String },
    #[error("invalid target selector `{0}`")]
    BadSelector(String),
    #[error("catalog file: {0}")]
    Format(String),
}

/// Read access to current knob values.
pub trait KnobView {
    fn knob_value(&self, target: &NodeId, knob: &str) -> Option<f64>;
}

impl ActionCatalog {
    pub fn new(entries: Vec<CatalogEntry>) -> Self {
        ActionCatalog { entries }
    }

    pub fn from_toml(text: &str) -> Result<Self, CatalogError> {
        let catalog: ActionCatalog = toml::from_str(text).map_err(|e| CatalogError::Format(e.to_string()))?;
        for e in &catalog.entries {
            Pattern::new(&e.target).map_err(|_| CatalogError::BadSelector(e.target.clone()))?;
            if !(e.min <= e.max) {
                return Err(CatalogError::Format(format!("entry `{}`: min above max", e.output_kind)));
            }
        }
        Ok(catalog)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("catalog serializes")
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path).map_err(|e| CatalogError::Format(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// One proposal per (matching entry, destination node exposing the knob).
pub fn catalog_translate(
    catalog: &ActionCatalog,
    output: &AnalysisOutput,
    destination: &[NodeId],
    knobs: &dyn KnobView,
    issued_by: &str,
    timestamp_ms: u64,
) -> Result<Vec<ActionProposal>, CatalogError> {
    let entries: Vec<&CatalogEntry> = catalog.entries.iter().filter(|e| e.output_kind == output.kind).collect();
    if entries.is_empty() {
        return Err(CatalogError::NoEntry(output.kind.clone()));
    }
    let mut proposals = Vec::new();
    for entry in entries {
        let pattern = Pattern::new(&entry.target).map_err(|_| CatalogError::BadSelector(entry.target.clone()))?;
        let (value, clamped) = entry.map(output.value);
        let before = proposals.len();
        for node in destination {
            if !pattern.matches(node.as_str()) || output.target.as_ref().is_some_and(|t| t != node) {
                continue;
            }
            let Some(current) = knobs.knob_value(node, &entry.knob) else { continue };
            let direction = match value.total_cmp(&current) {
                std::cmp::Ordering::Greater => 1,
                std::cmp::Ordering::Less => -1,
                std::cmp::Ordering::Equal => 0,
            };
            proposals.push(ActionProposal {
                target: node.clone(),
                knob: entry.knob.clone(),
                value,
                direction,
                issued_by: issued_by.into(),
                timestamp_ms,
                clamped,
            });
        }
        if proposals.len() == before {
            return Err(CatalogError::NoTarget { kind: output.kind.clone(), knob: entry.knob.clone() });
        }
    }
    Ok(proposals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    struct Knobs(BTreeMap<(NodeId, String), f64>);

    impl KnobView for Knobs {
        fn knob_value(&self, target: &NodeId, knob: &str) -> Option<f64> {
            self.0.get(&(target.clone(), knob.to_string())).copied()
        }
    }

    fn knobs() -> Knobs {
        let mut m = BTreeMap::new();
        for n in ["tor-vm4", "wat-vm4", "tor-vm6"] {
            m.insert((NodeId::from(n), "vnf.cpu.millicores".to_string()), 1000.0);
        }
        Knobs(m)
    }

    fn catalog() -> ActionCatalog {
        ActionCatalog::new(vec![CatalogEntry {
            output_kind: "knob.target".into(),
            target: "*-vm4".into(),
            knob: "vnf.cpu.millicores".into(),
            scale: 1.0,
            offset: 0.0,
            min: 0.0,
            max: 4000.0,
            round: true,
        }])
    }

    fn dest() -> Vec<NodeId> {
        ["tor-vm4", "tor-vm6", "wat-vm4", "wat-vm6"].map(NodeId::from).to_vec()
    }

    #[test]
    fn one_proposal_per_matching_target() {
        let p = catalog_translate(&catalog(), &AnalysisOutput::new("knob.target", 1500.4), &dest(), &knobs(), "a", 10)
            .unwrap();
        let targets: Vec<&str> = p.iter().map(|x| x.target.as_str()).collect();
        assert_eq!(targets, ["tor-vm4", "wat-vm4"]);
        assert!(p.iter().all(|x| x.value == 1500.0 && x.direction == 1 && !x.clamped && x.timestamp_ms == 10));
    }

    #[test]
    fn unknown_kind_is_an_error() {
        let e = catalog_translate(&catalog(), &AnalysisOutput::new("nope", 1.0), &dest(), &knobs(), "a", 0);
        assert_eq!(e, Err(CatalogError::NoEntry("nope".into())));
    }

    #[test]
    fn above_range_clamped_and_flagged() {
        let p = catalog_translate(&catalog(), &AnalysisOutput::new("knob.target", 9000.0), &dest(), &knobs(), "a", 0)
            .unwrap();
        assert!(p.iter().all(|x| x.value == 4000.0 && x.clamped));
    }

    #[test]
    fn linear_model_entry_matches_normalized_relation() {
        let model = LinearModel { slope: 0.7, intercept: 0.1, fit_mse: 0.0 };
        let e = CatalogEntry::from_linear_model("traffic.forecast", "*", "k", &model, 20.0, 220.0, 3000.0, (0.0, 3000.0));
        let traffic: f64 = 50.0;
        let expected: f64 = ((0.7 * (traffic - 20.0) / 200.0 + 0.1) * 3000.0).round();
        assert_eq!(e.map(traffic), (expected, false));
    }

    #[test]
    fn catalog_file_round_trip() {
        let c = catalog();
        assert_eq!(ActionCatalog::from_toml(&c.to_toml()).unwrap(), c);
    }
}
