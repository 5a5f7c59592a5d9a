use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::scheduler::KnobChange;
use super::KnobKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SandboxConfig {
    /// Replay length in ticks of the fastest running loop.
    pub horizon_ticks: u32,
    /// Most reversals still judged stable.
    pub reversal_threshold: u32,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        SandboxConfig { horizon_ticks: 10, reversal_threshold: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SandboxResult {
    pub oscillation_count: u32,
    pub violation_count: u32,
    pub verdict: Verdict,
}

impl SandboxResult {
    pub fn judge(oscillation_count: u32, violation_count: u32, config: &SandboxConfig) -> Self {
        let stable = oscillation_count <= config.reversal_threshold && violation_count == 0;
        SandboxResult {
            oscillation_count,
            violation_count,
            verdict: if stable { Verdict::Stable } else { Verdict::Unstable },
        }
    }
}

/// Sign reversals of each knob's successive changes, summed over knobs.
/// Only changes strictly after `after_ms` count.
pub fn count_reversals(changes: &[KnobChange], after_ms: Option<u64>) -> u32 {
    let mut last: BTreeMap<&KnobKey, f64> = BTreeMap::new();
    let mut count = 0;
    for c in changes.iter().filter(|c| after_ms.is_none_or(|t| c.time_ms > t)) {
        let d = (c.new - c.old).signum();
        if c.new == c.old {
            continue;
        }
        if let Some(prev) = last.insert(&c.key, d) {
            if prev != d {
                count += 1;
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(t: u64, old: f64, new: f64) -> KnobChange {
        KnobChange { time_ms: t, key: KnobKey::new("n", "k"), old, new, chain: "c".into() }
    }

    #[test]
    fn alternation_counts_every_turn() {
        let c: Vec<_> = (0..6).map(|i| if i % 2 == 0 { ch(i, 0.0, 1.0) } else { ch(i, 1.0, 0.0) }).collect();
        assert_eq!(count_reversals(&c, None), 5);
        assert_eq!(count_reversals(&c, Some(2)), 2);
    }

    #[test]
    fn monotone_has_none() {
        let c: Vec<_> = (0..4).map(|i| ch(i, i as f64, i as f64 + 1.0)).collect();
        assert_eq!(count_reversals(&c, None), 0);
    }

    #[test]
    fn verdict_rule() {
        let cfg = SandboxConfig::default();
        assert_eq!(SandboxResult::judge(2, 0, &cfg).verdict, Verdict::Stable);
        assert_eq!(SandboxResult::judge(3, 0, &cfg).verdict, Verdict::Unstable);
        assert_eq!(SandboxResult::judge(0, 1, &cfg).verdict, Verdict::Unstable);
    }
}
