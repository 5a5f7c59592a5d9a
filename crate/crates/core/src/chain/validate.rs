use std::collections::BTreeSet;

use super::{MklChain, StepKind};

/// Violations make a chain unusable; warnings flag omitted MAPE-K steps,
/// which are allowed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_chain(chain: &MklChain) -> ValidationReport {
    let mut report = ValidationReport::default();
    let v = &mut report.violations;

    if chain.id.trim().is_empty() {
        v.push("chain id is empty".into());
    }
    if chain.steps.is_empty() {
        v.push("chain has no steps".into());
        return report;
    }
    if chain.tick_period_ms == Some(0) {
        v.push("tick period must be positive".into());
    }

    let mut seen = BTreeSet::new();
    for s in &chain.steps {
        if !seen.insert(&s.name) {
            v.push(format!("duplicate step name `{}`", s.name));
        }
        let prefix = format!("{}.", s.kind.as_str());
        if !s.function.starts_with(&prefix) {
            v.push(format!("step `{}`: function `{}` is not a {} function", s.name, s.function, s.kind));
        }
        let q = &s.qos;
        if !(0.0..=1.0).contains(&q.min_reliability) {
            v.push(format!("step `{}`: min_reliability {} outside [0, 1]", s.name, q.min_reliability));
        }
        if let Some(l) = q.max_latency_ms {
            if !(l >= 0.0) {
                v.push(format!("step `{}`: max_latency_ms must be non-negative", s.name));
            }
        }
    }

    if let Some(edges) = &chain.edges {
        for [a, b] in edges {
            for end in [a, b] {
                if chain.step_index(end).is_none() {
                    v.push(format!("edge references unknown step `{end}`"));
                }
            }
        }
    }

    for (a, b) in chain.edge_indices() {
        let (sa, sb) = (&chain.steps[a], &chain.steps[b]);
        if let (Some(ra), Some(rb)) = (sa.kind.rank(), sb.kind.rank()) {
            if ra > rb {
                v.push(format!(
                    "ordering violation: `{}` ({}) feeds `{}` ({})",
                    sa.name, sa.kind, sb.name, sb.kind
                ));
            }
        }
    }

    if chain.topological_order().is_none() {
        v.push("steps contain a cycle".into());
    } else {
        let knowledge: Vec<usize> =
            (0..chain.steps.len()).filter(|&i| chain.steps[i].kind == StepKind::Knowledge).collect();
        if knowledge.len() > 1 {
            v.push(format!("{} Knowledge steps; at most one is allowed", knowledge.len()));
        } else if let Some(&k) = knowledge.first() {
            for (i, s) in chain.steps.iter().enumerate() {
                if matches!(s.kind, StepKind::Analyze | StepKind::Plan) && !reaches(chain, i, k) {
                    v.push(format!("step `{}` does not reach the Knowledge step", s.name));
                }
            }
        }
    }

    for kind in StepKind::ALL {
        if !chain.has_kind(kind) {
            report.warnings.push(format!("no {}", capitalized(kind)));
        }
    }
    report
}

fn capitalized(kind: StepKind) -> String {
    let s = kind.as_str();
    s[..1].to_uppercase() + &s[1..]
}

fn reaches(chain: &MklChain, from: usize, to: usize) -> bool {
    let edges = chain.edge_indices();
    let mut stack = vec![from];
    let mut seen = vec![false; chain.steps.len()];
    while let Some(i) = stack.pop() {
        if i == to {
            return true;
        }
        if std::mem::replace(&mut seen[i], true) {
            continue;
        }
        stack.extend(edges.iter().filter(|(a, _)| *a == i).map(|(_, b)| *b));
    }
    false
}
