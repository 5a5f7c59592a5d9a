use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ControlError;
use crate::chain::KnobView;
use crate::sdi::{AllocationId, NodeId, ResourceVector, TopologyState};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct KnobKey {
    pub node: NodeId,
    pub name: String,
}

impl KnobKey {
    pub fn new(node: impl Into<NodeId>, name: &str) -> Self {
        KnobKey { node: node.into(), name: name.into() }
    }
}

impl fmt::Display for KnobKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.name, self.node)
    }
}

/// Resource a knob's value is reserved in, one unit per unit of value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backing {
    Cpu,
    Mem,
    Storage,
}

impl Backing {
    fn vector(self, amount: u64) -> ResourceVector {
        match self {
            Backing::Cpu => ResourceVector::new(amount, 0, 0, 0),
            Backing::Mem => ResourceVector::new(0, amount, 0, 0),
            Backing::Storage => ResourceVector::new(0, 0, amount, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnobSpec {
    pub node: NodeId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backing: Option<Backing>,
    pub initial: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Knob {
    pub value: f64,
    pub min: f64,
    pub max: f64,
    pub backing: Option<Backing>,
    pub allocation: Option<AllocationId>,
}

/// The infrastructure as the orchestrator sees it: reservations plus the
/// writable knobs. Resource-backed knobs hold a reservation equal to their
/// value, so raising one can fail for lack of capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct LiveState {
    pub sdi: TopologyState,
    knobs: BTreeMap<KnobKey, Knob>,
}

fn owner_of(key: &KnobKey) -> String {
    format!("knob:{key}")
}

impl LiveState {
    pub fn new(sdi: TopologyState) -> Self {
        LiveState { sdi, knobs: BTreeMap::new() }
    }

    pub fn add_knob(&mut self, spec: &KnobSpec) -> Result<(), ControlError> {
        let key = KnobKey { node: spec.node.clone(), name: spec.name.clone() };
        if self.knobs.contains_key(&key) {
            return Err(ControlError::Knob(format!("duplicate knob {key}")));
        }
        if !self.sdi.topology().contains(&spec.node) {
            return Err(ControlError::Knob(format!("knob {key} on unknown node")));
        }
        if !(spec.min <= spec.initial && spec.initial <= spec.max) || (spec.backing.is_some() && spec.min < 0.0) {
            return Err(ControlError::Knob(format!("knob {key}: bad range or initial value")));
        }
        let allocation = match spec.backing {
            Some(b) => Some(self.sdi.allocate(&spec.node, b.vector(spec.initial.round() as u64), &owner_of(&key))?.id),
            None => None,
        };
        self.knobs.insert(
            key,
            Knob { value: spec.initial, min: spec.min, max: spec.max, backing: spec.backing, allocation },
        );
        Ok(())
    }

    pub fn knob(&self, key: &KnobKey) -> Option<&Knob> {
        self.knobs.get(key)
    }

    pub fn knobs(&self) -> impl Iterator<Item = (&KnobKey, &Knob)> {
        self.knobs.iter()
    }

    /// Writes a knob and returns its previous value. Out-of-range values and
    /// values the node cannot back are refused, leaving the knob unchanged.
    pub fn set_knob(&mut self, key: &KnobKey, value: f64) -> Result<f64, ControlError> {
        let knob = self.knobs.get(key).ok_or_else(|| ControlError::Knob(format!("unknown knob {key}")))?.clone();
        if !(knob.min <= value && value <= knob.max) {
            return Err(ControlError::Knob(format!("{key}: {value} outside [{}, {}]", knob.min, knob.max)));
        }
        let mut allocation = knob.allocation;
        if let (Some(b), Some(old)) = (knob.backing, knob.allocation) {
            self.sdi.release(old)?;
            match self.sdi.allocate(&key.node, b.vector(value.round() as u64), &owner_of(key)) {
                Ok(a) => allocation = Some(a.id),
                Err(e) => {
                    let back = self
                        .sdi
                        .allocate(&key.node, b.vector(knob.value.round() as u64), &owner_of(key))
                        .expect("the released amount fits again");
                    self.knobs.get_mut(key).unwrap().allocation = Some(back.id);
                    return Err(ControlError::Capacity(e.to_string()));
                }
            }
        }
        let k = self.knobs.get_mut(key).unwrap();
        k.value = value;
        k.allocation = allocation;
        Ok(knob.value)
    }

    /// Reservation conservation plus, for every backed knob, a live
    /// reservation equal to its value.
    pub fn check_capacity(&self) -> Result<(), String> {
        self.sdi.check_conservation()?;
        for node in self.sdi.topology().nodes() {
            let used = self.sdi.used(&node.id);
            if !used.fits_within(&node.capacity) {
                return Err(format!("node `{}` reserved beyond capacity", node.id));
            }
        }
        for (key, k) in &self.knobs {
            if let (Some(b), Some(id)) = (k.backing, k.allocation) {
                let a = self.sdi.allocation(id).ok_or(format!("{key}: reservation missing"))?;
                if a.resources != b.vector(k.value.round() as u64) {
                    return Err(format!("{key}: reservation differs from value"));
                }
            }
        }
        Ok(())
    }

    /// Stable text form: the reservation state followed by knob values.
    pub fn serialize(&self) -> String {
        let mut out = self.sdi.serialize();
        out.push_str("\n# knobs\n");
        for (key, k) in &self.knobs {
            out.push_str(&format!("# {key} = {:?}\n", k.value));
        }
        out
    }
}

impl KnobView for LiveState {
    fn knob_value(&self, target: &NodeId, knob: &str) -> Option<f64> {
        self.knobs.get(&KnobKey::new(target.clone(), knob)).map(|k| k.value)
    }
}
