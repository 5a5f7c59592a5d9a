//! Built-in topologies.
//!
//! `paper`: the emulated four-site monitoring testbed. A core site hosts the
//! HTTP load balancer (`core-vm1`) behind a triangle of three switches; three
//! regional sites (`tor`, `wat`, `cal`) each hold five VMs behind two
//! switches:
//!
//! | VM    | role                    | tier   |
//! |-------|-------------------------|--------|
//! | vm2-3 | auxiliary services      | edge   |
//! | vm4   | firewall VNF            | edge   |
//! | vm5   | traffic generator       | access |
//! | vm6   | web server              | edge   |
//!
//! That is 16 compute nodes and 9 switches. Capacities are configuration
//! defaults: the testbed's real VM sizes are not known.

use super::spec::{LinkSpec, NodeSpec, SwitchSpec, TopologySpec};
use super::topology::build_topology;
use super::{Result, SdiError, Tier, Topology};

pub const PAPER_REGIONS: [(&str, &str); 3] = [("tor", "toronto"), ("wat", "waterloo"), ("cal", "calgary")];

pub fn preset(name: &str) -> Result<Topology> {
    match name {
        "paper" => Ok(paper_topology()),
        other => Err(SdiError::UnknownPreset(other.to_owned())),
    }
}

pub fn paper_spec() -> TopologySpec {
    let mut spec = TopologySpec {
        regions: vec!["core".into(), "toronto".into(), "waterloo".into(), "calgary".into()],
        ..Default::default()
    };
    let link = |a: &str, b: &str, bandwidth: u64, latency: f64, reliability: f64| LinkSpec {
        a: a.into(),
        b: b.into(),
        bandwidth,
        latency,
        reliability,
    };

    spec.nodes.push(NodeSpec {
        id: "core-vm1".into(),
        region: "core".into(),
        tier: Tier::Core,
        cpu: 8000,
        mem: 16384,
        storage: 102_400,
        bandwidth: 10_000,
        reliability: 0.999,
    });
    for sw in ["core-sw1", "core-sw2", "core-sw3"] {
        spec.switches.push(SwitchSpec { id: sw.into(), region: "core".into(), tier: Tier::Core });
    }
    spec.links.push(link("core-vm1", "core-sw1", 10_000, 1.0, 0.999));
    spec.links.push(link("core-sw1", "core-sw2", 10_000, 1.0, 0.999));
    spec.links.push(link("core-sw1", "core-sw3", 10_000, 1.0, 0.999));
    spec.links.push(link("core-sw2", "core-sw3", 10_000, 1.0, 0.999));

    for (prefix, region) in PAPER_REGIONS {
        for sw in 1..=2 {
            spec.switches.push(SwitchSpec {
                id: format!("{prefix}-sw{sw}").into(),
                region: region.into(),
                tier: Tier::Edge,
            });
        }
        for vm in 2..=6 {
            spec.nodes.push(NodeSpec {
                id: format!("{prefix}-vm{vm}").into(),
                region: region.into(),
                tier: if vm == 5 { Tier::Access } else { Tier::Edge },
                cpu: 4000,
                mem: 8192,
                storage: 51_200,
                bandwidth: 1000,
                reliability: 0.995,
            });
            let sw = if vm <= 3 { 1 } else { 2 };
            spec.links.push(link(
                &format!("{prefix}-vm{vm}"),
                &format!("{prefix}-sw{sw}"),
                1000,
                1.0,
                0.999,
            ));
        }
        spec.links.push(link(&format!("{prefix}-sw1"), &format!("{prefix}-sw2"), 10_000, 1.0, 0.999));
    }

    // Wide-area links. core-sw1 reaches wat-sw1 in 9 ms both through
    // core-sw2 and through tor-sw1, which exercises the tie-break.
    spec.links.push(link("core-sw1", "tor-sw1", 1000, 5.0, 0.99));
    spec.links.push(link("core-sw2", "wat-sw1", 1000, 8.0, 0.99));
    spec.links.push(link("core-sw3", "cal-sw1", 1000, 30.0, 0.98));
    spec.links.push(link("tor-sw1", "wat-sw1", 1000, 4.0, 0.99));
    spec
}

pub fn paper_topology() -> Topology {
    build_topology(&paper_spec()).expect("paper preset is valid")
}
