//! Metric catalogs and their response functions.
//!
//! Every metric responds linearly to the traffic that reaches its scope:
//!
//! ```text
//! value = clamp(baseline
//!               + gain * share(scope, t) * workload
//!               + alloc_gain * reserved_cpu_fraction(node)
//!               + sum_k loading[k] * z_k(t)
//!               + idiosyncratic * e(t),
//!               0, ceiling)
//! ```
//!
//! `z_k(t)` are a handful of standard-normal latent factors shared by every
//! metric at a timestamp and `e(t)` is per-metric noise. Both are drawn from
//! a generator keyed by the catalog's noise seed and the timestamp, so a
//! scrape is a pure function of its arguments.
//!
//! The `paper` preset expands the nine metric families over the testbed:
//!
//! * `node.cpu`, `node.network.receive`, `node.network.transmit` on all 25
//!   nodes (switches run a monitoring agent too): 75 columns
//! * `container.memory.usage`, `container.cpu.system`,
//!   `container.network.receive`, `container.network.transmit` on the seven
//!   containers (load balancer, three firewalls, three web servers): 28 columns
//! * `http.request.size`, `http.request.duration` on the four HTTP endpoints
//!   (load balancer and web servers): 8 columns
//!
//! for a total width of 111.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MetricName;
use crate::sdi::{NodeId, Topology};

/// The metric whose reconstruction quality is reported: web server CPU in the
/// Waterloo region.
pub const PAPER_CPU_METRIC: &str = "node.cpu{wat-vm6}";

pub const NODE_FAMILIES: [&str; 3] = ["node.cpu", "node.network.receive", "node.network.transmit"];
pub const CONTAINER_FAMILIES: [&str; 4] = [
    "container.memory.usage",
    "container.cpu.system",
    "container.network.receive",
    "container.network.transmit",
];
pub const HTTP_FAMILIES: [&str; 2] = ["http.request.size", "http.request.duration"];

const LATENT_FACTORS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContainerRole {
    LoadBalancer,
    Firewall,
    WebServer,
}

impl ContainerRole {
    fn serves_http(self) -> bool {
        matches!(self, ContainerRole::LoadBalancer | ContainerRole::WebServer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Container {
    pub name: String,
    pub node: NodeId,
    pub role: ContainerRole,
}

/// Coefficients of one metric's response function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub baseline: f64,
    pub gain: f64,
    /// Node whose traffic share and reservations drive the metric.
    pub node: NodeId,
    /// Fraction of the node's traffic seen by this scope.
    pub scope_share: f64,
    pub alloc_gain: f64,
    pub loadings: [f64; LATENT_FACTORS],
    pub idiosyncratic: f64,
    /// Upper saturation; `f64::INFINITY` when unbounded.
    pub ceiling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub name: MetricName,
    pub response: Response,
}

/// Ordered list of metrics; frame column `i` is `entries[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub entries: Vec<MetricSpec>,
    /// Traffic share of each node in the topology.
    pub node_shares: Vec<(NodeId, RegionShare)>,
    pub noise_seed: u64,
    /// Multiplies every latent loading and idiosyncratic amplitude.
    pub noise_scale: f64,
}

/// Time-varying share of ingress traffic that reaches a node:
/// `weight * (1 + swing * sin(2 pi t / period + phase))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionShare {
    pub weight: f64,
    pub swing: f64,
    pub period: f64,
    pub phase: f64,
}

impl RegionShare {
    pub const FULL: RegionShare = RegionShare { weight: 1.0, swing: 0.0, period: 1.0, phase: 0.0 };

    pub fn at(&self, t: f64) -> f64 {
        self.weight * (1.0 + self.swing * (2.0 * std::f64::consts::PI * t / self.period + self.phase).sin())
    }
}

struct FamilyModel {
    baseline: (f64, f64),
    gain: f64,
    alloc_gain: f64,
    latent: f64,
    idiosyncratic: f64,
    ceiling: f64,
}

fn family_model(family: &str) -> FamilyModel {
    let m = |baseline, gain, alloc_gain, latent, idiosyncratic, ceiling| FamilyModel {
        baseline,
        gain,
        alloc_gain,
        latent,
        idiosyncratic,
        ceiling,
    };
    match family {
        "node.cpu" => m((3.0, 8.0), 0.8, 20.0, 0.8, 0.25, 100.0),
        "node.network.receive" => m((2.0, 10.0), 12.0, 0.0, 10.0, 3.0, f64::INFINITY),
        "node.network.transmit" => m((2.0, 10.0), 14.0, 0.0, 12.0, 3.0, f64::INFINITY),
        "container.memory.usage" => m((120.0, 300.0), 0.9, 0.0, 1.5, 0.5, f64::INFINITY),
        "container.cpu.system" => m((0.5, 2.0), 0.3, 0.0, 0.3, 0.1, 100.0),
        "container.network.receive" => m((1.0, 5.0), 10.0, 0.0, 8.0, 2.5, f64::INFINITY),
        "container.network.transmit" => m((1.0, 5.0), 11.0, 0.0, 9.0, 2.5, f64::INFINITY),
        "http.request.size" => m((700.0, 900.0), 0.6, 0.0, 4.0, 1.5, f64::INFINITY),
        "http.request.duration" => m((15.0, 30.0), 0.12, 0.0, 0.4, 0.15, f64::INFINITY),
        _ => m((1.0, 2.0), 1.0, 0.0, 0.5, 0.2, f64::INFINITY),
    }
}

impl Catalog {
    pub fn width(&self) -> usize {
        self.entries.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name.to_string()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name.to_string() == name)
    }

    pub fn share_at(&self, node: &NodeId, t: f64) -> f64 {
        self.node_shares
            .iter()
            .find(|(n, _)| n == node)
            .map_or(0.0, |(_, s)| s.at(t))
    }

    pub fn with_noise_scale(mut self, scale: f64) -> Self {
        self.noise_scale = scale;
        self
    }

    /// Builds a catalog over `topology`: node families on every node,
    /// container families on each container and HTTP families on every
    /// HTTP-serving container. Coefficients come from `coefficient_seed`.
    pub fn build(
        topology: &Topology,
        node_shares: Vec<(NodeId, RegionShare)>,
        containers: &[Container],
        coefficient_seed: u64,
        noise_seed: u64,
    ) -> Catalog {
        let mut rng = ChaCha8Rng::seed_from_u64(coefficient_seed);
        let share_of = |node: &NodeId| {
            node_shares.iter().find(|(n, _)| n == node).map_or(0.0, |(_, s)| s.weight)
        };
        let mut entries = Vec::new();
        let mut push = |family: &str, scope: &str, node: &NodeId, scope_share: f64, rng: &mut ChaCha8Rng| {
            let fm = family_model(family);
            let factor = rng.random_range(0.8..1.2);
            let mut loadings = [0.0; LATENT_FACTORS];
            for l in &mut loadings {
                *l = fm.latent * rng.random_range(-1.0..1.0);
            }
            let node_weight = share_of(node).max(1e-3);
            entries.push(MetricSpec {
                name: MetricName::new(family, scope),
                response: Response {
                    baseline: rng.random_range(fm.baseline.0..fm.baseline.1),
                    // Core nodes see all traffic; scale gains so that every
                    // node spans a comparable range.
                    gain: fm.gain * factor * (0.35 / node_weight).min(1.0),
                    node: node.clone(),
                    scope_share,
                    alloc_gain: fm.alloc_gain,
                    loadings,
                    idiosyncratic: fm.idiosyncratic,
                    ceiling: fm.ceiling,
                },
            });
        };

        for family in NODE_FAMILIES {
            for node in topology.nodes() {
                let switch_scale = if topology.is_switch(&node.id) { 0.2 } else { 1.0 };
                push(family, node.id.as_str(), &node.id, switch_scale, &mut rng);
            }
        }
        for family in CONTAINER_FAMILIES {
            for c in containers {
                push(family, &c.name, &c.node, 1.0, &mut rng);
            }
        }
        for family in HTTP_FAMILIES {
            for c in containers.iter().filter(|c| c.role.serves_http()) {
                push(family, &c.name, &c.node, 1.0, &mut rng);
            }
        }
        Catalog { entries, node_shares, noise_seed, noise_scale: 1.0 }
    }

    /// The 111-wide catalog of the four-site testbed
    /// ([`crate::sdi::paper_topology`]).
    pub fn paper(topology: &Topology, noise_seed: u64) -> Catalog {
        Self::build(topology, paper_shares(topology), &paper_containers(), 0x5eed_ca7a, noise_seed)
    }
}

pub fn paper_containers() -> Vec<Container> {
    let mut out = vec![Container {
        name: "haproxy".into(),
        node: "core-vm1".into(),
        role: ContainerRole::LoadBalancer,
    }];
    for (prefix, _) in crate::sdi::PAPER_REGIONS {
        out.push(Container {
            name: format!("snort-{prefix}"),
            node: format!("{prefix}-vm4").as_str().into(),
            role: ContainerRole::Firewall,
        });
        out.push(Container {
            name: format!("web-{prefix}"),
            node: format!("{prefix}-vm6").as_str().into(),
            role: ContainerRole::WebServer,
        });
    }
    out
}

/// Region weights 0.4 / 0.33 / 0.27 with slow, out-of-phase swings. Within a
/// region: firewall, web server and both switches carry the region's full
/// share, the traffic generator half, auxiliary VMs a tenth. Core switches
/// carry what passes through them.
fn paper_shares(topology: &Topology) -> Vec<(NodeId, RegionShare)> {
    let regional = [
        ("tor", RegionShare { weight: 0.40, swing: 0.15, period: 600.0, phase: 0.0 }),
        ("wat", RegionShare { weight: 0.33, swing: 0.15, period: 420.0, phase: 1.3 }),
        ("cal", RegionShare { weight: 0.27, swing: 0.20, period: 780.0, phase: 2.6 }),
    ];
    let mut shares = Vec::new();
    for node in topology.nodes() {
        let id = node.id.as_str();
        let share = match id {
            "core-vm1" | "core-sw1" => RegionShare::FULL,
            "core-sw2" => regional[1].1,
            "core-sw3" => regional[2].1,
            _ => {
                let (prefix, local) = id.split_once('-').unwrap_or((id, ""));
                let Some((_, base)) = regional.iter().find(|(p, _)| *p == prefix) else {
                    continue;
                };
                let fraction = match local {
                    "vm2" | "vm3" => 0.1,
                    "vm5" => 0.5,
                    _ => 1.0,
                };
                RegionShare { weight: base.weight * fraction, ..*base }
            }
        };
        shares.push((node.id.clone(), share));
    }
    shares
}
