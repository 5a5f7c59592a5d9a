use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::catalog::Catalog;
use super::{generate_workload, Dataset, MetricFrame, Result, WorkloadProfile};
use crate::sdi::TopologyState;

fn noise_rng(seed: u64, t: f64) -> ChaCha8Rng {
    // splitmix-style mixing of (seed, t) into a stream key
    let mut z = seed ^ t.to_bits().wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// Reads every catalog metric at time `t` given the ingress workload value.
pub fn scrape(state: &TopologyState, workload: f64, catalog: &Catalog, t: f64) -> MetricFrame {
    let mut rng = noise_rng(catalog.noise_seed, t);
    let latent: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
    let topology = state.topology();

    let values = catalog
        .entries
        .iter()
        .map(|spec| {
            let r = &spec.response;
            let e: f64 = StandardNormal.sample(&mut rng);
            let load = r.scope_share * catalog.share_at(&r.node, t) * workload;
            let reserved = topology
                .node(&r.node)
                .filter(|n| n.capacity.cpu > 0)
                .map_or(0.0, |n| state.used(&r.node).cpu as f64 / n.capacity.cpu as f64);
            let correlated: f64 = r.loadings.iter().zip(&latent).map(|(l, z)| l * z).sum();
            let noise = catalog.noise_scale * (correlated + r.idiosyncratic * e);
            let v = r.baseline + r.gain * load + r.alloc_gain * reserved + noise;
            v.clamp(0.0, r.ceiling)
        })
        .collect();
    MetricFrame { timestamp: t, values }
}

/// Generates the workload and scrapes one frame per workload sample.
pub fn simulate_dataset(
    state: &TopologyState,
    profile: &WorkloadProfile,
    catalog: &Catalog,
) -> Result<Dataset> {
    let workload = generate_workload(profile)?;
    let frames: Vec<MetricFrame> = workload
        .samples
        .iter()
        .map(|&(t, w)| scrape(state, w, catalog, t))
        .collect();
    Ok(Dataset::from_frames(catalog.names(), &frames))
}
