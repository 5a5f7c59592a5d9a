use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MetricName, MetricsError, Result, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// Holds the rate at `amplitude`, replacing the base rate.
    Constant,
    /// Adds a linear rise from 0 at `start` to `amplitude` at `end`.
    Ramp,
    /// Adds a raised-cosine bump peaking at `amplitude` mid-segment.
    Burst,
}

/// Active on `[start, end)`, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub shape: Shape,
    pub amplitude: f64,
}

/// Additive sinusoid over the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Periodic {
    pub amplitude: f64,
    pub period: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadProfile {
    /// Seconds.
    pub duration: f64,
    /// Sampling interval in seconds.
    #[serde(default = "default_interval")]
    pub interval: f64,
    /// Requests per second outside constant segments.
    pub base_rate: f64,
    #[serde(default)]
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub periodic: Vec<Periodic>,
    /// Bound of the multiplicative noise: each sample is scaled by a factor
    /// drawn uniformly from `[1 - noise, 1 + noise]`.
    #[serde(default)]
    pub noise: f64,
    pub seed: u64,
}

fn default_interval() -> f64 {
    1.0
}

impl WorkloadProfile {
    pub fn constant(rate: f64, duration: f64, seed: u64) -> Self {
        WorkloadProfile {
            duration,
            interval: 1.0,
            base_rate: rate,
            segments: Vec::new(),
            periodic: Vec::new(),
            noise: 0.0,
            seed,
        }
    }

    /// Thirty minutes of HTTP load at 1 s resolution: a warm-up ramp, a
    /// plateau with a burst, then a decline with a second burst. The final
    /// fifth stays inside the range visited earlier.
    pub fn paper30min(seed: u64) -> Self {
        let seg = |start, end, shape, amplitude| Segment { start, end, shape, amplitude };
        WorkloadProfile {
            duration: 1800.0,
            interval: 1.0,
            base_rate: 60.0,
            segments: vec![
                seg(300.0, 900.0, Shape::Ramp, 80.0),
                seg(900.0, 1800.0, Shape::Constant, 140.0),
                seg(1000.0, 1100.0, Shape::Burst, 60.0),
                seg(1200.0, 1800.0, Shape::Ramp, -80.0),
                seg(1450.0, 1530.0, Shape::Burst, 50.0),
            ],
            periodic: vec![Periodic { amplitude: 8.0, period: 240.0, phase: 0.0 }],
            noise: 0.05,
            seed,
        }
    }

    /// Two days of network traffic in Mb/s at one-minute resolution: an
    /// hourly and a daily cycle with occasional bursts.
    pub fn traffic48h(seed: u64) -> Self {
        let day = 86_400.0;
        let mut segments = Vec::new();
        // Bursts at fixed offsets; amplitudes vary.
        for (i, start_min) in [190.0, 655.0, 1130.0, 1720.0, 2210.0, 2600.0].iter().enumerate() {
            let start = start_min * 60.0;
            segments.push(Segment {
                start,
                end: start + 40.0 * 60.0,
                shape: Shape::Burst,
                amplitude: 25.0 + 5.0 * i as f64,
            });
        }
        WorkloadProfile {
            duration: 2.0 * day,
            interval: 60.0,
            base_rate: 110.0,
            segments,
            periodic: vec![
                Periodic { amplitude: 40.0, period: day, phase: 0.0 },
                Periodic { amplitude: 30.0, period: 3600.0, phase: 0.0 },
            ],
            noise: 0.02,
            seed,
        }
    }

    pub fn sample_count(&self) -> usize {
        (self.duration / self.interval).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.interval > 0.0) {
            return Err(MetricsError::InvalidProfile("duration and interval must be > 0".into()));
        }
        if !(self.base_rate >= 0.0) {
            return Err(MetricsError::InvalidProfile("base rate must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(MetricsError::InvalidProfile("noise bound must be in [0, 1)".into()));
        }
        if self.periodic.iter().any(|p| !(p.period > 0.0)) {
            return Err(MetricsError::InvalidProfile("periodic component needs period > 0".into()));
        }
        for (index, s) in self.segments.iter().enumerate() {
            let invalid = |reason: &str| MetricsError::InvalidSegment { index, reason: reason.into() };
            if !(s.start >= 0.0 && s.end <= self.duration) {
                return Err(invalid("outside [0, duration]"));
            }
            if !(s.start < s.end) {
                return Err(invalid("start must precede end"));
            }
            if s.shape == Shape::Constant && !(s.amplitude >= 0.0) {
                return Err(invalid("constant level must be >= 0"));
            }
        }
        for (i, a) in self.segments.iter().enumerate() {
            for (j, b) in self.segments.iter().enumerate().skip(i + 1) {
                let overlap = a.start < b.end && b.start < a.end;
                if overlap
                    && a.shape == Shape::Constant
                    && b.shape == Shape::Constant
                    && a.amplitude != b.amplitude
                {
                    return Err(MetricsError::ContradictorySegments { first: i, second: j });
                }
            }
        }
        Ok(())
    }

    /// Noise-free rate at time `t`.
    pub fn rate_at(&self, t: f64) -> f64 {
        let mut level = self.base_rate;
        let mut extra = 0.0;
        for s in &self.segments {
            if t < s.start || t >= s.end {
                continue;
            }
            let u = (t - s.start) / (s.end - s.start);
            match s.shape {
                Shape::Constant => level = s.amplitude,
                Shape::Ramp => extra += s.amplitude * u,
                Shape::Burst => {
                    extra += s.amplitude * 0.5 * (1.0 - (2.0 * std::f64::consts::PI * u).cos())
                }
            }
        }
        for p in &self.periodic {
            extra += p.amplitude * (2.0 * std::f64::consts::PI * t / p.period + p.phase).sin();
        }
        (level + extra).max(0.0)
    }
}

/// Samples the profile at `k * interval` for `k` in `0..duration/interval`.
pub fn generate_workload(profile: &WorkloadProfile) -> Result<TimeSeries> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let n = profile.sample_count();
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * profile.interval;
        let mut rate = profile.rate_at(t);
        if profile.noise > 0.0 {
            rate *= 1.0 + profile.noise * rng.random_range(-1.0..=1.0);
        }
        samples.push((t, rate.max(0.0)));
    }
    Ok(TimeSeries::new(MetricName::new("workload.rate", "ingress"), samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_profile() {
        let s = generate_workload(&WorkloadProfile::constant(10.0, 60.0, 1)).unwrap();
        assert_eq!(s.len(), 60);
        assert!(s.samples.iter().all(|&(_, v)| v == 10.0));
        assert!(s.is_uniform());
    }

    #[test]
    fn ramp_midpoint() {
        let mut p = WorkloadProfile::constant(0.0, 100.0, 3);
        p.segments.push(Segment { start: 0.0, end: 100.0, shape: Shape::Ramp, amplitude: 100.0 });
        p.noise = 0.02;
        let s = generate_workload(&p).unwrap();
        let v = s.samples[50].1;
        assert!((v - 50.0).abs() <= 50.0 * 0.02 + 1e-12, "{v}");
    }

    #[test]
    fn paper_profile_is_deterministic() {
        let a = generate_workload(&WorkloadProfile::paper30min(7)).unwrap();
        let b = generate_workload(&WorkloadProfile::paper30min(7)).unwrap();
        assert_eq!(a.len(), 1800);
        assert!(a.samples.iter().zip(&b.samples).all(|(x, y)| x.1.to_bits() == y.1.to_bits()));
        let c = generate_workload(&WorkloadProfile::paper30min(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn contradictory_constants_rejected() {
        let mut p = WorkloadProfile::constant(5.0, 100.0, 0);
        p.segments.push(Segment { start: 0.0, end: 50.0, shape: Shape::Constant, amplitude: 10.0 });
        p.segments.push(Segment { start: 40.0, end: 80.0, shape: Shape::Constant, amplitude: 20.0 });
        assert!(matches!(
            generate_workload(&p),
            Err(MetricsError::ContradictorySegments { first: 0, second: 1 })
        ));
    }

    #[test]
    fn segment_outside_duration_rejected() {
        let mut p = WorkloadProfile::constant(5.0, 100.0, 0);
        p.segments.push(Segment { start: 90.0, end: 120.0, shape: Shape::Burst, amplitude: 1.0 });
        assert!(matches!(generate_workload(&p), Err(MetricsError::InvalidSegment { index: 0, .. })));
    }

    #[test]
    fn rates_never_negative() {
        let mut p = WorkloadProfile::constant(5.0, 100.0, 0);
        p.segments.push(Segment { start: 0.0, end: 100.0, shape: Shape::Ramp, amplitude: -50.0 });
        p.noise = 0.5;
        let s = generate_workload(&p).unwrap();
        assert!(s.samples.iter().all(|&(_, v)| v >= 0.0));
    }
}
