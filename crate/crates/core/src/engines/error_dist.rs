use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::metrics::TimeSeries;

/// Samples with `|real|` below this are excluded from relative errors.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Fixed-width histogram with explicit under- and overflow counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lower: f64,
    pub bin_width: f64,
    pub counts: Vec<usize>,
    pub underflow: usize,
    pub overflow: usize,
}

impl Histogram {
    pub fn new(lower: f64, upper: f64, bins: usize) -> Self {
        Histogram {
            lower,
            bin_width: (upper - lower) / bins as f64,
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
        }
    }

    pub fn add(&mut self, v: f64) {
        if v < self.lower {
            self.underflow += 1;
            return;
        }
        let bin = ((v - self.lower) / self.bin_width).floor() as usize;
        match self.counts.get_mut(bin) {
            Some(c) => *c += 1,
            None => self.overflow += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.underflow + self.overflow
    }

    /// `(bin lower edge, bin upper edge, count)` rows.
    pub fn rows(&self) -> Vec<(f64, f64, usize)> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let lo = self.lower + i as f64 * self.bin_width;
                (lo, lo + self.bin_width, c)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    /// Share of evaluated samples with `|eta| < threshold`; 0 when nothing
    /// was evaluated.
    pub fraction_below: f64,
    pub threshold: f64,
    pub evaluated: usize,
    /// Samples skipped because `|real| < epsilon`.
    pub excluded: usize,
    pub histogram: Histogram,
}

/// `eta = (real - recon) / real` per sample; `None` where `|real| < epsilon`.
pub fn relative_errors(real: &[f64], recon: &[f64], epsilon: f64) -> Vec<Option<f64>> {
    real.iter()
        .zip(recon)
        .map(|(&r, &x)| if r.abs() < epsilon { None } else { Some((r - x) / r) })
        .collect()
}

/// Relative reconstruction error summary with a histogram over
/// `[-0.5, 0.5)` in 0.02-wide bins.
pub fn relative_error_distribution(
    real: &TimeSeries,
    recon: &TimeSeries,
    threshold: f64,
) -> Result<ErrorDistribution, EngineError> {
    relative_error_distribution_with(&real.values(), &recon.values(), threshold, DEFAULT_EPSILON)
}

pub fn relative_error_distribution_with(
    real: &[f64],
    recon: &[f64],
    threshold: f64,
    epsilon: f64,
) -> Result<ErrorDistribution, EngineError> {
    if real.len() != recon.len() {
        return Err(EngineError::LengthMismatch { left: real.len(), right: recon.len() });
    }
    let mut histogram = Histogram::new(-0.5, 0.5, 50);
    let (mut evaluated, mut excluded, mut below) = (0, 0, 0);
    for eta in relative_errors(real, recon, epsilon) {
        match eta {
            None => excluded += 1,
            Some(e) => {
                evaluated += 1;
                if e.abs() < threshold {
                    below += 1;
                }
                histogram.add(e);
            }
        }
    }
    let fraction_below = if evaluated == 0 { 0.0 } else { below as f64 / evaluated as f64 };
    Ok(ErrorDistribution { fraction_below, threshold, evaluated, excluded, histogram })
}
