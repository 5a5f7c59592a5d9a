use serde::{Deserialize, Serialize};

use super::EngineError;

/// Ordinary least squares line `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub slope: f64,
    pub intercept: f64,
    /// Mean squared residual on the fitted points.
    pub fit_mse: f64,
}

impl LinearModel {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    pub fn mse(&self, x: &[f64], y: &[f64]) -> f64 {
        mse_of(self.slope, self.intercept, x, y)
    }
}

fn mse_of(slope: f64, intercept: f64, x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let r = yi - (slope * xi + intercept);
            r * r
        })
        .sum::<f64>()
        / n
}

/// Closed-form least-squares fit on centered data.
pub fn linfit(x: &[f64], y: &[f64]) -> Result<LinearModel, EngineError> {
    if x.len() != y.len() {
        return Err(EngineError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(EngineError::InsufficientData("linear fit needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mean_x;
        sxx += dx * dx;
        sxy += dx * (yi - mean_y);
    }
    if sxx == 0.0 {
        return Err(EngineError::DegenerateInput("x is constant".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    Ok(LinearModel { slope, intercept, fit_mse: mse_of(slope, intercept, x, y) })
}

pub fn lin_predict(model: &LinearModel, x: f64) -> f64 {
    model.predict(x)
}
