//! Single-layer LSTM forecaster for a scalar series.
//!
//! For each input `x_t` (the series scaled into `[0, 1]`):
//!
//! ```text
//! i = σ(Wi x + Ui h + bi)     f = σ(Wf x + Uf h + bf)
//! g = tanh(Wg x + Ug h + bg)  o = σ(Wo x + Uo h + bo)
//! c_t = f ⊙ c_{t-1} + i ⊙ g   h_t = o ⊙ tanh(c_t)
//! ```
//!
//! The forecast of the next `horizon` values is a linear readout of the final
//! hidden state. Training minimizes mean squared error with gradients from
//! backpropagation through time, truncated to the last `bptt` steps of each
//! window.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dense::sigmoid;
use super::matrix::Matrix;
use super::optim::{Optimizer, TrainConfig};
use super::EngineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RnnConfig {
    pub hidden_size: usize,
    pub window: usize,
    pub horizon: usize,
    /// Steps of backpropagation per window; `0` means the whole window.
    pub bptt: usize,
    pub train: TrainConfig,
}

impl Default for RnnConfig {
    fn default() -> Self {
        RnnConfig {
            hidden_size: 16,
            window: 30,
            horizon: 10,
            bptt: 0,
            train: TrainConfig { learning_rate: 5e-3, epochs: 60, ..TrainConfig::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentModel {
    pub hidden_size: usize,
    pub window: usize,
    pub horizon: usize,
    pub bptt: usize,
    /// Input weights for the gates, stacked `[i; f; g; o]`, length `4H`.
    pub input_weights: Vec<f64>,
    /// Recurrent weights, `4H x H`.
    pub recurrent_weights: Matrix,
    pub gate_bias: Vec<f64>,
    /// `horizon x H`.
    pub readout: Matrix,
    pub readout_bias: Vec<f64>,
    /// Min and max of the training series.
    pub scale_min: f64,
    pub scale_max: f64,
}

struct Trace {
    xs: Vec<f64>,
    /// `[i, f, g, o]` activations per step, each `4H`.
    gates: Vec<Vec<f64>>,
    /// `c_0 ..= c_T`.
    cells: Vec<Vec<f64>>,
    /// `h_0 ..= h_T`.
    hidden: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl RecurrentModel {
    pub fn new(hidden_size: usize, window: usize, horizon: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = hidden_size;
        let k = 1.0 / (h as f64).sqrt();
        let mut gate_bias = vec![0.0; 4 * h];
        gate_bias[h..2 * h].fill(1.0);
        let readout_limit = (6.0 / (h + horizon) as f64).sqrt();
        RecurrentModel {
            hidden_size: h,
            window,
            horizon,
            bptt: window,
            input_weights: (0..4 * h).map(|_| rng.random_range(-k..k)).collect(),
            recurrent_weights: Matrix::from_fn(4 * h, h, |_, _| rng.random_range(-k..k)),
            gate_bias,
            readout: Matrix::from_fn(horizon, h, |_, _| rng.random_range(-readout_limit..readout_limit)),
            readout_bias: vec![0.0; horizon],
            scale_min: 0.0,
            scale_max: 1.0,
        }
    }

    fn scale(&self, v: f64) -> f64 {
        let range = self.scale_max - self.scale_min;
        if range > 0.0 {
            (v - self.scale_min) / range
        } else {
            0.5
        }
    }

    fn unscale(&self, v: f64) -> f64 {
        let range = self.scale_max - self.scale_min;
        if range > 0.0 {
            v * range + self.scale_min
        } else {
            self.scale_min
        }
    }

    fn run(&self, xs: &[f64]) -> Trace {
        let h = self.hidden_size;
        let mut trace = Trace {
            xs: xs.to_vec(),
            gates: Vec::with_capacity(xs.len()),
            cells: vec![vec![0.0; h]],
            hidden: vec![vec![0.0; h]],
            output: vec![0.0; self.horizon],
        };
        let mut pre = vec![0.0; 4 * h];
        for &x in xs {
            let h_prev = trace.hidden.last().unwrap();
            self.recurrent_weights.mul_vec_into(h_prev, &mut pre);
            for (j, p) in pre.iter_mut().enumerate() {
                *p += self.input_weights[j] * x + self.gate_bias[j];
            }
            let mut gates = vec![0.0; 4 * h];
            for j in 0..h {
                gates[j] = sigmoid(pre[j]);
                gates[h + j] = sigmoid(pre[h + j]);
                gates[2 * h + j] = pre[2 * h + j].tanh();
                gates[3 * h + j] = sigmoid(pre[3 * h + j]);
            }
            let c_prev = trace.cells.last().unwrap();
            let c: Vec<f64> = (0..h).map(|j| gates[h + j] * c_prev[j] + gates[j] * gates[2 * h + j]).collect();
            let hidden: Vec<f64> = (0..h).map(|j| gates[3 * h + j] * c[j].tanh()).collect();
            trace.gates.push(gates);
            trace.cells.push(c);
            trace.hidden.push(hidden);
        }
        self.readout.mul_vec_into(trace.hidden.last().unwrap(), &mut trace.output);
        for (o, b) in trace.output.iter_mut().zip(&self.readout_bias) {
            *o += b;
        }
        trace
    }

    /// Forecast of the next `horizon` values from the last `window` raw values.
    pub fn predict(&self, window_values: &[f64]) -> Result<Vec<f64>, EngineError> {
        if window_values.len() != self.window {
            return Err(EngineError::WidthMismatch { expected: self.window, found: window_values.len() });
        }
        if window_values.iter().any(|v| !v.is_finite()) {
            return Err(EngineError::NonFiniteInput);
        }
        let xs: Vec<f64> = window_values.iter().map(|&v| self.scale(v)).collect();
        Ok(self.run(&xs).output.into_iter().map(|v| self.unscale(v)).collect())
    }

    pub fn parameter_count(&self) -> usize {
        let h = self.hidden_size;
        4 * h + 4 * h * h + 4 * h + self.horizon * h + self.horizon
    }

    /// Input weights, recurrent weights, gate bias, readout, readout bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        out.extend_from_slice(&self.input_weights);
        out.extend_from_slice(&self.recurrent_weights.data);
        out.extend_from_slice(&self.gate_bias);
        out.extend_from_slice(&self.readout.data);
        out.extend_from_slice(&self.readout_bias);
        out
    }

    pub fn set_parameters(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.parameter_count());
        let mut at = 0;
        for block in self.blocks_mut() {
            block.copy_from_slice(&p[at..at + block.len()]);
            at += block.len();
        }
    }

    fn blocks_mut(&mut self) -> [&mut [f64]; 5] {
        [
            &mut self.input_weights,
            &mut self.recurrent_weights.data,
            &mut self.gate_bias,
            &mut self.readout.data,
            &mut self.readout_bias,
        ]
    }

    fn block_sizes(&self) -> [usize; 5] {
        let h = self.hidden_size;
        [4 * h, 4 * h * h, 4 * h, self.horizon * h, self.horizon]
    }

    /// Adds the gradient of one window's loss into `grad` (flattened like
    /// [`RecurrentModel::parameters`]) and returns the loss. Inputs and
    /// targets are already scaled.
    fn accumulate(&self, xs: &[f64], targets: &[f64], grad: &mut [f64]) -> f64 {
        let h = self.hidden_size;
        let trace = self.run(xs);
        let [n_wx, n_wh, n_b, n_r, _] = self.block_sizes();
        let (g_wx, rest) = grad.split_at_mut(n_wx);
        let (g_wh, rest) = rest.split_at_mut(n_wh);
        let (g_b, rest) = rest.split_at_mut(n_b);
        let (g_r, g_rb) = rest.split_at_mut(n_r);

        let horizon = self.horizon as f64;
        let mut loss = 0.0;
        let mut dy = vec![0.0; self.horizon];
        for (k, (&y, &t)) in trace.output.iter().zip(targets).enumerate() {
            let d = y - t;
            loss += d * d;
            dy[k] = 2.0 * d / horizon;
        }
        loss /= horizon;

        let h_last = trace.hidden.last().unwrap();
        for (k, &d) in dy.iter().enumerate() {
            g_rb[k] += d;
            for j in 0..h {
                g_r[k * h + j] += d * h_last[j];
            }
        }
        let mut dh = vec![0.0; h];
        self.readout.mul_t_vec_into(&dy, &mut dh);
        let mut dc = vec![0.0; h];
        let mut dpre = vec![0.0; 4 * h];

        let steps = xs.len();
        let depth = if self.bptt == 0 { steps } else { self.bptt.min(steps) };
        for t in (steps - depth..steps).rev() {
            let gates = &trace.gates[t];
            let c = &trace.cells[t + 1];
            let c_prev = &trace.cells[t];
            let h_prev = &trace.hidden[t];
            for j in 0..h {
                let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                let tc = c[j].tanh();
                let d_o = dh[j] * tc;
                dc[j] += dh[j] * o * (1.0 - tc * tc);
                let d_i = dc[j] * g;
                let d_g = dc[j] * i;
                let d_f = dc[j] * c_prev[j];
                dpre[j] = d_i * i * (1.0 - i);
                dpre[h + j] = d_f * f * (1.0 - f);
                dpre[2 * h + j] = d_g * (1.0 - g * g);
                dpre[3 * h + j] = d_o * o * (1.0 - o);
                dc[j] *= f;
            }
            let x = trace.xs[t];
            for (r, &d) in dpre.iter().enumerate() {
                g_wx[r] += d * x;
                g_b[r] += d;
                for (gw, hp) in g_wh[r * h..(r + 1) * h].iter_mut().zip(h_prev) {
                    *gw += d * hp;
                }
            }
            self.recurrent_weights.mul_t_vec_into(&dpre, &mut dh);
        }
        loss
    }

    /// Mean loss over raw windows/targets and its gradient.
    pub fn loss_and_gradient(&self, windows: &[Vec<f64>], targets: &[Vec<f64>]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.parameter_count()];
        let mut loss = 0.0;
        for (w, t) in windows.iter().zip(targets) {
            let xs: Vec<f64> = w.iter().map(|&v| self.scale(v)).collect();
            let ys: Vec<f64> = t.iter().map(|&v| self.scale(v)).collect();
            loss += self.accumulate(&xs, &ys, &mut grad);
        }
        let n = windows.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }
}

/// Sliding `(window, next horizon values)` pairs over `series`.
pub fn make_windows(series: &[f64], window: usize, horizon: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let count = (series.len() + 1).saturating_sub(window + horizon);
    (0..count)
        .map(|s| (series[s..s + window].to_vec(), series[s + window..s + window + horizon].to_vec()))
        .unzip()
}

/// Trains a forecaster on `series`; returns the model and per-epoch loss.
pub fn rnn_train(series: &[f64], config: &RnnConfig) -> Result<(RecurrentModel, Vec<f64>), EngineError> {
    config.train.validate()?;
    if config.horizon == 0 || config.window == 0 || config.hidden_size == 0 {
        return Err(EngineError::InvalidConfig("window, horizon and hidden size must be >= 1".into()));
    }
    if series.len() <= config.window + config.horizon {
        return Err(EngineError::InsufficientData(format!(
            "series of {} samples is too short for window {} + horizon {}",
            series.len(),
            config.window,
            config.horizon
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(EngineError::NonFiniteInput);
    }

    let mut model = RecurrentModel::new(config.hidden_size, config.window, config.horizon, config.train.seed);
    model.bptt = if config.bptt == 0 { config.window } else { config.bptt };
    model.scale_min = series.iter().copied().fold(f64::INFINITY, f64::min);
    model.scale_max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let scaled: Vec<f64> = series.iter().map(|&v| model.scale(v)).collect();
    let (inputs, targets) = make_windows(&scaled, config.window, config.horizon);

    let mut opt = Optimizer::new(config.train.optimizer, config.train.learning_rate, &model.block_sizes());
    let mut rng = ChaCha8Rng::seed_from_u64(config.train.seed ^ 0x1f2e_3d4c);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut sample_loss = vec![0.0; inputs.len()];
    let mut grad = vec![0.0; model.parameter_count()];
    let mut history = Vec::with_capacity(config.train.epochs);

    for epoch in 0..config.train.epochs {
        if config.train.shuffle {
            order.shuffle(&mut rng);
        }
        for batch in order.chunks(config.train.batch_size) {
            grad.fill(0.0);
            for &i in batch {
                sample_loss[i] = model.accumulate(&inputs[i], &targets[i], &mut grad);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            let sizes = model.block_sizes();
            let mut grad_blocks: Vec<&[f64]> = Vec::with_capacity(5);
            let mut at = 0;
            for n in sizes {
                grad_blocks.push(&grad[at..at + n]);
                at += n;
            }
            let mut params = model.blocks_mut();
            opt.update(&mut params, &grad_blocks);
        }
        let loss = sample_loss.iter().sum::<f64>() / inputs.len() as f64;
        if !loss.is_finite() {
            return Err(EngineError::Diverged { epoch });
        }
        history.push(loss);
    }
    Ok((model, history))
}

pub fn rnn_predict(model: &RecurrentModel, window_values: &[f64]) -> Result<Vec<f64>, EngineError> {
    model.predict(window_values)
}

/// Mean squared error of forecasting every `(window, horizon)` pair in
/// `series`, and of the last-value persistence baseline on the same pairs.
pub fn forecast_mse(model: &RecurrentModel, series: &[f64]) -> Result<(f64, f64), EngineError> {
    let (inputs, targets) = make_windows(series, model.window, model.horizon);
    if inputs.is_empty() {
        return Err(EngineError::InsufficientData("no evaluation windows".into()));
    }
    let (mut model_se, mut persist_se, mut count) = (0.0, 0.0, 0usize);
    for (w, t) in inputs.iter().zip(&targets) {
        let f = model.predict(w)?;
        let last = *w.last().unwrap();
        for (p, y) in f.iter().zip(t) {
            model_se += (p - y) * (p - y);
            persist_se += (last - y) * (last - y);
            count += 1;
        }
    }
    Ok((model_se / count as f64, persist_se / count as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_cover_series() {
        let s: Vec<f64> = (0..10).map(f64::from).collect();
        let (w, t) = make_windows(&s, 3, 2);
        assert_eq!(w.len(), 6);
        assert_eq!(w[5], vec![5.0, 6.0, 7.0]);
        assert_eq!(t[5], vec![8.0, 9.0]);
    }

    #[test]
    fn short_series_rejected() {
        let cfg = RnnConfig { window: 5, horizon: 5, ..Default::default() };
        assert!(matches!(rnn_train(&[1.0; 10], &cfg), Err(EngineError::InsufficientData(_))));
    }

    #[test]
    fn forecast_has_horizon_length() {
        let m = RecurrentModel::new(4, 6, 3, 1);
        assert_eq!(m.predict(&[0.1; 6]).unwrap().len(), 3);
        assert!(m.predict(&[0.1; 5]).is_err());
    }

    #[test]
    fn constant_series_forecast() {
        let cfg = RnnConfig {
            hidden_size: 8,
            window: 10,
            horizon: 3,
            bptt: 0,
            train: TrainConfig { epochs: 40, learning_rate: 1e-2, ..TrainConfig::default() },
        };
        let series = vec![42.0; 200];
        let (m, _) = rnn_train(&series, &cfg).unwrap();
        for v in m.predict(&[42.0; 10]).unwrap() {
            assert!((v - 42.0).abs() <= 0.05 * 42.0, "{v}");
        }
    }

    #[test]
    fn sinusoid_beats_persistence() {
        let series: Vec<f64> = (0..600).map(|i| (i as f64 * 2.0 * std::f64::consts::PI / 25.0).sin()).collect();
        let cfg = RnnConfig {
            hidden_size: 8,
            window: 12,
            horizon: 1,
            bptt: 0,
            train: TrainConfig { epochs: 30, learning_rate: 1e-2, ..TrainConfig::default() },
        };
        let (m, _) = rnn_train(&series[..480], &cfg).unwrap();
        let (model_mse, persist_mse) = forecast_mse(&m, &series[480..]).unwrap();
        assert!(model_mse < persist_mse, "{model_mse} vs {persist_mse}");
    }
}
