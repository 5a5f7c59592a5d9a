//! Five-layer dense autoencoder trained on mean squared reconstruction error.
//!
//! | layer | activation | in  | out |
//! |-------|------------|-----|-----|
//! | 1     | elu        | 111 | 90  |
//! | 2     | elu        | 90  | 85  |
//! | 3     | linear     | 85  | 75  |
//! | 4     | elu        | 75  | 90  |
//! | 5     | sigmoid    | 90  | 111 |
//!
//! Layers 1-3 form the encoder and their output is the 75-wide code;
//! layers 4-5 form the decoder.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dense::{Activation, DenseLayer};
use super::optim::{Optimizer, TrainConfig};
use super::EngineError;

pub const PAPER_WIDTHS: [usize; 6] = [111, 90, 85, 75, 90, 111];
pub const ACTIVATIONS: [Activation; 5] = [
    Activation::Elu,
    Activation::Elu,
    Activation::Linear,
    Activation::Elu,
    Activation::Sigmoid,
];
/// Number of encoder layers.
pub const BOTTLENECK_INDEX: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    pub layers: Vec<DenseLayer>,
    pub bottleneck_index: usize,
}

/// The 111-90-85-75-90-111 network with seeded Glorot-uniform weights.
pub fn ae_init(seed: u64) -> Autoencoder {
    Autoencoder::with_widths(&PAPER_WIDTHS, seed)
}

/// Per-layer gradients, same shapes as the layers.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(model: &Autoencoder) -> Self {
        Gradients {
            weights: model.layers.iter().map(|l| vec![0.0; l.weights.data.len()]).collect(),
            bias: model.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    fn clear(&mut self) {
        self.weights.iter_mut().chain(self.bias.iter_mut()).for_each(|g| g.fill(0.0));
    }

    /// Flattened in the same order as [`Autoencoder::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

/// Forward-pass buffers reused across samples.
struct Workspace {
    z: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(model: &Autoencoder) -> Self {
        let outs = || model.layers.iter().map(|l| vec![0.0; l.outputs()]).collect::<Vec<_>>();
        Workspace { z: outs(), a: outs(), delta: outs() }
    }
}

impl Autoencoder {
    /// Dense stack over `widths` (input first). The narrowest hidden width is
    /// the bottleneck: the layer producing it is linear, the output layer is
    /// sigmoid and every other layer is elu.
    pub fn with_widths(widths: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::assemble(widths, |i, o, act| DenseLayer::glorot(i, o, act, &mut rng))
    }

    pub fn zeros(widths: &[usize]) -> Self {
        Self::assemble(widths, DenseLayer::zeros)
    }

    fn assemble(widths: &[usize], mut make: impl FnMut(usize, usize, Activation) -> DenseLayer) -> Self {
        assert!(widths.len() >= 3, "an autoencoder needs at least two layers");
        let layers_n = widths.len() - 1;
        let bottleneck_index = (1..layers_n).min_by_key(|&i| (widths[i], i)).expect("hidden layer");
        let layers = (0..layers_n)
            .map(|i| {
                let act = if i == layers_n - 1 {
                    Activation::Sigmoid
                } else if i + 1 == bottleneck_index {
                    Activation::Linear
                } else {
                    Activation::Elu
                };
                make(widths[i], widths[i + 1], act)
            })
            .collect();
        Autoencoder { layers, bottleneck_index }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn code_width(&self) -> usize {
        self.layers[self.bottleneck_index - 1].outputs()
    }

    /// `(outputs, inputs)` per layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.outputs(), l.inputs())).collect()
    }

    /// Code width over input width.
    pub fn compression_ratio(&self) -> f64 {
        self.code_width() as f64 / self.input_width() as f64
    }

    fn check_input(&self, x: &[f64], expected: usize) -> Result<(), EngineError> {
        if x.len() != expected {
            return Err(EngineError::WidthMismatch { expected, found: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(EngineError::NonFiniteInput);
        }
        Ok(())
    }

    fn run(&self, layers: &[DenseLayer], x: &[f64]) -> Vec<f64> {
        layers.iter().fold(x.to_vec(), |acc, layer| layer.forward(&acc))
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>, EngineError> {
        self.check_input(x, self.input_width())?;
        Ok(self.run(&self.layers[..self.bottleneck_index], x))
    }

    pub fn decode(&self, code: &[f64]) -> Result<Vec<f64>, EngineError> {
        self.check_input(code, self.code_width())?;
        Ok(self.run(&self.layers[self.bottleneck_index..], code))
    }

    /// Reconstruction; identical to `decode(encode(x))`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, EngineError> {
        let code = self.encode(x)?;
        self.decode(&code)
    }

    /// Mean squared error of reconstructing `x`.
    pub fn sample_loss(&self, x: &[f64]) -> Result<f64, EngineError> {
        let y = self.forward(x)?;
        Ok(y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64)
    }

    pub fn mse(&self, rows: &[Vec<f64>]) -> Result<f64, EngineError> {
        let mut total = 0.0;
        for r in rows {
            total += self.sample_loss(r)?;
        }
        Ok(total / rows.len().max(1) as f64)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::parameter_count).sum()
    }

    /// All weights then biases, layer by layer.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights.data);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.parameter_count());
        let mut at = 0;
        for l in &mut self.layers {
            let n = l.weights.data.len();
            l.weights.data.copy_from_slice(&params[at..at + n]);
            at += n;
            let n = l.bias.len();
            l.bias.copy_from_slice(&params[at..at + n]);
            at += n;
        }
    }

    /// Accumulates the gradient of one sample's loss into `grads` and
    /// returns the loss.
    fn accumulate(&self, x: &[f64], ws: &mut Workspace, grads: &mut Gradients) -> f64 {
        let n = self.layers.len();
        for i in 0..n {
            let (input, rest) = if i == 0 { (x, &mut ws.a[..]) } else {
                let (before, after) = ws.a.split_at_mut(i);
                (&before[i - 1][..], after)
            };
            self.layers[i].forward_into(input, &mut ws.z[i], &mut rest[0]);
        }

        let out = &ws.a[n - 1];
        let width = x.len() as f64;
        let mut loss = 0.0;
        for (j, (&y, &t)) in out.iter().zip(x).enumerate() {
            let diff = y - t;
            loss += diff * diff;
            let act = self.layers[n - 1].activation;
            ws.delta[n - 1][j] = 2.0 * diff / width * act.derivative(ws.z[n - 1][j], y);
        }
        loss /= width;

        for i in (0..n).rev() {
            let input: &[f64] = if i == 0 { x } else { &ws.a[i - 1] };
            let layer = &self.layers[i];
            let cols = layer.inputs();
            for (r, &d) in ws.delta[i].iter().enumerate() {
                grads.bias[i][r] += d;
                if d != 0.0 {
                    for (g, xi) in grads.weights[i][r * cols..(r + 1) * cols].iter_mut().zip(input) {
                        *g += d * xi;
                    }
                }
            }
            if i > 0 {
                let (lower, upper) = ws.delta.split_at_mut(i);
                let prev = &mut lower[i - 1];
                layer.weights.mul_t_vec_into(&upper[0], prev);
                let act = self.layers[i - 1].activation;
                for (p, (&z, &a)) in prev.iter_mut().zip(ws.z[i - 1].iter().zip(&ws.a[i - 1])) {
                    *p *= act.derivative(z, a);
                }
            }
        }
        loss
    }

    /// Mean loss over `batch` and its gradient, flattened like
    /// [`Autoencoder::parameters`].
    pub fn loss_and_gradient(&self, batch: &[Vec<f64>]) -> (f64, Vec<f64>) {
        let mut ws = Workspace::new(self);
        let mut grads = Gradients::zeros_like(self);
        let mut loss = 0.0;
        for x in batch {
            loss += self.accumulate(x, &mut ws, &mut grads);
        }
        let scale = 1.0 / batch.len() as f64;
        let mut flat = grads.flatten();
        flat.iter_mut().for_each(|g| *g *= scale);
        (loss * scale, flat)
    }
}

/// Trains on rows scaled to `[0, 1]` and returns the per-epoch mean
/// training loss. Each epoch's loss averages the per-sample losses observed
/// during that epoch, summed in row order.
pub fn ae_train(
    model: &mut Autoencoder,
    rows: &[Vec<f64>],
    config: &TrainConfig,
) -> Result<Vec<f64>, EngineError> {
    config.validate()?;
    if rows.is_empty() {
        return Err(EngineError::InsufficientData("empty training set".into()));
    }
    let width = model.input_width();
    for r in rows {
        model.check_input(r, width)?;
    }

    let block_sizes: Vec<usize> = model
        .layers
        .iter()
        .flat_map(|l| [l.weights.data.len(), l.bias.len()])
        .collect();
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, &block_sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ws = Workspace::new(model);
    let mut grads = Gradients::zeros_like(model);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut sample_loss = vec![0.0; rows.len()];
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        for batch in order.chunks(config.batch_size) {
            grads.clear();
            for &i in batch {
                sample_loss[i] = model.accumulate(&rows[i], &mut ws, &mut grads);
            }
            let scale = 1.0 / batch.len() as f64;
            for g in grads.weights.iter_mut().chain(grads.bias.iter_mut()) {
                g.iter_mut().for_each(|v| *v *= scale);
            }
            let grad_refs: Vec<&[f64]> = grads
                .weights
                .iter()
                .zip(&grads.bias)
                .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
                .collect();
            let mut params: Vec<&mut [f64]> = model
                .layers
                .iter_mut()
                .flat_map(|l| [l.weights.data.as_mut_slice(), l.bias.as_mut_slice()])
                .collect();
            opt.update(&mut params, &grad_refs);
        }
        let loss = sample_loss.iter().sum::<f64>() / rows.len() as f64;
        if !loss.is_finite() {
            return Err(EngineError::Diverged { epoch });
        }
        history.push(loss);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::optim::OptimizerKind;
    use rand::Rng;

    #[test]
    fn paper_dims() {
        let m = ae_init(0);
        assert_eq!(m.layer_dims(), vec![(90, 111), (85, 90), (75, 85), (90, 75), (111, 90)]);
        assert_eq!(m.code_width(), 75);
        assert_eq!(m.compression_ratio(), 75.0 / 111.0);
    }

    #[test]
    fn paper_activations() {
        let m = ae_init(0);
        let acts: Vec<Activation> = m.layers.iter().map(|l| l.activation).collect();
        assert_eq!(acts, ACTIVATIONS);
        assert_eq!(m.bottleneck_index, BOTTLENECK_INDEX);
        let small = Autoencoder::with_widths(&[8, 5, 3, 5, 8], 0);
        assert_eq!(small.code_width(), 3);
        assert_eq!(small.layers[1].activation, Activation::Linear);
    }

    #[test]
    fn seeding() {
        assert_eq!(ae_init(4), ae_init(4));
        assert_ne!(ae_init(4).parameters(), ae_init(5).parameters());
        let limit = (6.0f64 / (111.0 + 90.0)).sqrt();
        assert!(ae_init(1).layers[0].weights.data.iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn zero_model_outputs_half_and_bias_code() {
        let mut m = Autoencoder::zeros(&PAPER_WIDTHS);
        let x = vec![0.3; 111];
        assert!(m.forward(&x).unwrap().iter().all(|&v| v == 0.5));
        m.layers[2].bias = (0..75).map(|i| i as f64 * 0.01).collect();
        assert_eq!(m.encode(&x).unwrap(), m.layers[2].bias);
    }

    #[test]
    fn encode_decode_compose_bitwise() {
        let m = ae_init(9);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..111).map(|_| rng.random()).collect();
        let y = m.forward(&x).unwrap();
        let z = m.decode(&m.encode(&x).unwrap()).unwrap();
        assert!(y.iter().zip(&z).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(m.encode(&x).unwrap().len(), 75);
        assert!(y.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn width_and_finiteness_checked() {
        let m = ae_init(0);
        assert!(matches!(m.forward(&[0.0; 10]), Err(EngineError::WidthMismatch { expected: 111, found: 10 })));
        let mut x = vec![0.0; 111];
        x[3] = f64::NAN;
        assert!(matches!(m.forward(&x), Err(EngineError::NonFiniteInput)));
        assert!(m.decode(&[0.0; 111]).is_err());
    }

    #[test]
    fn zero_learning_rate_keeps_loss_constant() {
        let mut m = Autoencoder::with_widths(&[8, 5, 3, 5, 8], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..8).map(|_| rng.random()).collect()).collect();
        let cfg = TrainConfig { learning_rate: 0.0, epochs: 5, batch_size: 3, ..Default::default() };
        let h = ae_train(&mut m, &rows, &cfg).unwrap();
        assert_eq!(h.len(), 5);
        assert!(h.iter().all(|&l| l.to_bits() == h[0].to_bits()));
    }

    #[test]
    fn memorizes_a_single_point() {
        let mut m = ae_init(3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..111).map(|_| rng.random_range(0.1..0.9)).collect();
        let rows = vec![x; 32];
        let cfg = TrainConfig { epochs: 300, batch_size: 32, learning_rate: 1e-3, ..Default::default() };
        let h = ae_train(&mut m, &rows, &cfg).unwrap();
        assert!(*h.last().unwrap() < 1e-4, "final loss {}", h.last().unwrap());
    }

    #[test]
    fn divergence_reported() {
        let mut m = Autoencoder::with_widths(&[4, 3, 2, 3, 4], 0);
        let rows = vec![vec![0.5; 4]; 4];
        let cfg = TrainConfig {
            learning_rate: 1e300,
            optimizer: OptimizerKind::Sgd,
            epochs: 50,
            ..Default::default()
        };
        match ae_train(&mut m, &rows, &cfg) {
            Err(EngineError::Diverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
