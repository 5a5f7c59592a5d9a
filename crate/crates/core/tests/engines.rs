mod common;

use aiaas::engines::{ae_init, ae_train, linfit, Activation, Autoencoder, OptimizerKind, TrainConfig};
use common::gradcheck::{dense_grad_error, random_rows, recurrent_grad_error};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn oracle_forward(model: &Autoencoder, x: &[f64]) -> Vec<f64> {
    let mut a = DVector::from_column_slice(x);
    for layer in &model.layers {
        let w = DMatrix::from_row_slice(layer.weights.rows, layer.weights.cols, &layer.weights.data);
        let z = w * a + DVector::from_column_slice(&layer.bias);
        a = z.map(|v| match layer.activation {
            Activation::Elu => {
                if v > 0.0 {
                    v
                } else {
                    v.exp() - 1.0
                }
            }
            Activation::Linear => v,
            Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
        });
    }
    a.as_slice().to_vec()
}

#[test]
fn forward_matches_matrix_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..5 {
        let model = ae_init(seed);
        for x in random_rows(&mut rng, 4, 111) {
            let got = model.forward(&x).unwrap();
            let want = oracle_forward(&model, &x);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-10, "{g} vs {w}");
            }
        }
    }
}

#[test]
fn dense_gradient_matches_finite_differences() {
    for seed in 0..10 {
        let e = dense_grad_error(seed);
        assert!(e <= 1e-4, "seed {seed}: max relative error {e}");
    }
}

#[test]
fn recurrent_gradient_matches_finite_differences() {
    for seed in 0..10 {
        let e = recurrent_grad_error(seed);
        assert!(e <= 1e-3, "seed {seed}: max relative error {e}");
    }
}

#[test]
fn small_step_sgd_reduces_loss() {
    let mut improved = 0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = random_rows(&mut rng, 64, 111);
        let mut model = ae_init(seed);
        let cfg = TrainConfig {
            learning_rate: 0.05,
            epochs: 11,
            batch_size: 16,
            seed,
            optimizer: OptimizerKind::Sgd,
            shuffle: true,
        };
        let history = ae_train(&mut model, &rows, &cfg).unwrap();
        if history[10] < history[0] {
            improved += 1;
        }
    }
    assert!(improved >= 19, "{improved}/20 seeds improved");
}

#[test]
fn planted_line_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 1e-3).unwrap();
    let x: Vec<f64> = (0..500).map(|_| rng.random_range(0.0..1.0)).collect();
    let y: Vec<f64> = x.iter().map(|v| 0.7 * v + 0.1 + noise.sample(&mut rng)).collect();
    let m = linfit(&x, &y).unwrap();
    assert!((m.slope - 0.7).abs() / 0.7 < 0.01, "slope {}", m.slope);
    assert!(m.fit_mse < 1e-5, "mse {}", m.fit_mse);
}
