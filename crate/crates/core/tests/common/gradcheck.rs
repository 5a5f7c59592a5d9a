use aiaas::engines::{Autoencoder, RecurrentModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
// Below this magnitude both gradients are treated as agreeing zeros.
pub const FD_FLOOR: f64 = 1e-6;

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < FD_FLOOR {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, width: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..width).map(|_| rng.random_range(0.0..1.0)).collect()).collect()
}

/// Largest relative error between `analytic` and central differences of
/// `loss` around `params`.
fn worst(params: &[f64], analytic: &[f64], mut loss: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut p = params.to_vec();
    let mut max = 0.0f64;
    for i in 0..params.len() {
        p[i] = params[i] + FD_STEP;
        let up = loss(&p);
        p[i] = params[i] - FD_STEP;
        let down = loss(&p);
        p[i] = params[i];
        max = max.max(rel_err(analytic[i], (up - down) / (2.0 * FD_STEP)));
    }
    max
}

/// 8-5-3-5-8 dense net on a random batch of three rows.
pub fn dense_grad_error(seed: u64) -> f64 {
    let model = Autoencoder::with_widths(&[8, 5, 3, 5, 8], seed);
    let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
    let batch = random_rows(&mut rng, 3, 8);
    let (_, grad) = model.loss_and_gradient(&batch);
    let mut probe = model.clone();
    worst(&model.parameters(), &grad, |p| {
        probe.set_parameters(p);
        probe.loss_and_gradient(&batch).0
    })
}

/// Recurrent cell with hidden size 4 over sequences of length 6.
pub fn recurrent_grad_error(seed: u64) -> f64 {
    let model = RecurrentModel::new(4, 6, 2, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
    let windows = random_rows(&mut rng, 3, 6);
    let targets = random_rows(&mut rng, 3, 2);
    let (_, grad) = model.loss_and_gradient(&windows, &targets);
    let mut probe = model.clone();
    worst(&model.parameters(), &grad, |p| {
        probe.set_parameters(p);
        probe.loss_and_gradient(&windows, &targets).0
    })
}
