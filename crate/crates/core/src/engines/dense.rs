use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// `x` for `x > 0`, `exp(x) - 1` otherwise (alpha = 1).
    Elu,
    Linear,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Linear => z,
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    a + 1.0
                }
            }
            Activation::Linear => 1.0,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fully connected layer, `a = act(W x + b)` with `W` of shape out x in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        DenseLayer {
            weights: Matrix::from_fn(outputs, inputs, |_, _| rng.random_range(-limit..limit)),
            bias: vec![0.0; outputs],
            activation,
        }
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        DenseLayer { weights: Matrix::zeros(outputs, inputs), bias: vec![0.0; outputs], activation }
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows
    }

    /// Writes the pre-activation into `z` and the activation into `a`.
    pub fn forward_into(&self, x: &[f64], z: &mut [f64], a: &mut [f64]) {
        self.weights.mul_vec_into(x, z);
        for ((zi, ai), b) in z.iter_mut().zip(a.iter_mut()).zip(&self.bias) {
            *zi += b;
            *ai = self.activation.apply(*zi);
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.outputs()];
        let mut a = vec![0.0; self.outputs()];
        self.forward_into(x, &mut z, &mut a);
        a
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.data.len() + self.bias.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elu_values() {
        assert_eq!(Activation::Elu.apply(2.0), 2.0);
        assert!((Activation::Elu.apply(-50.0) + 1.0).abs() < 1e-15);
        assert_eq!(Activation::Elu.apply(0.0), 0.0);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn derivatives_match_differences() {
        for act in [Activation::Elu, Activation::Linear, Activation::Sigmoid] {
            for z in [-2.0, -0.3, 0.4, 1.7] {
                let h = 1e-6;
                let numeric = (act.apply(z + h) - act.apply(z - h)) / (2.0 * h);
                let analytic = act.derivative(z, act.apply(z));
                assert!((numeric - analytic).abs() < 1e-8, "{act:?} at {z}");
            }
        }
    }
}
