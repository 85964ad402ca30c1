//! Score-fusion multilayer perceptron: 7 -> 16 -> 8 -> 1 with ReLU
//! hidden layers and a sigmoid output, trained by full-batch gradient
//! descent on binary cross-entropy with inverted dropout on both hidden
//! layers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LearnError, Result};
use crate::mat::Mat;
use crate::types::Label;
use crate::util::{derive_seed, seeded_rng};

pub const MLP_INPUTS: usize = 7;
const H1: usize = 16;
const H2: usize = 8;

// flat parameter layout
const W1: usize = 0; // 16 x 7
const B1: usize = W1 + H1 * MLP_INPUTS;
const W2: usize = B1 + H1; // 8 x 16
const B2: usize = W2 + H2 * H1;
const W3: usize = B2 + H2; // 1 x 8
const B3: usize = W3 + H2;
pub const MLP_PARAM_COUNT: usize = B3 + 1; // 273

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpFusionModel {
    /// Flat parameters: W1 (16x7), b1, W2 (8x16), b2, W3 (1x8), b3.
    pub params: Vec<f64>,
    pub dropout_rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpHyper {
    pub lr: f64,
    pub epochs: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for MlpHyper {
    fn default() -> Self {
        MlpHyper {
            lr: 0.05,
            epochs: 500,
            dropout_rate: 0.5,
            seed: 0,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl MlpFusionModel {
    /// Glorot-uniform weights (biases zero) from the seed.
    pub fn init(seed: u64, dropout_rate: f64) -> Self {
        let mut params = vec![0.0; MLP_PARAM_COUNT];
        let mut rng = seeded_rng(derive_seed(seed, "mlp-init"));
        let mut fill = |lo: usize, hi: usize, fan_in: usize, fan_out: usize| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[lo..hi] {
                *p = rng.random_range(-bound..bound);
            }
        };
        fill(W1, B1, MLP_INPUTS, H1);
        fill(W2, B2, H1, H2);
        fill(W3, B3, H2, 1);
        MlpFusionModel {
            params,
            dropout_rate,
            seed,
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Deterministic inference-mode forward pass; output in (0, 1).
    pub fn forward(&self, scores: &[f64]) -> f64 {
        forward_eval(&self.params, scores).2
    }
}

/// Eval-mode forward pass returning hidden activations and the output.
fn forward_eval(params: &[f64], s: &[f64]) -> ([f64; H1], [f64; H2], f64) {
    debug_assert_eq!(s.len(), MLP_INPUTS);
    let mut h1 = [0.0; H1];
    for i in 0..H1 {
        let mut z = params[B1 + i];
        for (j, &sj) in s.iter().enumerate() {
            z += params[W1 + i * MLP_INPUTS + j] * sj;
        }
        h1[i] = z.max(0.0);
    }
    let mut h2 = [0.0; H2];
    for i in 0..H2 {
        let mut z = params[B2 + i];
        for (j, &hj) in h1.iter().enumerate() {
            z += params[W2 + i * H1 + j] * hj;
        }
        h2[i] = z.max(0.0);
    }
    let mut z3 = params[B3];
    for (j, &hj) in h2.iter().enumerate() {
        z3 += params[W3 + j] * hj;
    }
    (h1, h2, sigmoid(z3))
}

/// Mean binary cross-entropy of the eval-mode network over a batch.
/// `targets` hold 0.0 (Low) or 1.0 (High).
pub fn batch_loss(params: &[f64], x: &Mat, targets: &[f64]) -> f64 {
    let mut loss = 0.0;
    for (row, &t) in x.iter_rows().zip(targets) {
        let mut h1 = [0.0; H1];
        for i in 0..H1 {
            let mut z = params[B1 + i];
            for (j, &sj) in row.iter().enumerate() {
                z += params[W1 + i * MLP_INPUTS + j] * sj;
            }
            h1[i] = z.max(0.0);
        }
        let mut h2 = [0.0; H2];
        for i in 0..H2 {
            let mut z = params[B2 + i];
            for (j, &hj) in h1.iter().enumerate() {
                z += params[W2 + i * H1 + j] * hj;
            }
            h2[i] = z.max(0.0);
        }
        let mut z3 = params[B3];
        for (j, &hj) in h2.iter().enumerate() {
            z3 += params[W3 + j] * hj;
        }
        loss += softplus(z3) - t * z3;
    }
    loss / targets.len() as f64
}

/// Mean loss and its analytic gradient with dropout masks applied
/// (pass all-ones masks for the eval-mode gradient).
fn batch_gradient(
    params: &[f64],
    x: &Mat,
    targets: &[f64],
    masks: Option<(&[f64], &[f64])>, // per-sample masks, n*H1 and n*H2
) -> (f64, Vec<f64>) {
    let n = targets.len();
    let mut grad = vec![0.0; MLP_PARAM_COUNT];
    let mut loss = 0.0;
    for (si, (row, &t)) in x.iter_rows().zip(targets).enumerate() {
        let m1 = masks.map(|(a, _)| &a[si * H1..(si + 1) * H1]);
        let m2 = masks.map(|(_, b)| &b[si * H2..(si + 1) * H2]);

        let mut z1 = [0.0; H1];
        let mut h1 = [0.0; H1];
        for i in 0..H1 {
            let mut z = params[B1 + i];
            for (j, &sj) in row.iter().enumerate() {
                z += params[W1 + i * MLP_INPUTS + j] * sj;
            }
            z1[i] = z;
            h1[i] = z.max(0.0) * m1.map_or(1.0, |m| m[i]);
        }
        let mut z2 = [0.0; H2];
        let mut h2 = [0.0; H2];
        for i in 0..H2 {
            let mut z = params[B2 + i];
            for (j, &hj) in h1.iter().enumerate() {
                z += params[W2 + i * H1 + j] * hj;
            }
            z2[i] = z;
            h2[i] = z.max(0.0) * m2.map_or(1.0, |m| m[i]);
        }
        let mut z3 = params[B3];
        for (j, &hj) in h2.iter().enumerate() {
            z3 += params[W3 + j] * hj;
        }
        loss += softplus(z3) - t * z3;

        let dz3 = sigmoid(z3) - t;
        for (j, &hj) in h2.iter().enumerate() {
            grad[W3 + j] += dz3 * hj;
        }
        grad[B3] += dz3;

        let mut dz2 = [0.0; H2];
        for i in 0..H2 {
            let dh2 = dz3 * params[W3 + i] * m2.map_or(1.0, |m| m[i]);
            dz2[i] = if z2[i] > 0.0 { dh2 } else { 0.0 };
            grad[B2 + i] += dz2[i];
            for (j, &hj) in h1.iter().enumerate() {
                grad[W2 + i * H1 + j] += dz2[i] * hj;
            }
        }

        for i in 0..H1 {
            let mut dh1 = 0.0;
            for (k, &d) in dz2.iter().enumerate() {
                dh1 += d * params[W2 + k * H1 + i];
            }
            dh1 *= m1.map_or(1.0, |m| m[i]);
            let dz1 = if z1[i] > 0.0 { dh1 } else { 0.0 };
            grad[B1 + i] += dz1;
            for (j, &sj) in row.iter().enumerate() {
                grad[W1 + i * MLP_INPUTS + j] += dz1 * sj;
            }
        }
    }
    for g in &mut grad {
        *g /= n as f64;
    }
    (loss / n as f64, grad)
}

/// Eval-mode loss and gradient, used by the finite-difference check.
pub fn loss_and_gradient(params: &[f64], x: &Mat, targets: &[f64]) -> (f64, Vec<f64>) {
    batch_gradient(params, x, targets, None)
}

/// Train on a samples-by-7 score matrix by full-batch gradient descent.
pub fn train_mlp(x: &Mat, y: &[Label], hyper: &MlpHyper) -> Result<MlpFusionModel> {
    if x.cols() != MLP_INPUTS {
        return Err(LearnError::WrongArity {
            expected: MLP_INPUTS,
            got: x.cols(),
        });
    }
    if x.rows() != y.len() || y.is_empty() {
        return Err(LearnError::InsufficientData(format!(
            "{} rows vs {} labels",
            x.rows(),
            y.len()
        )));
    }
    let highs = y.iter().filter(|&&l| l == Label::High).count();
    if highs == 0 || highs == y.len() {
        return Err(LearnError::SingleClassInput);
    }
    if x.data().iter().any(|v| !v.is_finite()) {
        return Err(LearnError::NonFiniteFeature);
    }
    let targets: Vec<f64> = y.iter().map(|l| if *l == Label::High { 1.0 } else { 0.0 }).collect();
    let mut model = MlpFusionModel::init(hyper.seed, hyper.dropout_rate);
    let n = y.len();
    let keep = 1.0 - hyper.dropout_rate;
    let mut dropout_rng = seeded_rng(derive_seed(hyper.seed, "mlp-dropout"));
    let mut m1 = vec![1.0; n * H1];
    let mut m2 = vec![1.0; n * H2];
    for _ in 0..hyper.epochs {
        let masks = if hyper.dropout_rate > 0.0 {
            for m in m1.iter_mut().chain(m2.iter_mut()) {
                // inverted dropout: zero with probability `dropout_rate`,
                // scale survivors by 1/keep
                *m = if dropout_rng.random_range(0.0..1.0) < hyper.dropout_rate {
                    0.0
                } else {
                    1.0 / keep
                };
            }
            Some((m1.as_slice(), m2.as_slice()))
        } else {
            None
        };
        let (loss, grad) = batch_gradient(&model.params, x, &targets, masks);
        if !loss.is_finite() {
            return Err(LearnError::DivergedLoss);
        }
        for (p, g) in model.params.iter_mut().zip(&grad) {
            *p -= hyper.lr * g;
        }
    }
    Ok(model)
}
