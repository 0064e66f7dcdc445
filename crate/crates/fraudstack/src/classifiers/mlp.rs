//! Single-hidden-layer perceptron: ReLU hidden units, logistic output,
//! binary cross-entropy, plain minibatch SGD.
//!
//! `loss` and `gradient` are public and operate on an explicit parameter
//! struct so the analytic gradient can be checked against finite differences
//! from the outside.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub n_inputs: usize,
    pub n_hidden: usize,
    /// Hidden weights, row-major `[hidden][input]`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Output weights, one per hidden unit.
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpParams {
    /// Glorot-uniform initialization.
    pub fn init(n_inputs: usize, n_hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit1 = (6.0 / (n_inputs + n_hidden) as f64).sqrt();
        let limit2 = (6.0 / (n_hidden + 1) as f64).sqrt();
        MlpParams {
            n_inputs,
            n_hidden,
            w1: (0..n_inputs * n_hidden).map(|_| rng.gen_range(-limit1..limit1)).collect(),
            b1: vec![0.0; n_hidden],
            w2: (0..n_hidden).map(|_| rng.gen_range(-limit2..limit2)).collect(),
            b2: 0.0,
        }
    }

    pub fn zeros_like(&self) -> Self {
        MlpParams {
            n_inputs: self.n_inputs,
            n_hidden: self.n_hidden,
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: 0.0,
        }
    }

    /// Flat view in a fixed order (w1, b1, w2, b2) for finite differencing.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.w1.len() + self.b1.len() + self.w2.len() + 1);
        flat.extend_from_slice(&self.w1);
        flat.extend_from_slice(&self.b1);
        flat.extend_from_slice(&self.w2);
        flat.push(self.b2);
        flat
    }

    pub fn from_flat(n_inputs: usize, n_hidden: usize, flat: &[f64]) -> Self {
        let nw1 = n_inputs * n_hidden;
        assert_eq!(flat.len(), nw1 + n_hidden + n_hidden + 1);
        MlpParams {
            n_inputs,
            n_hidden,
            w1: flat[..nw1].to_vec(),
            b1: flat[nw1..nw1 + n_hidden].to_vec(),
            w2: flat[nw1 + n_hidden..nw1 + 2 * n_hidden].to_vec(),
            b2: flat[nw1 + 2 * n_hidden],
        }
    }

    /// Forward pass; fills `hidden` with post-ReLU activations, returns the
    /// output probability.
    fn forward(&self, row: &[f64], hidden: &mut [f64]) -> f64 {
        for h in 0..self.n_hidden {
            let mut z = self.b1[h];
            let w_row = &self.w1[h * self.n_inputs..(h + 1) * self.n_inputs];
            for (w, &v) in w_row.iter().zip(row) {
                z += w * v;
            }
            hidden[h] = z.max(0.0);
        }
        let mut z2 = self.b2;
        for (w, &a) in self.w2.iter().zip(hidden.iter()) {
            z2 += w * a;
        }
        1.0 / (1.0 + (-z2).exp())
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        let mut hidden = vec![0.0; self.n_hidden];
        self.forward(row, &mut hidden)
    }
}

fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Mean binary cross-entropy of the network over all rows.
pub fn loss(params: &MlpParams, x: &Matrix, labels: &[u8]) -> f64 {
    let mut hidden = vec![0.0; params.n_hidden];
    let mut total = 0.0;
    for i in 0..x.n_rows() {
        let p = params.forward(x.row(i), &mut hidden);
        total += bce(p, labels[i] as f64);
    }
    total / x.n_rows() as f64
}

/// Analytic gradient of `loss` with respect to every parameter, averaged over
/// all rows, accumulated into `grad` (which is zeroed first).
pub fn gradient(params: &MlpParams, x: &Matrix, labels: &[u8], grad: &mut MlpParams) {
    *grad = params.zeros_like();
    let mut hidden = vec![0.0; params.n_hidden];
    let scale = 1.0 / x.n_rows() as f64;
    for i in 0..x.n_rows() {
        let row = x.row(i);
        let p = params.forward(row, &mut hidden);
        let dz2 = (p - labels[i] as f64) * scale; // dL/dz2 for the mean loss
        grad.b2 += dz2;
        for h in 0..params.n_hidden {
            grad.w2[h] += dz2 * hidden[h];
            if hidden[h] > 0.0 {
                let dz1 = dz2 * params.w2[h];
                grad.b1[h] += dz1;
                let g_row = &mut grad.w1[h * params.n_inputs..(h + 1) * params.n_inputs];
                for (g, &v) in g_row.iter_mut().zip(row) {
                    *g += dz1 * v;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    pub params: MlpParams,
}

/// Minibatch SGD. Returns the trained network and the mean training loss
/// recorded at the end of each epoch.
pub fn train(
    x: &Matrix,
    labels: &[u8],
    n_hidden: usize,
    learning_rate: f64,
    epochs: usize,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> (Mlp, Vec<f64>) {
    let n = x.n_rows();
    let d = x.n_cols();
    let mut params = MlpParams::init(d, n_hidden, rng);
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(epochs);
    let mut hidden = vec![0.0; n_hidden];

    for _ in 0..epochs {
        order.shuffle(rng);
        for batch in order.chunks(batch_size) {
            // Accumulate the batch-mean gradient, then take one step.
            let mut grad = params.zeros_like();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let row = x.row(i);
                let p = params.forward(row, &mut hidden);
                let dz2 = (p - labels[i] as f64) * scale;
                grad.b2 += dz2;
                for h in 0..n_hidden {
                    grad.w2[h] += dz2 * hidden[h];
                    if hidden[h] > 0.0 {
                        let dz1 = dz2 * params.w2[h];
                        grad.b1[h] += dz1;
                        let g_row = &mut grad.w1[h * d..(h + 1) * d];
                        for (g, &v) in g_row.iter_mut().zip(row) {
                            *g += dz1 * v;
                        }
                    }
                }
            }
            for (w, g) in params.w1.iter_mut().zip(&grad.w1) {
                *w -= learning_rate * g;
            }
            for (b, g) in params.b1.iter_mut().zip(&grad.b1) {
                *b -= learning_rate * g;
            }
            for (w, g) in params.w2.iter_mut().zip(&grad.w2) {
                *w -= learning_rate * g;
            }
            params.b2 -= learning_rate * grad.b2;
        }
        epoch_losses.push(loss(&params, x, labels));
    }
    (Mlp { params }, epoch_losses)
}
