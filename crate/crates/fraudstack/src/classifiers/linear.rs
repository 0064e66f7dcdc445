//! Linear SVM trained with the Pegasos stochastic subgradient method.
//!
//! Expects standardized inputs (the model wrapper handles that). The hinge
//! objective is optimized on ±1 labels; reported scores squash the signed
//! margin through the logistic function.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::data::Matrix;

#[derive(Debug, Clone)]
pub struct PegasosSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl PegasosSvm {
    /// One pass per epoch over a shuffled row order; step size 1/(λt) with a
    /// global step counter. The bias is treated as one more regularized
    /// coordinate on a constant unit feature — with this step schedule an
    /// unregularized intercept would take an enormous first step (η·y at
    /// t = 1 is 1/λ) and never recover. Returns the model plus the mean
    /// hinge loss of each epoch (measured before that epoch's updates).
    pub fn fit(
        x: &Matrix,
        signs: &[i8],
        lambda: f64,
        epochs: usize,
        rng: &mut ChaCha8Rng,
    ) -> (Self, Vec<f64>) {
        let n = x.n_rows();
        let d = x.n_cols();
        let mut model = PegasosSvm { weights: vec![0.0; d], bias: 0.0 };
        let mut order: Vec<usize> = (0..n).collect();
        let mut epoch_hinge = Vec::with_capacity(epochs);
        let mut t = 0u64;

        for _ in 0..epochs {
            epoch_hinge.push(model.mean_hinge(x, signs, lambda));
            order.shuffle(rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let y = signs[i] as f64;
                let row = x.row(i);
                let margin = y * (model.decision(row));
                let shrink = 1.0 - eta * lambda;
                for w in &mut model.weights {
                    *w *= shrink;
                }
                model.bias *= shrink;
                if margin < 1.0 {
                    for (w, &v) in model.weights.iter_mut().zip(row) {
                        *w += eta * y * v;
                    }
                    model.bias += eta * y;
                }
            }
        }
        (model, epoch_hinge)
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        let dot: f64 = self.weights.iter().zip(row).map(|(w, v)| w * v).sum();
        dot + self.bias
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        1.0 / (1.0 + (-self.decision(row)).exp())
    }

    /// Regularized mean hinge objective λ/2‖w‖² + mean max(0, 1 − y f(x)).
    pub fn mean_hinge(&self, x: &Matrix, signs: &[i8], lambda: f64) -> f64 {
        let norm_sq: f64 = self.weights.iter().map(|w| w * w).sum();
        let hinge: f64 = (0..x.n_rows())
            .map(|i| (1.0 - signs[i] as f64 * self.decision(x.row(i))).max(0.0))
            .sum::<f64>()
            / x.n_rows() as f64;
        0.5 * lambda * norm_sq + hinge
    }
}
