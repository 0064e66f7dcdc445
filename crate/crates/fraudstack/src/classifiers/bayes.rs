//! Gaussian naive Bayes with a relative variance floor.

use crate::data::Matrix;

#[derive(Debug, Clone)]
pub struct GaussianNb {
    log_prior: [f64; 2],
    mean: [Vec<f64>; 2],
    var: [Vec<f64>; 2],
}

impl GaussianNb {
    /// Per-class feature means and (population) variances. Each variance is
    /// floored at `floor_ratio` times the largest overall feature variance so
    /// a constant-within-class feature cannot produce an infinite density;
    /// when every feature is globally constant the floor falls back to an
    /// absolute 1e-9.
    pub fn fit(x: &Matrix, labels: &[u8], floor_ratio: f64) -> Self {
        let d = x.n_cols();
        let n = x.n_rows();
        let mut counts = [0usize; 2];
        let mut mean = [vec![0.0; d], vec![0.0; d]];
        for i in 0..n {
            let c = labels[i] as usize;
            counts[c] += 1;
            for j in 0..d {
                mean[c][j] += x.get(i, j);
            }
        }
        for c in 0..2 {
            for j in 0..d {
                mean[c][j] /= counts[c] as f64;
            }
        }
        let mut var = [vec![0.0; d], vec![0.0; d]];
        for i in 0..n {
            let c = labels[i] as usize;
            for j in 0..d {
                let delta = x.get(i, j) - mean[c][j];
                var[c][j] += delta * delta;
            }
        }
        for c in 0..2 {
            for j in 0..d {
                var[c][j] /= counts[c] as f64;
            }
        }

        // Overall per-feature variance sets the floor's scale.
        let mut overall_mean = vec![0.0; d];
        for i in 0..n {
            for j in 0..d {
                overall_mean[j] += x.get(i, j);
            }
        }
        for m in &mut overall_mean {
            *m /= n as f64;
        }
        let mut max_var = 0.0f64;
        for j in 0..d {
            let mut v = 0.0;
            for i in 0..n {
                let delta = x.get(i, j) - overall_mean[j];
                v += delta * delta;
            }
            max_var = max_var.max(v / n as f64);
        }
        let mut floor = floor_ratio * max_var;
        if floor <= 0.0 {
            floor = 1e-9;
        }
        for c in 0..2 {
            for v in &mut var[c] {
                if *v < floor {
                    *v = floor;
                }
            }
        }

        let log_prior = [
            (counts[0] as f64 / n as f64).ln(),
            (counts[1] as f64 / n as f64).ln(),
        ];
        GaussianNb { log_prior, mean, var }
    }

    fn joint_log_likelihood(&self, row: &[f64], c: usize) -> f64 {
        let mut ll = self.log_prior[c];
        for (j, &v) in row.iter().enumerate() {
            let var = self.var[c][j];
            let delta = v - self.mean[c][j];
            ll += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - delta * delta / (2.0 * var);
        }
        ll
    }

    /// P(class 1 | row), computed in log space.
    pub fn score(&self, row: &[f64]) -> f64 {
        let l0 = self.joint_log_likelihood(row, 0);
        let l1 = self.joint_log_likelihood(row, 1);
        // σ(l1 - l0); safe at both extremes (exp overflow → score 0).
        1.0 / (1.0 + (l0 - l1).exp())
    }
}
