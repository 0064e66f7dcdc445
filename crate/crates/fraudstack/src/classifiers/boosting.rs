//! Decision stumps and the AdaBoost.M1 core.
//!
//! Three learners sit on this: plain adaptive boosting, the variant that
//! undersamples the majority class afresh each round, and the balanced-subset
//! ensemble (which boosts each subset independently). Labels are ±1
//! internally; scores are squashed to [0,1] via σ(Σαh / Σα) so the ensemble
//! margin lands on the same probability scale as every other learner.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::data::Matrix;

const EPSILON_FLOOR: f64 = 1e-12;

/// Axis-aligned threshold classifier: predicts `polarity` on `x[feature] >= threshold`
/// and `-polarity` below it.
#[derive(Debug, Clone, Copy)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub polarity: i8,
}

impl Stump {
    #[inline]
    pub fn predict(&self, row: &[f64]) -> f64 {
        let high = row[self.feature] >= self.threshold;
        let sign = if high { 1.0 } else { -1.0 };
        sign * self.polarity as f64
    }
}

/// Each feature's `(value, row)` pairs sorted ascending by value. The sort is
/// stable, so equal values keep the order rows were listed in.
fn sorted_columns(x: &Matrix, rows: &[usize]) -> Vec<Vec<(f64, usize)>> {
    (0..x.n_cols())
        .map(|feature| {
            let mut column: Vec<(f64, usize)> =
                rows.iter().map(|&i| (x.get(i, feature), i)).collect();
            column.sort_by(|a, b| a.0.total_cmp(&b.0));
            column
        })
        .collect()
}

/// Weighted-error-minimizing stump over `rows`. Scans features in index
/// order and thresholds ascending; ties keep the first candidate. Constant
/// stumps (threshold at ±∞) are admitted so the search can never do worse
/// than predicting the heavier class.
fn fit_stump(
    x: &Matrix,
    labels: &[i8],
    weights: &[f64],
    rows: &[usize],
) -> (Stump, f64) {
    fit_stump_sorted(&sorted_columns(x, rows), labels, weights, rows)
}

/// The stump search proper, over columns already sorted by `sorted_columns`.
/// Split out so boosting loops with a fixed row set can sort once and sweep
/// every round.
fn fit_stump_sorted(
    columns: &[Vec<(f64, usize)>],
    labels: &[i8],
    weights: &[f64],
    rows: &[usize],
) -> (Stump, f64) {
    let mut pos_weight = 0.0;
    let mut neg_weight = 0.0;
    for &i in rows {
        if labels[i] > 0 {
            pos_weight += weights[i];
        } else {
            neg_weight += weights[i];
        }
    }
    let total = pos_weight + neg_weight;

    // Start from the constant stumps: all-positive errs the negative mass,
    // all-negative errs the positive mass.
    let mut best = Stump { feature: 0, threshold: f64::NEG_INFINITY, polarity: 1 };
    let mut best_err = neg_weight;
    if pos_weight < best_err {
        best = Stump { feature: 0, threshold: f64::NEG_INFINITY, polarity: -1 };
        best_err = pos_weight;
    }

    for (feature, column) in columns.iter().enumerate() {
        // err_up(t): error of "predict +1 on x >= t". Below the lowest value
        // that is neg_weight; sweeping the threshold upward moves points to
        // the predicted-negative side.
        let mut err_up = neg_weight;
        for pos in 0..column.len() - 1 {
            let (value, i) = column[pos];
            err_up += if labels[i] > 0 { weights[i] } else { -weights[i] };
            let next_value = column[pos + 1].0;
            if value == next_value {
                continue;
            }
            let threshold = super::tree::split_threshold(value, next_value);
            if err_up < best_err {
                best_err = err_up;
                best = Stump { feature, threshold, polarity: 1 };
            }
            let err_down = total - err_up;
            if err_down < best_err {
                best_err = err_down;
                best = Stump { feature, threshold, polarity: -1 };
            }
        }
    }
    (best, best_err)
}

#[derive(Debug, Clone, Default)]
pub struct BoostCore {
    pub stumps: Vec<Stump>,
    pub alphas: Vec<f64>,
    /// Weighted error of each accepted round, in order.
    pub round_errors: Vec<f64>,
    /// Set when a round hit weighted error >= 0.5 and training stopped early.
    pub stopped_early: bool,
}

impl BoostCore {
    /// Ensemble margin Σ α·h(x) normalized by Σ α, mapped through the
    /// logistic function. An empty ensemble scores 0.5 everywhere.
    pub fn score(&self, row: &[f64]) -> f64 {
        let alpha_sum: f64 = self.alphas.iter().sum();
        if alpha_sum == 0.0 {
            return 0.5;
        }
        let margin: f64 = self
            .stumps
            .iter()
            .zip(&self.alphas)
            .map(|(s, a)| a * s.predict(row))
            .sum();
        let z = margin / alpha_sum;
        1.0 / (1.0 + (-z).exp())
    }
}

/// Per-round choice of which rows the stump is fit on. Weight updates and
/// the recorded error always use the full row set.
enum RoundRows<'a> {
    Full,
    Resampled {
        minority: &'a [usize],
        majority: &'a [usize],
        rng: &'a mut ChaCha8Rng,
    },
}

fn train(
    x: &Matrix,
    labels: &[i8],
    rows: &[usize],
    rounds: usize,
    mut round_rows: RoundRows,
) -> BoostCore {
    let n = rows.len();
    assert!(n > 0);
    let mut weights = vec![0.0f64; x.n_rows()];
    for &i in rows {
        weights[i] = 1.0 / n as f64;
    }
    let mut core = BoostCore::default();
    let mut subset_buf: Vec<usize> = Vec::new();
    // With a fixed row set the sorted feature columns are the same every
    // round; sort once. Resampled rounds draw fresh rows and sort per round.
    let presorted = match &round_rows {
        RoundRows::Full => Some(sorted_columns(x, rows)),
        RoundRows::Resampled { .. } => None,
    };

    for _ in 0..rounds {
        let fit_rows: &[usize] = match &mut round_rows {
            RoundRows::Full => rows,
            RoundRows::Resampled { minority, majority, rng } => {
                subset_buf.clear();
                subset_buf.extend_from_slice(minority);
                let take = minority.len().min(majority.len());
                // Uniform draw without replacement, ignoring current weights.
                let mut pool = majority.to_vec();
                pool.shuffle(rng);
                subset_buf.extend_from_slice(&pool[..take]);
                &subset_buf
            }
        };
        let (stump, _) = match &presorted {
            Some(columns) => fit_stump_sorted(columns, labels, &weights, rows),
            None => fit_stump(x, labels, &weights, fit_rows),
        };
        // Error is always assessed on the full training set.
        let mut epsilon = 0.0;
        for &i in rows {
            if stump.predict(x.row(i)) * labels[i] as f64 <= 0.0 {
                epsilon += weights[i];
            }
        }
        if epsilon >= 0.5 {
            core.stopped_early = true;
            break;
        }
        let eps_clamped = epsilon.max(EPSILON_FLOOR);
        let alpha = 0.5 * ((1.0 - eps_clamped) / eps_clamped).ln();
        let mut total = 0.0;
        for &i in rows {
            let agree = stump.predict(x.row(i)) * labels[i] as f64;
            weights[i] *= (-alpha * agree).exp();
            total += weights[i];
        }
        for &i in rows {
            weights[i] /= total;
        }
        core.stumps.push(stump);
        core.alphas.push(alpha);
        core.round_errors.push(epsilon);
    }
    core
}

/// Plain AdaBoost over the whole row set.
pub fn train_adaboost(x: &Matrix, labels: &[i8], rows: &[usize], rounds: usize) -> BoostCore {
    train(x, labels, rows, rounds, RoundRows::Full)
}

/// Boosting with a fresh uniform majority undersample each round: the stump
/// sees the balanced subset, while errors and weight updates stay on the
/// full set.
pub fn train_rusboost(
    x: &Matrix,
    labels: &[i8],
    minority: &[usize],
    majority: &[usize],
    rounds: usize,
    rng: &mut ChaCha8Rng,
) -> BoostCore {
    let mut rows: Vec<usize> = minority.iter().chain(majority).copied().collect();
    rows.sort_unstable();
    train(x, labels, &rows, rounds, RoundRows::Resampled { minority, majority, rng })
}
