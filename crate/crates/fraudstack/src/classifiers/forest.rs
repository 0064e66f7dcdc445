//! Tree ensembles: the cost-sensitive random forest, bootstrap bagging of
//! full-depth trees, and stagewise gradient boosting on the logistic loss.

use rand::Rng;

use super::tree::{ClassificationTree, LeafRule, RegressionTree, TreeConfig};
use crate::data::Matrix;
use crate::seed;

/// Random forest whose impurity and leaf estimates use per-class weights,
/// so misclassifying the expensive class is penalized inside the trees
/// themselves. Scores are exactly invariant under positive rescaling of the
/// weight pair (weighted entropy and unsmoothed leaf fractions both depend
/// only on weight proportions).
#[derive(Debug, Clone)]
pub struct CostForest {
    trees: Vec<ClassificationTree>,
    pub weight_majority: f64,
    pub weight_minority: f64,
}

impl CostForest {
    pub fn fit(
        x: &Matrix,
        labels: &[u8],
        n_trees: usize,
        weight_majority: f64,
        weight_minority: f64,
        seed_value: u64,
    ) -> Self {
        let n = x.n_rows();
        let row_weights: Vec<f64> = labels
            .iter()
            .map(|&l| if l == 1 { weight_minority } else { weight_majority })
            .collect();
        let subsample = ((x.n_cols() as f64).sqrt().floor() as usize).max(1);
        let config = TreeConfig {
            max_depth: usize::MAX,
            min_leaf: 1,
            feature_subsample: Some(subsample),
            leaf_rule: LeafRule::WeightedFraction,
        };
        let trees = (0..n_trees)
            .map(|t| {
                let mut rng = seed::rng(seed::derive(seed_value, &["tree", &t.to_string()]));
                let bootstrap: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                ClassificationTree::fit(x, labels, Some(&row_weights), &bootstrap, &config, &mut rng)
            })
            .collect();
        CostForest { trees, weight_majority, weight_minority }
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        let total: f64 = self.trees.iter().map(|t| t.score(row)).sum();
        total / self.trees.len() as f64
    }
}

/// Bootstrap aggregation of unlimited-depth trees with Laplace leaves.
#[derive(Debug, Clone)]
pub struct BaggedTrees {
    trees: Vec<ClassificationTree>,
}

impl BaggedTrees {
    pub fn fit(x: &Matrix, labels: &[u8], n_trees: usize, min_leaf: usize, seed_value: u64) -> Self {
        let n = x.n_rows();
        let config = TreeConfig {
            max_depth: usize::MAX,
            min_leaf,
            feature_subsample: None,
            leaf_rule: LeafRule::Laplace,
        };
        let trees = (0..n_trees)
            .map(|t| {
                let mut rng = seed::rng(seed::derive(seed_value, &["tree", &t.to_string()]));
                let bootstrap: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                ClassificationTree::fit(x, labels, None, &bootstrap, &config, &mut rng)
            })
            .collect();
        BaggedTrees { trees }
    }

    pub fn member_scores(&self, row: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.score(row)).collect()
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        let total: f64 = self.trees.iter().map(|t| t.score(row)).sum();
        total / self.trees.len() as f64
    }
}

/// Stagewise additive model on the log-odds scale: each round fits a shallow
/// regression tree to the residuals y − p and takes a shrunken Newton step.
#[derive(Debug, Clone)]
pub struct Gbm {
    base_log_odds: f64,
    shrinkage: f64,
    trees: Vec<RegressionTree>,
    /// Mean logistic loss on the training set: entry 0 is the constant-model
    /// loss, entry r the loss after round r.
    pub train_loss: Vec<f64>,
}

fn mean_logloss(scores: &[f64], labels: &[u8]) -> f64 {
    let mut total = 0.0;
    for (f, &y) in scores.iter().zip(labels) {
        let p = (1.0 / (1.0 + (-f).exp())).clamp(1e-12, 1.0 - 1e-12);
        total += if y == 1 { -p.ln() } else { -(1.0 - p).ln() };
    }
    total / scores.len() as f64
}

impl Gbm {
    pub fn fit(
        x: &Matrix,
        labels: &[u8],
        rounds: usize,
        max_depth: usize,
        shrinkage: f64,
    ) -> Self {
        let n = x.n_rows();
        let positives = labels.iter().filter(|&&l| l == 1).count();
        let p_bar = positives as f64 / n as f64;
        let base_log_odds = (p_bar / (1.0 - p_bar)).ln();

        let mut raw = vec![base_log_odds; n];
        let mut train_loss = Vec::with_capacity(rounds + 1);
        train_loss.push(mean_logloss(&raw, labels));
        let indices: Vec<usize> = (0..n).collect();
        let mut gradients = vec![0.0; n];
        let mut hessians = vec![0.0; n];
        let mut trees = Vec::with_capacity(rounds);

        for _ in 0..rounds {
            for i in 0..n {
                let p = 1.0 / (1.0 + (-raw[i]).exp());
                gradients[i] = labels[i] as f64 - p;
                hessians[i] = (p * (1.0 - p)).max(1e-12);
            }
            let tree = RegressionTree::fit(x, &gradients, &hessians, &indices, max_depth, 1);
            for i in 0..n {
                raw[i] += shrinkage * tree.predict(x.row(i));
            }
            train_loss.push(mean_logloss(&raw, labels));
            trees.push(tree);
        }
        Gbm { base_log_odds, shrinkage, trees, train_loss }
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        let mut f = self.base_log_odds;
        for tree in &self.trees {
            f += self.shrinkage * tree.predict(row);
        }
        1.0 / (1.0 + (-f).exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::test_blobs;

    #[test]
    fn cost_forest_scale_invariance_is_exact() {
        let data = test_blobs(120, 0.25, 4, 99);
        let a = CostForest::fit(&data.features, &data.labels, 20, 1.0, 9.0, 7);
        let b = CostForest::fit(&data.features, &data.labels, 20, 3.5, 31.5, 7);
        for row in data.features.iter_rows() {
            assert_eq!(a.score(row), b.score(row));
        }
    }

    #[test]
    fn cost_forest_separates_blobs() {
        let data = test_blobs(200, 0.2, 3, 5);
        let forest = CostForest::fit(&data.features, &data.labels, 30, 1.0, 4.0, 11);
        let mut correct = 0;
        for (i, row) in data.features.iter_rows().enumerate() {
            if (forest.score(row) >= 0.5) == (data.labels[i] == 1) {
                correct += 1;
            }
        }
        assert!(correct as f64 / data.n_rows() as f64 > 0.97);
    }

    #[test]
    fn bagging_score_is_member_mean() {
        let data = test_blobs(100, 0.3, 3, 21);
        let bag = BaggedTrees::fit(&data.features, &data.labels, 10, 5, 3);
        for row in data.features.iter_rows().take(20) {
            let members = bag.member_scores(row);
            assert_eq!(members.len(), 10);
            let mean: f64 = members.iter().sum::<f64>() / members.len() as f64;
            assert!((bag.score(row) - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn bagging_members_differ() {
        // Bootstraps must actually vary across member trees.
        let data = test_blobs(100, 0.3, 3, 22);
        let bag = BaggedTrees::fit(&data.features, &data.labels, 10, 1, 3);
        let varied = data
            .features
            .iter_rows()
            .any(|row| {
                let m = bag.member_scores(row);
                m.iter().any(|&s| (s - m[0]).abs() > 1e-9)
            });
        assert!(varied);
    }

    #[test]
    fn gbm_training_loss_never_increases() {
        let data = test_blobs(150, 0.3, 4, 13);
        let gbm = Gbm::fit(&data.features, &data.labels, 40, 3, 0.1);
        assert_eq!(gbm.train_loss.len(), 41);
        for w in gbm.train_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "loss went up: {} -> {}", w[0], w[1]);
        }
        // And it should actually learn something.
        assert!(gbm.train_loss.last().unwrap() < &(gbm.train_loss[0] * 0.8));
    }

    #[test]
    fn gbm_base_rate_matches_prior() {
        let data = test_blobs(100, 0.2, 3, 17);
        let gbm = Gbm::fit(&data.features, &data.labels, 0, 3, 0.1);
        let p_bar = data.labels.iter().filter(|&&l| l == 1).count() as f64 / 100.0;
        assert!((gbm.score(data.features.row(0)) - p_bar).abs() < 1e-12);
    }

    #[test]
    fn gbm_is_deterministic() {
        let data = test_blobs(80, 0.3, 3, 29);
        let a = Gbm::fit(&data.features, &data.labels, 15, 3, 0.1);
        let b = Gbm::fit(&data.features, &data.labels, 15, 3, 0.1);
        for row in data.features.iter_rows() {
            assert_eq!(a.score(row), b.score(row));
        }
    }
}
