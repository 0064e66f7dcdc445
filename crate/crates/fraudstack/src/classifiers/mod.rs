//! The eleven base learners behind a single fit/predict surface.
//!
//! Every learner consumes a [`Dataset`](crate::data::Dataset) and produces a
//! [`TrainedModel`] that scores rows with P(label = 1). Learners that are
//! sensitive to feature scale (knn, svm, mlp) standardize internally from
//! training statistics; tree models see raw features. Each trained model
//! carries a fingerprint of the row ids it was fitted on so downstream code
//! can audit exactly what a model saw, plus any non-fatal training warnings
//! (non-convergence and the like — never errors).
//!
//! Training is deterministic given `(spec, data)`: all randomness flows from
//! the spec seed through named sub-streams, and nothing here spawns threads.

pub mod bayes;
pub mod boosting;
pub mod forest;
pub mod linear;
pub mod mlp;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::data::{Dataset, Matrix, RowId};
use crate::error::{Error, Result};
use crate::neighbors::{DistanceMetric, NeighborIndex};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassifierKind {
    Knn,
    GaussianNb,
    C45,
    Csl,
    Svm,
    EasyEnsemble,
    RusBoost,
    AdaBoost,
    Gbm,
    Bagging,
    Mlp,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 11] = [
        ClassifierKind::Knn,
        ClassifierKind::GaussianNb,
        ClassifierKind::C45,
        ClassifierKind::Csl,
        ClassifierKind::Svm,
        ClassifierKind::EasyEnsemble,
        ClassifierKind::RusBoost,
        ClassifierKind::AdaBoost,
        ClassifierKind::Gbm,
        ClassifierKind::Bagging,
        ClassifierKind::Mlp,
    ];

    /// Identifier used in config files and run names.
    pub fn config_name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::GaussianNb => "gaussiannb",
            ClassifierKind::C45 => "c45",
            ClassifierKind::Csl => "csl",
            ClassifierKind::Svm => "svm",
            ClassifierKind::EasyEnsemble => "easyensemble",
            ClassifierKind::RusBoost => "rusboost",
            ClassifierKind::AdaBoost => "adaboost",
            ClassifierKind::Gbm => "gbm",
            ClassifierKind::Bagging => "bagging",
            ClassifierKind::Mlp => "mlp",
        }
    }

    /// Name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "KNN",
            ClassifierKind::GaussianNb => "GaussianNB",
            ClassifierKind::C45 => "C4.5",
            ClassifierKind::Csl => "CSL",
            ClassifierKind::Svm => "SVM",
            ClassifierKind::EasyEnsemble => "EasyEnsemble",
            ClassifierKind::RusBoost => "RUSBoost",
            ClassifierKind::AdaBoost => "AdaBoost",
            ClassifierKind::Gbm => "GBM",
            ClassifierKind::Bagging => "Bagging",
            ClassifierKind::Mlp => "MLP",
        }
    }

    /// True for the two decision-tree family members eligible for the
    /// tree-pair stack slot.
    pub fn is_tree_family(self) -> bool {
        matches!(self, ClassifierKind::C45 | ClassifierKind::Csl)
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let folded = s.to_ascii_lowercase().replace(['.', '_', '-'], "");
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.config_name() == folded)
            .ok_or_else(|| Error::InvalidParam(format!("unknown classifier {s:?}")))
    }
}

/// Misclassification weights for the cost-sensitive forest. When absent the
/// minority weight defaults to the training imbalance ratio n₀/n₁.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub majority: f64,
    pub minority: f64,
}

/// Flat hyperparameter block shared by all kinds; each learner reads only
/// its own fields. Defaults are the grid settings used throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub knn_k: usize,
    pub knn_metric: DistanceMetric,
    pub nb_var_floor_ratio: f64,
    pub tree_max_depth: usize,
    pub tree_min_leaf: usize,
    pub forest_trees: usize,
    pub cost_weights: Option<CostWeights>,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    pub mlp_hidden: usize,
    pub mlp_learning_rate: f64,
    pub mlp_epochs: usize,
    pub mlp_batch: usize,
    pub boost_rounds: usize,
    pub gbm_rounds: usize,
    pub gbm_depth: usize,
    pub gbm_shrinkage: f64,
    pub bagging_trees: usize,
    pub easy_subsets: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            knn_k: 5,
            knn_metric: DistanceMetric::Euclidean,
            nb_var_floor_ratio: 1e-9,
            tree_max_depth: 12,
            tree_min_leaf: 5,
            forest_trees: 100,
            cost_weights: None,
            svm_lambda: 1e-4,
            svm_epochs: 20,
            mlp_hidden: 32,
            mlp_learning_rate: 0.01,
            mlp_epochs: 30,
            mlp_batch: 64,
            boost_rounds: 100,
            gbm_rounds: 100,
            gbm_depth: 3,
            gbm_shrinkage: 0.1,
            bagging_trees: 50,
            easy_subsets: 10,
        }
    }
}

/// A validated (kind, hyperparams, seed) triple; constructing one checks the
/// parameters the kind actually uses.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub hyper: Hyperparams,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind, hyper: Hyperparams, seed: u64) -> Result<Self> {
        use ClassifierKind::*;
        let bad = |msg: &str| Err(Error::InvalidParam(format!("{}: {msg}", kind.config_name())));
        match kind {
            Knn => {
                if hyper.knn_k == 0 {
                    return bad("k must be at least 1");
                }
            }
            GaussianNb => {
                if !(hyper.nb_var_floor_ratio >= 0.0 && hyper.nb_var_floor_ratio.is_finite()) {
                    return bad("variance floor ratio must be finite and non-negative");
                }
            }
            C45 => {
                if hyper.tree_max_depth == 0 || hyper.tree_min_leaf == 0 {
                    return bad("tree depth and min leaf must be at least 1");
                }
            }
            Csl => {
                if hyper.forest_trees == 0 {
                    return bad("forest needs at least one tree");
                }
                if let Some(w) = hyper.cost_weights {
                    if !(w.majority > 0.0 && w.minority > 0.0)
                        || !w.majority.is_finite()
                        || !w.minority.is_finite()
                    {
                        return bad("cost weights must be positive and finite");
                    }
                }
            }
            Svm => {
                if !(hyper.svm_lambda > 0.0 && hyper.svm_lambda.is_finite()) {
                    return bad("lambda must be positive");
                }
                if hyper.svm_epochs == 0 {
                    return bad("epochs must be at least 1");
                }
            }
            Mlp => {
                if hyper.mlp_hidden == 0 || hyper.mlp_epochs == 0 || hyper.mlp_batch == 0 {
                    return bad("hidden units, epochs, and batch size must be at least 1");
                }
                if !(hyper.mlp_learning_rate > 0.0 && hyper.mlp_learning_rate.is_finite()) {
                    return bad("learning rate must be positive");
                }
            }
            AdaBoost | RusBoost => {
                if hyper.boost_rounds == 0 {
                    return bad("boosting needs at least one round");
                }
            }
            EasyEnsemble => {
                if hyper.easy_subsets == 0 || hyper.boost_rounds == 0 {
                    return bad("needs at least one subset and one boosting round");
                }
            }
            Gbm => {
                if hyper.gbm_rounds == 0 || hyper.gbm_depth == 0 {
                    return bad("rounds and depth must be at least 1");
                }
                if !(hyper.gbm_shrinkage > 0.0 && hyper.gbm_shrinkage <= 1.0) {
                    return bad("shrinkage must lie in (0, 1]");
                }
            }
            Bagging => {
                if hyper.bagging_trees == 0 || hyper.tree_min_leaf == 0 {
                    return bad("needs at least one tree and min leaf of at least 1");
                }
            }
        }
        Ok(ClassifierSpec { kind, hyper, seed })
    }

    pub fn with_defaults(kind: ClassifierKind, seed: u64) -> Self {
        // Defaults always validate.
        ClassifierSpec::new(kind, Hyperparams::default(), seed).unwrap()
    }
}

/// Order-insensitive digest of the rows a model was trained on. Lets audits
/// prove that no evaluation row was seen during fit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprint {
    ids: Vec<RowId>,
    hash: u64,
}

impl Fingerprint {
    pub fn from_ids(ids: &[RowId]) -> Self {
        let mut ids = ids.to_vec();
        ids.sort_unstable();
        let mut hash: u64 = 0xcbf29ce484222325;
        let mut eat = |byte: u8| {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        };
        for id in &ids {
            let (tag, v) = match id {
                RowId::Source(v) => (0u8, *v),
                RowId::Synthetic(v) => (1u8, *v),
            };
            eat(tag);
            for b in v.to_le_bytes() {
                eat(b);
            }
        }
        Fingerprint { ids, hash }
    }

    pub fn hash(&self) -> u64 {
        self.hash
    }

    /// Sorted, deduplicated-by-construction training row ids.
    pub fn row_ids(&self) -> &[RowId] {
        &self.ids
    }

    pub fn contains(&self, id: RowId) -> bool {
        self.ids.binary_search(&id).is_ok()
    }
}

/// Row ids of one balanced subset drawn by the subset ensemble.
#[derive(Debug, Clone)]
pub struct SubsetRecord {
    pub minority: Vec<RowId>,
    pub majority: Vec<RowId>,
}

#[derive(Debug, Clone)]
struct EasyState {
    members: Vec<boosting::BoostCore>,
    subsets: Vec<SubsetRecord>,
}

#[derive(Debug, Clone)]
struct KnnState {
    index: NeighborIndex,
    labels: Vec<u8>,
    k: usize,
}

#[derive(Debug, Clone)]
enum ModelState {
    Knn(KnnState),
    GaussianNb(bayes::GaussianNb),
    Tree(tree::ClassificationTree),
    CostForest(forest::CostForest),
    Svm(linear::PegasosSvm),
    EasyEnsemble(EasyState),
    RusBoost(boosting::BoostCore),
    AdaBoost(boosting::BoostCore),
    Gbm(forest::Gbm),
    Bagging(forest::BaggedTrees),
    Mlp(mlp::Mlp),
}

/// A fitted classifier: scoring surface plus training provenance.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    state: ModelState,
    /// Per-feature (mean, std) captured from training data; present only for
    /// the scale-sensitive kinds.
    standardization: Option<Vec<(f64, f64)>>,
    n_features: usize,
    pub fingerprint: Fingerprint,
    /// Non-fatal diagnostics from training (e.g. a loss that failed to
    /// improve). Never affects scoring.
    pub warnings: Vec<String>,
}

fn standardization_stats(x: &Matrix) -> Vec<(f64, f64)> {
    let n = x.n_rows() as f64;
    (0..x.n_cols())
        .map(|j| {
            let mean = (0..x.n_rows()).map(|i| x.get(i, j)).sum::<f64>() / n;
            let var = (0..x.n_rows()).map(|i| (x.get(i, j) - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            (mean, if std < 1e-12 { 1.0 } else { std })
        })
        .collect()
}

fn standardize(x: &Matrix, stats: &[(f64, f64)]) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.n_rows() {
        for (j, &(mean, std)) in stats.iter().enumerate() {
            out.set(i, j, (out.get(i, j) - mean) / std);
        }
    }
    out
}

fn to_signs(labels: &[u8]) -> Vec<i8> {
    labels.iter().map(|&l| if l == 1 { 1 } else { -1 }).collect()
}

/// Train `spec` on `data`. Errors only on unusable input (single class,
/// k larger than the training set, …); training-quality problems surface as
/// warnings on the returned model.
pub fn fit(spec: &ClassifierSpec, data: &Dataset) -> Result<TrainedModel> {
    let (majority, minority) = data.class_indices();
    if minority.is_empty() {
        return Err(Error::SingleClass(0));
    }
    if majority.is_empty() {
        return Err(Error::SingleClass(1));
    }
    let uses_standardization = matches!(
        spec.kind,
        ClassifierKind::Knn | ClassifierKind::Svm | ClassifierKind::Mlp
    );
    let standardization = uses_standardization.then(|| standardization_stats(&data.features));
    let x = match &standardization {
        Some(stats) => standardize(&data.features, stats),
        None => data.features.clone(),
    };
    let labels = &data.labels;
    let mut warnings = Vec::new();
    let h = &spec.hyper;

    let state = match spec.kind {
        ClassifierKind::Knn => {
            if h.knn_k > x.n_rows() {
                return Err(Error::KTooLarge { k: h.knn_k, available: x.n_rows() });
            }
            let index = NeighborIndex::build(x.clone(), h.knn_metric)?;
            ModelState::Knn(KnnState { index, labels: labels.clone(), k: h.knn_k })
        }
        ClassifierKind::GaussianNb => {
            ModelState::GaussianNb(bayes::GaussianNb::fit(&x, labels, h.nb_var_floor_ratio))
        }
        ClassifierKind::C45 => {
            let config = tree::TreeConfig {
                max_depth: h.tree_max_depth,
                min_leaf: h.tree_min_leaf,
                feature_subsample: None,
                leaf_rule: tree::LeafRule::Laplace,
            };
            let indices: Vec<usize> = (0..x.n_rows()).collect();
            let mut rng = seed::rng(spec.seed);
            ModelState::Tree(tree::ClassificationTree::fit(&x, labels, None, &indices, &config, &mut rng))
        }
        ClassifierKind::Csl => {
            let weights = h.cost_weights.unwrap_or(CostWeights {
                majority: 1.0,
                minority: majority.len() as f64 / minority.len() as f64,
            });
            ModelState::CostForest(forest::CostForest::fit(
                &x,
                labels,
                h.forest_trees,
                weights.majority,
                weights.minority,
                spec.seed,
            ))
        }
        ClassifierKind::Svm => {
            let signs = to_signs(labels);
            let mut rng = seed::rng(spec.seed);
            let (svm, hinge) = linear::PegasosSvm::fit(&x, &signs, h.svm_lambda, h.svm_epochs, &mut rng);
            if let (Some(first), Some(last)) = (hinge.first(), hinge.last()) {
                if last > first {
                    warnings.push(format!(
                        "svm objective did not improve: {first:.6} -> {last:.6}"
                    ));
                }
            }
            ModelState::Svm(svm)
        }
        ClassifierKind::EasyEnsemble => {
            let mut members = Vec::with_capacity(h.easy_subsets);
            let mut subsets = Vec::with_capacity(h.easy_subsets);
            let signs = to_signs(labels);
            let take = minority.len().min(majority.len());
            for s in 0..h.easy_subsets {
                let mut rng = seed::rng(seed::derive(spec.seed, &["subset", &s.to_string()]));
                let mut pool = majority.clone();
                pool.shuffle(&mut rng);
                let sample = &pool[..take];
                let mut rows: Vec<usize> = minority.iter().chain(sample).copied().collect();
                rows.sort_unstable();
                members.push(boosting::train_adaboost(&x, &signs, &rows, h.boost_rounds));
                subsets.push(SubsetRecord {
                    minority: minority.iter().map(|&i| data.row_ids[i]).collect(),
                    majority: sample.iter().map(|&i| data.row_ids[i]).collect(),
                });
            }
            if members.iter().all(|m| m.stumps.is_empty()) {
                warnings.push("no boosting round was accepted in any subset".into());
            }
            ModelState::EasyEnsemble(EasyState { members, subsets })
        }
        ClassifierKind::RusBoost => {
            let signs = to_signs(labels);
            let mut rng = seed::rng(seed::derive(spec.seed, &["rus"]));
            let core =
                boosting::train_rusboost(&x, &signs, &minority, &majority, h.boost_rounds, &mut rng);
            if core.stopped_early {
                warnings.push(format!(
                    "boosting stopped after {} of {} rounds (weighted error reached 0.5)",
                    core.stumps.len(),
                    h.boost_rounds
                ));
            }
            ModelState::RusBoost(core)
        }
        ClassifierKind::AdaBoost => {
            let signs = to_signs(labels);
            let rows: Vec<usize> = (0..x.n_rows()).collect();
            let core = boosting::train_adaboost(&x, &signs, &rows, h.boost_rounds);
            if core.stopped_early {
                warnings.push(format!(
                    "boosting stopped after {} of {} rounds (weighted error reached 0.5)",
                    core.stumps.len(),
                    h.boost_rounds
                ));
            }
            ModelState::AdaBoost(core)
        }
        ClassifierKind::Gbm => {
            let gbm = forest::Gbm::fit(&x, labels, h.gbm_rounds, h.gbm_depth, h.gbm_shrinkage);
            if let (Some(first), Some(last)) = (gbm.train_loss.first(), gbm.train_loss.last()) {
                if last > first {
                    warnings.push(format!(
                        "training loss did not improve: {first:.6} -> {last:.6}"
                    ));
                }
            }
            ModelState::Gbm(gbm)
        }
        ClassifierKind::Bagging => ModelState::Bagging(forest::BaggedTrees::fit(
            &x,
            labels,
            h.bagging_trees,
            h.tree_min_leaf,
            spec.seed,
        )),
        ClassifierKind::Mlp => {
            let mut rng = seed::rng(spec.seed);
            let (net, losses) = mlp::train(
                &x,
                labels,
                h.mlp_hidden,
                h.mlp_learning_rate,
                h.mlp_epochs,
                h.mlp_batch,
                &mut rng,
            );
            if let (Some(first), Some(last)) = (losses.first(), losses.last()) {
                if !last.is_finite() {
                    warnings.push("training loss diverged to a non-finite value".into());
                } else if last > first {
                    warnings.push(format!(
                        "training loss did not improve: {first:.6} -> {last:.6}"
                    ));
                }
            }
            ModelState::Mlp(net)
        }
    };

    Ok(TrainedModel {
        spec: spec.clone(),
        state,
        standardization,
        n_features: data.n_features(),
        fingerprint: Fingerprint::from_ids(&data.row_ids),
        warnings,
    })
}

impl TrainedModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// P(label = 1) for every row, in order. Scores always land in [0, 1].
    pub fn predict_proba(&self, features: &Matrix) -> Result<Vec<f64>> {
        if features.n_cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: features.n_cols(),
            });
        }
        let standardized;
        let x = match &self.standardization {
            Some(stats) => {
                standardized = standardize(features, stats);
                &standardized
            }
            None => features,
        };
        let mut scores = Vec::with_capacity(x.n_rows());
        for row in x.iter_rows() {
            let s = match &self.state {
                ModelState::Knn(state) => {
                    let neighbors = state.index.query(row, state.k)?;
                    let ones = neighbors.iter().filter(|n| state.labels[n.index] == 1).count();
                    ones as f64 / state.k as f64
                }
                ModelState::GaussianNb(nb) => nb.score(row),
                ModelState::Tree(t) => t.score(row),
                ModelState::CostForest(f) => f.score(row),
                ModelState::Svm(svm) => svm.score(row),
                ModelState::EasyEnsemble(e) => {
                    let total: f64 = e.members.iter().map(|m| m.score(row)).sum();
                    total / e.members.len() as f64
                }
                ModelState::RusBoost(core) | ModelState::AdaBoost(core) => core.score(row),
                ModelState::Gbm(g) => g.score(row),
                ModelState::Bagging(b) => b.score(row),
                ModelState::Mlp(m) => m.params.score(row),
            };
            scores.push(s.clamp(0.0, 1.0));
        }
        Ok(scores)
    }

    /// Hard labels at `threshold` (strictly inside (0,1)); score >= threshold
    /// predicts 1.
    pub fn predict_label(&self, features: &Matrix, threshold: f64) -> Result<Vec<u8>> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidParam(format!(
                "threshold must lie strictly inside (0, 1), got {threshold}"
            )));
        }
        Ok(self
            .predict_proba(features)?
            .into_iter()
            .map(|s| u8::from(s >= threshold))
            .collect())
    }

    /// Weighted error of each accepted boosting round (adaptive-boosting
    /// family only).
    pub fn boosting_round_errors(&self) -> Option<&[f64]> {
        match &self.state {
            ModelState::RusBoost(core) | ModelState::AdaBoost(core) => Some(&core.round_errors),
            _ => None,
        }
    }

    /// Training logloss trajectory (gradient booster only): entry 0 is the
    /// constant model, entry r the loss after round r.
    pub fn gbm_train_loss(&self) -> Option<&[f64]> {
        match &self.state {
            ModelState::Gbm(g) => Some(&g.train_loss),
            _ => None,
        }
    }

    /// Balanced subsets drawn by the subset ensemble, as training row ids.
    pub fn easy_subsets(&self) -> Option<&[SubsetRecord]> {
        match &self.state {
            ModelState::EasyEnsemble(e) => Some(&e.subsets),
            _ => None,
        }
    }

    /// Per-member ensemble scores for one row (subset ensemble only).
    pub fn easy_member_scores(&self, features: &Matrix, row: usize) -> Option<Vec<f64>> {
        let ModelState::EasyEnsemble(e) = &self.state else {
            return None;
        };
        let standardized;
        let x = match &self.standardization {
            Some(stats) => {
                standardized = standardize(features, stats);
                &standardized
            }
            None => features,
        };
        Some(e.members.iter().map(|m| m.score(x.row(row))).collect())
    }

    /// The class weights the cost-sensitive forest actually trained with.
    pub fn cost_weights_used(&self) -> Option<CostWeights> {
        match &self.state {
            ModelState::CostForest(f) => Some(CostWeights {
                majority: f.weight_majority,
                minority: f.weight_minority,
            }),
            _ => None,
        }
    }

    /// Per-feature (mean, std) applied to inputs, when the kind standardizes.
    pub fn standardization(&self) -> Option<&[(f64, f64)]> {
        self.standardization.as_deref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::test_blobs;

    fn blob_model(kind: ClassifierKind) -> (TrainedModel, Dataset) {
        let data = test_blobs(300, 0.2, 4, 1234);
        let spec = ClassifierSpec::with_defaults(kind, 99);
        (fit(&spec, &data).unwrap(), data)
    }

    #[test]
    fn every_kind_fits_and_scores_in_range() {
        for kind in ClassifierKind::ALL {
            let (model, data) = blob_model(kind);
            let scores = model.predict_proba(&data.features).unwrap();
            assert_eq!(scores.len(), data.n_rows());
            for &s in &scores {
                assert!((0.0..=1.0).contains(&s), "{kind}: score {s} out of range");
            }
        }
    }

    #[test]
    fn every_kind_separates_easy_blobs() {
        // Wide-margin blobs: every learner should reach high training
        // accuracy at threshold 0.5. The default epoch budget is sized for
        // tens of thousands of rows; at 300 rows the network gets a few
        // hundred SGD steps, so give it a proportionally longer schedule.
        for kind in ClassifierKind::ALL {
            let data = test_blobs(300, 0.2, 4, 1234);
            let mut hyper = Hyperparams::default();
            if kind == ClassifierKind::Mlp {
                hyper.mlp_epochs = 200;
                hyper.mlp_learning_rate = 0.05;
            }
            let spec = ClassifierSpec::new(kind, hyper, 99).unwrap();
            let model = fit(&spec, &data).unwrap();
            let predicted = model.predict_label(&data.features, 0.5).unwrap();
            let correct = predicted
                .iter()
                .zip(&data.labels)
                .filter(|(a, b)| a == b)
                .count();
            let accuracy = correct as f64 / data.n_rows() as f64;
            assert!(accuracy > 0.95, "{kind}: training accuracy {accuracy}");
        }
    }

    #[test]
    fn refit_is_bit_identical() {
        for kind in ClassifierKind::ALL {
            let data = test_blobs(200, 0.2, 3, 77);
            let spec = ClassifierSpec::with_defaults(kind, 5);
            let a = fit(&spec, &data).unwrap().predict_proba(&data.features).unwrap();
            let b = fit(&spec, &data).unwrap().predict_proba(&data.features).unwrap();
            assert_eq!(a, b, "{kind} refit differs");
        }
    }

    #[test]
    fn seed_changes_stochastic_learners() {
        let data = test_blobs(200, 0.2, 3, 77);
        for kind in [ClassifierKind::Csl, ClassifierKind::Mlp, ClassifierKind::Bagging] {
            let a = fit(&ClassifierSpec::with_defaults(kind, 1), &data)
                .unwrap()
                .predict_proba(&data.features)
                .unwrap();
            let b = fit(&ClassifierSpec::with_defaults(kind, 2), &data)
                .unwrap()
                .predict_proba(&data.features)
                .unwrap();
            assert_ne!(a, b, "{kind} ignored its seed");
        }
    }

    #[test]
    fn knn_vote_fraction_is_exact() {
        // 4 of the 5 nearest neighbors of the probe are minority.
        let x = Matrix::from_rows(vec![
            vec![0.0],
            vec![0.1],
            vec![0.2],
            vec![0.3],
            vec![0.4],
            vec![100.0],
            vec![101.0],
            vec![102.0],
            vec![103.0],
            vec![104.0],
        ]);
        let labels = vec![1, 1, 1, 1, 0, 0, 0, 0, 0, 0];
        let ids = (0..10).map(RowId::Source).collect();
        let names = vec!["f0".into()];
        let data = Dataset::new(x, labels, None, names, ids).unwrap();
        let model = fit(&ClassifierSpec::with_defaults(ClassifierKind::Knn, 0), &data).unwrap();
        // Standardization is monotone per feature, so nearest neighbors on one
        // feature are unchanged; the probe sits in the minority cluster.
        let probe = Matrix::from_rows(vec![vec![0.2], vec![103.0]]);
        let scores = model.predict_proba(&probe).unwrap();
        assert!((scores[0] - 0.8).abs() < 1e-12); // 4/5 minority
        assert!((scores[1] - 0.0).abs() < 1e-12);
    }

    #[test]
    fn knn_k_larger_than_train_errors() {
        let data = test_blobs(10, 0.2, 2, 3);
        let mut hyper = Hyperparams::default();
        hyper.knn_k = 11;
        let spec = ClassifierSpec::new(ClassifierKind::Knn, hyper, 0).unwrap();
        assert!(matches!(fit(&spec, &data), Err(Error::KTooLarge { .. })));
    }

    #[test]
    fn single_class_data_is_rejected() {
        let x = Matrix::from_rows(vec![vec![0.0], vec![1.0], vec![2.0]]);
        let ids = (0..3).map(RowId::Source).collect();
        let data = Dataset::new(x, vec![0, 0, 0], None, vec!["f0".into()], ids).unwrap();
        for kind in ClassifierKind::ALL {
            let spec = ClassifierSpec::with_defaults(kind, 0);
            assert!(matches!(fit(&spec, &data), Err(Error::SingleClass(0))), "{kind}");
        }
    }

    #[test]
    fn fingerprint_records_training_ids() {
        let (model, data) = blob_model(ClassifierKind::C45);
        assert_eq!(model.fingerprint.row_ids().len(), data.n_rows());
        for id in &data.row_ids {
            assert!(model.fingerprint.contains(*id));
        }
        assert!(!model.fingerprint.contains(RowId::Synthetic(0)));
        // Hash is order-insensitive.
        let mut reversed = data.row_ids.clone();
        reversed.reverse();
        assert_eq!(Fingerprint::from_ids(&reversed).hash(), model.fingerprint.hash());
    }

    #[test]
    fn csl_default_weights_follow_imbalance() {
        let data = test_blobs(500, 0.1, 3, 9);
        let (majority, minority) = data.class_indices();
        let model = fit(&ClassifierSpec::with_defaults(ClassifierKind::Csl, 4), &data).unwrap();
        let w = model.cost_weights_used().unwrap();
        assert_eq!(w.majority, 1.0);
        assert!((w.minority - majority.len() as f64 / minority.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn csl_weight_scale_does_not_change_scores() {
        let data = test_blobs(200, 0.2, 3, 15);
        let mut h1 = Hyperparams::default();
        h1.forest_trees = 25;
        h1.cost_weights = Some(CostWeights { majority: 1.0, minority: 4.0 });
        let mut h2 = h1.clone();
        h2.cost_weights = Some(CostWeights { majority: 2.5, minority: 10.0 });
        let a = fit(&ClassifierSpec::new(ClassifierKind::Csl, h1, 8).unwrap(), &data).unwrap();
        let b = fit(&ClassifierSpec::new(ClassifierKind::Csl, h2, 8).unwrap(), &data).unwrap();
        assert_eq!(
            a.predict_proba(&data.features).unwrap(),
            b.predict_proba(&data.features).unwrap()
        );
    }

    #[test]
    fn easy_ensemble_subsets_are_balanced_and_score_is_member_mean() {
        let (model, data) = blob_model(ClassifierKind::EasyEnsemble);
        let subsets = model.easy_subsets().unwrap();
        assert_eq!(subsets.len(), 10);
        let (_, minority) = data.class_indices();
        for subset in subsets {
            assert_eq!(subset.minority.len(), minority.len());
            assert_eq!(subset.majority.len(), minority.len());
            // Majority ids must be distinct (drawn without replacement).
            let mut ids = subset.majority.clone();
            ids.sort_unstable();
            ids.dedup();
            assert_eq!(ids.len(), subset.majority.len());
        }
        // Ensemble score = mean of member scores.
        let scores = model.predict_proba(&data.features).unwrap();
        for i in (0..data.n_rows()).step_by(37) {
            let members = model.easy_member_scores(&data.features, i).unwrap();
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            assert!((scores[i] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn predict_dimension_mismatch_errors() {
        let (model, _) = blob_model(ClassifierKind::GaussianNb);
        let probe = Matrix::from_rows(vec![vec![0.0, 0.0]]);
        assert!(matches!(
            model.predict_proba(&probe),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn predict_label_threshold_validated() {
        let (model, data) = blob_model(ClassifierKind::GaussianNb);
        for bad in [0.0, 1.0, -0.1, 1.5] {
            assert!(model.predict_label(&data.features, bad).is_err());
        }
        assert!(model.predict_label(&data.features, 0.5).is_ok());
    }

    #[test]
    fn kind_names_roundtrip() {
        for kind in ClassifierKind::ALL {
            assert_eq!(kind.config_name().parse::<ClassifierKind>().unwrap(), kind);
            assert_eq!(
                kind.display_name().parse::<ClassifierKind>().unwrap(),
                kind,
                "display name {} should parse",
                kind.display_name()
            );
        }
        assert!("mystery".parse::<ClassifierKind>().is_err());
    }

    #[test]
    fn spec_validation_rejects_bad_parameters() {
        let mut h = Hyperparams::default();
        h.knn_k = 0;
        assert!(ClassifierSpec::new(ClassifierKind::Knn, h, 0).is_err());
        let mut h = Hyperparams::default();
        h.gbm_shrinkage = 0.0;
        assert!(ClassifierSpec::new(ClassifierKind::Gbm, h, 0).is_err());
        let mut h = Hyperparams::default();
        h.gbm_shrinkage = 1.5;
        assert!(ClassifierSpec::new(ClassifierKind::Gbm, h, 0).is_err());
        let mut h = Hyperparams::default();
        h.cost_weights = Some(CostWeights { majority: 0.0, minority: 1.0 });
        assert!(ClassifierSpec::new(ClassifierKind::Csl, h, 0).is_err());
        let mut h = Hyperparams::default();
        h.mlp_learning_rate = -1.0;
        assert!(ClassifierSpec::new(ClassifierKind::Mlp, h, 0).is_err());
    }

    #[test]
    fn standardized_kinds_expose_their_stats() {
        for kind in ClassifierKind::ALL {
            let (model, _) = blob_model(kind);
            let expects_stats = matches!(
                kind,
                ClassifierKind::Knn | ClassifierKind::Svm | ClassifierKind::Mlp
            );
            assert_eq!(model.standardization().is_some(), expects_stats, "{kind}");
        }
    }

    #[test]
    fn constant_feature_standardization_stays_finite() {
        // One constant column must not produce NaNs in scale-sensitive kinds.
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let c = u8::from(i >= 30);
            rows.push(vec![7.0, if c == 1 { 5.0 } else { -5.0 } + (i as f64 * 0.01)]);
            labels.push(c);
        }
        let ids = (0..40).map(RowId::Source).collect();
        let data =
            Dataset::new(Matrix::from_rows(rows), labels, None, vec!["a".into(), "b".into()], ids)
                .unwrap();
        for kind in [ClassifierKind::Knn, ClassifierKind::Svm, ClassifierKind::Mlp] {
            let model = fit(&ClassifierSpec::with_defaults(kind, 3), &data).unwrap();
            let scores = model.predict_proba(&data.features).unwrap();
            assert!(scores.iter().all(|s| s.is_finite()), "{kind}");
        }
    }

    #[test]
    fn boosting_round_errors_below_half() {
        for kind in [ClassifierKind::AdaBoost, ClassifierKind::RusBoost] {
            let (model, _) = blob_model(kind);
            let errors = model.boosting_round_errors().unwrap();
            assert!(!errors.is_empty(), "{kind}");
            for &e in errors {
                assert!(e < 0.5, "{kind}: accepted round error {e}");
            }
        }
    }

    #[test]
    fn gbm_loss_trajectory_monotone() {
        let (model, _) = blob_model(ClassifierKind::Gbm);
        let loss = model.gbm_train_loss().unwrap();
        assert_eq!(loss.len(), Hyperparams::default().gbm_rounds + 1);
        for w in loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }
}
