//! Two-level stacked generalization.
//!
//! A stack pairs exactly two (resampler, classifier) members. Each member
//! produces out-of-fold probabilities over the training set — resampling and
//! fitting happen strictly inside the training folds — and those two columns
//! become the meta-feature space for a level-1 meta learner. For test-time
//! scoring the members are refit on the fully resampled training set.
//!
//! Stack selection reads a ranked level-0 grid and emits eight stacks per
//! run: for each of the two ranking metrics, (weakest + strongest),
//! (two weakest), (two strongest), and (two best tree-family pairs).

use std::fmt;

use crate::classifiers::{self, ClassifierSpec, Fingerprint, TrainedModel};
use crate::data::{Dataset, Matrix, RowId};
use crate::error::{Error, Result};
use crate::resampling::{self, ResampleMethod};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionMetric {
    F1,
    Auc,
}

impl fmt::Display for SelectionMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMetric::F1 => "f1",
            SelectionMetric::Auc => "auc",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionRole {
    /// Weakest member paired with the strongest.
    WeakStrong,
    /// The two weakest members.
    WeakWeak,
    /// The two strongest members.
    StrongStrong,
    /// The two best decision-tree-family members.
    TreeTree,
}

impl fmt::Display for SelectionRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionRole::WeakStrong => "weak+strong",
            SelectionRole::WeakWeak => "weak+weak",
            SelectionRole::StrongStrong => "strong+strong",
            SelectionRole::TreeTree => "tree+tree",
        })
    }
}

/// One level-0 member of a stack: the resampler it trains behind and the
/// classifier itself.
#[derive(Debug, Clone, PartialEq)]
pub struct StackMember {
    pub resample: ResampleMethod,
    pub classifier: ClassifierSpec,
}

impl StackMember {
    /// Short handle like "ROS/MLP" used in reports and error messages.
    pub fn label(&self) -> String {
        format!(
            "{}/{}",
            self.resample.kind.table_name(),
            self.classifier.kind.display_name()
        )
    }
}

/// A fully specified two-member stack plus the provenance of its selection.
#[derive(Debug, Clone, PartialEq)]
pub struct StackSpec {
    pub stack_id: u8,
    pub members: [StackMember; 2],
    pub selection_metric: SelectionMetric,
    pub selection_role: SelectionRole,
}

/// Out-of-fold member probabilities over the training set: the level-1
/// design matrix.
#[derive(Debug, Clone)]
pub struct MetaDataset {
    /// N×2, column order = member order, all values in [0, 1].
    pub meta_features: Matrix,
    pub labels: Vec<u8>,
    pub fold_assignment: Vec<usize>,
    pub row_ids: Vec<RowId>,
    /// Fingerprint of every fold-local fit, for leakage audits.
    pub fold_records: Vec<FoldModelRecord>,
}

/// Which rows one fold-local member fit actually trained on.
#[derive(Debug, Clone)]
pub struct FoldModelRecord {
    pub member_index: usize,
    pub fold: usize,
    pub fingerprint: Fingerprint,
}

/// A fitted stack: refit members for inference plus the meta model.
#[derive(Debug, Clone)]
pub struct TrainedStack {
    pub spec: StackSpec,
    pub members: [TrainedModel; 2],
    pub meta_model: TrainedModel,
    pub meta_data: MetaDataset,
}

/// Stratified fold ids: each class is shuffled seed-deterministically and
/// dealt round-robin, so fold sizes differ by at most one per class.
pub fn stratified_folds(data: &Dataset, folds: usize, seed_value: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidParam(format!(
            "cross-validation needs at least 2 folds, got {folds}"
        )));
    }
    let (majority, minority) = data.class_indices();
    for (label, class_rows) in [(0u8, &majority), (1u8, &minority)] {
        if class_rows.len() < folds {
            return Err(Error::ClassTooSmall {
                label,
                count: class_rows.len(),
                required: folds,
            });
        }
    }
    let mut assignment = vec![0usize; data.n_rows()];
    for (stream, class_rows) in [("folds-majority", &majority), ("folds-minority", &minority)] {
        let mut shuffled = class_rows.to_vec();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut seed::rng(seed::derive(seed_value, &[stream])));
        for (pos, &row) in shuffled.iter().enumerate() {
            assignment[row] = pos % folds;
        }
    }
    Ok(assignment)
}

/// Cross-validated member probabilities. For each fold, each member's
/// resampler runs on the other folds only, the member classifier fits there,
/// and the held-out fold is scored — no row ever influences the model that
/// scores it.
pub fn build_meta_features(
    members: &[StackMember; 2],
    train: &Dataset,
    folds: usize,
    seed_value: u64,
) -> Result<MetaDataset> {
    let assignment = stratified_folds(train, folds, seed_value)?;
    let n = train.n_rows();
    let mut meta = Matrix::zeros(n, 2);
    let mut fold_records = Vec::with_capacity(2 * folds);

    for fold in 0..folds {
        let train_rows: Vec<usize> = (0..n).filter(|&i| assignment[i] != fold).collect();
        let heldout_rows: Vec<usize> = (0..n).filter(|&i| assignment[i] == fold).collect();
        let fold_train = train.subset(&train_rows);
        let heldout = train.features.select_rows(&heldout_rows);

        for (m, member) in members.iter().enumerate() {
            let in_fold = |e: Error| {
                Error::Internal(format!(
                    "stack member {} ({}) failed in fold {fold}: {e}",
                    m + 1,
                    member.label()
                ))
            };
            let mut method = member.resample.clone();
            method.seed = seed::derive(method.seed, &["fold", &fold.to_string()]);
            let (resampled, _) = resampling::apply(&method, &fold_train).map_err(in_fold)?;
            let mut spec = member.classifier.clone();
            spec.seed = seed::derive(spec.seed, &["fold", &fold.to_string()]);
            let model = classifiers::fit(&spec, &resampled).map_err(in_fold)?;
            let scores = model.predict_proba(&heldout).map_err(in_fold)?;
            for (&row, &score) in heldout_rows.iter().zip(&scores) {
                meta.set(row, m, score);
            }
            fold_records.push(FoldModelRecord {
                member_index: m,
                fold,
                fingerprint: model.fingerprint,
            });
        }
    }

    Ok(MetaDataset {
        meta_features: meta,
        labels: train.labels.clone(),
        fold_assignment: assignment,
        row_ids: train.row_ids.clone(),
        fold_records,
    })
}

/// The meta-feature matrix wrapped as a two-column dataset so the ordinary
/// classifier interface can train on it. One build serves any number of meta
/// learners.
pub fn meta_training_set(meta: &MetaDataset) -> Result<Dataset> {
    Dataset::new(
        meta.meta_features.clone(),
        meta.labels.clone(),
        None,
        vec!["p_member1".into(), "p_member2".into()],
        meta.row_ids.clone(),
    )
}

/// Build the meta-features, fit the meta learner on them, and refit both
/// members on the fully resampled training set for inference.
pub fn fit_stack(
    spec: &StackSpec,
    meta_spec: &ClassifierSpec,
    train: &Dataset,
    folds: usize,
    seed_value: u64,
) -> Result<TrainedStack> {
    let meta_data = build_meta_features(&spec.members, train, folds, seed_value)?;
    let meta_model = classifiers::fit(meta_spec, &meta_training_set(&meta_data)?)?;

    let mut refit = Vec::with_capacity(2);
    for (m, member) in spec.members.iter().enumerate() {
        let on_member = |e: Error| {
            Error::Internal(format!(
                "stack member {} ({}) failed on the full training set: {e}",
                m + 1,
                member.label()
            ))
        };
        let (resampled, _) = resampling::apply(&member.resample, train).map_err(on_member)?;
        refit.push(classifiers::fit(&member.classifier, &resampled).map_err(on_member)?);
    }
    let members: [TrainedModel; 2] = match (refit.pop(), refit.pop()) {
        (Some(second), Some(first)) => [first, second],
        _ => unreachable!("exactly two members were fitted"),
    };

    Ok(TrainedStack { spec: spec.clone(), members, meta_model, meta_data })
}

/// Member probabilities on `features`, as the stack's two-column meta input.
pub fn member_probabilities(stack: &TrainedStack, features: &Matrix) -> Result<Matrix> {
    let first = stack.members[0].predict_proba(features)?;
    let second = stack.members[1].predict_proba(features)?;
    let mut meta = Matrix::zeros(features.n_rows(), 2);
    for i in 0..features.n_rows() {
        meta.set(i, 0, first[i]);
        meta.set(i, 1, second[i]);
    }
    Ok(meta)
}

/// Score new rows: members first, then the meta model over their outputs.
pub fn predict_stack(stack: &TrainedStack, features: &Matrix) -> Result<Vec<f64>> {
    let meta = member_probabilities(stack, features)?;
    stack.meta_model.predict_proba(&meta)
}

/// One level-0 grid cell as stack selection sees it: identity plus ranked
/// metric values (`None` = undefined, never selectable).
#[derive(Debug, Clone)]
pub struct RankedPair {
    pub name: String,
    pub member: StackMember,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
}

impl RankedPair {
    fn metric(&self, metric: SelectionMetric) -> Option<f64> {
        match metric {
            SelectionMetric::F1 => self.f1,
            SelectionMetric::Auc => self.auc,
        }
    }
}

/// Sort indexes of `pairs` from strongest to weakest under `metric`, using
/// (metric desc, f1 desc, accuracy desc, name asc) and dropping rows whose
/// primary metric is undefined.
fn rank_indices(pairs: &[RankedPair], metric: SelectionMetric) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pairs.len())
        .filter(|&i| pairs[i].metric(metric).is_some())
        .collect();
    order.sort_by(|&a, &b| {
        let pa = &pairs[a];
        let pb = &pairs[b];
        pb.metric(metric)
            .unwrap()
            .total_cmp(&pa.metric(metric).unwrap())
            .then_with(|| pb.f1.unwrap_or(f64::NEG_INFINITY).total_cmp(&pa.f1.unwrap_or(f64::NEG_INFINITY)))
            .then_with(|| {
                pb.accuracy
                    .unwrap_or(f64::NEG_INFINITY)
                    .total_cmp(&pa.accuracy.unwrap_or(f64::NEG_INFINITY))
            })
            .then_with(|| pa.name.cmp(&pb.name))
    });
    order
}

/// Pick the eight stacks from a ranked level-0 grid: for each metric (F1
/// first, then AUC), the four Table-style patterns in order. A pure function
/// of its input — identical grids always yield identical stacks.
pub fn select_stacks(pairs: &[RankedPair]) -> Result<Vec<StackSpec>> {
    let mut stacks = Vec::with_capacity(8);
    let mut next_id = 1u8;
    for metric in [SelectionMetric::F1, SelectionMetric::Auc] {
        let order = rank_indices(pairs, metric);
        if order.len() < 2 {
            return Err(Error::Internal(format!(
                "stack selection needs at least 2 rows with a defined {metric}, found {}",
                order.len()
            )));
        }
        let strongest = &pairs[order[0]];
        let second_strongest = &pairs[order[1]];
        let weakest = &pairs[order[order.len() - 1]];
        let second_weakest = &pairs[order[order.len() - 2]];
        let trees: Vec<&RankedPair> = order
            .iter()
            .map(|&i| &pairs[i])
            .filter(|p| p.member.classifier.kind.is_tree_family())
            .collect();
        if trees.len() < 2 {
            return Err(Error::Internal(format!(
                "stack selection needs at least 2 tree-family rows with a defined {metric}, found {}",
                trees.len()
            )));
        }

        let patterns: [(SelectionRole, [&RankedPair; 2]); 4] = [
            (SelectionRole::WeakStrong, [weakest, strongest]),
            (SelectionRole::WeakWeak, [weakest, second_weakest]),
            (SelectionRole::StrongStrong, [strongest, second_strongest]),
            (SelectionRole::TreeTree, [trees[0], trees[1]]),
        ];
        for (role, picked) in patterns {
            stacks.push(StackSpec {
                stack_id: next_id,
                members: [picked[0].member.clone(), picked[1].member.clone()],
                selection_metric: metric,
                selection_role: role,
            });
            next_id += 1;
        }
    }
    Ok(stacks)
}
