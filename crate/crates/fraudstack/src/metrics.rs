//! Evaluation under imbalance.
//!
//! Raw accuracy is nearly meaningless at fraud-scale imbalance (predicting
//! "all genuine" scores 99.8%), so evaluation leans on the confusion counts,
//! F1, ROC-AUC, and a money-denominated cost. A metric whose denominator is
//! empty (no predicted positives, say) is *undefined* and stays `None` all
//! the way into reports, where it prints as `NA` — never silently zero.
//!
//! AUC here is the trapezoid area under the tie-grouped ROC curve, which is
//! provably the Mann-Whitney pairwise statistic with half credit for ties;
//! the acceptance suite exercises that equivalence on thousands of random
//! instances.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts at a fixed threshold. Label 1 (minority/fraud) is the positive
/// class everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionMatrix {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            true_negatives: tn,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }

    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| (self.true_positives + self.true_negatives) as f64 / total as f64)
    }

    pub fn precision(&self) -> Option<f64> {
        let denom = self.true_positives + self.false_positives;
        (denom > 0).then(|| self.true_positives as f64 / denom as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let denom = self.true_positives + self.false_negatives;
        (denom > 0).then(|| self.true_positives as f64 / denom as f64)
    }

    pub fn false_positive_rate(&self) -> Option<f64> {
        let denom = self.false_positives + self.true_negatives;
        (denom > 0).then(|| self.false_positives as f64 / denom as f64)
    }

    /// Harmonic mean of precision and recall; undefined when either is, or
    /// when both are zero.
    pub fn f1(&self) -> Option<f64> {
        let p = self.precision()?;
        let r = self.recall()?;
        if p + r == 0.0 {
            return None;
        }
        Some(2.0 * p * r / (p + r))
    }
}

/// The scalar metrics of one evaluated model. `None` = undefined.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsRow {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub false_positive_rate: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
    pub cost: Option<f64>,
}

impl MetricsRow {
    /// Threshold metrics from counts; AUC and cost stay unset (they need the
    /// scores and amounts, not just the counts).
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        MetricsRow {
            accuracy: cm.accuracy(),
            precision: cm.precision(),
            recall: cm.recall(),
            false_positive_rate: cm.false_positive_rate(),
            f1: cm.f1(),
            auc: None,
            cost: None,
        }
    }
}

fn validate_scored(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: scores.len() });
    }
    if scores.is_empty() {
        return Err(Error::EmptyData("no scored instances".into()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Internal(format!("non-finite score at instance {i}")));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Internal(format!("label {bad} outside {{0, 1}}")));
    }
    Ok(())
}

fn validate_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParam(format!(
            "threshold must lie strictly inside (0, 1), got {threshold}"
        )));
    }
    Ok(())
}

/// Count outcomes at a threshold: predicted positive iff score ≥ threshold.
pub fn confusion(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionMatrix> {
    validate_scored(scores, labels)?;
    validate_threshold(threshold)?;
    let mut cm = ConfusionMatrix::new(0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => cm.true_positives += 1,
            (true, false) => cm.false_positives += 1,
            (false, true) => cm.false_negatives += 1,
            (false, false) => cm.true_negatives += 1,
        }
    }
    Ok(cm)
}

/// Per-instance outcome, for cost accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    TruePositive,
    FalsePositive,
    FalseNegative,
    TrueNegative,
}

pub fn classify_outcomes(scores: &[f64], labels: &[u8], threshold: f64) -> Result<Vec<Outcome>> {
    validate_scored(scores, labels)?;
    validate_threshold(threshold)?;
    Ok(scores
        .iter()
        .zip(labels)
        .map(|(&s, &l)| match (s >= threshold, l == 1) {
            (true, true) => Outcome::TruePositive,
            (true, false) => Outcome::FalsePositive,
            (false, true) => Outcome::FalseNegative,
            (false, false) => Outcome::TrueNegative,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Roc,
    Pr,
}

/// A piecewise-linear curve: (x, y) points in plot order.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub kind: CurveKind,
    pub points: Vec<(f64, f64)>,
}

impl Curve {
    /// Write as CSV: a `# kind:` comment line, then an `x,y` header.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let kind = match self.kind {
            CurveKind::Roc => "roc",
            CurveKind::Pr => "pr",
        };
        writeln!(out, "# kind: {kind}")?;
        writeln!(out, "x,y")?;
        for &(x, y) in &self.points {
            writeln!(out, "{x},{y}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Indices sorted by score descending; equal scores grouped together.
/// Returns (sorted indices, group boundaries as (start, end) ranges).
fn descending_score_groups(scores: &[f64]) -> (Vec<usize>, Vec<(usize, usize)>) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=order.len() {
        if i == order.len() || scores[order[i]] != scores[order[start]] {
            groups.push((start, i));
            start = i;
        }
    }
    (order, groups)
}

/// ROC curve (tie-grouped) and its trapezoid area.
///
/// Needs both classes: with no positives TPR is 0/0, with no negatives FPR
/// is, and the area means nothing either way.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<(Curve, f64)> {
    validate_scored(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::UndefinedMetric(
            "AUC requires both classes among the evaluated labels".into(),
        ));
    }

    let (order, groups) = descending_score_groups(scores);
    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut auc = 0.0;
    let (mut prev_fpr, mut prev_tpr) = (0.0, 0.0);
    for (start, end) in groups {
        for &i in &order[start..end] {
            if labels[i] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let tpr = tp as f64 / pos;
        let fpr = fp as f64 / neg;
        // Trapezoid over the whole tie group in one step — this is exactly
        // the half-credit-for-ties convention of the rank statistic.
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        points.push((fpr, tpr));
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    Ok((Curve { kind: CurveKind::Roc, points }, auc))
}

/// Precision-recall curve over descending-score thresholds, tie-grouped,
/// anchored at (recall 0, precision 1).
pub fn pr_curve(scores: &[f64], labels: &[u8]) -> Result<Curve> {
    validate_scored(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    if pos == 0.0 {
        return Err(Error::UndefinedMetric(
            "a PR curve requires at least one positive label".into(),
        ));
    }

    let (order, groups) = descending_score_groups(scores);
    let mut points = vec![(0.0, 1.0)];
    let mut tp = 0u64;
    let mut predicted = 0u64;
    for (start, end) in groups {
        for &i in &order[start..end] {
            if labels[i] == 1 {
                tp += 1;
            }
        }
        predicted += (end - start) as u64;
        points.push((tp as f64 / pos, tp as f64 / predicted as f64));
    }
    Ok(Curve { kind: CurveKind::Pr, points })
}

/// The money model: flagging a transaction costs a fixed administrative fee
/// whether or not it was fraud; a missed fraud costs its amount (or a large
/// fixed multiple of the fee when amounts are unknown); leaving an honest
/// transaction alone is free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub c_admin: f64,
    pub fallback_fn_multiplier: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel { c_admin: 1.0, fallback_fn_multiplier: 100.0 }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_admin >= 0.0 && self.c_admin.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "c_admin must be a non-negative real, got {}",
                self.c_admin
            )));
        }
        if !(self.fallback_fn_multiplier >= 0.0 && self.fallback_fn_multiplier.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "fallback_fn_multiplier must be a non-negative real, got {}",
                self.fallback_fn_multiplier
            )));
        }
        Ok(())
    }
}

/// Total cost of a batch of outcomes. `amounts`, when given, must align with
/// `outcomes` and be non-negative.
pub fn total_cost(
    outcomes: &[Outcome],
    amounts: Option<&[f64]>,
    model: &CostModel,
) -> Result<f64> {
    model.validate()?;
    if let Some(a) = amounts {
        if a.len() != outcomes.len() {
            return Err(Error::DimensionMismatch { expected: outcomes.len(), got: a.len() });
        }
        if let Some(i) = a.iter().position(|&v| v < 0.0) {
            return Err(Error::NegativeAmount { amount: a[i], row: i });
        }
    }
    let fallback_fn = model.fallback_fn_multiplier * model.c_admin;
    let mut cost = 0.0;
    for (i, outcome) in outcomes.iter().enumerate() {
        cost += match outcome {
            Outcome::TruePositive | Outcome::FalsePositive => model.c_admin,
            Outcome::FalseNegative => amounts.map_or(fallback_fn, |a| a[i]),
            Outcome::TrueNegative => 0.0,
        };
    }
    Ok(cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn fraud_scale_confusion_rows() {
        // Counts on the familiar 113,923- and 85,442-row test partitions.
        let cm = ConfusionMatrix::new(142, 20, 43, 113_718);
        assert!(close(cm.accuracy().unwrap(), 0.9994, 5e-5));
        assert!(close(cm.f1().unwrap(), 0.8184, 5e-5));
        let cm = ConfusionMatrix::new(96, 19, 46, 85_281);
        assert!(close(cm.accuracy().unwrap(), 0.9992, 5e-5));
        assert!(close(cm.f1().unwrap(), 0.7471, 5e-5));
    }

    #[test]
    fn perfect_two_row_matrix() {
        let cm = ConfusionMatrix::new(1, 0, 0, 1);
        assert_eq!(cm.accuracy(), Some(1.0));
        assert_eq!(cm.precision(), Some(1.0));
        assert_eq!(cm.recall(), Some(1.0));
        assert_eq!(cm.f1(), Some(1.0));
        assert_eq!(cm.false_positive_rate(), Some(0.0));
    }

    #[test]
    fn undefined_metrics_stay_none() {
        // No predicted positives → precision undefined; no actual positives
        // → recall undefined; F1 undefined in both cases.
        let cm = ConfusionMatrix::new(0, 0, 5, 95);
        assert_eq!(cm.precision(), None);
        assert!(cm.recall().is_some());
        assert_eq!(cm.f1(), None);
        let cm = ConfusionMatrix::new(0, 5, 0, 95);
        assert_eq!(cm.recall(), None);
        assert_eq!(cm.f1(), None);
        // Defined precision and recall, both zero → F1 still undefined (0/0).
        let cm = ConfusionMatrix::new(0, 0, 0, 0);
        assert_eq!(cm.accuracy(), None);
        let row = MetricsRow::from_confusion(&ConfusionMatrix::new(0, 3, 2, 5));
        assert_eq!(row.f1, None);
        assert_eq!(row.auc, None);
    }

    #[test]
    fn all_majority_predictor_accuracy_is_one_minus_ir() {
        // 1000 rows, 1.7% positive, constant score 0 → accuracy 0.983.
        let n = 1000;
        let n_pos = 17;
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_pos)).collect();
        let scores = vec![0.0; n];
        let cm = confusion(&scores, &labels, 0.5).unwrap();
        let ir = n_pos as f64 / n as f64;
        assert!(close(cm.accuracy().unwrap(), 1.0 - ir, 1e-12));
    }

    #[test]
    fn confusion_threshold_semantics() {
        // Score exactly at the threshold counts as predicted positive.
        let cm = confusion(&[0.5, 0.49], &[1, 0], 0.5).unwrap();
        assert_eq!(cm.true_positives, 1);
        assert_eq!(cm.true_negatives, 1);
        // Threshold bounds are exclusive.
        assert!(matches!(confusion(&[0.5], &[1], 0.0), Err(Error::InvalidParam(_))));
        assert!(matches!(confusion(&[0.5], &[1], 1.0), Err(Error::InvalidParam(_))));
        // Misaligned and empty inputs error.
        assert!(matches!(confusion(&[0.5], &[1, 0], 0.5), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(confusion(&[], &[], 0.5), Err(Error::EmptyData(_))));
    }

    #[test]
    fn roc_worked_example() {
        // Scores (0.9, 0.8, 0.7, 0.6), labels (1, 0, 1, 0): of the four
        // positive-negative pairs, three are ranked correctly → AUC 0.75.
        let (curve, auc) = roc_auc(&[0.9, 0.8, 0.7, 0.6], &[1, 0, 1, 0]).unwrap();
        assert!(close(auc, 0.75, 1e-12));
        assert_eq!(curve.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(curve.points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn roc_perfect_and_tied() {
        let (_, auc) = roc_auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap();
        assert!(close(auc, 1.0, 1e-12));
        // All scores identical → a single diagonal segment, AUC exactly 0.5.
        let (curve, auc) = roc_auc(&[0.4; 6], &[1, 0, 1, 0, 0, 1]).unwrap();
        assert!(close(auc, 0.5, 1e-12));
        assert_eq!(curve.points, vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn roc_requires_both_classes() {
        assert!(matches!(roc_auc(&[0.5, 0.6], &[1, 1]), Err(Error::UndefinedMetric(_))));
        assert!(matches!(roc_auc(&[0.5, 0.6], &[0, 0]), Err(Error::UndefinedMetric(_))));
    }

    /// Rank-statistic oracle: over all positive-negative pairs, count wins
    /// and half-credit ties.
    fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            if li != 1 {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj != 0 {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn trapezoid_equals_pairwise_on_tied_data() {
        use rand::Rng;
        let mut rng = crate::seed::rng(7);
        for _ in 0..50 {
            let n = rng.gen_range(5..60);
            // Coarse score lattice forces plenty of ties.
            let scores: Vec<f64> =
                (0..n).map(|_| f64::from(rng.gen_range(0..5i32)) / 4.0).collect();
            let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
            labels[0] = 1;
            labels[1] = 0;
            let (_, auc) = roc_auc(&scores, &labels).unwrap();
            assert!(close(auc, pairwise_auc(&scores, &labels), 1e-9));
        }
    }

    #[test]
    fn pr_single_positive_ranked_last() {
        // One positive among ten, scored lowest: the final point reaches
        // recall 1 at precision 1/10.
        let mut scores: Vec<f64> = (0..10).map(|i| 0.9 - 0.05 * i as f64).collect();
        let mut labels = vec![0u8; 10];
        labels[9] = 1;
        scores[9] = 0.01;
        let curve = pr_curve(&scores, &labels).unwrap();
        assert_eq!(curve.points[0], (0.0, 1.0));
        let last = *curve.points.last().unwrap();
        assert!(close(last.0, 1.0, 1e-12));
        assert!(close(last.1, 0.1, 1e-12));
        // Tie-grouping: distinct scores + the anchor = point count.
        assert_eq!(curve.points.len(), 11);
    }

    #[test]
    fn pr_requires_a_positive() {
        assert!(matches!(pr_curve(&[0.1, 0.2], &[0, 0]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn pr_groups_ties() {
        let curve = pr_curve(&[0.5, 0.5, 0.5, 0.2], &[1, 0, 1, 0]).unwrap();
        // Two distinct scores → anchor + 2 points.
        assert_eq!(curve.points.len(), 3);
        assert_eq!(curve.points[1], (1.0, 2.0 / 3.0));
    }

    #[test]
    fn cost_worked_examples() {
        // One of each outcome, FN amount 250, c_admin 10:
        // 10 (TP) + 10 (FP) + 0 (TN) + 250 (FN) = 270.
        let outcomes = [
            Outcome::TruePositive,
            Outcome::FalsePositive,
            Outcome::TrueNegative,
            Outcome::FalseNegative,
        ];
        let amounts = [100.0, 100.0, 100.0, 250.0];
        let model = CostModel { c_admin: 10.0, fallback_fn_multiplier: 100.0 };
        let cost = total_cost(&outcomes, Some(&amounts), &model).unwrap();
        assert!(close(cost, 270.0, 1e-12));
        // No amounts: two FNs at multiplier 100 × c_admin 1 → 200.
        let outcomes = [Outcome::FalseNegative, Outcome::FalseNegative];
        let cost = total_cost(&outcomes, None, &CostModel::default()).unwrap();
        assert!(close(cost, 200.0, 1e-12));
        // All true negatives are free.
        let outcomes = [Outcome::TrueNegative; 5];
        assert_eq!(total_cost(&outcomes, None, &CostModel::default()).unwrap(), 0.0);
    }

    #[test]
    fn cost_input_validation() {
        let outcomes = [Outcome::TruePositive];
        assert!(matches!(
            total_cost(&outcomes, Some(&[1.0, 2.0]), &CostModel::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            total_cost(&outcomes, Some(&[-5.0]), &CostModel::default()),
            Err(Error::NegativeAmount { .. })
        ));
        let bad = CostModel { c_admin: -1.0, fallback_fn_multiplier: 100.0 };
        assert!(matches!(total_cost(&outcomes, None, &bad), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn cost_monotone_in_false_negatives() {
        // Swapping a TN for an FN can only raise the bill.
        let model = CostModel::default();
        let base = [Outcome::TrueNegative; 4];
        let mut worse = base;
        worse[0] = Outcome::FalseNegative;
        let a = total_cost(&base, None, &model).unwrap();
        let b = total_cost(&worse, None, &model).unwrap();
        assert!(b > a);
    }

    #[test]
    fn outcomes_align_with_confusion() {
        let scores = [0.9, 0.4, 0.6, 0.1];
        let labels = [1, 1, 0, 0];
        let outcomes = classify_outcomes(&scores, &labels, 0.5).unwrap();
        assert_eq!(
            outcomes,
            vec![
                Outcome::TruePositive,
                Outcome::FalseNegative,
                Outcome::FalsePositive,
                Outcome::TrueNegative
            ]
        );
        let cm = confusion(&scores, &labels, 0.5).unwrap();
        assert_eq!(cm.true_positives, 1);
        assert_eq!(cm.false_positives, 1);
        assert_eq!(cm.false_negatives, 1);
        assert_eq!(cm.true_negatives, 1);
    }

    #[test]
    fn curve_csv_format() {
        let curve = Curve { kind: CurveKind::Roc, points: vec![(0.0, 0.0), (1.0, 1.0)] };
        let f = tempfile::NamedTempFile::new().unwrap();
        curve.write_csv(f.path()).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert_eq!(text, "# kind: roc\nx,y\n0,0\n1,1\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn trapezoid_equals_pairwise(
            seed in 0u64..10_000,
            n in 4usize..40,
            lattice in 2i32..8,
        ) {
            use rand::Rng;
            let mut rng = crate::seed::rng(seed);
            let scores: Vec<f64> = (0..n)
                .map(|_| f64::from(rng.gen_range(0..lattice)) / f64::from(lattice))
                .collect();
            let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
            labels[0] = 1;
            labels[1] = 0;
            let (_, auc) = roc_auc(&scores, &labels).unwrap();
            prop_assert!((auc - pairwise_auc(&scores, &labels)).abs() <= 1e-9);
        }

        #[test]
        fn accuracy_bounds_and_consistency(
            tp in 0u64..1000, fp in 0u64..1000, fn_ in 0u64..1000, tn in 0u64..1000,
        ) {
            let cm = ConfusionMatrix::new(tp, fp, fn_, tn);
            for metric in [cm.accuracy(), cm.precision(), cm.recall(), cm.f1()] {
                if let Some(v) = metric {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
