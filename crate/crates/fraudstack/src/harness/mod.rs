//! The experiment driver: run the level-0 grid (resampler × classifier),
//! select and fit the level-1 stacks, rank everything into one table, and
//! emit the report files.
//!
//! Every per-task seed is derived by hashing the master seed with the task's
//! identity (run name, classifier, fold, …), never from execution order, so
//! the same config produces bit-identical results at any worker count. Cell
//! failures never abort a run: they become NA rows carrying a diagnostic.

pub mod config;
pub mod report;

pub use config::{DataSource, RunConfig};

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::classifiers::{self, ClassifierKind, ClassifierSpec, Fingerprint};
use crate::data::{self, Dataset, Matrix, RowId};
use crate::error::{Error, Result};
use crate::metrics::{self, ConfusionMatrix, CostModel, MetricsRow};
use crate::resampling::{self, ResampleKind, ResampleMethod, ResampleSummary};
use crate::seed;
use crate::stacking::{self, RankedPair, StackMember, StackSpec};

/// A task-level failure message (the run keeps going).
type TaskResult<T> = std::result::Result<T, String>;

/// One row of the final report table. `test_run` follows the table naming
/// scheme: `0SMOTE` (level-0 cell), `6metalearner` (stack 6 meta row),
/// `5stackROS` (stack 5 element baseline).
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub test_run: String,
    pub classifier: String,
    /// `None` = the cell failed (NA row) or counts were unavailable.
    pub cm: Option<ConfusionMatrix>,
    pub metrics: MetricsRow,
    /// Position under the F1-first ordering; assigned by [`rank_and_merge`].
    pub f1_rank: usize,
    /// Seconds spent training and scoring this cell.
    pub wall_time: f64,
    /// The fit seed this cell used (derived from the master seed).
    pub seed: u64,
    /// Training warnings, evaluation caveats, or the failure that NA'd the row.
    pub diagnostics: Vec<String>,
}

/// A result row plus its reusable by-products: raw scores (for curve files),
/// the training fingerprint (for leakage audits), and the grid identity
/// (for stack selection).
#[derive(Debug, Clone)]
pub struct CellOutput {
    pub row: ResultRow,
    pub scores: Option<Vec<f64>>,
    pub fingerprint: Option<Fingerprint>,
    pub resample_kind: Option<ResampleKind>,
    pub classifier_kind: Option<ClassifierKind>,
}

/// One (training fingerprint, evaluation partition) pair. The leakage audit
/// asserts the intersection is empty for every record of a run.
#[derive(Debug, Clone)]
pub struct AuditRecord {
    pub context: String,
    pub fingerprint: Fingerprint,
    pub eval_ids: Arc<Vec<RowId>>,
}

/// Per-stack verdict: did some meta learner strictly beat both constituents'
/// level-0 AUC?
#[derive(Debug, Clone)]
pub struct ImprovementFlag {
    pub stack_id: u8,
    /// Member labels in stack order, e.g. `"ROS/MLP"`.
    pub members: [String; 2],
    /// The members' AUC from their level-0 grid rows.
    pub member_auc: [Option<f64>; 2],
    pub best_meta: Option<String>,
    pub best_meta_auc: Option<f64>,
    pub improved: bool,
}

/// A successful resampling of the level-0 training partition.
#[derive(Debug, Clone)]
pub struct ResampleRun {
    pub summary: ResampleSummary,
    pub wall_time: f64,
}

#[derive(Debug)]
pub struct Level0Output {
    /// One cell per (resampler, classifier), resampler-major.
    pub cells: Vec<CellOutput>,
    pub resample_runs: Vec<ResampleRun>,
}

#[derive(Debug)]
pub struct Level1Output {
    /// The 8×meta grid rows (stack-major), then the 2-per-stack element rows.
    pub cells: Vec<CellOutput>,
    pub stacks: Vec<StackSpec>,
    /// Seconds spent building each stack's out-of-fold meta-features.
    pub stack_walls: Vec<f64>,
    /// Audit records for every fold-local member fit.
    pub fold_audits: Vec<AuditRecord>,
}

/// The ranked merge of both phases.
#[derive(Debug)]
pub struct MergedReport {
    /// (phase, index) pairs: phase 0 = level-0 cells, 1 = level-1 cells.
    pub order: Vec<(usize, usize)>,
    pub improvements: Vec<ImprovementFlag>,
}

#[derive(Debug, Clone, Copy)]
pub struct DataSummary {
    pub rows: usize,
    pub minority: usize,
    pub majority: usize,
    pub n_features: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SplitSummary {
    pub level0_train: usize,
    pub level0_test: usize,
    pub level1_train: usize,
    pub level1_test: usize,
}

/// Everything a full run produces, ready for report emission and audits.
#[derive(Debug)]
pub struct RunOutput {
    pub config: RunConfig,
    pub data_summary: DataSummary,
    pub split_summary: SplitSummary,
    pub level0: Vec<CellOutput>,
    pub level1: Vec<CellOutput>,
    /// Final ranked order over both phases; see [`MergedReport::order`].
    pub merged: Vec<(usize, usize)>,
    pub stacks: Vec<StackSpec>,
    pub stack_walls: Vec<f64>,
    pub improvements: Vec<ImprovementFlag>,
    pub resample_runs: Vec<ResampleRun>,
    pub level0_test: Dataset,
    pub level1_test: Dataset,
    pub audit: Vec<AuditRecord>,
}

impl RunOutput {
    pub fn cell(&self, r: (usize, usize)) -> &CellOutput {
        if r.0 == 0 { &self.level0[r.1] } else { &self.level1[r.1] }
    }

    /// Cells in final ranked order.
    pub fn merged_cells(&self) -> impl Iterator<Item = &CellOutput> {
        self.merged.iter().map(|&r| self.cell(r))
    }
}

// ---------------------------------------------------------------------------
// Seed derivation: one stream per task identity.

fn run_name(kind: ResampleKind) -> String {
    format!("0{}", kind.table_name())
}

fn level0_resample_seed(master: u64, kind: ResampleKind) -> u64 {
    seed::derive(master, &["level0", &run_name(kind), "resample"])
}

fn level0_fit_seed(master: u64, kind: ResampleKind, clf: ClassifierKind) -> u64 {
    seed::derive(master, &["level0", &run_name(kind), clf.config_name(), "fit"])
}

// Level-1 member streams hang off the member's identity, not the stack id:
// two stacks sharing a member share its refit (and its scores) exactly.
fn member_resample_seed(master: u64, res: ResampleKind) -> u64 {
    seed::derive(master, &["level1", "member", res.config_name(), "resample"])
}

fn member_fit_seed(master: u64, res: ResampleKind, clf: ClassifierKind) -> u64 {
    seed::derive(master, &["level1", "member", res.config_name(), clf.config_name(), "fit"])
}

fn stack_fold_seed(master: u64, stack_id: u8) -> u64 {
    seed::derive(master, &["level1", "stack", &stack_id.to_string(), "folds"])
}

fn meta_fit_seed(master: u64, stack_id: u8, meta: ClassifierKind) -> u64 {
    seed::derive(
        master,
        &["level1", "stack", &stack_id.to_string(), "meta", meta.config_name(), "fit"],
    )
}

/// The level-1 incarnation of a grid cell: same resampler and classifier,
/// seeds drawn from the member-identity streams.
fn member_for(config: &RunConfig, res: ResampleKind, clf: ClassifierKind) -> StackMember {
    let mut method = config.resample_method(res);
    method.seed = member_resample_seed(config.seed, res);
    let classifier = ClassifierSpec::with_defaults(clf, member_fit_seed(config.seed, res, clf));
    StackMember { resample: method, classifier }
}

fn member_key(member: &StackMember) -> (&'static str, &'static str) {
    (member.resample.kind.config_name(), member.classifier.kind.config_name())
}

// ---------------------------------------------------------------------------
// Cell evaluation.

/// Fit, score the test features, and hand back (scores, fingerprint,
/// warnings) — or the failure message that will NA the row.
fn fit_and_score(
    spec: &ClassifierSpec,
    train: &Dataset,
    test_features: &Matrix,
) -> TaskResult<(Vec<f64>, Fingerprint, Vec<String>)> {
    let model = classifiers::fit(spec, train).map_err(|e| format!("training failed: {e}"))?;
    let scores =
        model.predict_proba(test_features).map_err(|e| format!("scoring failed: {e}"))?;
    Ok((scores, model.fingerprint.clone(), model.warnings.clone()))
}

/// Confusion counts + threshold metrics, AUC, and cost for one score vector.
/// AUC or cost failing to compute degrades that column to NA with a
/// diagnostic; it does not NA the whole row.
fn evaluate(
    scores: &[f64],
    test: &Dataset,
    threshold: f64,
    cost: &CostModel,
) -> (Option<ConfusionMatrix>, MetricsRow, Vec<String>) {
    let mut diags = Vec::new();
    let cm = match metrics::confusion(scores, &test.labels, threshold) {
        Ok(cm) => cm,
        Err(e) => {
            diags.push(format!("evaluation failed: {e}"));
            return (None, MetricsRow::default(), diags);
        }
    };
    let mut row = MetricsRow::from_confusion(&cm);
    match metrics::roc_auc(scores, &test.labels) {
        Ok((_, auc)) => row.auc = Some(auc),
        Err(e) => diags.push(format!("auc undefined: {e}")),
    }
    match metrics::classify_outcomes(scores, &test.labels, threshold)
        .and_then(|outcomes| metrics::total_cost(&outcomes, test.amounts.as_deref(), cost))
    {
        Ok(c) => row.cost = Some(c),
        Err(e) => diags.push(format!("cost undefined: {e}")),
    }
    (Some(cm), row, diags)
}

fn na_cell(
    test_run: &str,
    classifier: &str,
    seed: u64,
    wall_time: f64,
    diagnostics: Vec<String>,
    resample_kind: Option<ResampleKind>,
    classifier_kind: Option<ClassifierKind>,
) -> CellOutput {
    CellOutput {
        row: ResultRow {
            test_run: test_run.to_string(),
            classifier: classifier.to_string(),
            cm: None,
            metrics: MetricsRow::default(),
            f1_rank: 0,
            wall_time,
            seed,
            diagnostics,
        },
        scores: None,
        fingerprint: None,
        resample_kind,
        classifier_kind,
    }
}

// ---------------------------------------------------------------------------
// Level 0: the resampler × classifier grid.

/// Run the full grid against one train/test split. Infallible by design:
/// resampler or classifier failures produce NA rows, never abort.
pub fn run_level0(config: &RunConfig, train: &Dataset, test: &Dataset) -> Level0Output {
    // Each resampler runs once and its output is shared by all classifiers.
    let resampled: Vec<(TaskResult<(Arc<Dataset>, ResampleSummary)>, f64)> = config
        .resamplers
        .par_iter()
        .map(|&kind| {
            let mut method = config.resample_method(kind);
            method.seed = level0_resample_seed(config.seed, kind);
            let start = Instant::now();
            let out = resampling::apply(&method, train)
                .map(|(ds, report)| (Arc::new(ds), report.summary()))
                .map_err(|e| format!("resampling failed: {e}"));
            (out, start.elapsed().as_secs_f64())
        })
        .collect();

    let tasks: Vec<(usize, usize)> = (0..config.resamplers.len())
        .flat_map(|r| (0..config.classifiers.len()).map(move |c| (r, c)))
        .collect();

    let cells: Vec<CellOutput> = tasks
        .par_iter()
        .map(|&(r, c)| {
            let kind = config.resamplers[r];
            let clf = config.classifiers[c];
            let name = run_name(kind);
            let fit_seed = level0_fit_seed(config.seed, kind, clf);
            let train_set = match &resampled[r].0 {
                Err(msg) => {
                    return na_cell(
                        &name,
                        clf.display_name(),
                        fit_seed,
                        0.0,
                        vec![msg.clone()],
                        Some(kind),
                        Some(clf),
                    )
                }
                Ok((ds, _)) => ds,
            };
            let spec = ClassifierSpec::with_defaults(clf, fit_seed);
            let start = Instant::now();
            match fit_and_score(&spec, train_set, &test.features) {
                Err(msg) => na_cell(
                    &name,
                    clf.display_name(),
                    fit_seed,
                    start.elapsed().as_secs_f64(),
                    vec![msg],
                    Some(kind),
                    Some(clf),
                ),
                Ok((scores, fingerprint, mut diags)) => {
                    let (cm, row_metrics, mut eval_diags) =
                        evaluate(&scores, test, config.threshold, &config.cost);
                    diags.append(&mut eval_diags);
                    CellOutput {
                        row: ResultRow {
                            test_run: name,
                            classifier: clf.display_name().to_string(),
                            cm,
                            metrics: row_metrics,
                            f1_rank: 0,
                            wall_time: start.elapsed().as_secs_f64(),
                            seed: fit_seed,
                            diagnostics: diags,
                        },
                        scores: Some(scores),
                        fingerprint: Some(fingerprint),
                        resample_kind: Some(kind),
                        classifier_kind: Some(clf),
                    }
                }
            }
        })
        .collect();

    let resample_runs = resampled
        .into_iter()
        .filter_map(|(out, wall_time)| {
            out.ok().map(|(_, summary)| ResampleRun { summary, wall_time })
        })
        .collect();
    Level0Output { cells, resample_runs }
}

// ---------------------------------------------------------------------------
// Level 1: stack selection, out-of-fold meta-features, meta grid.

struct Refit {
    scores: Arc<Vec<f64>>,
    fingerprint: Fingerprint,
    warnings: Vec<String>,
    wall_time: f64,
    seed: u64,
}

struct StackBuild {
    meta_train: TaskResult<Arc<Dataset>>,
    meta_test: TaskResult<Arc<Matrix>>,
    fold_audits: Vec<AuditRecord>,
    wall_time: f64,
}

/// Select the eight stacks from the level-0 grid, build their out-of-fold
/// meta-features on the level-1 training partition, and evaluate every
/// (stack, meta learner) pair plus the 2-per-stack element baselines on the
/// level-1 test partition.
///
/// Errors only when stack selection itself is impossible (fewer than two
/// rows with the ranking metric defined, or fewer than two tree-family
/// rows); per-stack and per-cell failures degrade to NA rows.
pub fn run_level1(
    config: &RunConfig,
    level0: &[CellOutput],
    train: &Dataset,
    test: &Dataset,
) -> Result<Level1Output> {
    let pairs: Vec<RankedPair> = level0
        .iter()
        .filter_map(|cell| {
            let res = cell.resample_kind?;
            let clf = cell.classifier_kind?;
            Some(RankedPair {
                name: format!("{} {}", cell.row.test_run, cell.row.classifier),
                member: member_for(config, res, clf),
                accuracy: cell.row.metrics.accuracy,
                f1: cell.row.metrics.f1,
                auc: cell.row.metrics.auc,
            })
        })
        .collect();
    let stacks = stacking::select_stacks(&pairs)?;

    // Refit every distinct member once on the fully resampled level-1
    // training partition; stacks sharing a member share the refit.
    let mut res_methods: BTreeMap<&'static str, ResampleMethod> = BTreeMap::new();
    let mut member_set: BTreeMap<(&'static str, &'static str), StackMember> = BTreeMap::new();
    for spec in &stacks {
        for member in &spec.members {
            res_methods
                .entry(member.resample.kind.config_name())
                .or_insert_with(|| member.resample.clone());
            member_set.entry(member_key(member)).or_insert_with(|| member.clone());
        }
    }

    let res_list: Vec<(&'static str, ResampleMethod)> = res_methods.into_iter().collect();
    let resampled: BTreeMap<&'static str, TaskResult<Arc<Dataset>>> = res_list
        .into_par_iter()
        .map(|(key, method)| {
            let out = resampling::apply(&method, train)
                .map(|(ds, _)| Arc::new(ds))
                .map_err(|e| format!("resampling failed: {e}"));
            (key, out)
        })
        .collect();

    let member_list: Vec<((&'static str, &'static str), StackMember)> =
        member_set.into_iter().collect();
    let refits: BTreeMap<(&'static str, &'static str), TaskResult<Refit>> = member_list
        .into_par_iter()
        .map(|(key, member)| {
            let entry = match &resampled[key.0] {
                Err(msg) => Err(msg.clone()),
                Ok(ds) => {
                    let start = Instant::now();
                    fit_and_score(&member.classifier, ds, &test.features).map(
                        |(scores, fingerprint, warnings)| Refit {
                            scores: Arc::new(scores),
                            fingerprint,
                            warnings,
                            wall_time: start.elapsed().as_secs_f64(),
                            seed: member.classifier.seed,
                        },
                    )
                }
            };
            (key, entry)
        })
        .collect();

    // Out-of-fold meta-features per stack. One build serves all meta
    // learners of that stack.
    let builds: Vec<StackBuild> = stacks
        .par_iter()
        .map(|spec| {
            let start = Instant::now();
            let built = stacking::build_meta_features(
                &spec.members,
                train,
                config.folds,
                stack_fold_seed(config.seed, spec.stack_id),
            );
            let (meta_train, fold_audits) = match built {
                Err(e) => (Err(format!("meta-feature build failed: {e}")), Vec::new()),
                Ok(meta) => {
                    let fold_ids: Vec<Arc<Vec<RowId>>> = (0..config.folds)
                        .map(|f| {
                            Arc::new(
                                meta.row_ids
                                    .iter()
                                    .zip(&meta.fold_assignment)
                                    .filter(|&(_, &a)| a == f)
                                    .map(|(&id, _)| id)
                                    .collect(),
                            )
                        })
                        .collect();
                    let audits = meta
                        .fold_records
                        .iter()
                        .map(|rec| AuditRecord {
                            context: format!(
                                "level1 stack {} fold {} member {} ({})",
                                spec.stack_id,
                                rec.fold,
                                rec.member_index + 1,
                                spec.members[rec.member_index].label()
                            ),
                            fingerprint: rec.fingerprint.clone(),
                            eval_ids: fold_ids[rec.fold].clone(),
                        })
                        .collect();
                    match stacking::meta_training_set(&meta) {
                        Ok(ds) => (Ok(Arc::new(ds)), audits),
                        Err(e) => (Err(format!("meta-feature build failed: {e}")), audits),
                    }
                }
            };
            // The meta input on the test side: each member's refit scores
            // as one column.
            let meta_test = (|| {
                let mut m = Matrix::zeros(test.n_rows(), 2);
                for (idx, member) in spec.members.iter().enumerate() {
                    match &refits[&member_key(member)] {
                        Err(msg) => {
                            return Err(format!(
                                "member {} ({}) unavailable: {msg}",
                                idx + 1,
                                member.label()
                            ))
                        }
                        Ok(refit) => {
                            for i in 0..test.n_rows() {
                                m.set(i, idx, refit.scores[i]);
                            }
                        }
                    }
                }
                Ok(Arc::new(m))
            })();
            StackBuild {
                meta_train,
                meta_test,
                fold_audits,
                wall_time: start.elapsed().as_secs_f64(),
            }
        })
        .collect();

    // The meta grid: stacks × meta learners.
    let meta_tasks: Vec<(usize, usize)> = (0..stacks.len())
        .flat_map(|s| (0..config.meta_learners.len()).map(move |m| (s, m)))
        .collect();
    let meta_cells: Vec<CellOutput> = meta_tasks
        .par_iter()
        .map(|&(s, mi)| {
            let spec = &stacks[s];
            let meta_kind = config.meta_learners[mi];
            let name = format!("{}metalearner", spec.stack_id);
            let fit_seed = meta_fit_seed(config.seed, spec.stack_id, meta_kind);
            let (meta_train, meta_test) = match (&builds[s].meta_train, &builds[s].meta_test) {
                (Err(msg), _) | (_, Err(msg)) => {
                    return na_cell(
                        &name,
                        meta_kind.display_name(),
                        fit_seed,
                        0.0,
                        vec![msg.clone()],
                        None,
                        Some(meta_kind),
                    )
                }
                (Ok(tr), Ok(te)) => (tr, te),
            };
            let meta_spec = ClassifierSpec::with_defaults(meta_kind, fit_seed);
            let start = Instant::now();
            match fit_and_score(&meta_spec, meta_train, meta_test) {
                Err(msg) => na_cell(
                    &name,
                    meta_kind.display_name(),
                    fit_seed,
                    start.elapsed().as_secs_f64(),
                    vec![msg],
                    None,
                    Some(meta_kind),
                ),
                Ok((scores, fingerprint, mut diags)) => {
                    let (cm, row_metrics, mut eval_diags) =
                        evaluate(&scores, test, config.threshold, &config.cost);
                    diags.append(&mut eval_diags);
                    CellOutput {
                        row: ResultRow {
                            test_run: name,
                            classifier: meta_kind.display_name().to_string(),
                            cm,
                            metrics: row_metrics,
                            f1_rank: 0,
                            wall_time: start.elapsed().as_secs_f64(),
                            seed: fit_seed,
                            diagnostics: diags,
                        },
                        scores: Some(scores),
                        fingerprint: Some(fingerprint),
                        resample_kind: None,
                        classifier_kind: Some(meta_kind),
                    }
                }
            }
        })
        .collect();

    // Element baselines: each stack's two members re-evaluated on the
    // level-1 split for contrast with the meta rows.
    let mut cells = meta_cells;
    for spec in &stacks {
        for member in &spec.members {
            let name = format!("{}stack{}", spec.stack_id, member.resample.kind.table_name());
            let clf_name = member.classifier.kind.display_name();
            match &refits[&member_key(member)] {
                Err(msg) => cells.push(na_cell(
                    &name,
                    clf_name,
                    member.classifier.seed,
                    0.0,
                    vec![msg.clone()],
                    Some(member.resample.kind),
                    Some(member.classifier.kind),
                )),
                Ok(refit) => {
                    let (cm, row_metrics, mut eval_diags) =
                        evaluate(&refit.scores, test, config.threshold, &config.cost);
                    let mut diags = refit.warnings.clone();
                    diags.append(&mut eval_diags);
                    cells.push(CellOutput {
                        row: ResultRow {
                            test_run: name,
                            classifier: clf_name.to_string(),
                            cm,
                            metrics: row_metrics,
                            f1_rank: 0,
                            wall_time: refit.wall_time,
                            seed: refit.seed,
                            diagnostics: diags,
                        },
                        scores: Some((*refit.scores).clone()),
                        fingerprint: Some(refit.fingerprint.clone()),
                        resample_kind: Some(member.resample.kind),
                        classifier_kind: Some(member.classifier.kind),
                    });
                }
            }
        }
    }

    let stack_walls = builds.iter().map(|b| b.wall_time).collect();
    let fold_audits = builds.into_iter().flat_map(|b| b.fold_audits).collect();
    Ok(Level1Output { cells, stacks, stack_walls, fold_audits })
}

// ---------------------------------------------------------------------------
// Ranking and merging.

fn opt_desc(a: Option<f64>, b: Option<f64>) -> Ordering {
    // None sorts below every defined value (metrics live in [0, 1]).
    b.unwrap_or(f64::NEG_INFINITY).total_cmp(&a.unwrap_or(f64::NEG_INFINITY))
}

/// The final report order: AUC desc, F1 desc, accuracy desc, then names —
/// a total order, so ties never depend on scheduling.
fn merge_cmp(a: &ResultRow, b: &ResultRow) -> Ordering {
    opt_desc(a.metrics.auc, b.metrics.auc)
        .then_with(|| opt_desc(a.metrics.f1, b.metrics.f1))
        .then_with(|| opt_desc(a.metrics.accuracy, b.metrics.accuracy))
        .then_with(|| a.test_run.cmp(&b.test_run))
        .then_with(|| a.classifier.cmp(&b.classifier))
}

/// The F1-first ordering behind `f1_rank`.
fn f1_cmp(a: &ResultRow, b: &ResultRow) -> Ordering {
    opt_desc(a.metrics.f1, b.metrics.f1)
        .then_with(|| opt_desc(a.metrics.auc, b.metrics.auc))
        .then_with(|| opt_desc(a.metrics.accuracy, b.metrics.accuracy))
        .then_with(|| a.test_run.cmp(&b.test_run))
        .then_with(|| a.classifier.cmp(&b.classifier))
}

fn split_leading_id(s: &str) -> Option<(u8, &str)> {
    let end = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    if end == 0 {
        return None;
    }
    s[..end].parse().ok().map(|id| (id, &s[end..]))
}

/// `"6metalearner"` → stack 6.
fn parse_meta_run(s: &str) -> Option<u8> {
    split_leading_id(s).and_then(|(id, rest)| (rest == "metalearner").then_some(id))
}

/// `"5stackROS"` → (stack 5, ROS).
fn parse_element_run(s: &str) -> Option<(u8, ResampleKind)> {
    let (id, rest) = split_leading_id(s)?;
    let table = rest.strip_prefix("stack")?;
    ResampleKind::ALL.iter().find(|k| k.table_name() == table).map(|&k| (id, k))
}

/// Recompute the per-stack improvement verdicts from emitted rows alone:
/// group the meta rows by stack id, read each member's identity off its
/// element row, and look the member's AUC up in the level-0 grid.
pub fn improvement_flags(level0: &[CellOutput], level1: &[CellOutput]) -> Vec<ImprovementFlag> {
    #[derive(Default)]
    struct Acc {
        members: Vec<(String, Option<f64>)>,
        best: Option<(String, f64)>,
    }
    let mut by_id: BTreeMap<u8, Acc> = BTreeMap::new();
    for cell in level1 {
        if let Some((id, res)) = parse_element_run(&cell.row.test_run) {
            let label = format!("{}/{}", res.table_name(), cell.row.classifier);
            let level0_run = format!("0{}", res.table_name());
            let auc = level0
                .iter()
                .find(|c| c.row.test_run == level0_run && c.row.classifier == cell.row.classifier)
                .and_then(|c| c.row.metrics.auc);
            by_id.entry(id).or_default().members.push((label, auc));
        } else if let Some(id) = parse_meta_run(&cell.row.test_run) {
            let acc = by_id.entry(id).or_default();
            if let Some(auc) = cell.row.metrics.auc {
                if acc.best.as_ref().is_none_or(|(_, best)| auc > *best) {
                    acc.best = Some((cell.row.classifier.clone(), auc));
                }
            }
        }
    }
    by_id
        .into_iter()
        .map(|(stack_id, acc)| {
            let mut members = [String::from("?"), String::from("?")];
            let mut member_auc = [None, None];
            for (i, (label, auc)) in acc.members.into_iter().take(2).enumerate() {
                members[i] = label;
                member_auc[i] = auc;
            }
            let (best_meta, best_meta_auc) = match acc.best {
                Some((name, auc)) => (Some(name), Some(auc)),
                None => (None, None),
            };
            let improved = match (best_meta_auc, member_auc) {
                (Some(best), [Some(a0), Some(a1)]) => best > a0 && best > a1,
                _ => false,
            };
            ImprovementFlag { stack_id, members, member_auc, best_meta, best_meta_auc, improved }
        })
        .collect()
}

/// Merge both phases into the final ranked order, assign `f1_rank` in
/// place, and compute the per-stack improvement flags.
pub fn rank_and_merge(level0: &mut [CellOutput], level1: &mut [CellOutput]) -> MergedReport {
    let mut order: Vec<(usize, usize)> = (0..level0.len())
        .map(|i| (0, i))
        .chain((0..level1.len()).map(|i| (1, i)))
        .collect();
    let mut f1_order = order.clone();
    {
        let l0: &[CellOutput] = level0;
        let l1: &[CellOutput] = level1;
        let get = |r: (usize, usize)| -> &ResultRow {
            if r.0 == 0 { &l0[r.1].row } else { &l1[r.1].row }
        };
        order.sort_by(|&a, &b| merge_cmp(get(a), get(b)));
        f1_order.sort_by(|&a, &b| f1_cmp(get(a), get(b)));
    }
    for (pos, &(phase, idx)) in f1_order.iter().enumerate() {
        let cell = if phase == 0 { &mut level0[idx] } else { &mut level1[idx] };
        cell.row.f1_rank = pos + 1;
    }
    let improvements = improvement_flags(level0, level1);
    MergedReport { order, improvements }
}

// ---------------------------------------------------------------------------
// Full pipeline.

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Internal(format!("worker pool: {e}")))
}

/// Phase entry point for the CLI: level-0 grid only.
pub fn run_level0_phase(config: &RunConfig) -> Result<(Level0Output, Dataset)> {
    config.validate()?;
    let dataset = config.load_dataset()?;
    let split = data::stratified_split(
        &dataset,
        config.level0_test_fraction,
        seed::derive(config.seed, &["split", "level0"]),
    )?;
    let pool = build_pool(config.workers)?;
    let out = pool.install(|| run_level0(config, &split.train, &split.test));
    Ok((out, split.test))
}

/// Phase entry point for the CLI: level-1 phase from existing level-0 rows.
pub fn run_level1_phase(
    config: &RunConfig,
    level0: &[CellOutput],
) -> Result<(Level1Output, Dataset)> {
    config.validate()?;
    let dataset = config.load_dataset()?;
    let split = data::stratified_split(
        &dataset,
        config.level1_test_fraction,
        seed::derive(config.seed, &["split", "level1"]),
    )?;
    let pool = build_pool(config.workers)?;
    let out = pool.install(|| run_level1(config, level0, &split.train, &split.test))?;
    Ok((out, split.test))
}

/// The whole experiment: load data, split twice, run both phases, rank,
/// and assemble the audit trail.
pub fn run_full(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let dataset = config.load_dataset()?;
    let (majority, minority) = dataset.class_indices();
    let data_summary = DataSummary {
        rows: dataset.n_rows(),
        minority: minority.len(),
        majority: majority.len(),
        n_features: dataset.features.n_cols(),
    };
    let split0 = data::stratified_split(
        &dataset,
        config.level0_test_fraction,
        seed::derive(config.seed, &["split", "level0"]),
    )?;
    let split1 = data::stratified_split(
        &dataset,
        config.level1_test_fraction,
        seed::derive(config.seed, &["split", "level1"]),
    )?;
    drop(dataset);
    let split_summary = SplitSummary {
        level0_train: split0.train.n_rows(),
        level0_test: split0.test.n_rows(),
        level1_train: split1.train.n_rows(),
        level1_test: split1.test.n_rows(),
    };

    let pool = build_pool(config.workers)?;
    let (l0, l1) = pool.install(|| -> Result<(Level0Output, Level1Output)> {
        log::info!("level 0: {} resamplers × {} classifiers", config.resamplers.len(), config.classifiers.len());
        let l0 = run_level0(config, &split0.train, &split0.test);
        log::info!("level 1: stack selection and meta grid");
        let l1 = run_level1(config, &l0.cells, &split1.train, &split1.test)?;
        Ok((l0, l1))
    })?;
    drop(split0.train);
    drop(split1.train);

    let Level0Output { cells: mut level0, resample_runs } = l0;
    let Level1Output { cells: mut level1, stacks, stack_walls, fold_audits } = l1;
    let MergedReport { order: merged, improvements } =
        rank_and_merge(&mut level0, &mut level1);

    let mut audit = fold_audits;
    let l0_ids = Arc::new(split0.test.row_ids.clone());
    let l1_ids = Arc::new(split1.test.row_ids.clone());
    for cell in &level0 {
        if let Some(fp) = &cell.fingerprint {
            audit.push(AuditRecord {
                context: format!("level0 {} {}", cell.row.test_run, cell.row.classifier),
                fingerprint: fp.clone(),
                eval_ids: l0_ids.clone(),
            });
        }
    }
    for cell in &level1 {
        if let Some(fp) = &cell.fingerprint {
            audit.push(AuditRecord {
                context: format!("level1 {} {}", cell.row.test_run, cell.row.classifier),
                fingerprint: fp.clone(),
                eval_ids: l1_ids.clone(),
            });
        }
    }

    Ok(RunOutput {
        config: config.clone(),
        data_summary,
        split_summary,
        level0,
        level1,
        merged,
        stacks,
        stack_walls,
        improvements,
        resample_runs,
        level0_test: split0.test,
        level1_test: split1.test,
        audit,
    })
}
