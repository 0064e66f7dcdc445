//! Report emission: the ranked results CSV, per-phase handoff CSVs,
//! ROC/PR curve files, a replayable JSON manifest, and a human summary.
//!
//! `results.csv` is the determinism contract: same config + seed → same
//! bytes, at any worker count. Wall times and versions live in the manifest,
//! which is deliberately outside that contract.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::classifiers::ClassifierKind;
use crate::error::{Error, Result};
use crate::metrics::{self, ConfusionMatrix, MetricsRow};
use crate::resampling::ResampleKind;
use crate::stacking::StackSpec;

use super::{CellOutput, ImprovementFlag, ResultRow, RunOutput};

pub const RESULT_HEADER: &str = "test_run,classifier,tp,fp,fn,tn,accuracy,f1,auc,cost,seed";

fn na_u64(v: Option<u64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn na_f64(v: Option<f64>) -> String {
    // Full-precision shortest round-trip form, so re-parsing is lossless.
    v.map_or_else(|| "NA".to_string(), |x| format!("{x}"))
}

/// One CSV line in the results schema. Names never contain commas, so no
/// quoting is needed.
pub fn result_line(row: &ResultRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        row.test_run,
        row.classifier,
        na_u64(row.cm.map(|c| c.true_positives)),
        na_u64(row.cm.map(|c| c.false_positives)),
        na_u64(row.cm.map(|c| c.false_negatives)),
        na_u64(row.cm.map(|c| c.true_negatives)),
        na_f64(row.metrics.accuracy),
        na_f64(row.metrics.f1),
        na_f64(row.metrics.auc),
        na_f64(row.metrics.cost),
        row.seed
    )
}

pub fn rows_csv<'a>(rows: impl IntoIterator<Item = &'a ResultRow>) -> String {
    let mut out = String::from(RESULT_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&result_line(row));
        out.push('\n');
    }
    out
}

/// The final ranked table as CSV bytes — the replay contract.
pub fn results_csv(output: &RunOutput) -> String {
    rows_csv(output.merged_cells().map(|c| &c.row))
}

fn parse_opt_u64(field: &str, line: usize) -> Result<Option<u64>> {
    if field == "NA" {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::Csv(format!("line {line}: {field:?} is not a count")))
}

fn parse_opt_f64(field: &str, line: usize) -> Result<Option<f64>> {
    if field == "NA" {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::Csv(format!("line {line}: {field:?} is not a number")))
}

/// Parse a results-schema CSV back into cells (scores and fingerprints are
/// gone; ranking metrics survive exactly thanks to round-trip formatting).
/// This is how the phase-wise CLI subcommands hand rows to each other.
pub fn parse_rows_csv(text: &str) -> Result<Vec<CellOutput>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == RESULT_HEADER => {}
        Some((_, header)) => {
            return Err(Error::Csv(format!(
                "unexpected header {header:?}; expected {RESULT_HEADER:?}"
            )))
        }
        None => return Err(Error::Csv("empty results file".into())),
    }
    let mut cells = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let n = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(Error::Csv(format!(
                "line {n}: expected 11 fields, got {}",
                fields.len()
            )));
        }
        let counts = [
            parse_opt_u64(fields[2], n)?,
            parse_opt_u64(fields[3], n)?,
            parse_opt_u64(fields[4], n)?,
            parse_opt_u64(fields[5], n)?,
        ];
        let cm = match counts {
            [Some(tp), Some(fp), Some(fn_), Some(tn)] => {
                Some(ConfusionMatrix::new(tp, fp, fn_, tn))
            }
            _ => None,
        };
        let metrics = MetricsRow {
            accuracy: parse_opt_f64(fields[6], n)?,
            precision: None,
            recall: None,
            false_positive_rate: None,
            f1: parse_opt_f64(fields[7], n)?,
            auc: parse_opt_f64(fields[8], n)?,
            cost: parse_opt_f64(fields[9], n)?,
        };
        let seed = fields[10]
            .parse()
            .map_err(|_| Error::Csv(format!("line {n}: {:?} is not a seed", fields[10])))?;
        let test_run = fields[0].to_string();
        let resample_kind = test_run
            .strip_prefix('0')
            .and_then(|rest| ResampleKind::ALL.iter().find(|k| k.table_name() == rest))
            .copied();
        let classifier_kind = fields[1].parse::<ClassifierKind>().ok();
        cells.push(CellOutput {
            row: ResultRow {
                test_run,
                classifier: fields[1].to_string(),
                cm,
                metrics,
                f1_rank: 0,
                wall_time: 0.0,
                seed,
                diagnostics: Vec::new(),
            },
            scores: None,
            fingerprint: None,
            resample_kind,
            classifier_kind,
        });
    }
    Ok(cells)
}

// ---------------------------------------------------------------------------
// Human-readable summary.

fn dp(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.decimals$}"))
}

/// The aligned ranking table: accuracy and F1 to 4 decimals, AUC and cost
/// to 2, NA where undefined.
pub fn summary_table<'a>(rows: impl IntoIterator<Item = &'a ResultRow>) -> String {
    let mut out = format!(
        "{:<18}{:<14}{:>9}{:>8}{:>6}{:>14}{:>9}\n",
        "test_run", "classifier", "accuracy", "f1", "auc", "cost", "f1_rank"
    );
    for row in rows {
        let _ = writeln!(
            out,
            "{:<18}{:<14}{:>9}{:>8}{:>6}{:>14}{:>9}",
            row.test_run,
            row.classifier,
            dp(row.metrics.accuracy, 4),
            dp(row.metrics.f1, 4),
            dp(row.metrics.auc, 2),
            dp(row.metrics.cost, 2),
            row.f1_rank
        );
    }
    out
}

/// The per-stack improvement verdicts. `stacks` adds the selection
/// provenance when available (the full run has it; the phase-wise report
/// subcommand does not).
pub fn improvement_section(
    improvements: &[ImprovementFlag],
    stacks: Option<&[StackSpec]>,
) -> String {
    let mut out = String::from("stack improvements (best meta AUC vs both members' level-0 AUC):\n");
    for flag in improvements {
        let provenance = stacks
            .and_then(|s| s.iter().find(|spec| spec.stack_id == flag.stack_id))
            .map_or_else(String::new, |spec| {
                format!(" [{}, {}]", spec.selection_metric, spec.selection_role)
            });
        let best = match (&flag.best_meta, flag.best_meta_auc) {
            (Some(name), Some(auc)) => format!("best meta {name} {auc:.4}"),
            _ => "no meta row with a defined AUC".to_string(),
        };
        let _ = writeln!(
            out,
            "  stack {}{provenance}: {} ({}) + {} ({}) -> {}, {}",
            flag.stack_id,
            flag.members[0],
            dp(flag.member_auc[0], 4),
            flag.members[1],
            dp(flag.member_auc[1], 4),
            best,
            if flag.improved { "improved" } else { "not improved" }
        );
    }
    out
}

/// The full human summary for a completed run.
pub fn render_summary(output: &RunOutput) -> String {
    let d = output.data_summary;
    let s = output.split_summary;
    let mut out = format!(
        "imbalance stacking run: {} ranked rows, seed {}, threshold {}\n",
        output.merged.len(),
        output.config.seed,
        output.config.threshold
    );
    let _ = writeln!(
        out,
        "dataset: {} rows ({} minority / {} majority, IR {:.3}%), {} features",
        d.rows,
        d.minority,
        d.majority,
        100.0 * d.minority as f64 / d.rows as f64,
        d.n_features
    );
    let _ = writeln!(
        out,
        "splits: level-0 train {} / test {}; level-1 train {} / test {}\n",
        s.level0_train, s.level0_test, s.level1_train, s.level1_test
    );
    out.push_str(&summary_table(output.merged_cells().map(|c| &c.row)));
    out.push('\n');
    out.push_str(&improvement_section(&output.improvements, Some(&output.stacks)));
    out
}

// ---------------------------------------------------------------------------
// Manifest.

fn manifest_json(output: &RunOutput) -> serde_json::Value {
    let config = &output.config;
    let d = output.data_summary;
    let s = output.split_summary;
    let resampling: Vec<_> = output
        .resample_runs
        .iter()
        .map(|run| {
            json!({
                "summary": serde_json::to_value(&run.summary).unwrap_or_default(),
                "wall_time_s": run.wall_time,
            })
        })
        .collect();
    let stacks: Vec<_> = output
        .stacks
        .iter()
        .zip(&output.stack_walls)
        .map(|(spec, wall)| {
            json!({
                "id": spec.stack_id,
                "metric": spec.selection_metric.to_string(),
                "role": spec.selection_role.to_string(),
                "members": [spec.members[0].label(), spec.members[1].label()],
                "build_wall_time_s": wall,
            })
        })
        .collect();
    let improvements: Vec<_> = output
        .improvements
        .iter()
        .map(|flag| {
            json!({
                "stack_id": flag.stack_id,
                "members": flag.members,
                "member_auc": flag.member_auc,
                "best_meta": flag.best_meta,
                "best_meta_auc": flag.best_meta_auc,
                "improved": flag.improved,
            })
        })
        .collect();
    let rows: Vec<_> = output
        .merged_cells()
        .map(|cell| {
            json!({
                "test_run": cell.row.test_run,
                "classifier": cell.row.classifier,
                "f1_rank": cell.row.f1_rank,
                "seed": cell.row.seed,
                "wall_time_s": cell.row.wall_time,
                "diagnostics": cell.row.diagnostics,
            })
        })
        .collect();
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "workers": config.workers,
        "threshold": config.threshold,
        "config_toml": config.to_toml(),
        "dataset": {
            "rows": d.rows,
            "minority": d.minority,
            "majority": d.majority,
            "imbalance_ratio": d.minority as f64 / d.rows as f64,
            "features": d.n_features,
        },
        "splits": {
            "level0_train": s.level0_train,
            "level0_test": s.level0_test,
            "level1_train": s.level1_train,
            "level1_test": s.level1_test,
        },
        "resampling": resampling,
        "stacks": stacks,
        "improvements": improvements,
        "rows": rows,
    })
}

// ---------------------------------------------------------------------------
// Emission.

fn write_file(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents)?;
    written.push(path);
    Ok(())
}

/// Write every run artifact into `out_dir`:
///
/// * `results.csv` — the ranked 192-row table (replayable bytes),
/// * `level0.csv` / `level1.csv` — per-phase rows for phase-wise reruns,
/// * `curves/<test_run>_<classifier>_{roc,pr}.csv` — one pair per scored row,
/// * `manifest.json` — config, seeds, wall times, stack selection, verdicts,
/// * `summary.txt` — the human-readable ranking and improvement report.
///
/// Returns the paths written, `results.csv` first.
pub fn emit_report(output: &RunOutput, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let curves_dir = out_dir.join("curves");
    fs::create_dir_all(&curves_dir)?;
    let mut written = Vec::new();

    write_file(out_dir.join("results.csv"), &results_csv(output), &mut written)?;
    write_file(
        out_dir.join("level0.csv"),
        &rows_csv(output.level0.iter().map(|c| &c.row)),
        &mut written,
    )?;
    write_file(
        out_dir.join("level1.csv"),
        &rows_csv(output.level1.iter().map(|c| &c.row)),
        &mut written,
    )?;

    for &(phase, idx) in &output.merged {
        let cell = output.cell((phase, idx));
        let Some(scores) = &cell.scores else { continue };
        let test = if phase == 0 { &output.level0_test } else { &output.level1_test };
        let stem = format!("{}_{}", cell.row.test_run, cell.row.classifier);
        if let Ok((roc, _)) = metrics::roc_auc(scores, &test.labels) {
            let path = curves_dir.join(format!("{stem}_roc.csv"));
            roc.write_csv(&path)?;
            written.push(path);
        }
        if let Ok(pr) = metrics::pr_curve(scores, &test.labels) {
            let path = curves_dir.join(format!("{stem}_pr.csv"));
            pr.write_csv(&path)?;
            written.push(path);
        }
    }

    let manifest = serde_json::to_string_pretty(&manifest_json(output))
        .map_err(|e| Error::Internal(format!("manifest serialization: {e}")))?;
    write_file(out_dir.join("manifest.json"), &format!("{manifest}\n"), &mut written)?;
    write_file(out_dir.join("summary.txt"), &render_summary(output), &mut written)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::na_cell;

    fn sample_row() -> ResultRow {
        ResultRow {
            test_run: "0SMOTE".into(),
            classifier: "KNN".into(),
            cm: Some(ConfusionMatrix::new(142, 20, 43, 113_718)),
            metrics: MetricsRow {
                accuracy: Some(0.999_447),
                precision: None,
                recall: None,
                false_positive_rate: None,
                f1: Some(0.818_443_804_034_582),
                auc: Some(0.97),
                cost: Some(1234.5),
            },
            f1_rank: 3,
            wall_time: 0.25,
            seed: 99,
            diagnostics: Vec::new(),
        }
    }

    #[test]
    fn lines_round_trip_exactly() {
        let rows = [sample_row()];
        let text = rows_csv(rows.iter());
        let cells = parse_rows_csv(&text).unwrap();
        assert_eq!(cells.len(), 1);
        let back = &cells[0].row;
        assert_eq!(back.test_run, "0SMOTE");
        assert_eq!(back.classifier, "KNN");
        assert_eq!(back.cm, rows[0].cm);
        // Bit-exact: the CSV text uses shortest round-trip formatting.
        assert_eq!(back.metrics.accuracy, rows[0].metrics.accuracy);
        assert_eq!(back.metrics.f1, rows[0].metrics.f1);
        assert_eq!(back.metrics.auc, rows[0].metrics.auc);
        assert_eq!(back.metrics.cost, rows[0].metrics.cost);
        assert_eq!(back.seed, 99);
        assert_eq!(cells[0].resample_kind, Some(ResampleKind::Smote));
        assert_eq!(cells[0].classifier_kind, Some(ClassifierKind::Knn));
    }

    #[test]
    fn na_rows_serialize_and_parse() {
        let cell = na_cell("0RUS", "MLP", 7, 0.0, vec!["boom".into()], None, None);
        let text = rows_csv([&cell.row]);
        assert!(text.contains("0RUS,MLP,NA,NA,NA,NA,NA,NA,NA,NA,7"));
        let back = parse_rows_csv(&text).unwrap();
        assert!(back[0].row.cm.is_none());
        assert!(back[0].row.metrics.auc.is_none());
        assert_eq!(back[0].resample_kind, Some(ResampleKind::Rus));
    }

    #[test]
    fn header_is_the_exact_contract() {
        assert_eq!(
            RESULT_HEADER,
            "test_run,classifier,tp,fp,fn,tn,accuracy,f1,auc,cost,seed"
        );
        let err = parse_rows_csv("bogus\n1,2\n").unwrap_err();
        assert!(matches!(err, Error::Csv(_)));
    }

    #[test]
    fn summary_table_uses_fixed_decimals_and_na() {
        let row = sample_row();
        let table = summary_table([&row]);
        assert!(table.contains("0.9994"));
        assert!(table.contains("0.8184"));
        assert!(table.contains("0.97"));
        assert!(table.contains("1234.50"));
        let na = na_cell("0RUS", "MLP", 7, 0.0, Vec::new(), None, None);
        assert!(summary_table([&na.row]).contains("NA"));
    }

    #[test]
    fn level1_names_do_not_parse_as_grid_cells() {
        let cell = na_cell("5stackROS", "MLP", 7, 0.0, Vec::new(), None, None);
        let text = rows_csv([&cell.row]);
        let back = parse_rows_csv(&text).unwrap();
        assert_eq!(back[0].resample_kind, None);
        assert_eq!(back[0].classifier_kind, Some(ClassifierKind::Mlp));
    }
}
