use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fraudstack::data::{self, CsvOptions};
use fraudstack::harness::{self, report, RunConfig};
use fraudstack::resampling::{self, ResampleMethod};
use fraudstack::{Error, Result};

/// Imbalanced-classification workbench: resampling, a level-0 model grid,
/// and two-member stacking with meta learners, all deterministic under one
/// master seed.
#[derive(Parser)]
#[command(name = "fraudstack", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

/// Flags that override the config file (or the defaults) everywhere.
#[derive(Args, Clone)]
struct Overrides {
    /// Master seed; every per-task seed is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (never changes results, only wall time).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Name of the label column in CSV data.
    #[arg(long, global = true)]
    label_column: Option<String>,
    /// Name of the transaction-amount column; pass "" to load without one.
    #[arg(long, global = true)]
    amount_column: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize an imbalanced two-class dataset and write it as CSV.
    Generate {
        /// Total rows.
        #[arg(long, default_value_t = 20_000)]
        n: usize,
        /// Imbalance ratio: minority count / total, in (0, 0.5).
        #[arg(long, default_value_t = 0.01)]
        ir: f64,
        /// Feature count.
        #[arg(long, default_value_t = 8)]
        dims: usize,
        /// Class overlap in [0, 1]: 0 = separable, 1 = indistinguishable.
        #[arg(long, default_value_t = 0.3)]
        overlap: f64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebalance a CSV with one resampling method and write the result.
    Resample {
        /// Method name: full, ros, rus, smote, smotetomek, smoteenn,
        /// borderlinesmote, or adasyn.
        #[arg(long)]
        method: String,
        /// Input CSV path.
        #[arg(long = "in")]
        input: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Neighbor count for the SMOTE family and ENN cleaning.
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Neighborhood size for borderline danger detection.
        #[arg(long, default_value_t = 10)]
        m: usize,
        /// ADASYN balance level in (0, 1].
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Distance metric: euclidean, manhattan, chebyshev, or cosine.
        #[arg(long, default_value = "euclidean")]
        metric: String,
    },
    /// Run the full experiment: level-0 grid, stacks, ranking, report.
    Run {
        /// Config file (TOML); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for results.csv, curves/, manifest.json, summary.txt.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run only the level-0 grid and write level0.csv.
    Level0 {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the level-1 phase against an existing level0.csv.
    Level1 {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Merge existing level0.csv + level1.csv into results.csv + summary.txt.
    Report {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// stdout, tolerant of early pipe closure (`fraudstack run | head` must not
/// panic mid-report).
fn print_text(text: &str) {
    use std::io::Write as _;
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn print_line(text: &str) {
    print_text(text);
    print_text("\n");
}

fn load_config(path: Option<&PathBuf>, overrides: &Overrides) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => RunConfig::from_toml(&fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(workers) = overrides.workers {
        config.workers = workers;
    }
    if let Some(label) = &overrides.label_column {
        config.label_column = label.clone();
    }
    if let Some(amount) = &overrides.amount_column {
        config.amount_column = (!amount.is_empty()).then(|| amount.clone());
    }
    config.validate()?;
    Ok(config)
}

fn csv_options(overrides: &Overrides) -> CsvOptions {
    let mut opts = CsvOptions::default();
    opts.label_column = overrides.label_column.clone().unwrap_or_else(|| "Class".into());
    opts.amount_column = match &overrides.amount_column {
        Some(name) => (!name.is_empty()).then(|| name.clone()),
        None => Some("Amount".into()),
    };
    opts
}

fn run(cli: Cli) -> Result<()> {
    let overrides = &cli.overrides;
    match cli.command {
        Command::Generate { n, ir, dims, overlap, out } => {
            // Same derivation the run pipeline uses, so `generate --seed S`
            // writes exactly the dataset `run --seed S` would synthesize.
            let master = overrides.seed.unwrap_or(42);
            let dataset = data::synthesize_dataset(
                n,
                ir,
                dims,
                overlap,
                fraudstack::seed::derive(master, &["generate"]),
            )?;
            data::write_csv(&dataset, &out)?;
            let minority = dataset.labels.iter().filter(|&&l| l == 1).count();
            print_line(&format!(
                "wrote {} ({} rows, {} minority, {} features)",
                out.display(),
                dataset.n_rows(),
                minority,
                dataset.features.n_cols()
            ));
        }
        Command::Resample { method, input, out, k, m, beta, metric } => {
            let data = data::load_csv(&input, &csv_options(overrides))?;
            let mut spec = ResampleMethod::new(method.parse()?);
            spec.k_neighbors = k;
            spec.m_neighbors = m;
            spec.beta = beta;
            spec.metric = metric.parse()?;
            spec.seed = overrides.seed.unwrap_or(42);
            spec.validate()?;
            let (resampled, report) = resampling::apply(&spec, &data)?;
            data::write_csv(&resampled, &out)?;
            let summary = serde_json::to_string_pretty(&report.summary())
                .map_err(|e| Error::Internal(format!("summary serialization: {e}")))?;
            print_line(&summary);
        }
        Command::Run { config, out_dir } => {
            let config = load_config(config.as_ref(), overrides)?;
            let output = harness::run_full(&config)?;
            let written = report::emit_report(&output, &out_dir)?;
            print_text(&report::render_summary(&output));
            eprintln!("wrote {} files under {}", written.len(), out_dir.display());
        }
        Command::Level0 { config, out_dir } => {
            let config = load_config(config.as_ref(), overrides)?;
            let (level0, _) = harness::run_level0_phase(&config)?;
            fs::create_dir_all(&out_dir)?;
            let path = out_dir.join("level0.csv");
            fs::write(&path, report::rows_csv(level0.cells.iter().map(|c| &c.row)))?;
            print_line(&format!("wrote {} ({} rows)", path.display(), level0.cells.len()));
        }
        Command::Level1 { config, out_dir } => {
            let config = load_config(config.as_ref(), overrides)?;
            let level0 = report::parse_rows_csv(&fs::read_to_string(out_dir.join("level0.csv"))?)?;
            let (level1, _) = harness::run_level1_phase(&config, &level0)?;
            let path = out_dir.join("level1.csv");
            fs::write(&path, report::rows_csv(level1.cells.iter().map(|c| &c.row)))?;
            print_line(&format!("wrote {} ({} rows)", path.display(), level1.cells.len()));
        }
        Command::Report { config, out_dir } => {
            let config = load_config(config.as_ref(), overrides)?;
            let mut level0 =
                report::parse_rows_csv(&fs::read_to_string(out_dir.join("level0.csv"))?)?;
            let mut level1 =
                report::parse_rows_csv(&fs::read_to_string(out_dir.join("level1.csv"))?)?;
            let merged = harness::rank_and_merge(&mut level0, &mut level1);
            let rows: Vec<_> = merged
                .order
                .iter()
                .map(|&(phase, idx)| {
                    if phase == 0 { &level0[idx].row } else { &level1[idx].row }
                })
                .collect();
            fs::write(out_dir.join("results.csv"), report::rows_csv(rows.iter().copied()))?;
            let mut summary = format!(
                "imbalance stacking report: {} ranked rows, seed {}, threshold {}\n\n",
                rows.len(),
                config.seed,
                config.threshold
            );
            summary.push_str(&report::summary_table(rows.iter().copied()));
            summary.push('\n');
            summary.push_str(&report::improvement_section(&merged.improvements, None));
            fs::write(out_dir.join("summary.txt"), &summary)?;
            print_text(&summary);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version land here too; keep their exit code 0.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
