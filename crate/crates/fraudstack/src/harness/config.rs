//! Experiment configuration: a flat TOML document, every key optional,
//! unknown keys rejected.

use std::path::PathBuf;

use crate::classifiers::ClassifierKind;
use crate::data::{self, CsvOptions, Dataset};
use crate::error::{Error, Result};
use crate::metrics::CostModel;
use crate::neighbors::DistanceMetric;
use crate::resampling::{ResampleKind, ResampleMethod};

/// Where the experiment's rows come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv(PathBuf),
    Generate { n: usize, ir: f64, dims: usize, overlap: f64 },
}

/// Full experiment configuration. `Default` is the desk-scale reference
/// setup: a generated 20,000-row dataset at 1% imbalance, the complete
/// resampler × classifier grid, and the complete meta-learner menu.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: DataSource,
    pub label_column: String,
    /// `None` disables cost amounts (the cost model falls back to its FN
    /// multiplier).
    pub amount_column: Option<String>,
    pub negative_token: String,
    pub positive_token: String,
    pub level0_test_fraction: f64,
    pub level1_test_fraction: f64,
    pub resamplers: Vec<ResampleKind>,
    pub classifiers: Vec<ClassifierKind>,
    pub meta_learners: Vec<ClassifierKind>,
    pub folds: usize,
    pub threshold: f64,
    pub cost: CostModel,
    pub seed: u64,
    pub workers: usize,
    pub resample_k: usize,
    pub resample_m: usize,
    pub adasyn_beta: f64,
    pub resample_metric: DistanceMetric,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            source: DataSource::Generate { n: 20_000, ir: 0.01, dims: 8, overlap: 0.3 },
            label_column: "Class".into(),
            amount_column: Some("Amount".into()),
            negative_token: "0".into(),
            positive_token: "1".into(),
            level0_test_fraction: 0.4,
            level1_test_fraction: 0.3,
            resamplers: ResampleKind::ALL.to_vec(),
            classifiers: ClassifierKind::ALL.to_vec(),
            meta_learners: ClassifierKind::ALL.to_vec(),
            folds: 5,
            threshold: 0.5,
            cost: CostModel::default(),
            seed: 42,
            workers: 4,
            resample_k: 5,
            resample_m: 10,
            adasyn_beta: 1.0,
            resample_metric: DistanceMetric::Euclidean,
        }
    }
}

fn expect_str(key: &str, value: &toml::Value) -> Result<String> {
    value
        .as_str()
        .map(str::to_owned)
        .ok_or_else(|| Error::Config(format!("{key} must be a string")))
}

fn expect_usize(key: &str, value: &toml::Value) -> Result<usize> {
    let i = value
        .as_integer()
        .ok_or_else(|| Error::Config(format!("{key} must be an integer")))?;
    usize::try_from(i).map_err(|_| Error::Config(format!("{key} must be non-negative")))
}

fn expect_u64(key: &str, value: &toml::Value) -> Result<u64> {
    let i = value
        .as_integer()
        .ok_or_else(|| Error::Config(format!("{key} must be an integer")))?;
    u64::try_from(i).map_err(|_| Error::Config(format!("{key} must be non-negative")))
}

fn expect_f64(key: &str, value: &toml::Value) -> Result<f64> {
    match value {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::Config(format!("{key} must be a number"))),
    }
}

fn expect_names<T: std::str::FromStr<Err = Error>>(key: &str, value: &toml::Value) -> Result<Vec<T>> {
    let list = value
        .as_array()
        .ok_or_else(|| Error::Config(format!("{key} must be an array of names")))?;
    list.iter()
        .map(|v| expect_str(key, v).and_then(|s| s.parse::<T>()))
        .collect()
}

impl RunConfig {
    /// Parse a flat TOML document over the defaults. Unknown keys are
    /// rejected by name so typos cannot silently fall back to defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("TOML parse error: {e}")))?;
        let mut config = RunConfig::default();
        let mut explicit_generate = false;
        let mut data_path: Option<PathBuf> = None;

        for (key, value) in &table {
            match key.as_str() {
                "data" => data_path = Some(PathBuf::from(expect_str(key, value)?)),
                "generate_n" | "generate_ir" | "generate_dims" | "generate_overlap" => {
                    explicit_generate = true;
                    let DataSource::Generate { n, ir, dims, overlap } = &mut config.source else {
                        unreachable!("default source is the generator");
                    };
                    match key.as_str() {
                        "generate_n" => *n = expect_usize(key, value)?,
                        "generate_ir" => *ir = expect_f64(key, value)?,
                        "generate_dims" => *dims = expect_usize(key, value)?,
                        _ => *overlap = expect_f64(key, value)?,
                    }
                }
                "label_column" => config.label_column = expect_str(key, value)?,
                "amount_column" => {
                    let name = expect_str(key, value)?;
                    config.amount_column = (!name.is_empty()).then_some(name);
                }
                "label_negative" => config.negative_token = expect_str(key, value)?,
                "label_positive" => config.positive_token = expect_str(key, value)?,
                "level0_test_fraction" => config.level0_test_fraction = expect_f64(key, value)?,
                "level1_test_fraction" => config.level1_test_fraction = expect_f64(key, value)?,
                "resamplers" => config.resamplers = expect_names(key, value)?,
                "classifiers" => config.classifiers = expect_names(key, value)?,
                "meta_learners" => config.meta_learners = expect_names(key, value)?,
                "folds" => config.folds = expect_usize(key, value)?,
                "threshold" => config.threshold = expect_f64(key, value)?,
                "cost_admin" => config.cost.c_admin = expect_f64(key, value)?,
                "cost_fn_fallback_multiplier" => {
                    config.cost.fallback_fn_multiplier = expect_f64(key, value)?
                }
                "seed" => config.seed = expect_u64(key, value)?,
                "workers" => config.workers = expect_usize(key, value)?,
                "resample_k" => config.resample_k = expect_usize(key, value)?,
                "resample_m" => config.resample_m = expect_usize(key, value)?,
                "adasyn_beta" => config.adasyn_beta = expect_f64(key, value)?,
                "resample_metric" => {
                    config.resample_metric = expect_str(key, value)?.parse()?
                }
                other => return Err(Error::UnknownConfigKey(other.to_string())),
            }
        }

        if let Some(path) = data_path {
            if explicit_generate {
                return Err(Error::Config(
                    "config sets both `data` and `generate_*` keys; pick one source".into(),
                ));
            }
            config.source = DataSource::Csv(path);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("level0_test_fraction", self.level0_test_fraction),
            ("level1_test_fraction", self.level1_test_fraction),
            ("threshold", self.threshold),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        for (name, len) in [
            ("resamplers", self.resamplers.len()),
            ("classifiers", self.classifiers.len()),
            ("meta_learners", self.meta_learners.len()),
        ] {
            if len == 0 {
                return Err(Error::Config(format!("{name} must not be empty")));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for r in &self.resamplers {
            if !seen.insert(r.config_name()) {
                return Err(Error::Config(format!("duplicate resampler {:?}", r.config_name())));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.classifiers {
            if !seen.insert(c.config_name()) {
                return Err(Error::Config(format!("duplicate classifier {:?}", c.config_name())));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.meta_learners {
            if !seen.insert(c.config_name()) {
                return Err(Error::Config(format!("duplicate meta learner {:?}", c.config_name())));
            }
        }
        self.cost.validate()?;
        // Validate the resample knobs once through a probe method.
        self.resample_method(ResampleKind::Adasyn).validate()?;
        if let DataSource::Generate { n, ir, dims, overlap } = self.source {
            if n < 10 || !(ir > 0.0 && ir < 0.5) || dims < 2 || !(0.0..=1.0).contains(&overlap) {
                return Err(Error::Config(format!(
                    "generator parameters out of range: n={n} ir={ir} dims={dims} overlap={overlap}"
                )));
            }
        }
        Ok(())
    }

    /// The configured resampling knobs applied to one kind (seed left 0; the
    /// harness derives per-task seeds).
    pub fn resample_method(&self, kind: ResampleKind) -> ResampleMethod {
        let mut method = ResampleMethod::new(kind);
        method.k_neighbors = self.resample_k;
        method.m_neighbors = self.resample_m;
        method.beta = self.adasyn_beta;
        method.metric = self.resample_metric;
        method
    }

    pub fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            label_column: self.label_column.clone(),
            amount_column: self.amount_column.clone(),
            negative_token: self.negative_token.clone(),
            positive_token: self.positive_token.clone(),
        }
    }

    /// Load or synthesize the configured dataset.
    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.source {
            DataSource::Csv(path) => data::load_csv(path, &self.csv_options()),
            DataSource::Generate { n, ir, dims, overlap } => {
                data::synthesize_dataset(*n, *ir, *dims, *overlap, crate::seed::derive(self.seed, &["generate"]))
            }
        }
    }

    /// Canonical TOML: every key explicit, so the document round-trips
    /// through `from_toml` to an identical config. Embedded in the run
    /// manifest for replay.
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        match &self.source {
            DataSource::Csv(path) => {
                out.push_str(&format!("data = {:?}\n", path.display().to_string()));
            }
            DataSource::Generate { n, ir, dims, overlap } => {
                out.push_str(&format!("generate_n = {n}\n"));
                out.push_str(&format!("generate_ir = {ir:?}\n"));
                out.push_str(&format!("generate_dims = {dims}\n"));
                out.push_str(&format!("generate_overlap = {overlap:?}\n"));
            }
        }
        out.push_str(&format!("label_column = {:?}\n", self.label_column));
        out.push_str(&format!(
            "amount_column = {:?}\n",
            self.amount_column.as_deref().unwrap_or("")
        ));
        out.push_str(&format!("label_negative = {:?}\n", self.negative_token));
        out.push_str(&format!("label_positive = {:?}\n", self.positive_token));
        out.push_str(&format!("level0_test_fraction = {:?}\n", self.level0_test_fraction));
        out.push_str(&format!("level1_test_fraction = {:?}\n", self.level1_test_fraction));
        let names = |kinds: &[&str]| {
            kinds.iter().map(|k| format!("{k:?}")).collect::<Vec<_>>().join(", ")
        };
        out.push_str(&format!(
            "resamplers = [{}]\n",
            names(&self.resamplers.iter().map(|r| r.config_name()).collect::<Vec<_>>())
        ));
        out.push_str(&format!(
            "classifiers = [{}]\n",
            names(&self.classifiers.iter().map(|c| c.config_name()).collect::<Vec<_>>())
        ));
        out.push_str(&format!(
            "meta_learners = [{}]\n",
            names(&self.meta_learners.iter().map(|c| c.config_name()).collect::<Vec<_>>())
        ));
        out.push_str(&format!("folds = {}\n", self.folds));
        out.push_str(&format!("threshold = {:?}\n", self.threshold));
        out.push_str(&format!("cost_admin = {:?}\n", self.cost.c_admin));
        out.push_str(&format!(
            "cost_fn_fallback_multiplier = {:?}\n",
            self.cost.fallback_fn_multiplier
        ));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("workers = {}\n", self.workers));
        out.push_str(&format!("resample_k = {}\n", self.resample_k));
        out.push_str(&format!("resample_m = {}\n", self.resample_m));
        out.push_str(&format!("adasyn_beta = {:?}\n", self.adasyn_beta));
        out.push_str(&format!("resample_metric = {:?}\n", self.resample_metric.to_string()));
        out
    }
}
