//! One error enum for the whole crate, with a stable mapping to CLI exit codes.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // --- data errors: the input itself is unusable ---
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV: {0}")]
    Csv(String),
    #[error("missing column {0:?} in header")]
    MissingColumn(String),
    #[error("row {row}, column {column:?}: {value:?} is not a finite number")]
    NonNumericCell { row: usize, column: String, value: String },
    #[error("row {row}, column {column:?}: {value:?} is not a class label (expected {expected})")]
    BadLabel { row: usize, column: String, value: String, expected: String },
    #[error("empty dataset: {0}")]
    EmptyData(String),
    #[error("negative amount {amount} at row {row}")]
    NegativeAmount { amount: f64, row: usize },
    #[error("class {label} has {count} rows; at least {required} required")]
    ClassTooSmall { label: u8, count: usize, required: usize },
    #[error("data contains a single class (label {0}); both classes required")]
    SingleClass(u8),

    // --- config errors: parameters that cannot work ---
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("unknown config key {0:?}")]
    UnknownConfigKey(String),
    #[error("config: {0}")]
    Config(String),
    #[error("k must be odd for majority voting, got {0}")]
    EvenVoteK(usize),
    #[error("k = {k} exceeds the {available} available points")]
    KTooLarge { k: usize, available: usize },
    #[error(
        "minority class has {minority} rows but k_neighbors = {k}; \
         lower k_neighbors below the minority count"
    )]
    MinorityTooSmall { minority: usize, k: usize },

    // --- states a caller can reach with well-formed input ---
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cosine distance is undefined for a zero vector")]
    ZeroVectorCosine,
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("internal: {0}")]
    Internal(String),
}

impl Error {
    /// CLI exit code: 1 config, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            Io(_) | Csv(_) | MissingColumn(_) | NonNumericCell { .. } | BadLabel { .. }
            | EmptyData(_) | NegativeAmount { .. } | ClassTooSmall { .. } | SingleClass(_) => 2,
            InvalidParam(_) | UnknownConfigKey(_) | Config(_) | EvenVoteK(_)
            | KTooLarge { .. } | MinorityTooSmall { .. } => 1,
            DimensionMismatch { .. } | ZeroVectorCosine | UndefinedMetric(_) | Internal(_) => 3,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        // Keep the io kind when the csv crate is just wrapping one.
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                other => Error::Csv(format!("{other:?}")),
            }
        } else {
            Error::Csv(e.to_string())
        }
    }
}
