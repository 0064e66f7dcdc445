//! Workbench for binary classification under heavy class imbalance.
//!
//! The pipeline mirrors how this kind of study is actually run: take one
//! imbalanced dataset (fraud-style, label 1 = rare positive), rebalance the
//! training partition with one of eight resamplers, fit one of eleven
//! probabilistic classifiers on the result, and score everything with
//! imbalance-aware metrics (F1, ROC-AUC, a money-denominated cost). A second
//! level stacks pairs of those models: out-of-fold member probabilities become
//! the two meta-features a meta learner is trained on.
//!
//! Modules, bottom-up:
//!
//! * [`data`] — datasets, CSV I/O, stratified splits, a synthetic generator.
//! * [`neighbors`] — exact brute-force k-NN with four metrics.
//! * [`resampling`] — full/ROS/RUS/SMOTE and friends, with audit reports.
//! * [`classifiers`] — the eleven learners behind one `fit`/`predict_proba`
//!   interface.
//! * [`metrics`] — confusion counts, threshold metrics, ROC/PR curves, costs.
//! * [`stacking`] — two-member stacks built from the level-0 grid ranking.
//! * [`harness`] — the experiment driver: grid runs, ranking, report files.
//!
//! Everything is deterministic under a master seed: per-task seeds are pure
//! functions of (master seed, task identity), so results are bit-identical
//! across reruns and worker counts.

pub mod classifiers;
pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod neighbors;
pub mod resampling;
pub mod seed;
pub mod stacking;

pub use error::{Error, Result};
