//! Decision-tree kernels shared by the tree-family learners.
//!
//! One classification tree (binary splits on numeric thresholds, entropy
//! impurity, optional per-row weights and per-node feature subsampling) backs
//! c45, bagging, and the cost-sensitive forest. A small squared-error
//! regression tree with Newton leaf values backs the gradient booster.
//!
//! Determinism: split search scans features in index order and thresholds in
//! ascending order, replacing the incumbent only on strictly better gain, so
//! equal-gain ties always resolve the same way.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeafRule {
    /// Laplace-smoothed positive frequency (c + 1)/(n + 2), on raw counts.
    Laplace,
    /// Unsmoothed weighted positive fraction w1/(w0 + w1). Exactly invariant
    /// under positive rescaling of the weights, which the cost-sensitive
    /// forest relies on.
    WeightedFraction,
}

#[derive(Debug, Clone, Copy)]
pub struct TreeConfig {
    /// `usize::MAX` means unlimited.
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per split; `None` = all.
    pub feature_subsample: Option<usize>,
    pub leaf_rule: LeafRule,
}

#[derive(Debug, Clone)]
enum Node {
    Split { feature: usize, threshold: f64, left: u32, right: u32 },
    Leaf { score: f64 },
}

#[derive(Debug, Clone)]
pub struct ClassificationTree {
    nodes: Vec<Node>,
}

/// Midpoint of adjacent distinct values, nudged so the decision rule
/// `x < threshold` reproduces the training partition even when the midpoint
/// rounds onto one of the endpoints.
pub(crate) fn split_threshold(lower: f64, upper: f64) -> f64 {
    let mid = lower + (upper - lower) / 2.0;
    if mid > lower {
        mid
    } else {
        upper
    }
}

fn entropy(w0: f64, w1: f64) -> f64 {
    if w0 <= 0.0 || w1 <= 0.0 {
        return 0.0;
    }
    let total = w0 + w1;
    let p = w1 / total;
    let q = w0 / total;
    -(p * p.ln() + q * q.ln())
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl ClassificationTree {
    /// Grow a tree over `indices` (row numbers into `x`/`labels`/`weights`).
    /// `rng` is only consulted when feature subsampling is on.
    pub fn fit(
        x: &Matrix,
        labels: &[u8],
        weights: Option<&[f64]>,
        indices: &[usize],
        config: &TreeConfig,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        assert!(!indices.is_empty(), "cannot grow a tree on zero rows");
        assert!(config.min_leaf >= 1);
        let mut tree = ClassificationTree { nodes: Vec::new() };
        tree.nodes.push(Node::Leaf { score: 0.0 }); // placeholder for the root
        let mut pending = vec![(0usize, indices.to_vec(), 0usize)];
        let weight_of = |i: usize| weights.map_or(1.0, |w| w[i]);

        let n_features = x.n_cols();
        let mut feature_pool: Vec<usize> = (0..n_features).collect();

        while let Some((slot, rows, depth)) = pending.pop() {
            let (mut w0, mut w1) = (0.0, 0.0);
            let (mut c0, mut c1) = (0u64, 0u64);
            for &i in &rows {
                if labels[i] == 1 {
                    w1 += weight_of(i);
                    c1 += 1;
                } else {
                    w0 += weight_of(i);
                    c0 += 1;
                }
            }
            let leaf_score = match config.leaf_rule {
                LeafRule::Laplace => (c1 as f64 + 1.0) / ((c0 + c1) as f64 + 2.0),
                LeafRule::WeightedFraction => w1 / (w0 + w1),
            };

            let splittable = depth < config.max_depth
                && rows.len() >= 2 * config.min_leaf
                && c0 > 0
                && c1 > 0;
            let choice = if splittable {
                let features: &[usize] = match config.feature_subsample {
                    Some(m) if m < n_features => {
                        // Partial Fisher-Yates draw of m distinct features.
                        for j in 0..m {
                            let pick = rng.gen_range(j..n_features);
                            feature_pool.swap(j, pick);
                        }
                        &feature_pool[..m]
                    }
                    _ => &feature_pool[..],
                };
                best_split(x, labels, &rows, features, weight_of, w0, w1, config.min_leaf)
            } else {
                None
            };

            match choice {
                Some(split) => {
                    let mut left_rows = Vec::new();
                    let mut right_rows = Vec::new();
                    for &i in &rows {
                        if x.get(i, split.feature) < split.threshold {
                            left_rows.push(i);
                        } else {
                            right_rows.push(i);
                        }
                    }
                    let left = tree.nodes.len() as u32;
                    tree.nodes.push(Node::Leaf { score: 0.0 });
                    let right = tree.nodes.len() as u32;
                    tree.nodes.push(Node::Leaf { score: 0.0 });
                    tree.nodes[slot] = Node::Split {
                        feature: split.feature,
                        threshold: split.threshold,
                        left,
                        right,
                    };
                    pending.push((left as usize, left_rows, depth + 1));
                    pending.push((right as usize, right_rows, depth + 1));
                }
                None => {
                    tree.nodes[slot] = Node::Leaf { score: leaf_score };
                }
            }
        }
        tree
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { score } => return *score,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature] < *threshold { *left as usize } else { *right as usize };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Best entropy-gain split over the candidate features, or `None` when no
/// threshold clears min_leaf with positive gain.
#[allow(clippy::too_many_arguments)]
fn best_split(
    x: &Matrix,
    labels: &[u8],
    rows: &[usize],
    features: &[usize],
    weight_of: impl Fn(usize) -> f64,
    w0: f64,
    w1: f64,
    min_leaf: usize,
) -> Option<SplitChoice> {
    let parent_entropy = entropy(w0, w1);
    let total_weight = w0 + w1;
    let mut best: Option<SplitChoice> = None;
    let mut column: Vec<(f64, usize)> = Vec::with_capacity(rows.len());

    for &feature in features {
        column.clear();
        column.extend(rows.iter().map(|&i| (x.get(i, feature), i)));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));

        let (mut left_w0, mut left_w1) = (0.0, 0.0);
        for pos in 0..column.len() - 1 {
            let (value, i) = column[pos];
            if labels[i] == 1 {
                left_w1 += weight_of(i);
            } else {
                left_w0 += weight_of(i);
            }
            let next_value = column[pos + 1].0;
            if value == next_value {
                continue;
            }
            let left_count = pos + 1;
            let right_count = column.len() - left_count;
            if left_count < min_leaf || right_count < min_leaf {
                continue;
            }
            let right_w0 = w0 - left_w0;
            let right_w1 = w1 - left_w1;
            let children = (left_w0 + left_w1) * entropy(left_w0, left_w1)
                + (right_w0 + right_w1) * entropy(right_w0, right_w1);
            let gain = parent_entropy - children / total_weight;
            if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(SplitChoice {
                    feature,
                    threshold: split_threshold(value, next_value),
                    gain,
                });
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Regression tree (gradient boosting)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

/// Largest magnitude a Newton leaf may take before shrinkage; keeps
/// near-saturated leaves (tiny hessians) from overshooting.
const MAX_LEAF_VALUE: f64 = 4.0;

impl RegressionTree {
    /// Least-squares tree on per-row gradients, with one-step Newton leaf
    /// values Σg / (Σh + ε).
    pub fn fit(
        x: &Matrix,
        gradients: &[f64],
        hessians: &[f64],
        indices: &[usize],
        max_depth: usize,
        min_leaf: usize,
    ) -> Self {
        assert!(!indices.is_empty());
        let mut tree = RegressionTree { nodes: Vec::new() };
        tree.nodes.push(Node::Leaf { score: 0.0 });
        let mut pending = vec![(0usize, indices.to_vec(), 0usize)];

        while let Some((slot, rows, depth)) = pending.pop() {
            let g_sum: f64 = rows.iter().map(|&i| gradients[i]).sum();
            let h_sum: f64 = rows.iter().map(|&i| hessians[i]).sum();
            let leaf_value = (g_sum / (h_sum + 1e-12)).clamp(-MAX_LEAF_VALUE, MAX_LEAF_VALUE);

            let choice = if depth < max_depth && rows.len() >= 2 * min_leaf {
                best_mse_split(x, gradients, &rows, g_sum, min_leaf)
            } else {
                None
            };
            match choice {
                Some(split) => {
                    let mut left_rows = Vec::new();
                    let mut right_rows = Vec::new();
                    for &i in &rows {
                        if x.get(i, split.feature) < split.threshold {
                            left_rows.push(i);
                        } else {
                            right_rows.push(i);
                        }
                    }
                    let left = tree.nodes.len() as u32;
                    tree.nodes.push(Node::Leaf { score: 0.0 });
                    let right = tree.nodes.len() as u32;
                    tree.nodes.push(Node::Leaf { score: 0.0 });
                    tree.nodes[slot] = Node::Split {
                        feature: split.feature,
                        threshold: split.threshold,
                        left,
                        right,
                    };
                    pending.push((left as usize, left_rows, depth + 1));
                    pending.push((right as usize, right_rows, depth + 1));
                }
                None => tree.nodes[slot] = Node::Leaf { score: leaf_value },
            }
        }
        tree
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { score } => return *score,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature] < *threshold { *left as usize } else { *right as usize };
                }
            }
        }
    }
}

fn best_mse_split(
    x: &Matrix,
    gradients: &[f64],
    rows: &[usize],
    g_total: f64,
    min_leaf: usize,
) -> Option<SplitChoice> {
    let n = rows.len() as f64;
    let base_score = g_total * g_total / n;
    let mut best: Option<SplitChoice> = None;
    let mut column: Vec<(f64, usize)> = Vec::with_capacity(rows.len());

    for feature in 0..x.n_cols() {
        column.clear();
        column.extend(rows.iter().map(|&i| (x.get(i, feature), i)));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut g_left = 0.0;
        for pos in 0..column.len() - 1 {
            let (value, i) = column[pos];
            g_left += gradients[i];
            let next_value = column[pos + 1].0;
            if value == next_value {
                continue;
            }
            let left_count = pos + 1;
            let right_count = column.len() - left_count;
            if left_count < min_leaf || right_count < min_leaf {
                continue;
            }
            let g_right = g_total - g_left;
            let gain = g_left * g_left / left_count as f64
                + g_right * g_right / right_count as f64
                - base_score;
            if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(SplitChoice {
                    feature,
                    threshold: split_threshold(value, next_value),
                    gain,
                });
            }
        }
    }
    best
}
