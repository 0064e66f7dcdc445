//! Exact nearest-neighbor queries.
//!
//! Everything downstream that says "k nearest" — SMOTE and its variants, the
//! k-NN classifier, the cleaning filters — funnels through this module, so
//! the tie-break rule lives in exactly one place: neighbors sort by
//! (distance, then lower point index), which keeps every caller
//! deterministic. Search is brute force; the point sets involved are small
//! enough that an index structure would be speculative complexity.

use crate::data::Matrix;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    Euclidean,
    Manhattan,
    Chebyshev,
    Cosine,
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            DistanceMetric::Euclidean => "euclidean",
            DistanceMetric::Manhattan => "manhattan",
            DistanceMetric::Chebyshev => "chebyshev",
            DistanceMetric::Cosine => "cosine",
        };
        f.write_str(name)
    }
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(DistanceMetric::Euclidean),
            "manhattan" => Ok(DistanceMetric::Manhattan),
            "chebyshev" => Ok(DistanceMetric::Chebyshev),
            "cosine" => Ok(DistanceMetric::Cosine),
            other => Err(Error::InvalidParam(format!(
                "unknown distance metric {other:?} (euclidean, manhattan, chebyshev, cosine)"
            ))),
        }
    }
}

/// Distance between two equal-length vectors.
///
/// Cosine distance is `1 − cos(a, b)`, range [0, 2]; it is undefined when
/// either vector has zero norm and errors rather than guessing.
pub fn distance(metric: DistanceMetric, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    Ok(match metric {
        DistanceMetric::Euclidean => {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        }
        DistanceMetric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        DistanceMetric::Chebyshev => {
            a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        }
        DistanceMetric::Cosine => {
            let mut dot = 0.0;
            let mut na = 0.0;
            let mut nb = 0.0;
            for (x, y) in a.iter().zip(b) {
                dot += x * y;
                na += x * x;
                nb += y * y;
            }
            if na == 0.0 || nb == 0.0 {
                return Err(Error::ZeroVectorCosine);
            }
            1.0 - dot / (na.sqrt() * nb.sqrt())
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// Brute-force index over a point set.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    points: Matrix,
    metric: DistanceMetric,
}

impl NeighborIndex {
    /// All coordinates must be finite (NaN would poison the ordering).
    pub fn build(points: Matrix, metric: DistanceMetric) -> Result<Self> {
        for (i, row) in points.iter_rows().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidParam(format!(
                    "non-finite coordinate at point {i}, dimension {j}"
                )));
            }
        }
        Ok(NeighborIndex { points, metric })
    }

    pub fn len(&self) -> usize {
        self.points.n_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn metric(&self) -> DistanceMetric {
        self.metric
    }

    /// k nearest stored points to an arbitrary query, ascending by
    /// (distance, index).
    pub fn query(&self, query: &[f64], k: usize) -> Result<Vec<Neighbor>> {
        self.query_inner(query, k, None)
    }

    /// k nearest points to the stored point `member`, which itself is never
    /// returned. Use this — not a distance-zero heuristic — to self-exclude:
    /// duplicate points are legitimate neighbors of each other.
    pub fn query_member(&self, member: usize, k: usize) -> Result<Vec<Neighbor>> {
        assert!(member < self.len(), "member {member} out of range");
        self.query_inner(self.points.row(member), k, Some(member))
    }

    fn query_inner(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Result<Vec<Neighbor>> {
        let available = self.len() - usize::from(exclude.is_some());
        if k == 0 || k > available {
            return Err(Error::KTooLarge { k, available });
        }
        if query.len() != self.points.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: query.len(),
                got: self.points.n_cols(),
            });
        }

        // Bounded selection instead of a full sort: `best` holds at most k
        // (key, index) pairs in ascending order. Ties resolve toward the
        // lower index; the index term makes the key unique, so the order is
        // total. For the euclidean metric the key is the squared distance
        // (monotone in the true distance, so the selection is unchanged).
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        let mut consider = |key: f64, index: usize| {
            if best.len() == k {
                // Fast path: worse than the current k-th neighbor.
                let &(last_key, last_index) = best.last().unwrap();
                let worse = match key.total_cmp(&last_key) {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Equal => index > last_index,
                    std::cmp::Ordering::Less => false,
                };
                if worse {
                    return;
                }
            }
            let pos = best.partition_point(|&(bk, bi)| match bk.total_cmp(&key) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Equal => bi < index,
                std::cmp::Ordering::Greater => false,
            });
            best.insert(pos, (key, index));
            if best.len() > k {
                best.pop();
            }
        };

        match self.metric {
            DistanceMetric::Euclidean => {
                for (i, row) in self.points.iter_rows().enumerate() {
                    if Some(i) == exclude {
                        continue;
                    }
                    let mut sq = 0.0;
                    for (x, y) in query.iter().zip(row) {
                        let d = x - y;
                        sq += d * d;
                    }
                    consider(sq, i);
                }
                drop(consider);
                return Ok(best
                    .into_iter()
                    .map(|(sq, index)| Neighbor { index, distance: sq.sqrt() })
                    .collect());
            }
            DistanceMetric::Manhattan => {
                for (i, row) in self.points.iter_rows().enumerate() {
                    if Some(i) == exclude {
                        continue;
                    }
                    let d = query.iter().zip(row).map(|(x, y)| (x - y).abs()).sum();
                    consider(d, i);
                }
            }
            DistanceMetric::Chebyshev => {
                for (i, row) in self.points.iter_rows().enumerate() {
                    if Some(i) == exclude {
                        continue;
                    }
                    let d = query.iter().zip(row).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                    consider(d, i);
                }
            }
            DistanceMetric::Cosine => {
                let nq: f64 = query.iter().map(|x| x * x).sum();
                for (i, row) in self.points.iter_rows().enumerate() {
                    if Some(i) == exclude {
                        continue;
                    }
                    let mut dot = 0.0;
                    let mut nr = 0.0;
                    for (x, y) in query.iter().zip(row) {
                        dot += x * y;
                        nr += y * y;
                    }
                    if nq == 0.0 || nr == 0.0 {
                        return Err(Error::ZeroVectorCosine);
                    }
                    consider(1.0 - dot / (nq.sqrt() * nr.sqrt()), i);
                }
            }
        }
        drop(consider);
        Ok(best.into_iter().map(|(distance, index)| Neighbor { index, distance }).collect())
    }

    /// Majority vote among the k nearest stored points. `k` must be odd so a
    /// binary vote always has a winner; returns the winning label and the
    /// winner's vote fraction (in (0.5, 1]).
    pub fn vote(&self, labels: &[u8], query: &[f64], k: usize) -> Result<(u8, f64)> {
        if labels.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: labels.len() });
        }
        if k % 2 == 0 {
            return Err(Error::EvenVoteK(k));
        }
        let neighbors = self.query(query, k)?;
        let ones = neighbors.iter().filter(|n| labels[n.index] == 1).count();
        let (winner, votes) = if 2 * ones > k { (1, ones) } else { (0, k - ones) };
        Ok((winner, votes as f64 / k as f64))
    }
}
