//! Aligned-neighbor relation graphs and their cross-view fusion.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use crate::dataset::MultiViewDataset;
use crate::error::{Error, Result};
use crate::numeric::{cosine_distance_matrix, Scalar};

/// For every view and sample, the `k` nearest *aligned* samples in that view
/// (cosine distance on raw features, self excluded, ties to the lower index).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationGraph {
    k: usize,
    num_samples: usize,
    // neighbors[v][n * k + r] is the r-th nearest aligned sample of n in view v.
    neighbors: Vec<Vec<usize>>,
}

impl RelationGraph {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_views(&self) -> usize {
        self.neighbors.len()
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn neighbors(&self, v: usize, n: usize) -> &[usize] {
        &self.neighbors[v][n * self.k..(n + 1) * self.k]
    }

    /// Writes `graph_<v>.csv` (1-based `v`), one line of neighbor indices per sample.
    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for v in 0..self.num_views() {
            let path = dir.join(format!("graph_{}.csv", v + 1));
            let mut out = String::new();
            for n in 0..self.num_samples {
                let line: Vec<String> = self.neighbors(v, n).iter().map(usize::to_string).collect();
                out.push_str(&line.join(","));
                out.push('\n');
            }
            fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

pub fn build_relation_graphs<T: Scalar>(d: &MultiViewDataset<T>, k: usize) -> Result<RelationGraph> {
    if k == 0 {
        return Err(Error::Precondition("relation graphs need k >= 1".into()));
    }
    let aligned = d.aligned_indices();
    if aligned.len() < k + 1 {
        return Err(Error::Capacity {
            needed: k + 1,
            available: aligned.len(),
        });
    }
    let n = d.num_samples();
    let mut neighbors = Vec::with_capacity(d.num_views());
    let mut candidates: Vec<(T, usize)> = Vec::with_capacity(aligned.len());
    for view in d.views() {
        let anchors = view.select_rows(&aligned);
        let dist = cosine_distance_matrix(view, &anchors)?;
        let mut lists = Vec::with_capacity(n * k);
        for row in 0..n {
            candidates.clear();
            candidates.extend(
                dist.row(row)
                    .iter()
                    .zip(&aligned)
                    .filter(|(_, &j)| j != row)
                    .map(|(&dd, &j)| (dd, j)),
            );
            let by_rank = |a: &(T, usize), b: &(T, usize)| -> Ordering {
                a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
            };
            if candidates.len() > k {
                candidates.select_nth_unstable_by(k - 1, by_rank);
                candidates.truncate(k);
            }
            candidates.sort_by(by_rank);
            lists.extend(candidates.iter().map(|&(_, j)| j));
        }
        neighbors.push(lists);
    }
    Ok(RelationGraph {
        k,
        num_samples: n,
        neighbors,
    })
}

/// Relation-graph neighbors referenced in every view.
///
/// Entry `(v, n, i, r)` is the row of view `i` holding the instance of the
/// `r`-th neighbor of sample `n` in view `v`. Neighbors are aligned, and an
/// aligned instance occupies the same row in every view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossViewGraph {
    k: usize,
    num_views: usize,
    num_samples: usize,
    // refs[v][(n * V + i) * k + r]
    refs: Vec<Vec<usize>>,
}

impl CrossViewGraph {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_views(&self) -> usize {
        self.num_views
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    /// All `V·K` references of anchor `(v, n)`, grouped by target view.
    pub fn references(&self, v: usize, n: usize) -> &[usize] {
        let w = self.num_views * self.k;
        &self.refs[v][n * w..(n + 1) * w]
    }

    /// Row of view `i` holding the `r`-th neighbor of `(v, n)`.
    #[inline]
    pub fn reference(&self, v: usize, n: usize, i: usize, r: usize) -> usize {
        self.refs[v][(n * self.num_views + i) * self.k + r]
    }
}

pub fn fuse_cross_view<T: Scalar>(g: &RelationGraph, d: &MultiViewDataset<T>) -> Result<CrossViewGraph> {
    if g.num_views() != d.num_views() || g.num_samples() != d.num_samples() {
        return Err(Error::Internal(format!(
            "graph built for {} views x {} samples, dataset has {} x {}",
            g.num_views(),
            g.num_samples(),
            d.num_views(),
            d.num_samples()
        )));
    }
    let (views, n, k) = (d.num_views(), d.num_samples(), g.k());
    let mut refs = Vec::with_capacity(views);
    for v in 0..views {
        let mut lists = Vec::with_capacity(n * views * k);
        for sample in 0..n {
            let nb = g.neighbors(v, sample);
            if let Some(&bad) = nb.iter().find(|&&j| !d.is_aligned(j)) {
                return Err(Error::Internal(format!(
                    "neighbor {bad} of sample {sample} in view {v} is not aligned"
                )));
            }
            for _target in 0..views {
                lists.extend_from_slice(nb);
            }
        }
        refs.push(lists);
    }
    Ok(CrossViewGraph {
        k,
        num_views: views,
        num_samples: n,
        refs,
    })
}
