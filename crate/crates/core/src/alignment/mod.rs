//! Realignment of unaligned rows from learned (or projected) representations.

mod hungarian;

pub use hungarian::{assignment_cost, hungarian};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autoencoder::ViewAutoencoder;
use crate::dataset::MultiViewDataset;
use crate::error::{Error, Result};
use crate::numeric::{euclidean_distance_matrix, Matrix, Pca, Scalar};

/// Matching strategy between first-view rows and view-`v` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignMode {
    /// Each first-view row takes its nearest view-`v` row; not necessarily injective.
    Greedy,
    /// Minimum total distance one-to-one matching.
    #[default]
    Bijective,
}

/// For every view, the view row matched to each first-view row.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult<T> {
    pub mode: AlignMode,
    pub keep_known: bool,
    /// `maps[v][n]` is the row of view `v` matched to first-view row `n`;
    /// `maps[0]` is the identity.
    pub maps: Vec<Vec<usize>>,
    /// Euclidean distance of each matched pair, same layout as `maps`.
    pub distances: Vec<Vec<T>>,
}

impl<T: Scalar> AlignmentResult<T> {
    pub fn num_views(&self) -> usize {
        self.maps.len()
    }

    /// Writes `alignment_<v>.csv` (1-based) for every view after the first.
    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for (v, map) in self.maps.iter().enumerate().skip(1) {
            let path = dir.join(format!("alignment_{}.csv", v + 1));
            let body: String = map.iter().map(|j| format!("{j}\n")).collect();
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Matches rows of `reps[v]` to rows of `reps[0]` for every `v ≥ 1`.
///
/// With `keep_known`, rows where `aligned_mask` is 1 map to themselves and
/// only the unaligned rows compete for the unaligned columns.
pub fn align_representations<T: Scalar>(
    reps: &[Matrix<T>],
    aligned_mask: &[u8],
    mode: AlignMode,
    keep_known: bool,
) -> Result<AlignmentResult<T>> {
    let Some(first) = reps.first() else {
        return Err(Error::Precondition("no representations to align".into()));
    };
    let n = first.rows();
    if aligned_mask.len() != n || reps.iter().any(|z| z.rows() != n) {
        return Err(Error::Precondition("representations and mask disagree on the sample count".into()));
    }
    let candidates: Vec<usize> = if keep_known {
        (0..n).filter(|&i| aligned_mask[i] == 0).collect()
    } else {
        (0..n).collect()
    };

    let mut maps = vec![(0..n).collect::<Vec<_>>()];
    let mut distances = vec![vec![T::zero(); n]];
    let anchor = first.select_rows(&candidates);
    for z in &reps[1..] {
        let mut map: Vec<usize> = (0..n).collect();
        let mut dist = vec![T::zero(); n];
        if keep_known {
            for i in (0..n).filter(|&i| aligned_mask[i] == 1) {
                dist[i] = crate::numeric::squared_euclidean(first.row(i), z.row(i)).sqrt();
            }
        }
        if !candidates.is_empty() {
            let cost = euclidean_distance_matrix(&anchor, &z.select_rows(&candidates))?;
            let local: Vec<usize> = match mode {
                AlignMode::Bijective => hungarian(&cost)?,
                AlignMode::Greedy => cost
                    .row_iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .fold((0, T::infinity()), |best, (j, &d)| if d < best.1 { (j, d) } else { best })
                            .0
                    })
                    .collect(),
            };
            for (a, &b) in local.iter().enumerate() {
                map[candidates[a]] = candidates[b];
                dist[candidates[a]] = cost[(a, b)];
            }
        }
        maps.push(map);
        distances.push(dist);
    }
    Ok(AlignmentResult {
        mode,
        keep_known,
        maps,
        distances,
    })
}

fn check_model<T: Scalar>(model: &ViewAutoencoder<T>, dataset: &MultiViewDataset<T>) -> Result<()> {
    if model.num_views() != dataset.num_views() {
        return Err(Error::Compatibility(format!(
            "model has {} views, dataset has {}",
            model.num_views(),
            dataset.num_views()
        )));
    }
    for (v, (m, d)) in model.view_dims().iter().zip(dataset.view_dims()).enumerate() {
        if *m != d {
            return Err(Error::Compatibility(format!(
                "view {} expects {m} features, dataset has {d}",
                v + 1
            )));
        }
    }
    Ok(())
}

/// Encodes every view of the dataset.
pub fn encode_all<T: Scalar>(model: &ViewAutoencoder<T>, dataset: &MultiViewDataset<T>) -> Result<Vec<Matrix<T>>> {
    check_model(model, dataset)?;
    (0..dataset.num_views()).map(|v| model.represent(v, dataset.view(v))).collect()
}

/// Realigns the dataset's views in representation space.
pub fn infer_alignment<T: Scalar>(
    model: &ViewAutoencoder<T>,
    dataset: &MultiViewDataset<T>,
    mode: AlignMode,
    keep_known: bool,
) -> Result<AlignmentResult<T>> {
    let reps = encode_all(model, dataset)?;
    align_representations(&reps, dataset.aligned_mask(), mode, keep_known)
}

/// Row `n` is `[z¹_n | z²_{a₂(n)} | … | zⱽ_{a_V(n)}]`.
pub fn concatenate_representations<T: Scalar>(reps: &[Matrix<T>], alignment: &AlignmentResult<T>) -> Result<Matrix<T>> {
    if reps.len() != alignment.num_views() {
        return Err(Error::Internal(format!(
            "{} representation sets for a {}-view alignment",
            reps.len(),
            alignment.num_views()
        )));
    }
    let mut parts = Vec::with_capacity(reps.len());
    for (z, map) in reps.iter().zip(&alignment.maps) {
        if let Some(&bad) = map.iter().find(|&&j| j >= z.rows()) {
            return Err(Error::Internal(format!("aligned index {bad} out of range for {} rows", z.rows())));
        }
        parts.push(z.select_rows(map));
    }
    Matrix::hstack(&parts.iter().collect::<Vec<_>>())
}

pub fn concatenate<T: Scalar>(
    model: &ViewAutoencoder<T>,
    dataset: &MultiViewDataset<T>,
    alignment: &AlignmentResult<T>,
) -> Result<Matrix<T>> {
    concatenate_representations(&encode_all(model, dataset)?, alignment)
}

/// Raw-feature baseline: project every view onto `target_dim` principal
/// components and match by minimum-cost assignment.
pub fn baseline_realign<T: Scalar>(dataset: &MultiViewDataset<T>, target_dim: usize) -> Result<AlignmentResult<T>> {
    baseline_realign_with(dataset, target_dim, true)
}

pub fn baseline_realign_with<T: Scalar>(
    dataset: &MultiViewDataset<T>,
    target_dim: usize,
    keep_known: bool,
) -> Result<AlignmentResult<T>> {
    let projected = baseline_projections(dataset, target_dim)?;
    align_representations(&projected, dataset.aligned_mask(), AlignMode::Bijective, keep_known)
}

/// Per-view PCA projections used by the baseline.
pub fn baseline_projections<T: Scalar>(dataset: &MultiViewDataset<T>, target_dim: usize) -> Result<Vec<Matrix<T>>> {
    let min_dim = dataset.view_dims().into_iter().min().unwrap_or(0);
    if target_dim > min_dim {
        return Err(Error::Dimension {
            op: "baseline_realign",
            detail: format!("target dimension {target_dim} exceeds the smallest view ({min_dim})"),
        });
    }
    dataset
        .views()
        .iter()
        .map(|x| Pca::fit(x, target_dim)?.transform(x))
        .collect()
}

/// Fraction of unaligned first-view rows matched to their true counterpart,
/// over every view after the first. 1 when nothing is unaligned.
pub fn instance_rate<T: Scalar>(result: &AlignmentResult<T>, dataset: &MultiViewDataset<T>) -> Result<f64> {
    rate(result, dataset, |v, n, row| dataset.true_correspondence()[v][row] == n)
}

/// Fraction of unaligned first-view rows matched to any row of the same class.
pub fn cluster_rate<T: Scalar>(result: &AlignmentResult<T>, dataset: &MultiViewDataset<T>) -> Result<f64> {
    let labels = dataset
        .labels()
        .ok_or_else(|| Error::Precondition("cluster-level alignment rate needs labels".into()))?;
    rate(result, dataset, |v, n, row| labels[dataset.true_correspondence()[v][row]] == labels[n])
}

pub fn alignment_rates<T: Scalar>(result: &AlignmentResult<T>, dataset: &MultiViewDataset<T>) -> Result<(f64, f64)> {
    Ok((instance_rate(result, dataset)?, cluster_rate(result, dataset)?))
}

fn rate<T: Scalar>(
    result: &AlignmentResult<T>,
    dataset: &MultiViewDataset<T>,
    hit: impl Fn(usize, usize, usize) -> bool,
) -> Result<f64> {
    if result.num_views() != dataset.num_views() || result.maps.iter().any(|m| m.len() != dataset.num_samples()) {
        return Err(Error::Precondition("alignment was computed for a different dataset".into()));
    }
    let unaligned = dataset.unaligned_indices();
    let (mut hits, mut total) = (0usize, 0usize);
    for v in 1..dataset.num_views() {
        for &n in &unaligned {
            total += 1;
            if hit(v, n, result.maps[v][n]) {
                hits += 1;
            }
        }
    }
    Ok(if total == 0 { 1.0 } else { hits as f64 / total as f64 })
}
