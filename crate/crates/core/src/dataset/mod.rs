//! Multi-view data model, ingestion, synthesis and misalignment simulation.

mod io;
mod synth;

pub use io::{load_dataset, read_matrix_binary, save_dataset, write_matrix_binary, ViewFormat};
pub use synth::{generate_synthetic, synthesize, SynthSpec};

use rand::seq::{index, SliceRandom};

use crate::error::{Error, Result};
use crate::numeric::{Matrix, Scalar};
use crate::rng;

/// How the rows at unaligned positions are shuffled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Shuffle {
    /// Uniform random permutation; fixed points allowed.
    #[default]
    Uniform,
    /// Uniform over permutations without fixed points.
    Derangement,
}

/// `V` feature matrices over the same `N` positions, with the alignment mask
/// and hidden ground-truth correspondences.
///
/// Row `i` of view `v` holds the instance that sits at row
/// `true_correspondence[v][i]` of the first view. Positions with mask 1 hold
/// the same instance in every view.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset<T> {
    views: Vec<Matrix<T>>,
    labels: Option<Vec<usize>>,
    aligned_mask: Vec<u8>,
    true_correspondence: Vec<Vec<usize>>,
}

impl<T: Scalar> MultiViewDataset<T> {
    /// Fully aligned dataset (identity correspondences, all-ones mask).
    pub fn aligned(views: Vec<Matrix<T>>, labels: Option<Vec<usize>>) -> Result<Self> {
        let n = views.first().map_or(0, |v| v.rows());
        let v = views.len();
        Self::new(views, labels, vec![1; n], vec![(0..n).collect(); v])
    }

    pub fn new(
        views: Vec<Matrix<T>>,
        labels: Option<Vec<usize>>,
        aligned_mask: Vec<u8>,
        true_correspondence: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let ds = Self {
            views,
            labels,
            aligned_mask,
            true_correspondence,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let Some(first) = self.views.first() else {
            return Err(Error::Precondition("dataset has no views".into()));
        };
        let n = first.rows();
        if n == 0 {
            return Err(Error::Precondition("dataset has no samples".into()));
        }
        for (v, m) in self.views.iter().enumerate() {
            if m.rows() != n {
                return Err(Error::Precondition(format!("view {v} has {} rows, view 0 has {n}", m.rows())));
            }
            if m.cols() == 0 {
                return Err(Error::Precondition(format!("view {v} has no features")));
            }
            if !m.is_finite() {
                return Err(Error::Precondition(format!("view {v} contains non-finite values")));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(Error::Precondition(format!("{} labels for {n} samples", labels.len())));
            }
        }
        if self.aligned_mask.len() != n {
            return Err(Error::Precondition(format!(
                "alignment mask has {} entries for {n} samples",
                self.aligned_mask.len()
            )));
        }
        if let Some(i) = self.aligned_mask.iter().position(|&m| m > 1) {
            return Err(Error::Precondition(format!("mask entry {i} is not 0/1")));
        }
        if self.true_correspondence.len() != self.views.len() {
            return Err(Error::Precondition(format!(
                "{} correspondences for {} views",
                self.true_correspondence.len(),
                self.views.len()
            )));
        }
        for (v, corr) in self.true_correspondence.iter().enumerate() {
            check_permutation(corr, n).map_err(|e| Error::Precondition(format!("view {v} correspondence: {e}")))?;
            if v == 0 && corr.iter().enumerate().any(|(i, &c)| i != c) {
                return Err(Error::Precondition("first-view correspondence must be the identity".into()));
            }
            if let Some(i) = (0..n).find(|&i| self.aligned_mask[i] == 1 && corr[i] != i) {
                return Err(Error::Precondition(format!(
                    "position {i} is marked aligned but view {v} holds instance {}",
                    corr[i]
                )));
            }
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        self.aligned_mask.len()
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn views(&self) -> &[Matrix<T>] {
        &self.views
    }

    pub fn view(&self, v: usize) -> &Matrix<T> {
        &self.views[v]
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(Matrix::cols).collect()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn num_classes(&self) -> Option<usize> {
        let labels = self.labels.as_ref()?;
        let mut seen: Vec<usize> = labels.clone();
        seen.sort_unstable();
        seen.dedup();
        Some(seen.len())
    }

    pub fn aligned_mask(&self) -> &[u8] {
        &self.aligned_mask
    }

    pub fn is_aligned(&self, i: usize) -> bool {
        self.aligned_mask[i] == 1
    }

    pub fn aligned_indices(&self) -> Vec<usize> {
        (0..self.num_samples()).filter(|&i| self.is_aligned(i)).collect()
    }

    pub fn unaligned_indices(&self) -> Vec<usize> {
        (0..self.num_samples()).filter(|&i| !self.is_aligned(i)).collect()
    }

    pub fn is_fully_aligned(&self) -> bool {
        self.aligned_mask.iter().all(|&m| m == 1)
    }

    /// Ground truth for evaluation only; training never reads it.
    pub fn true_correspondence(&self) -> &[Vec<usize>] {
        &self.true_correspondence
    }

    /// Label of the instance held at row `row` of view `v`.
    pub fn label_of(&self, v: usize, row: usize) -> Option<usize> {
        self.labels.as_ref().map(|l| l[self.true_correspondence[v][row]])
    }

    /// Shuffles `⌊fraction·N⌋` randomly chosen positions in every view but
    /// the first, using an independent permutation per view.
    pub fn apply_misalignment(&self, fraction: f64, seed: u64) -> Result<Self> {
        self.apply_misalignment_with(fraction, seed, Shuffle::Uniform)
    }

    pub fn apply_misalignment_with(&self, fraction: f64, seed: u64, shuffle: Shuffle) -> Result<Self> {
        if !self.is_fully_aligned() {
            return Err(Error::Precondition("misalignment requires a fully aligned dataset".into()));
        }
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::Precondition(format!("unaligned fraction {fraction} must lie in [0, 1)")));
        }
        let n = self.num_samples();
        let count = (fraction * n as f64).floor() as usize;
        if count == 0 {
            return Ok(self.clone());
        }
        if shuffle == Shuffle::Derangement && count < 2 {
            return Err(Error::Precondition("a derangement needs at least two unaligned positions".into()));
        }

        let mut chosen = index::sample(&mut rng::stream(seed, 0), n, count).into_vec();
        chosen.sort_unstable();

        let mut out = self.clone();
        for &i in &chosen {
            out.aligned_mask[i] = 0;
        }
        for v in 1..self.num_views() {
            let mut prng = rng::stream(seed, v as u64);
            let mut perm: Vec<usize> = (0..count).collect();
            loop {
                perm.shuffle(&mut prng);
                if shuffle == Shuffle::Uniform || perm.iter().enumerate().all(|(a, &b)| a != b) {
                    break;
                }
            }
            let src = &self.views[v];
            let dst = &mut out.views[v];
            for (slot, &p) in perm.iter().enumerate() {
                let to = chosen[slot];
                let from = chosen[p];
                dst.row_mut(to).copy_from_slice(src.row(from));
                out.true_correspondence[v][to] = self.true_correspondence[v][from];
            }
        }
        out.validate()?;
        Ok(out)
    }

    /// Undoes any misalignment using the ground-truth correspondences, giving
    /// a fully aligned dataset in first-view row order.
    pub fn restore_alignment(&self) -> Self {
        let n = self.num_samples();
        let mut out = self.clone();
        for v in 1..self.num_views() {
            for row in 0..n {
                let target = self.true_correspondence[v][row];
                out.views[v].row_mut(target).copy_from_slice(self.views[v].row(row));
            }
            out.true_correspondence[v] = (0..n).collect();
        }
        out.aligned_mask = vec![1; n];
        out
    }

    /// Same dataset with different labels (or none).
    pub fn with_labels(mut self, labels: Option<Vec<usize>>) -> Result<Self> {
        self.labels = labels;
        self.validate()?;
        Ok(self)
    }
}

pub(crate) fn check_permutation(p: &[usize], n: usize) -> std::result::Result<(), String> {
    if p.len() != n {
        return Err(format!("length {} for {n} samples", p.len()));
    }
    let mut seen = vec![false; n];
    for (i, &x) in p.iter().enumerate() {
        if x >= n {
            return Err(format!("entry {i} = {x} out of range"));
        }
        if std::mem::replace(&mut seen[x], true) {
            return Err(format!("entry {i} = {x} repeats an earlier entry"));
        }
    }
    Ok(())
}

/// Disjoint shuffled train/test split. The train size is
/// `round(train_fraction·n)`, clamped so both sides are non-empty.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::Precondition(format!("cannot split {n} samples")));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Precondition(format!("train fraction {train_fraction} must lie in (0, 1)")));
    }
    let train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng::seeded(seed));
    let test = ids.split_off(train);
    Ok((ids, test))
}
