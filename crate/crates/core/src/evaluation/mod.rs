//! Clustering and classification scores for learned representations.

mod classifier;
mod kmeans;
mod metrics;

pub use classifier::{linear_classifier, ClassifierConfig, LinearClassifier};
pub use kmeans::{kmeans_pp, KMeansResult, CENTER_SHIFT_TOLERANCE, DEFAULT_RESTARTS, MAX_LLOYD_ITERATIONS};
pub use metrics::{ari, cluster_acc, contingency, nmi};

use serde::{Deserialize, Serialize};

use crate::alignment::{alignment_rates, concatenate_representations, encode_all, align_representations, AlignMode, AlignmentResult};
use crate::autoencoder::ViewAutoencoder;
use crate::dataset::{split_indices, MultiViewDataset};
use crate::error::{Error, Result};
use crate::numeric::{Matrix, Scalar};
use crate::rng;

pub const TRAIN_FRACTIONS: [f64; 3] = [0.8, 0.5, 0.2];
pub const CLASSIFIER_NOTE: &str = "classification uses a linear one-vs-rest hinge-loss classifier (no kernel)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub align_mode: AlignMode,
    pub keep_known: bool,
    pub seeds: Vec<u64>,
    pub restarts: usize,
    pub classifier: ClassifierConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            align_mode: AlignMode::Bijective,
            keep_known: true,
            seeds: (0..5).collect(),
            restarts: DEFAULT_RESTARTS,
            classifier: ClassifierConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringScores {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationScores {
    pub p80: f64,
    pub p50: f64,
    pub p20: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentScores {
    pub instance: f64,
    pub cluster: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub clustering: ClusteringScores,
    pub classification: ClassificationScores,
    pub alignment: AlignmentScores,
    pub seeds: Vec<u64>,
    /// Per-seed clustering scores, in `seeds` order.
    pub clustering_runs: Vec<ClusteringScores>,
    pub notes: Vec<String>,
}

fn require_labels<T: Scalar>(dataset: &MultiViewDataset<T>) -> Result<(&[usize], usize)> {
    let labels = dataset
        .labels()
        .ok_or_else(|| Error::Precondition("evaluation needs ground-truth labels".into()))?;
    Ok((labels, dataset.num_classes().unwrap_or(0)))
}

/// k-means on `z` with `k` = number of classes, one run per seed.
pub fn clustering_scores<T: Scalar>(
    z: &Matrix<T>,
    labels: &[usize],
    seed: u64,
    restarts: usize,
) -> Result<ClusteringScores> {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let km = kmeans_pp(z, classes.len(), seed, restarts)?;
    Ok(ClusteringScores {
        acc: cluster_acc(&km.labels, labels)?,
        nmi: nmi(&km.labels, labels)?,
        ari: ari(&km.labels, labels)?,
    })
}

/// Mean classifier accuracy at `fraction` over the seeds.
pub fn classification_score<T: Scalar>(
    z: &Matrix<T>,
    labels: &[usize],
    fraction: f64,
    seeds: &[u64],
    config: &ClassifierConfig,
) -> Result<f64> {
    let mut total = 0.0;
    for &seed in seeds {
        let split_seed = rng::derive_seed(seed, (fraction * 1000.0).round() as u64);
        let (train, test) = split_indices(z.rows(), fraction, split_seed)?;
        let pick = |ids: &[usize]| ids.iter().map(|&i| labels[i]).collect::<Vec<_>>();
        total += linear_classifier(
            &z.select_rows(&train),
            &pick(&train),
            &z.select_rows(&test),
            &pick(&test),
            rng::derive_seed(split_seed, 1),
            config,
        )?;
    }
    Ok(total / seeds.len() as f64)
}

/// Scores a concatenated representation together with the alignment it came from.
pub fn evaluate_features<T: Scalar>(
    z: &Matrix<T>,
    alignment: &AlignmentResult<T>,
    dataset: &MultiViewDataset<T>,
    config: &EvalConfig,
) -> Result<EvalReport> {
    let (labels, _) = require_labels(dataset)?;
    if config.seeds.is_empty() {
        return Err(Error::Precondition("evaluation needs at least one seed".into()));
    }
    if z.rows() != labels.len() {
        return Err(Error::Shape {
            op: "evaluate",
            left: z.shape(),
            right: (labels.len(), 1),
        });
    }
    let runs = config
        .seeds
        .iter()
        .map(|&s| clustering_scores(z, labels, s, config.restarts))
        .collect::<Result<Vec<_>>>()?;
    let n = runs.len() as f64;
    let clustering = ClusteringScores {
        acc: runs.iter().map(|r| r.acc).sum::<f64>() / n,
        nmi: runs.iter().map(|r| r.nmi).sum::<f64>() / n,
        ari: runs.iter().map(|r| r.ari).sum::<f64>() / n,
    };
    let p = |f| classification_score(z, labels, f, &config.seeds, &config.classifier);
    let classification = ClassificationScores {
        p80: p(TRAIN_FRACTIONS[0])?,
        p50: p(TRAIN_FRACTIONS[1])?,
        p20: p(TRAIN_FRACTIONS[2])?,
    };
    let (instance, cluster) = alignment_rates(alignment, dataset)?;
    Ok(EvalReport {
        clustering,
        classification,
        alignment: AlignmentScores { instance, cluster },
        seeds: config.seeds.clone(),
        clustering_runs: runs,
        notes: vec![CLASSIFIER_NOTE.to_string()],
    })
}

/// Realigns with the model, concatenates representations, and scores them.
pub fn evaluate<T: Scalar>(
    model: &ViewAutoencoder<T>,
    dataset: &MultiViewDataset<T>,
    config: &EvalConfig,
) -> Result<EvalReport> {
    require_labels(dataset)?;
    let reps = encode_all(model, dataset)?;
    let alignment = align_representations(&reps, dataset.aligned_mask(), config.align_mode, config.keep_known)?;
    let z = concatenate_representations(&reps, &alignment)?;
    evaluate_features(&z, &alignment, dataset, config)
}
