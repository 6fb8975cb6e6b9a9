//! Multi-view representation learning for partially aligned data.
//!
//! Each view gets its own autoencoder. Rows with known correspondence form
//! per-view nearest-neighbor graphs that are fused across views and used as
//! positives in a contrastive objective; after training, unaligned rows are
//! matched in representation space and the concatenated codes are clustered
//! or classified.
//!
//! ```no_run
//! use circle::{evaluate, fit, synthesize, EvalConfig, SynthSpec, TrainConfig};
//!
//! let data = synthesize::<f64>(&SynthSpec::default()).unwrap();
//! let (model, _curve) = fit(&data, &TrainConfig { epochs: 50, ..TrainConfig::default() }).unwrap();
//! let report = evaluate(&model, &data, &EvalConfig::default()).unwrap();
//! println!("ACC {:.3}", report.clustering.acc);
//! ```

pub mod alignment;
pub mod autoencoder;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod loss;
pub mod numeric;
pub mod rng;
pub mod trainer;

pub use alignment::{
    align_representations, alignment_rates, baseline_realign, cluster_rate, concatenate, hungarian,
    infer_alignment, instance_rate, AlignMode, AlignmentResult,
};
pub use autoencoder::{Architecture, ViewAutoencoder};
pub use dataset::{
    generate_synthetic, load_dataset, save_dataset, synthesize, MultiViewDataset, Shuffle, SynthSpec, ViewFormat,
};
pub use error::{Error, ErrorKind, Result};
pub use evaluation::{ari, cluster_acc, evaluate, kmeans_pp, linear_classifier, nmi, EvalConfig, EvalReport};
pub use graph::{build_relation_graphs, fuse_cross_view, CrossViewGraph, RelationGraph};
pub use loss::{contrastive_loss, reconstruction_loss, total_loss, WeightProfile};
pub use numeric::{Matrix, Scalar};
pub use trainer::{fit, fit_with, AdamConfig, Session, TrainConfig, TrainingCurve, Weighting};

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Dataset64 = MultiViewDataset<f64>;
pub type Dataset32 = MultiViewDataset<f32>;
pub type Model64 = ViewAutoencoder<f64>;
pub type Model32 = ViewAutoencoder<f32>;
