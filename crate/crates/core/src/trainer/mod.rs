//! Mini-batch optimization of the joint objective.

mod adam;

pub use adam::{adam_step, AdamConfig, OptimizerState};

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{Architecture, Gradients, Stage, ViewAutoencoder};
use crate::dataset::MultiViewDataset;
use crate::error::{Error, Result};
use crate::graph::{build_relation_graphs, fuse_cross_view, CrossViewGraph};
use crate::loss::{objective, BatchBundle, LossOutput, NeighborReps, Objective, WeightProfile};
use crate::numeric::{Matrix, Scalar};
use crate::rng;

/// Neighbor weighting used by the contrastive term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[default]
    Harmonic,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub k: usize,
    pub latent_dim: usize,
    pub hidden: [usize; 3],
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub temperature: f64,
    /// Disabling this drops the reconstruction term from the optimized
    /// objective; it is still reported.
    pub reconstruction: bool,
    pub weighting: Weighting,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-2,
            k: 3,
            latent_dim: 32,
            hidden: [128, 64, 64],
            batch_size: 256,
            epochs: 500,
            adam: AdamConfig::default(),
            temperature: 1.0,
            reconstruction: true,
            weighting: Weighting::Harmonic,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Hidden widths suited to high-dimensional real-world features.
    pub const REAL_DATA_HIDDEN: [usize; 3] = [1024, 1024, 1024];

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Precondition(m));
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.adam.learning_rate > 0.0 && self.adam.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.adam.learning_rate));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda {} must be non-negative", self.lambda));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature {} must be positive", self.temperature));
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        if self.k == 0 || self.latent_dim == 0 || self.hidden.contains(&0) {
            return bad("k, latent dimension and hidden widths must be positive".into());
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            hidden: self.hidden,
            latent_dim: self.latent_dim,
        }
    }

    pub fn objective<T: Scalar>(&self) -> Objective<T> {
        Objective {
            lambda: T::lit(self.lambda),
            reconstruction: self.reconstruction,
            temperature: T::lit(self.temperature),
        }
    }

    pub fn weight_profile<T: Scalar>(&self) -> Result<WeightProfile<T>> {
        match self.weighting {
            Weighting::Harmonic => WeightProfile::harmonic(self.k),
            Weighting::Uniform => WeightProfile::uniform(self.k),
        }
    }
}

/// Sample-weighted mean losses over one pass through the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub reconstruction: f64,
    pub contrastive: f64,
    pub total: f64,
    pub batches: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingCurve {
    pub epochs: Vec<EpochReport>,
}

impl TrainingCurve {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,L_REC,L_CGC,total\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{},{}\n", e.epoch, e.reconstruction, e.contrastive, e.total));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Loss values for a single mini-batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchLoss {
    pub size: usize,
    pub reconstruction: f64,
    pub contrastive: f64,
    pub total: f64,
}

/// Per-view row gathering for one batch: every row that must be encoded, in
/// first-use order, with batch positions first.
struct RowPlan {
    rows: Vec<usize>,
    local: Vec<u32>,
}

const UNUSED: u32 = u32::MAX;

impl RowPlan {
    fn new(n: usize) -> Self {
        Self {
            rows: Vec::new(),
            local: vec![UNUSED; n],
        }
    }

    fn insert(&mut self, row: usize) -> usize {
        if self.local[row] == UNUSED {
            self.local[row] = self.rows.len() as u32;
            self.rows.push(row);
        }
        self.local[row] as usize
    }

    #[inline]
    fn slot(&self, row: usize) -> usize {
        self.local[row] as usize
    }
}

/// Forward pass, objective and parameter gradients for the batch at `positions`.
///
/// Each view encodes the union of the batch rows and every row its cross-view
/// neighbors refer to exactly once; duplicate references share a forward pass
/// and their gradients are summed.
pub fn batch_objective<T: Scalar>(
    model: &ViewAutoencoder<T>,
    dataset: &MultiViewDataset<T>,
    graph: &CrossViewGraph,
    positions: &[usize],
    obj: &Objective<T>,
    weights: &WeightProfile<T>,
) -> Result<(LossOutput<T>, Gradients<T>)> {
    let views = dataset.num_views();
    let k = graph.k();
    let m = positions.len();
    if model.num_views() != views || graph.num_views() != views {
        return Err(Error::Compatibility(format!(
            "model has {} views, graph {}, dataset {views}",
            model.num_views(),
            graph.num_views()
        )));
    }
    if weights.k() != k {
        return Err(Error::Precondition(format!("weight profile for K={}, graph has K={k}", weights.k())));
    }

    let mut plans: Vec<RowPlan> = (0..views).map(|_| RowPlan::new(dataset.num_samples())).collect();
    for plan in &mut plans {
        for &p in positions {
            plan.insert(p);
        }
    }
    for v in 0..views {
        for &p in positions {
            for (i, plan) in plans.iter_mut().enumerate() {
                for r in 0..k {
                    plan.insert(graph.reference(v, p, i, r));
                }
            }
        }
    }

    let mut reps_all = Vec::with_capacity(views);
    let mut enc_traces = Vec::with_capacity(views);
    for (v, plan) in plans.iter().enumerate() {
        let x = dataset.view(v).select_rows(&plan.rows);
        let (z, trace) = model.encode(v, &x)?;
        reps_all.push(z);
        enc_traces.push(trace);
    }

    let batch_slots: Vec<usize> = (0..m).collect();
    let mut inputs = Vec::with_capacity(views);
    let mut reps = Vec::with_capacity(views);
    let mut recons = Vec::with_capacity(views);
    let mut dec_traces = Vec::with_capacity(views);
    for v in 0..views {
        inputs.push(dataset.view(v).select_rows(positions));
        let z = reps_all[v].select_rows(&batch_slots);
        let (xh, trace) = model.decode(v, &z)?;
        reps.push(z);
        recons.push(xh);
        dec_traces.push(trace);
    }

    let mut neighbors = Vec::with_capacity(views);
    for v in 0..views {
        let mut mats = Vec::with_capacity(views * k);
        for (i, plan) in plans.iter().enumerate() {
            for r in 0..k {
                let slots: Vec<usize> = positions.iter().map(|&p| plan.slot(graph.reference(v, p, i, r))).collect();
                mats.push(reps_all[i].select_rows(&slots));
            }
        }
        neighbors.push(NeighborReps::new(views, k, mats)?);
    }

    let bundle = BatchBundle {
        positions: positions.to_vec(),
        inputs,
        reps,
        recons,
        neighbors,
    };
    let out = objective(&bundle, obj, weights)?;

    let mut grads = model.zero_gradients();
    for (v, plan) in plans.iter().enumerate() {
        let d = model.latent_dim();
        let mut grad_z = Matrix::<T>::zeros(plan.rows.len(), d);
        let mut add_row = |slot: usize, g: &[T]| {
            for (a, &b) in grad_z.row_mut(slot).iter_mut().zip(g) {
                *a += b;
            }
        };
        if let Some(gr) = &out.grad_recons {
            let (dec_grads, dz) = model.backward_stage(&dec_traces[v], &gr[v])?;
            grads.accumulate_stage(v, Stage::Decoder, &dec_grads)?;
            for slot in 0..m {
                add_row(slot, dz.row(slot));
            }
        }
        if let Some(gc) = &out.grad_contrastive {
            for slot in 0..m {
                add_row(slot, gc.reps[v].row(slot));
            }
            // Neighbor representations of view v appear under every anchor view.
            for (anchor_view, nb) in gc.neighbors.iter().enumerate() {
                for r in 0..k {
                    let g = nb.get(v, r);
                    for (slot, &p) in positions.iter().enumerate() {
                        add_row(plan.slot(graph.reference(anchor_view, p, v, r)), g.row(slot));
                    }
                }
            }
        }
        let (enc_grads, _) = model.backward_stage(&enc_traces[v], &grad_z)?;
        grads.accumulate_stage(v, Stage::Encoder, &enc_grads)?;
    }
    Ok((out, grads))
}

/// One optimizer step on the batch at `positions`.
pub fn train_step<T: Scalar>(
    model: &mut ViewAutoencoder<T>,
    dataset: &MultiViewDataset<T>,
    graph: &CrossViewGraph,
    state: &mut OptimizerState<T>,
    config: &TrainConfig,
    positions: &[usize],
) -> Result<BatchLoss> {
    let weights = config.weight_profile::<T>()?;
    let (out, grads) = batch_objective(model, dataset, graph, positions, &config.objective(), &weights)?;
    let tensors = grads.tensors();
    adam_step(&mut model.parameters_mut(), &tensors, state, &config.adam)?;
    if !model.is_finite() {
        return Err(Error::Degenerate {
            op: "train_step",
            detail: "parameters became non-finite".into(),
        });
    }
    Ok(BatchLoss {
        size: positions.len(),
        reconstruction: out.reconstruction.as_f64(),
        contrastive: out.contrastive.as_f64(),
        total: out.total.as_f64(),
    })
}

/// Shuffled partition of `0..n` into batches of `batch_size`; the last one may be short.
pub fn epoch_batches(n: usize, batch_size: usize, epoch_seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(epoch_seed));
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// One full pass over the dataset.
pub fn train_epoch<T: Scalar>(
    model: &mut ViewAutoencoder<T>,
    dataset: &MultiViewDataset<T>,
    graph: &CrossViewGraph,
    state: &mut OptimizerState<T>,
    config: &TrainConfig,
    epoch: usize,
    epoch_seed: u64,
) -> Result<EpochReport> {
    let batches = epoch_batches(dataset.num_samples(), config.batch_size, epoch_seed);
    let (mut rec, mut cgc, mut total) = (0.0, 0.0, 0.0);
    for batch in &batches {
        let loss = train_step(model, dataset, graph, state, config, batch)?;
        let w = loss.size as f64;
        rec += w * loss.reconstruction;
        cgc += w * loss.contrastive;
        total += w * loss.total;
    }
    let n = dataset.num_samples() as f64;
    Ok(EpochReport {
        epoch,
        reconstruction: rec / n,
        contrastive: cgc / n,
        total: total / n,
        batches: batches.len(),
    })
}

/// Builds and fuses the relation graphs used during training.
pub fn build_graph<T: Scalar>(dataset: &MultiViewDataset<T>, k: usize) -> Result<CrossViewGraph> {
    let g = build_relation_graphs(dataset, k)?;
    fuse_cross_view(&g, dataset)
}

pub fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    rng::derive_seed(seed, 1_000_000 + epoch as u64)
}

/// Everything `fit` needs to run epochs one at a time.
pub struct Session<'a, T> {
    pub dataset: &'a MultiViewDataset<T>,
    pub graph: CrossViewGraph,
    pub model: ViewAutoencoder<T>,
    pub state: OptimizerState<T>,
    pub config: TrainConfig,
    pub curve: TrainingCurve,
}

impl<'a, T: Scalar> Session<'a, T> {
    pub fn new(dataset: &'a MultiViewDataset<T>, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let graph = build_graph(dataset, config.k)?;
        let model = ViewAutoencoder::init(&dataset.view_dims(), config.architecture(), config.seed)?;
        Ok(Self {
            dataset,
            graph,
            model,
            state: OptimizerState::new(),
            config: config.clone(),
            curve: TrainingCurve::default(),
        })
    }

    pub fn run_epoch(&mut self) -> Result<EpochReport> {
        let epoch = self.curve.len() + 1;
        let report = train_epoch(
            &mut self.model,
            self.dataset,
            &self.graph,
            &mut self.state,
            &self.config,
            epoch,
            epoch_seed(self.config.seed, epoch),
        )?;
        self.curve.epochs.push(report);
        Ok(report)
    }
}

/// Builds the cross-view graph, then runs `config.epochs` epochs.
pub fn fit<T: Scalar>(dataset: &MultiViewDataset<T>, config: &TrainConfig) -> Result<(ViewAutoencoder<T>, TrainingCurve)> {
    fit_with(dataset, config, |_| {})
}

/// [`fit`] with a per-epoch observer.
pub fn fit_with<T: Scalar>(
    dataset: &MultiViewDataset<T>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochReport),
) -> Result<(ViewAutoencoder<T>, TrainingCurve)> {
    let mut session = Session::new(dataset, config)?;
    for _ in 0..config.epochs {
        let report = session.run_epoch()?;
        on_epoch(&report);
    }
    Ok((session.model, session.curve))
}
