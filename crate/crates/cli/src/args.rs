use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use circle::{AlignMode, TrainConfig, Weighting};

#[derive(Parser, Debug)]
#[command(name = "circle", version, args_override_self = true, about = "Partially aligned multi-view representation learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic multi-view dataset.
    Synth(SynthArgs),
    /// Train view autoencoders on a dataset directory.
    Train(TrainCmd),
    /// Realign, cluster and classify with a trained model.
    Eval(EvalCmd),
    /// Retrain and evaluate across values of one hyperparameter.
    Sweep(SweepCmd),
    /// Compare reconstruction-only, contrastive-only and full objectives.
    Ablate(AblateCmd),
    /// Re-run the command recorded in a manifest and compare checksums.
    Replay(ReplayCmd),
}

fn unit_interval_open(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} must lie in [0, 1)"))
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

fn non_negative_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be non-negative"))
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0 {
        Ok(v)
    } else {
        Err("must be at least 1".into())
    }
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 3, value_parser = positive_usize)]
    pub views: usize,
    #[arg(long, default_value_t = 5, value_parser = positive_usize)]
    pub clusters: usize,
    #[arg(long, default_value_t = 200, value_parser = positive_usize)]
    pub per_cluster: usize,
    #[arg(long, default_value_t = 8, value_parser = positive_usize)]
    pub latent_dim: usize,
    /// Observed dimension of each view, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "64,32,48")]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 0.3, value_parser = non_negative_f64)]
    pub noise: f64,
    /// Fraction of positions shuffled in every view after the first.
    #[arg(long, default_value_t = 0.5, value_parser = unit_interval_open)]
    pub unaligned: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Binary,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightingArg {
    Harmonic,
    Uniform,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Hidden widths 128,64,64 and batch 256.
    Synthetic,
    /// Hidden widths 1024,1024,1024 and batch 512.
    Real,
}

/// Hyperparameters shared by every command that trains.
#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value_t = Preset::Synthetic)]
    pub preset: Preset,
    #[arg(long, default_value_t = 1e-2, value_parser = non_negative_f64)]
    pub lambda: f64,
    #[arg(long, default_value_t = 3, value_parser = positive_usize)]
    pub k: usize,
    #[arg(long, default_value_t = 32, value_parser = positive_usize)]
    pub latent_dim: usize,
    /// Three hidden widths; overrides the preset.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// Overrides the preset.
    #[arg(long, value_parser = positive_usize)]
    pub batch_size: Option<usize>,
    #[arg(long, default_value_t = 500, value_parser = positive_usize)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3, value_parser = positive_f64)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9, value_parser = unit_interval_open)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999, value_parser = unit_interval_open)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-8, value_parser = positive_f64)]
    pub eps: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    pub temperature: f64,
    #[arg(long, value_enum, default_value_t = WeightingArg::Harmonic)]
    pub weighting: WeightingArg,
    /// Drop the reconstruction term from the optimized objective.
    #[arg(long)]
    pub no_reconstruction: bool,
}

impl TrainArgs {
    pub fn config(&self, seed: u64) -> Result<TrainConfig, String> {
        let (hidden, batch) = match self.preset {
            Preset::Synthetic => ([128, 64, 64], 256),
            Preset::Real => (TrainConfig::REAL_DATA_HIDDEN, 512),
        };
        let hidden = match &self.hidden {
            Some(h) if h.len() == 3 && !h.contains(&0) => [h[0], h[1], h[2]],
            Some(_) => return Err("--hidden needs three positive widths".into()),
            None => hidden,
        };
        Ok(TrainConfig {
            lambda: self.lambda,
            k: self.k,
            latent_dim: self.latent_dim,
            hidden,
            batch_size: self.batch_size.unwrap_or(batch),
            epochs: self.epochs,
            adam: circle::AdamConfig {
                learning_rate: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.eps,
            },
            temperature: self.temperature,
            reconstruction: !self.no_reconstruction,
            weighting: match self.weighting {
                WeightingArg::Harmonic => Weighting::Harmonic,
                WeightingArg::Uniform => Weighting::Uniform,
            },
            seed,
        })
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignModeArg {
    Greedy,
    Bijective,
}

impl From<AlignModeArg> for AlignMode {
    fn from(a: AlignModeArg) -> Self {
        match a {
            AlignModeArg::Greedy => AlignMode::Greedy,
            AlignModeArg::Bijective => AlignMode::Bijective,
        }
    }
}

/// Evaluation protocol shared by eval, sweep and ablate.
#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    #[arg(long, value_enum, default_value_t = AlignModeArg::Bijective)]
    pub align_mode: AlignModeArg,
    /// Pin rows with known correspondence and match only the rest.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub keep_known: bool,
    /// Seeds for k-means restarts and classifier splits.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub eval_seeds: Vec<u64>,
    #[arg(long, default_value_t = 10, value_parser = positive_usize)]
    pub restarts: usize,
}

impl EvalArgs {
    pub fn config(&self) -> circle::EvalConfig {
        circle::EvalConfig {
            align_mode: self.align_mode.into(),
            keep_known: self.keep_known,
            seeds: self.eval_seeds.clone(),
            restarts: self.restarts,
            ..circle::EvalConfig::default()
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct TrainCmd {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Print one line per epoch to stderr.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    PcaHungarian,
}

#[derive(Args, Debug, Clone)]
pub struct EvalCmd {
    /// Required unless --baseline is given.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub eval: EvalArgs,
    /// Realign raw features instead of learned representations.
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    /// PCA dimension for the baseline; defaults to the smallest view dimension.
    #[arg(long, value_parser = positive_usize)]
    pub baseline_dim: Option<usize>,
    /// Write alignment_<v>.csv next to the report.
    #[arg(long)]
    pub dump_alignment: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Unaligned,
    Lambda,
    K,
    Dz,
    Batch,
}

#[derive(Args, Debug, Clone)]
pub struct SweepCmd {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// Comma-separated list, or start:stop:step.
    #[arg(long)]
    pub values: String,
    /// One training run per seed and value.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    /// Cells evaluated concurrently.
    #[arg(long, default_value_t = 1, value_parser = positive_usize)]
    pub jobs: usize,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Args, Debug, Clone)]
pub struct AblateCmd {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 1, value_parser = positive_usize)]
    pub jobs: usize,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Args, Debug, Clone)]
pub struct ReplayCmd {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for the re-run; replaces the recorded --out.
    #[arg(long)]
    pub out: PathBuf,
}
