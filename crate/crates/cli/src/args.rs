use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lpl_core::reversal::{
    ReversalOptions, DEFAULT_INIT_STDDEV, DEFAULT_MAX_STEPS, DEFAULT_STEP_SIZE, DEFAULT_TOLERANCE,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "lpl",
    version,
    about = "Train small GANs, reverse their generators and score latent priors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Train a GAN and write its checkpoint.
    Train(TrainArgs),
    /// Reverse data through a generator and store the codes.
    Reverse(ReverseArgs),
    /// Score reversed codes against the isotropic prior.
    Pag(PagArgs),
    /// Cluster ratio of reversed codes grouped by data label.
    ReportStructure(StructureArgs),
    /// Rank prior draws by distance from the reversed codes.
    Disagree(DisagreeArgs),
    /// Fit a secondary GAN to a set of reversed codes.
    Pgan(PganArgs),
    /// Continue training a GAN on the prior induced by a secondary GAN.
    Retrain(RetrainArgs),
    /// Reverse data through a randomly initialised generator.
    RandomRecon(ReconArgs),
    /// Dump the singular value spectrum of reversed codes.
    Spectrum(SpectrumArgs),
    /// Check the joint KL decomposition on random linear-Gaussian models.
    CheckKl(CheckKlArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::Reverse(_) => "reverse",
            Command::Pag(_) => "pag",
            Command::ReportStructure(_) => "report-structure",
            Command::Disagree(_) => "disagree",
            Command::Pgan(_) => "pgan",
            Command::Retrain(_) => "retrain",
            Command::RandomRecon(_) => "random-recon",
            Command::Spectrum(_) => "spectrum",
            Command::CheckKl(_) => "check-kl",
            Command::Replay(_) => "replay",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Train(a) => &a.common,
            Command::Reverse(a) => &a.common,
            Command::Pag(a) => &a.common,
            Command::ReportStructure(a) => &a.common,
            Command::Disagree(a) => &a.common,
            Command::Pgan(a) => &a.common,
            Command::Retrain(a) => &a.common,
            Command::RandomRecon(a) => &a.common,
            Command::Spectrum(a) => &a.common,
            Command::CheckKl(a) => &a.common,
            Command::Replay(a) => &a.common,
        }
    }

    pub fn common_mut(&mut self) -> &mut Common {
        match self {
            Command::Train(a) => &mut a.common,
            Command::Reverse(a) => &mut a.common,
            Command::Pag(a) => &mut a.common,
            Command::ReportStructure(a) => &mut a.common,
            Command::Disagree(a) => &mut a.common,
            Command::Pgan(a) => &mut a.common,
            Command::Retrain(a) => &mut a.common,
            Command::RandomRecon(a) => &mut a.common,
            Command::Spectrum(a) => &mut a.common,
            Command::CheckKl(a) => &mut a.common,
            Command::Replay(a) => &mut a.common,
        }
    }
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct Common {
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct DataArgs {
    /// `ring`, `blobs`, or the path of an IDX image file.
    #[arg(long)]
    pub dataset: String,
    /// IDX label file to pair with an IDX image file.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Number of synthetic samples to generate.
    #[arg(long, default_value_t = 4000)]
    pub n_data: usize,
    /// Seed of the synthetic data generator.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    #[arg(long, default_value_t = 8)]
    pub ring_modes: usize,
    #[arg(long, default_value_t = 0.8)]
    pub ring_radius: f64,
    #[arg(long, default_value_t = 0.05)]
    pub ring_std: f64,
    /// Side length of blob images.
    #[arg(long, default_value_t = 8)]
    pub blob_grid: usize,
    /// Use only the first this many rows.
    #[arg(long)]
    pub rows: Option<usize>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ReversalArgs {
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    pub rev_steps: usize,
    #[arg(long, default_value_t = DEFAULT_STEP_SIZE)]
    pub rev_lr: f64,
    #[arg(long, default_value_t = DEFAULT_INIT_STDDEV)]
    pub init_std: f64,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    /// Weight of the `½λ‖z‖²` penalty.
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
}

impl ReversalArgs {
    pub fn options(&self) -> ReversalOptions {
        ReversalOptions {
            step_size: self.rev_lr,
            max_steps: self.rev_steps,
            init_stddev: self.init_std,
            tolerance: self.tolerance,
            l2_weight: self.l2,
            restarts: self.restarts,
            ..Default::default()
        }
    }
}

/// Where reversed codes come from: a stored code set, or a generator and data.
#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct CodeSource {
    /// Stored code set (`.lpc`).
    #[arg(long)]
    pub codes: Option<PathBuf>,
    /// Model checkpoint (`.lpl`) whose generator reverses the data.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Data to reverse; `ring`, `blobs` or an IDX path.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = 4000)]
    pub n_data: usize,
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    #[arg(long, default_value_t = 8)]
    pub ring_modes: usize,
    #[arg(long, default_value_t = 0.8)]
    pub ring_radius: f64,
    #[arg(long, default_value_t = 0.05)]
    pub ring_std: f64,
    #[arg(long, default_value_t = 8)]
    pub blob_grid: usize,
    #[arg(long)]
    pub rows: Option<usize>,
    #[command(flatten)]
    pub reversal: ReversalArgs,
}

impl CodeSource {
    pub fn data_args(&self) -> Option<DataArgs> {
        self.dataset.as_ref().map(|dataset| DataArgs {
            dataset: dataset.clone(),
            labels: self.labels.clone(),
            n_data: self.n_data,
            data_seed: self.data_seed,
            ring_modes: self.ring_modes,
            ring_radius: self.ring_radius,
            ring_std: self.ring_std,
            blob_grid: self.blob_grid,
            rows: self.rows,
        })
    }
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 20)]
    pub latent_dim: usize,
    /// Comma-separated hidden widths of the generator.
    #[arg(long, default_value = "64,64", value_delimiter = ',')]
    pub gen_widths: Vec<usize>,
    #[arg(long, default_value = "64,64", value_delimiter = ',')]
    pub disc_widths: Vec<usize>,
    /// Standard deviation of the isotropic latent prior.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 3e-4)]
    pub step_size: f64,
    /// Also write a checkpoint every this many steps (0 disables).
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: usize,
    /// Continue from this checkpoint instead of a fresh model.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ReverseArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub reversal: ReversalArgs,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct PagArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub source: CodeSource,
    /// Prior standard deviation; defaults to the checkpoint's prior, else 1.
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct StructureArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub source: CodeSource,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct DisagreeArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub source: CodeSource,
    /// Number of prior draws to rank.
    #[arg(long, default_value_t = lpl_core::prior::DEFAULT_N_PRIOR)]
    pub n: usize,
    /// Number of top-ranked draws to decode.
    #[arg(long, default_value_t = lpl_core::prior::DEFAULT_TOP_K)]
    pub k: usize,
    /// Columns of the sample grid.
    #[arg(long, default_value_t = 5)]
    pub cols: usize,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct PganArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub codes: PathBuf,
    /// Auxiliary noise dimension; defaults to the code dimension.
    #[arg(long)]
    pub aux_dim: Option<usize>,
    #[arg(long, default_value = "64,64,64", value_delimiter = ',')]
    pub widths: Vec<usize>,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 3e-4)]
    pub step_size: f64,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct RetrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Checkpoint written by `pgan`.
    #[arg(long)]
    pub pgan: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 3e-4)]
    pub step_size: f64,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ReconArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 128)]
    pub latent_dim: usize,
    #[arg(long, default_value = "1024,1024", value_delimiter = ',')]
    pub widths: Vec<usize>,
    /// Steps at which reconstructions are captured; the last is the run length.
    #[arg(long, default_value = "5,20,400", value_delimiter = ',')]
    pub snapshots: Vec<usize>,
    #[arg(long, default_value_t = lpl_core::reversal::DEFAULT_STEP_SIZE)]
    pub rev_lr: f64,
    #[arg(long, default_value_t = lpl_core::reversal::DEFAULT_INIT_STDDEV)]
    pub init_std: f64,
    #[arg(long, default_value_t = 8)]
    pub cols: usize,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub source: CodeSource,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct CheckKlArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
    /// Largest latent and data dimension drawn.
    #[arg(long, default_value_t = 4)]
    pub max_dim: usize,
    /// Largest acceptable gap.
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub manifest: PathBuf,
}
