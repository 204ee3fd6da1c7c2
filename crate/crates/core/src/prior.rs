//! Learning a data-induced latent prior: reverse the dataset once, fit a
//! secondary GAN to the codes, and retrain the primary GAN on the result.
//! Also ranks prior draws by how far they sit from the reversed codes.

use std::path::{Path, PathBuf};

use crate::data::checkpoint::write_codes;
use crate::data::csv::{write_csv, CsvField};
use crate::data::pgm::{image_side, write_ppm_grid};
use crate::error::{Error, Result};
use crate::gan::{
    gan_train, gan_train_step, BatchSchedule, GanArchitecture, GanModel, PriorSpec, StepMetrics,
    TrainConfig, TrainOutcome,
};
use crate::matrix::{squared_distance, Matrix};
use crate::metrics::codes::{LatentCodeSet, RowStatus};
use crate::nn::network::MlpNetwork;
use crate::nn::random::derive_seed;
use crate::nn::rmsprop::DEFAULT_STEP_SIZE;
use crate::nn::Activation;
use crate::par::{self, Execution};
use crate::reversal::{reverse_batch, ReversalOptions};

pub const DEFAULT_N_PRIOR: usize = 1000;
pub const DEFAULT_TOP_K: usize = 20;
pub const RANKING_HEADER: &str = "rank,index,score";

const STREAM_PGAN_INIT: u64 = 0x61;
const STREAM_PGAN_STEP: u64 = 0x62;

/// Reverse every row of `data` through `generator`, optionally persisting
/// the code set to `out`.
pub fn collect_induced_codes(
    generator: &MlpNetwork,
    data: &Matrix,
    opts: &ReversalOptions,
    seed: u64,
    source: impl Into<String>,
    out: Option<&Path>,
) -> Result<LatentCodeSet> {
    let codes = reverse_batch(generator, data, opts, seed, source)?;
    if let Some(path) = out {
        write_codes(&codes, path)?;
    }
    Ok(codes)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PganConfig {
    /// Dimension of the auxiliary noise; `None` means the code dimension.
    pub aux_dim: Option<usize>,
    /// Hidden widths; with the output layer each side has four layers.
    pub generator_widths: Vec<usize>,
    pub discriminator_widths: Vec<usize>,
    pub steps: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub seed: u64,
    /// Keep a copy of the mapping every this many steps; training that goes
    /// non-finite falls back to the latest copy.
    pub snapshot_every: usize,
}

impl Default for PganConfig {
    fn default() -> Self {
        PganConfig {
            aux_dim: None,
            generator_widths: vec![64, 64, 64],
            discriminator_widths: vec![64, 64, 64],
            steps: 2000,
            batch_size: 100,
            step_size: DEFAULT_STEP_SIZE,
            seed: 0,
            snapshot_every: 100,
        }
    }
}

impl PganConfig {
    pub fn resolved_aux_dim(&self, code_dim: usize) -> Result<usize> {
        let aux = self.aux_dim.unwrap_or(code_dim);
        if aux < code_dim {
            return Err(Error::Config(format!(
                "auxiliary dimension {aux} is smaller than the code dimension {code_dim}"
            )));
        }
        Ok(aux)
    }
}

#[derive(Clone, Debug)]
pub struct PganOutcome {
    /// The learned mapping `h` from auxiliary noise to codes.
    pub mapping: MlpNetwork,
    pub model: GanModel,
    pub metrics: Vec<StepMetrics>,
    /// Step at which a non-finite loss stopped training; `mapping` is then
    /// the last snapshot.
    pub diverged_at: Option<u64>,
}

/// Fit a secondary GAN whose generator maps `N(0, I_{d′})` onto the code rows.
/// Rows whose reversal failed are left out.
pub fn train_pgan(codes: &LatentCodeSet, config: &PganConfig) -> Result<PganOutcome> {
    let d = codes.dim();
    let aux = config.resolved_aux_dim(d)?;
    let keep: Vec<usize> = (0..codes.len())
        .filter(|&i| codes.status[i] != RowStatus::Failed)
        .collect();
    if keep.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if config.batch_size < 2 {
        return Err(Error::Config("batch size must be at least 2".into()));
    }
    let real = codes.codes.select_rows(&keep);
    let arch = GanArchitecture {
        latent_dim: aux,
        data_dim: d,
        generator_widths: config.generator_widths.clone(),
        discriminator_widths: config.discriminator_widths.clone(),
        generator_output: Activation::Identity,
    };
    let mut model = GanModel::build(
        &arch,
        1.0,
        config.step_size,
        derive_seed(config.seed, &[STREAM_PGAN_INIT]),
    )?;
    model.train_seed = config.seed;
    let mut schedule = BatchSchedule::new(real.rows(), config.batch_size, config.seed);
    let mut metrics = Vec::with_capacity(config.steps);
    let mut snapshot = model.generator.clone();
    let mut diverged_at = None;
    for _ in 0..config.steps {
        let step = model.step;
        let batch = real.select_rows(&schedule.indices(step));
        match gan_train_step(
            &mut model,
            &batch,
            derive_seed(config.seed, &[STREAM_PGAN_STEP, step]),
        ) {
            Ok(m) => metrics.push(m),
            Err(Error::NonFiniteLoss { .. }) | Err(Error::NonFiniteGradient { .. }) => {
                diverged_at = Some(model.step);
                break;
            }
            Err(e) => return Err(e),
        }
        if config.snapshot_every > 0 && model.step % config.snapshot_every as u64 == 0 {
            snapshot = model.generator.clone();
        }
    }
    let mapping = if diverged_at.is_some() {
        snapshot
    } else {
        model.generator.clone()
    };
    Ok(PganOutcome {
        mapping,
        model,
        metrics,
        diverged_at,
    })
}

/// The prior `h(z′)` with `z′ ~ N(0, I_{d′})`.
pub fn induced_prior_sampler(mapping: &MlpNetwork) -> Result<PriorSpec> {
    PriorSpec::induced(
        mapping.clone(),
        PriorSpec::isotropic(mapping.in_dim(), 1.0)?,
    )
}

/// Continue training `model` with its prior replaced by the one induced by
/// `mapping`. The mapping is never updated. With `config.steps == 0` the
/// model is returned unchanged.
pub fn retrain_with_induced_prior(
    model: &GanModel,
    mapping: &MlpNetwork,
    data: &Matrix,
    config: &TrainConfig,
) -> Result<(GanModel, TrainOutcome)> {
    if mapping.out_dim() != model.latent_dim() {
        return Err(Error::Config(format!(
            "mapping outputs {} values but the generator takes {}",
            mapping.out_dim(),
            model.latent_dim()
        )));
    }
    let mut next = model.clone();
    if config.steps == 0 {
        return Ok((next, TrainOutcome::default()));
    }
    next.prior = induced_prior_sampler(mapping)?;
    let outcome = gan_train(&mut next, data, config)?;
    Ok((next, outcome))
}

/// `mean_j ‖z − ẑ_j‖²` for each candidate row, paired with its index and
/// sorted descending by score (ties by index).
pub fn rank_candidates(
    candidates: &Matrix,
    codes: &Matrix,
    exec: Execution,
) -> Result<Vec<(usize, f64)>> {
    if codes.rows() == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if candidates.cols() != codes.cols() {
        return Err(Error::Shape(format!(
            "candidates have {} coordinates, codes have {}",
            candidates.cols(),
            codes.cols()
        )));
    }
    let n = codes.rows() as f64;
    let scores = par::map_range(candidates.rows(), exec, |i| {
        let z = candidates.row(i);
        codes
            .row_iter()
            .map(|c| squared_distance(z, c))
            .sum::<f64>()
            / n
    });
    let mut ranked: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisagreementReport {
    /// Prior draws that were ranked.
    pub candidates: Matrix,
    /// Indices into `candidates`, most disagreeing first.
    pub ranked_indices: Vec<usize>,
    /// Scores in ranked order (descending).
    pub scores: Vec<f64>,
    /// Generator outputs for the top `k` candidates.
    pub top_samples: Matrix,
}

impl DisagreementReport {
    /// `ranking.csv` (top `k` rows) and, for square images, `top_samples.pgm`.
    pub fn write_outputs(&self, dir: impl AsRef<Path>, cols: usize) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let k = self.top_samples.rows();
        let rows: Vec<Vec<CsvField>> = (0..k)
            .map(|r| {
                vec![
                    (r + 1).into(),
                    self.ranked_indices[r].into(),
                    self.scores[r].into(),
                ]
            })
            .collect();
        let csv = dir.join("ranking.csv");
        write_csv(&csv, RANKING_HEADER, &rows)?;
        let mut written = vec![csv];
        if image_side(self.top_samples.cols()).is_some() {
            let p = dir.join("top_samples.pgm");
            write_ppm_grid(&self.top_samples, cols, &p)?;
            written.push(p);
        }
        Ok(written)
    }
}

/// Draw `n_prior` samples from `prior`, rank them by mean squared distance
/// to the reversed codes, and decode the top `k` through `generator`.
pub fn disagreement_rank(
    generator: &MlpNetwork,
    prior: &PriorSpec,
    codes: &LatentCodeSet,
    n_prior: usize,
    k: usize,
    seed: u64,
) -> Result<DisagreementReport> {
    if codes.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if k == 0 || n_prior < k {
        return Err(Error::Config(format!(
            "need 1 <= k <= n_prior, got k = {k}, n_prior = {n_prior}"
        )));
    }
    if prior.dim() != codes.dim() || generator.in_dim() != codes.dim() {
        return Err(Error::Shape(format!(
            "prior dim {}, generator input {}, code dim {}",
            prior.dim(),
            generator.in_dim(),
            codes.dim()
        )));
    }
    let candidates = prior.sample(n_prior, seed)?;
    let ranked = rank_candidates(&candidates, &codes.codes, Execution::Parallel)?;
    let ranked_indices: Vec<usize> = ranked.iter().map(|r| r.0).collect();
    let scores: Vec<f64> = ranked.iter().map(|r| r.1).collect();
    let top_samples = generator.predict(&candidates.select_rows(&ranked_indices[..k]))?;
    Ok(DisagreementReport {
        candidates,
        ranked_indices,
        scores,
        top_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gan::GanArchitecture;
    use crate::nn::random::gaussian_sample;

    #[test]
    fn hand_ranked_pair() {
        let codes = Matrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0]]).unwrap();
        let cands = Matrix::from_rows(&[[0.0, 0.0], [0.0, 2.0]]).unwrap();
        let r = rank_candidates(&cands, &codes, Execution::Sequential).unwrap();
        assert_eq!(r, vec![(1, 5.0), (0, 1.0)]);
    }

    #[test]
    fn single_zero_code_ranks_by_norm() {
        let codes = Matrix::zeros(1, 3);
        let cands = gaussian_sample(50, 3, 0.0, 1.0, 2);
        let r = rank_candidates(&cands, &codes, Execution::Parallel).unwrap();
        for (i, s) in &r {
            let norm: f64 = cands.row(*i).iter().map(|v| v * v).sum();
            assert_eq!(*s, norm);
        }
        assert!(r.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn empty_codes_rejected() {
        assert!(rank_candidates(
            &Matrix::zeros(2, 2),
            &Matrix::zeros(0, 2),
            Execution::Sequential
        )
        .is_err());
    }

    #[test]
    fn identity_mapping_reproduces_base() {
        let h = MlpNetwork::linear(Matrix::identity(3), vec![0.0; 3]).unwrap();
        let induced = induced_prior_sampler(&h).unwrap();
        let base = PriorSpec::isotropic(3, 1.0).unwrap();
        assert_eq!(induced.sample(20, 4).unwrap(), base.sample(20, 4).unwrap());
    }

    #[test]
    fn constant_mapping_is_constant() {
        let h = MlpNetwork::linear(Matrix::zeros(2, 2), vec![0.25, -0.5]).unwrap();
        let s = induced_prior_sampler(&h).unwrap().sample(10, 1).unwrap();
        assert!(s.row_iter().all(|r| r == [0.25, -0.5]));
    }

    #[test]
    fn aux_dim_below_code_dim_rejected() {
        let codes = LatentCodeSet::from_codes(gaussian_sample(10, 3, 0.0, 1.0, 1), "c");
        let cfg = PganConfig {
            aux_dim: Some(2),
            steps: 1,
            ..PganConfig::default()
        };
        assert!(matches!(train_pgan(&codes, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn zero_step_retrain_is_identity() {
        let mut arch = GanArchitecture::new(2, 3);
        arch.generator_widths = vec![4];
        arch.discriminator_widths = vec![4];
        let model = GanModel::build(&arch, 1.0, 3e-4, 3).unwrap();
        let h = MlpNetwork::linear(Matrix::identity(2), vec![0.0; 2]).unwrap();
        let cfg = TrainConfig {
            steps: 0,
            ..TrainConfig::default()
        };
        let (out, _) = retrain_with_induced_prior(&model, &h, &Matrix::zeros(5, 3), &cfg).unwrap();
        assert_eq!(out, model);
    }

    #[test]
    fn disagreement_report_shapes() {
        let g = MlpNetwork::linear(Matrix::identity(4), vec![0.0; 4]).unwrap();
        let prior = PriorSpec::isotropic(4, 1.0).unwrap();
        let codes = LatentCodeSet::from_codes(gaussian_sample(30, 4, 0.0, 0.2, 5), "c");
        let r = disagreement_rank(&g, &prior, &codes, 100, 9, 6).unwrap();
        assert_eq!(r.top_samples.shape(), (9, 4));
        assert_eq!(r.ranked_indices.len(), 100);
        assert!(r.scores.windows(2).all(|w| w[0] >= w[1]));
        let again = disagreement_rank(&g, &prior, &codes, 100, 9, 6).unwrap();
        assert_eq!(r, again);
        let dir = tempfile::tempdir().unwrap();
        let files = r.write_outputs(dir.path(), 3).unwrap();
        assert_eq!(files.len(), 2);
        let csv = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(csv.lines().count(), 10);
        assert!(disagreement_rank(&g, &prior, &codes, 5, 9, 6).is_err());
    }
}
