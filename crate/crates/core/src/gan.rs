//! Adversarial training of a generator/discriminator pair against a
//! configurable latent prior.
//!
//! The discriminator minimises `mean(−log D(x) − log(1 − D(G(z))))` and the
//! generator minimises the non-saturating `mean(−log D(G(z)))`. Scores are
//! clamped to `[1e-7, 1 − 1e-7]` before taking logs; the gradient uses the
//! clamped score. Each step does one discriminator update followed by one
//! generator update through the (already updated, frozen) discriminator.

use std::collections::HashMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;

use crate::data::checkpoint::write_checkpoint;
use crate::data::csv::{append_csv, CsvField};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::network::{mlp_specs, Gradients, MlpNetwork, Trace};
use crate::nn::random::{self, derive_seed};
use crate::nn::rmsprop::{rmsprop_step, RmsPropState, DEFAULT_STEP_SIZE};
use crate::nn::{Activation, DEFAULT_LEAK};

pub const SCORE_CLAMP: f64 = 1e-7;
pub const DEFAULT_BATCH_SIZE: usize = 100;
pub const DEFAULT_LATENT_DIM: usize = 20;
pub const METRIC_HEADER: &str = "step,d_loss,g_loss";

const STREAM_PRIOR: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_STEP: u64 = 3;

/// Where generator inputs come from.
#[derive(Clone, Debug, PartialEq)]
pub enum PriorKind {
    IsotropicGaussian {
        sigma: f64,
    },
    /// `mapping(base sample)`, with the mapping held fixed.
    Induced {
        mapping: MlpNetwork,
        base: Box<PriorSpec>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriorSpec {
    kind: PriorKind,
    dim: usize,
}

impl PriorSpec {
    pub fn isotropic(dim: usize, sigma: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("prior dimension must be positive".into()));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!(
                "prior sigma must be positive, got {sigma}"
            )));
        }
        Ok(PriorSpec {
            kind: PriorKind::IsotropicGaussian { sigma },
            dim,
        })
    }

    pub fn induced(mapping: MlpNetwork, base: PriorSpec) -> Result<Self> {
        if mapping.in_dim() != base.dim {
            return Err(Error::Config(format!(
                "mapping takes {} inputs but base prior has dimension {}",
                mapping.in_dim(),
                base.dim
            )));
        }
        let dim = mapping.out_dim();
        Ok(PriorSpec {
            kind: PriorKind::Induced {
                mapping,
                base: Box::new(base),
            },
            dim,
        })
    }

    pub fn kind(&self) -> &PriorKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `n` draws, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Matrix> {
        match &self.kind {
            PriorKind::IsotropicGaussian { sigma } => {
                Ok(random::gaussian_sample(n, self.dim, 0.0, *sigma, seed))
            }
            PriorKind::Induced { mapping, base } => mapping.predict(&base.sample(n, seed)?),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GanModel {
    pub generator: MlpNetwork,
    pub discriminator: MlpNetwork,
    pub prior: PriorSpec,
    pub generator_opt: RmsPropState,
    pub discriminator_opt: RmsPropState,
    /// Number of training steps taken so far.
    pub step: u64,
    /// Seed of the most recent training run; resuming with it continues the
    /// same batch and noise streams.
    pub train_seed: u64,
}

/// Hidden widths for the desk-scale MLP generator and discriminator.
#[derive(Clone, Debug, PartialEq)]
pub struct GanArchitecture {
    pub latent_dim: usize,
    pub data_dim: usize,
    pub generator_widths: Vec<usize>,
    pub discriminator_widths: Vec<usize>,
    /// Output activation of the generator; `Tanh` for data in `[−1, 1]`.
    pub generator_output: Activation,
}

impl GanArchitecture {
    pub fn new(latent_dim: usize, data_dim: usize) -> Self {
        GanArchitecture {
            latent_dim,
            data_dim,
            generator_widths: vec![64, 64],
            discriminator_widths: vec![64, 64],
            generator_output: Activation::Tanh,
        }
    }

    /// ReLU hidden layers, tanh (or configured) output.
    pub fn generator_specs(&self) -> Vec<crate::nn::LayerSpec> {
        mlp_specs(
            self.latent_dim,
            &self.generator_widths,
            self.data_dim,
            Activation::Relu,
            self.generator_output,
        )
    }

    /// Leaky-ReLU hidden layers, sigmoid output.
    pub fn discriminator_specs(&self) -> Vec<crate::nn::LayerSpec> {
        mlp_specs(
            self.data_dim,
            &self.discriminator_widths,
            1,
            Activation::LeakyRelu(DEFAULT_LEAK),
            Activation::Sigmoid,
        )
    }
}

impl GanModel {
    pub fn new(
        generator: MlpNetwork,
        discriminator: MlpNetwork,
        prior: PriorSpec,
        step_size: f64,
    ) -> Result<Self> {
        if generator.in_dim() != prior.dim() {
            return Err(Error::Config(format!(
                "generator takes {} inputs but prior has dimension {}",
                generator.in_dim(),
                prior.dim()
            )));
        }
        if discriminator.in_dim() != generator.out_dim() || discriminator.out_dim() != 1 {
            return Err(Error::Config(format!(
                "discriminator must map {} -> 1, got {} -> {}",
                generator.out_dim(),
                discriminator.in_dim(),
                discriminator.out_dim()
            )));
        }
        let generator_opt = RmsPropState::new(&generator, step_size)?;
        let discriminator_opt = RmsPropState::new(&discriminator, step_size)?;
        Ok(GanModel {
            generator,
            discriminator,
            prior,
            generator_opt,
            discriminator_opt,
            step: 0,
            train_seed: 0,
        })
    }

    /// Freshly initialised model with an isotropic Gaussian prior.
    pub fn build(
        arch: &GanArchitecture,
        prior_sigma: f64,
        step_size: f64,
        seed: u64,
    ) -> Result<Self> {
        let generator = MlpNetwork::init(&arch.generator_specs(), derive_seed(seed, &[10]))?;
        let discriminator =
            MlpNetwork::init(&arch.discriminator_specs(), derive_seed(seed, &[11]))?;
        let prior = PriorSpec::isotropic(arch.latent_dim, prior_sigma)?;
        GanModel::new(generator, discriminator, prior, step_size)
    }

    pub fn latent_dim(&self) -> usize {
        self.generator.in_dim()
    }

    pub fn data_dim(&self) -> usize {
        self.generator.out_dim()
    }
}

#[inline]
fn clamp_score(s: f64) -> f64 {
    s.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP)
}

fn check_scores(scores: &Matrix) -> Result<()> {
    if let Some(s) = scores
        .as_slice()
        .iter()
        .find(|s| !(**s >= 0.0 && **s <= 1.0))
    {
        return Err(Error::Numeric(format!(
            "discriminator score {s} outside [0, 1]"
        )));
    }
    Ok(())
}

/// `mean(−log real − log(1 − fake))` over the batch.
pub fn discriminator_loss(real_scores: &Matrix, fake_scores: &Matrix) -> Result<f64> {
    check_scores(real_scores)?;
    check_scores(fake_scores)?;
    let real: f64 = real_scores
        .as_slice()
        .iter()
        .map(|&s| -clamp_score(s).ln())
        .sum::<f64>()
        / real_scores.as_slice().len().max(1) as f64;
    let fake: f64 = fake_scores
        .as_slice()
        .iter()
        .map(|&s| -(1.0 - clamp_score(s)).ln())
        .sum::<f64>()
        / fake_scores.as_slice().len().max(1) as f64;
    Ok(real + fake)
}

/// Non-saturating generator loss `mean(−log fake)`.
pub fn generator_loss(fake_scores: &Matrix) -> Result<f64> {
    check_scores(fake_scores)?;
    Ok(fake_scores
        .as_slice()
        .iter()
        .map(|&s| -clamp_score(s).ln())
        .sum::<f64>()
        / fake_scores.as_slice().len().max(1) as f64)
}

fn add_grads(a: &mut Gradients, b: &Gradients) {
    for (x, y) in a.layers.iter_mut().zip(&b.layers) {
        for (p, q) in x
            .weights
            .as_mut_slice()
            .iter_mut()
            .zip(y.weights.as_slice())
        {
            *p += q;
        }
        for (p, q) in x.biases.iter_mut().zip(&y.biases) {
            *p += q;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepMetrics {
    /// 1-based index of the step these losses belong to.
    pub step: u64,
    pub d_loss: f64,
    pub g_loss: f64,
}

/// One discriminator update then one generator update.
///
/// The reported losses are evaluated before either update.
pub fn gan_train_step(model: &mut GanModel, real_batch: &Matrix, seed: u64) -> Result<StepMetrics> {
    if real_batch.cols() != model.discriminator.in_dim() {
        return Err(Error::Shape(format!(
            "real batch has {} columns, discriminator expects {}",
            real_batch.cols(),
            model.discriminator.in_dim()
        )));
    }
    let n = real_batch.rows();
    if n == 0 {
        return Err(Error::Shape("empty real batch".into()));
    }
    let step_index = model.step;
    let z = model.prior.sample(n, derive_seed(seed, &[STREAM_PRIOR]))?;
    let (fake, gen_trace) = model.generator.forward(&z)?;

    let (real_scores, real_trace) = model.discriminator.forward(real_batch)?;
    let (fake_scores, fake_trace) = model.discriminator.forward(&fake)?;
    let d_loss = discriminator_loss(&real_scores, &fake_scores)?;
    let g_loss = generator_loss(&fake_scores)?;
    if !d_loss.is_finite() || !g_loss.is_finite() {
        return Err(Error::NonFiniteLoss { step: step_index });
    }

    update_discriminator(
        model,
        (&real_scores, &real_trace),
        (&fake_scores, &fake_trace),
    )?;
    // The generator sees the updated discriminator, which stays fixed here.
    update_generator(model, &fake, &gen_trace)?;

    model.step += 1;
    Ok(StepMetrics {
        step: model.step,
        d_loss,
        g_loss,
    })
}

fn update_discriminator(
    model: &mut GanModel,
    (real_scores, real_trace): (&Matrix, &Trace),
    (fake_scores, fake_trace): (&Matrix, &Trace),
) -> Result<()> {
    let inv_n = 1.0 / real_scores.rows() as f64;
    let real_grad = real_scores.map(|s| -inv_n / clamp_score(s));
    let fake_grad = fake_scores.map(|s| inv_n / (1.0 - clamp_score(s)));
    let (mut d_grads, _) = model.discriminator.backward(real_trace, &real_grad)?;
    let (d_fake_grads, _) = model.discriminator.backward(fake_trace, &fake_grad)?;
    add_grads(&mut d_grads, &d_fake_grads);
    rmsprop_step(
        &mut model.discriminator,
        &d_grads,
        &mut model.discriminator_opt,
    )
}

fn update_generator(model: &mut GanModel, fake: &Matrix, gen_trace: &Trace) -> Result<()> {
    let inv_n = 1.0 / fake.rows() as f64;
    let (scores, trace) = model.discriminator.forward(fake)?;
    let score_grad = scores.map(|s| -inv_n / clamp_score(s));
    let fake_input_grad = model.discriminator.backward_input(&trace, &score_grad)?;
    let (g_grads, _) = model.generator.backward(gen_trace, &fake_input_grad)?;
    rmsprop_step(&mut model.generator, &g_grads, &mut model.generator_opt)
}

/// One discriminator update on `(real, fake)`; the generator is untouched.
pub fn discriminator_update(model: &mut GanModel, real: &Matrix, fake: &Matrix) -> Result<()> {
    if real.rows() != fake.rows() || real.rows() == 0 {
        return Err(Error::Shape(format!(
            "{} real rows against {} fake rows",
            real.rows(),
            fake.rows()
        )));
    }
    let (real_scores, real_trace) = model.discriminator.forward(real)?;
    let (fake_scores, fake_trace) = model.discriminator.forward(fake)?;
    update_discriminator(
        model,
        (&real_scores, &real_trace),
        (&fake_scores, &fake_trace),
    )
}

/// One generator update on codes `z` through the current discriminator,
/// which is untouched.
pub fn generator_update(model: &mut GanModel, z: &Matrix) -> Result<()> {
    if z.rows() == 0 {
        return Err(Error::Shape("empty code batch".into()));
    }
    let (fake, gen_trace) = model.generator.forward(z)?;
    update_generator(model, &fake, &gen_trace)
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: usize,
    pub step_size: f64,
    pub seed: u64,
    /// Write a checkpoint whenever the model's step count is a multiple of this; 0 disables.
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
    pub log_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: DEFAULT_BATCH_SIZE,
            steps: 2000,
            step_size: DEFAULT_STEP_SIZE,
            seed: 0,
            checkpoint_every: 0,
            checkpoint_dir: None,
            log_path: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "batch size must be at least 2, got {}",
                self.batch_size
            )));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::Config("step size must be positive".into()));
        }
        if self.checkpoint_every > 0 && self.checkpoint_dir.is_none() {
            return Err(Error::Config(
                "checkpoint cadence set without a directory".into(),
            ));
        }
        Ok(())
    }
}

/// Minibatch indices as a pure function of `(seed, step)`.
///
/// Steps walk through an endless sequence of per-epoch shuffles, so a resumed
/// run sees exactly the batches an uninterrupted run would.
#[derive(Debug)]
pub struct BatchSchedule {
    n: usize,
    batch_size: usize,
    seed: u64,
    cache: HashMap<u64, Vec<usize>>,
}

impl BatchSchedule {
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Self {
        BatchSchedule {
            n,
            batch_size,
            seed,
            cache: HashMap::new(),
        }
    }

    fn permutation(&mut self, epoch: u64) -> &[usize] {
        let (n, seed) = (self.n, self.seed);
        self.cache.entry(epoch).or_insert_with(|| {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut random::rng(derive_seed(
                seed,
                &[STREAM_SHUFFLE, epoch],
            )));
            perm
        })
    }

    pub fn indices(&mut self, step: u64) -> Vec<usize> {
        let n = self.n as u64;
        let start = step * self.batch_size as u64;
        let first_epoch = start / n;
        self.cache.retain(|&e, _| e >= first_epoch);
        (0..self.batch_size as u64)
            .map(|i| {
                let pos = start + i;
                self.permutation(pos / n)[(pos % n) as usize]
            })
            .collect()
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrainOutcome {
    pub metrics: Vec<StepMetrics>,
    pub checkpoints: Vec<PathBuf>,
}

fn checkpoint_path(dir: &std::path::Path, step: u64) -> PathBuf {
    dir.join(format!("step_{step:08}.lpl"))
}

/// Run `config.steps` training steps on shuffled minibatches of `dataset` rows.
///
/// Checkpoints are written at the configured cadence plus once at the end
/// (`final.lpl`); metric rows are appended to the log as they are produced.
pub fn gan_train(
    model: &mut GanModel,
    dataset: &Matrix,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.rows() == 0 {
        return Err(Error::Config("cannot train on an empty dataset".into()));
    }
    let mut outcome = TrainOutcome::default();
    if config.steps == 0 {
        return Ok(outcome);
    }
    if let Some(dir) = &config.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    model.generator_opt.step_size = config.step_size;
    model.discriminator_opt.step_size = config.step_size;
    model.train_seed = config.seed;

    let mut schedule = BatchSchedule::new(dataset.rows(), config.batch_size, config.seed);
    for _ in 0..config.steps {
        let step = model.step;
        let batch = dataset.select_rows(&schedule.indices(step));
        let metrics = gan_train_step(
            model,
            &batch,
            derive_seed(config.seed, &[STREAM_STEP, step]),
        )?;
        if let Some(log) = &config.log_path {
            append_csv(
                log,
                METRIC_HEADER,
                &[
                    CsvField::Int(metrics.step as i64),
                    CsvField::Real(metrics.d_loss),
                    CsvField::Real(metrics.g_loss),
                ],
            )?;
        }
        outcome.metrics.push(metrics);
        if config.checkpoint_every > 0 && model.step.is_multiple_of(config.checkpoint_every as u64) {
            if let Some(dir) = &config.checkpoint_dir {
                let path = checkpoint_path(dir, model.step);
                write_checkpoint(model, &path)?;
                outcome.checkpoints.push(path);
            }
        }
    }
    if let Some(dir) = &config.checkpoint_dir {
        let path = dir.join("final.lpl");
        write_checkpoint(model, &path)?;
        outcome.checkpoints.push(path);
    }
    Ok(outcome)
}

/// Draw `n` prior samples and map them through the generator.
pub fn sample_generator(model: &GanModel, n: usize, seed: u64) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    model.generator.predict(&model.prior.sample(n, seed)?)
}

/// Discriminator loss of `model` on a real batch against fresh fakes, without updating anything.
pub fn evaluate_discriminator(model: &GanModel, real_batch: &Matrix, seed: u64) -> Result<f64> {
    let fake = sample_generator(model, real_batch.rows(), seed)?;
    discriminator_loss(
        &model.discriminator.predict(real_batch)?,
        &model.discriminator.predict(&fake)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerSpec;

    fn tiny_model(seed: u64) -> GanModel {
        let mut arch = GanArchitecture::new(2, 3);
        arch.generator_widths = vec![8];
        arch.discriminator_widths = vec![8];
        GanModel::build(&arch, 1.0, DEFAULT_STEP_SIZE, seed).unwrap()
    }

    #[test]
    fn loss_values() {
        let half = Matrix::filled(4, 1, 0.5);
        assert!((discriminator_loss(&half, &half).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-12);
        let d =
            discriminator_loss(&Matrix::row_vector(&[0.9]), &Matrix::row_vector(&[0.2])).unwrap();
        assert!((d - 0.328_504_066_972_036).abs() < 1e-12);
        assert!((generator_loss(&half).unwrap() - 2f64.ln()).abs() < 1e-12);
        let g = generator_loss(&Matrix::from_rows(&[[0.25], [0.75]]).unwrap()).unwrap();
        assert!((g - (4f64.ln() + (4.0f64 / 3.0).ln()) / 2.0).abs() < 1e-12);
        assert!((g - 0.836_988).abs() < 1e-5);
    }

    #[test]
    fn perfect_discriminator_limit() {
        let d =
            discriminator_loss(&Matrix::row_vector(&[1.0]), &Matrix::row_vector(&[0.0])).unwrap();
        assert!(d < 1e-6);
        assert!(generator_loss(&Matrix::row_vector(&[1.0])).unwrap() < 1e-6);
    }

    #[test]
    fn scores_outside_unit_interval_rejected() {
        assert!(matches!(
            generator_loss(&Matrix::row_vector(&[1.5])),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn step_reports_pre_update_losses() {
        let mut model = tiny_model(1);
        let real = random::gaussian_sample(6, 3, 0.0, 0.5, 2).map(f64::tanh);
        let seed = 99;
        let z = model
            .prior
            .sample(6, derive_seed(seed, &[STREAM_PRIOR]))
            .unwrap();
        let fake = model.generator.predict(&z).unwrap();
        let rs = model.discriminator.predict(&real).unwrap();
        let fs = model.discriminator.predict(&fake).unwrap();
        let expected = (
            discriminator_loss(&rs, &fs).unwrap(),
            generator_loss(&fs).unwrap(),
        );
        let m = gan_train_step(&mut model, &real, seed).unwrap();
        assert_eq!((m.d_loss, m.g_loss), expected);
        assert_eq!(m.step, 1);
    }

    #[test]
    fn step_is_deterministic() {
        let real = random::gaussian_sample(6, 3, 0.0, 0.5, 2).map(f64::tanh);
        let mut a = tiny_model(4);
        let mut b = tiny_model(4);
        gan_train_step(&mut a, &real, 17).unwrap();
        gan_train_step(&mut b, &real, 17).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn induced_prior_routes_through_mapping() {
        let base = PriorSpec::isotropic(2, 1.0).unwrap();
        let h = MlpNetwork::init(&[LayerSpec::new(2, 3, Activation::Tanh)], 5).unwrap();
        let prior = PriorSpec::induced(h.clone(), base.clone()).unwrap();
        assert_eq!(prior.dim(), 3);
        let direct = h.predict(&base.sample(10, 8).unwrap()).unwrap();
        assert_eq!(prior.sample(10, 8).unwrap(), direct);
    }

    #[test]
    fn zero_generator_outputs_zero() {
        let specs = [LayerSpec::new(2, 3, Activation::Tanh)];
        let gen =
            MlpNetwork::from_parameters(&specs, vec![(Matrix::zeros(2, 3), vec![0.0; 3])]).unwrap();
        let disc = MlpNetwork::init(&[LayerSpec::new(3, 1, Activation::Sigmoid)], 0).unwrap();
        let model = GanModel::new(gen, disc, PriorSpec::isotropic(2, 1.0).unwrap(), 1e-3).unwrap();
        let out = sample_generator(&model, 5, 3).unwrap();
        assert_eq!(out.shape(), (5, 3));
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(out, sample_generator(&model, 5, 3).unwrap());
    }

    #[test]
    fn model_dimension_checks() {
        let gen = MlpNetwork::init(&[LayerSpec::new(2, 3, Activation::Tanh)], 0).unwrap();
        let disc = MlpNetwork::init(&[LayerSpec::new(4, 1, Activation::Sigmoid)], 0).unwrap();
        assert!(GanModel::new(
            gen.clone(),
            disc,
            PriorSpec::isotropic(2, 1.0).unwrap(),
            1e-3
        )
        .is_err());
        let disc = MlpNetwork::init(&[LayerSpec::new(3, 1, Activation::Sigmoid)], 0).unwrap();
        assert!(GanModel::new(gen, disc, PriorSpec::isotropic(3, 1.0).unwrap(), 1e-3).is_err());
    }

    #[test]
    fn schedule_is_pure_in_step() {
        let mut a = BatchSchedule::new(7, 3, 5);
        let seq: Vec<Vec<usize>> = (0..6).map(|s| a.indices(s)).collect();
        let mut b = BatchSchedule::new(7, 3, 5);
        assert_eq!(b.indices(4), seq[4]);
        assert_eq!(b.indices(1), seq[1]);
        // every epoch is a permutation
        let flat: Vec<usize> = seq.concat();
        let mut first: Vec<usize> = flat[..7].to_vec();
        first.sort();
        assert_eq!(first, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn small_batches_rejected() {
        let mut model = tiny_model(0);
        let cfg = TrainConfig {
            batch_size: 1,
            ..TrainConfig::default()
        };
        assert!(gan_train(&mut model, &Matrix::zeros(4, 3), &cfg).is_err());
    }
}
