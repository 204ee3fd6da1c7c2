//! Recovering latent codes for given outputs by gradient descent through a
//! fixed generator, plus local curvature diagnostics at a perfect pre-image.

use std::path::Path;

use crate::data::csv::{write_csv, CsvField};
use crate::data::pgm::write_ppm_grid;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;
use crate::matrix::Matrix;
use crate::metrics::codes::{LatentCodeSet, RowStatus};
use crate::nn::network::{LayerSpec, MlpNetwork};
use crate::nn::random::{self, content_hash, derive_seed};
use crate::par::{self, Execution};

pub const DEFAULT_STEP_SIZE: f64 = 0.05;
pub const DEFAULT_MAX_STEPS: usize = 400;
pub const DEFAULT_INIT_STDDEV: f64 = 1e-4;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
/// Steps over which the loss improvement is compared against the tolerance.
pub const CONVERGENCE_WINDOW: usize = 5;
pub const LOSS_CURVE_HEADER: &str = "step,mean_loss";

const FD_STEP: f64 = 1e-5;
const KINK_NUDGE: f64 = 1e-6;
const STREAM_RESTART: u64 = 0x5e;
const STREAM_RECON_GENERATOR: u64 = 0xc0;

/// How per-row seeds are derived in a batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RowSeeding {
    /// From the row's position in the batch.
    #[default]
    Index,
    /// From the row's contents, so permuting rows permutes the codes.
    Content,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReversalOptions {
    pub step_size: f64,
    pub max_steps: usize,
    pub init_stddev: f64,
    /// Stop once the loss improves by less than this over [`CONVERGENCE_WINDOW`] steps.
    pub tolerance: f64,
    pub l2_weight: f64,
    /// Independent starting points per row; the lowest final loss wins.
    pub restarts: usize,
    pub seeding: RowSeeding,
    pub execution: Execution,
}

impl Default for ReversalOptions {
    fn default() -> Self {
        ReversalOptions {
            step_size: DEFAULT_STEP_SIZE,
            max_steps: DEFAULT_MAX_STEPS,
            init_stddev: DEFAULT_INIT_STDDEV,
            tolerance: DEFAULT_TOLERANCE,
            l2_weight: 0.0,
            restarts: 1,
            seeding: RowSeeding::Index,
            execution: Execution::Parallel,
        }
    }
}

impl ReversalOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if !(self.init_stddev >= 0.0 && self.init_stddev.is_finite()) {
            return Err(Error::Config(format!(
                "init stddev must be nonnegative, got {}",
                self.init_stddev
            )));
        }
        if !(self.l2_weight >= 0.0 && self.l2_weight.is_finite()) {
            return Err(Error::Config(format!(
                "l2 weight must be nonnegative, got {}",
                self.l2_weight
            )));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReversalResult {
    pub code: Vec<f64>,
    /// `loss_trace[k]` is the loss after `k` updates; the last entry is the
    /// loss at `code`.
    pub loss_trace: Vec<f64>,
    pub converged: bool,
    /// Gradient updates applied to reach `code`.
    pub steps_used: usize,
    /// Set when a non-finite loss cut the run short.
    pub failed: bool,
}

impl ReversalResult {
    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().expect("loss trace is never empty")
    }

    pub fn status(&self) -> RowStatus {
        if self.failed {
            RowStatus::Failed
        } else if self.converged {
            RowStatus::Converged
        } else {
            RowStatus::MaxSteps
        }
    }
}

/// `½‖G(z) − x‖² + (λ/2)‖z‖²` and its gradient in `z`.
fn loss_and_grad(generator: &MlpNetwork, z: &[f64], x: &[f64], l2: f64) -> Result<(f64, Vec<f64>)> {
    let (out, trace) = generator.forward(&Matrix::row_vector(z))?;
    let resid: Vec<f64> = out.as_slice().iter().zip(x).map(|(g, t)| g - t).collect();
    let mut loss = 0.5 * resid.iter().map(|r| r * r).sum::<f64>();
    loss += 0.5 * l2 * z.iter().map(|v| v * v).sum::<f64>();
    if !loss.is_finite() {
        return Ok((loss, Vec::new()));
    }
    let g = generator.backward_input(&trace, &Matrix::row_vector(&resid))?;
    let mut grad = g.into_vec();
    for (gi, zi) in grad.iter_mut().zip(z) {
        *gi += l2 * zi;
    }
    Ok((loss, grad))
}

fn check_target(generator: &MlpNetwork, x: &[f64]) -> Result<()> {
    if x.len() != generator.out_dim() {
        return Err(Error::Shape(format!(
            "target has {} values, generator outputs {}",
            x.len(),
            generator.out_dim()
        )));
    }
    Ok(())
}

/// Descend from `z0`, calling `observe(k, z_k)` before each update and once
/// at the end.
fn descend(
    generator: &MlpNetwork,
    x: &[f64],
    mut z: Vec<f64>,
    opts: &ReversalOptions,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<ReversalResult> {
    let mut trace = Vec::with_capacity(opts.max_steps + 1);
    let mut converged = false;
    let mut failed = false;
    let mut prev_z = z.clone();
    loop {
        let (loss, grad) = loss_and_grad(generator, &z, x, opts.l2_weight)?;
        if !loss.is_finite() {
            if trace.is_empty() {
                return Err(Error::NonFiniteLoss { step: 0 });
            }
            z = prev_z;
            failed = true;
            break;
        }
        trace.push(loss);
        let t = trace.len() - 1;
        observe(t, &z);
        if t >= CONVERGENCE_WINDOW && trace[t - CONVERGENCE_WINDOW] - loss < opts.tolerance {
            converged = true;
            break;
        }
        if t == opts.max_steps {
            break;
        }
        prev_z.clone_from(&z);
        for (zi, gi) in z.iter_mut().zip(&grad) {
            *zi -= opts.step_size * gi;
        }
    }
    Ok(ReversalResult {
        steps_used: trace.len() - 1,
        code: z,
        loss_trace: trace,
        converged,
        failed,
    })
}

fn initial_code(d: usize, opts: &ReversalOptions, seed: u64) -> Vec<f64> {
    random::gaussian_sample(1, d, 0.0, opts.init_stddev, seed).into_vec()
}

/// Gradient descent on `z` for `½‖G(z) − x‖² + (λ/2)‖z‖²` from `z₀ ~ N(0, init_stddev²)`.
pub fn reverse(
    generator: &MlpNetwork,
    x: &[f64],
    opts: &ReversalOptions,
    seed: u64,
) -> Result<ReversalResult> {
    opts.validate()?;
    check_target(generator, x)?;
    let d = generator.in_dim();
    let mut best: Option<ReversalResult> = None;
    for r in 0..opts.restarts {
        let s = if r == 0 {
            seed
        } else {
            derive_seed(seed, &[STREAM_RESTART, r as u64])
        };
        let res = descend(generator, x, initial_code(d, opts, s), opts, |_, _| {})?;
        let better = match &best {
            None => true,
            Some(b) => res.final_loss() < b.final_loss(),
        };
        if better {
            best = Some(res);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Seed used for row `index` of a batch.
pub fn row_seed(seed: u64, index: usize, row: &[f64], seeding: RowSeeding) -> u64 {
    match seeding {
        RowSeeding::Index => derive_seed(seed, &[index as u64]),
        RowSeeding::Content => derive_seed(seed, &[content_hash(row)]),
    }
}

/// Per-row results; a row whose reversal errors is reported as `Err` without
/// affecting the others.
pub fn reverse_rows(
    generator: &MlpNetwork,
    batch: &Matrix,
    opts: &ReversalOptions,
    seed: u64,
) -> Result<Vec<Result<ReversalResult>>> {
    opts.validate()?;
    if batch.rows() == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    check_target(generator, batch.row(0))?;
    Ok(par::map_range(batch.rows(), opts.execution, |i| {
        let row = batch.row(i);
        reverse(generator, row, opts, row_seed(seed, i, row, opts.seeding))
    }))
}

/// Reverse every row independently. Failed rows keep their starting code
/// and a NaN loss.
pub fn reverse_batch(
    generator: &MlpNetwork,
    batch: &Matrix,
    opts: &ReversalOptions,
    seed: u64,
    source: impl Into<String>,
) -> Result<LatentCodeSet> {
    let results = reverse_rows(generator, batch, opts, seed)?;
    let d = generator.in_dim();
    let mut codes = Vec::with_capacity(batch.rows() * d);
    let mut losses = Vec::with_capacity(batch.rows());
    let mut status = Vec::with_capacity(batch.rows());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(r) => {
                codes.extend_from_slice(&r.code);
                losses.push(r.final_loss());
                status.push(r.status());
            }
            Err(_) => {
                let row = batch.row(i);
                codes.extend(initial_code(d, opts, row_seed(seed, i, row, opts.seeding)));
                losses.push(f64::NAN);
                status.push(RowStatus::Failed);
            }
        }
    }
    LatentCodeSet::new(Matrix::new(batch.rows(), d, codes)?, losses, status, source)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureReport {
    /// `JᵀJ + λI` with `J = ∂G/∂z` (`m x d`), i.e. the Gauss–Newton matrix.
    pub gauss_newton: Matrix,
    /// Symmetrised central differences of the analytic loss gradient.
    pub fd_hessian: Matrix,
    pub min_eigenvalue: f64,
    pub max_abs_deviation: f64,
    /// The point actually examined (moved off rectifier kinks if needed).
    pub z: Vec<f64>,
}

fn on_kink(generator: &MlpNetwork, z: &[f64]) -> Result<bool> {
    let (_, trace) = generator.forward(&Matrix::row_vector(z))?;
    Ok(generator
        .layers()
        .iter()
        .zip(trace.pre_activations())
        .any(|(l, pre)| !l.spec().activation.is_smooth() && pre.as_slice().contains(&0.0)))
}

/// `∂G/∂z` at `z` as an `m x d` matrix, built by backpropagating the rows of `I_m`.
pub fn jacobian(generator: &MlpNetwork, z: &[f64]) -> Result<Matrix> {
    let m = generator.out_dim();
    let batch = Matrix::from_fn(m, z.len(), |_, j| z[j]);
    let (_, trace) = generator.forward(&batch)?;
    generator.backward_input(&trace, &Matrix::identity(m))
}

/// Compare the Gauss–Newton matrix with a finite-difference Hessian of the
/// reversal loss at `z_star`, targeting `x* = G(z*)`.
pub fn curvature_check(
    generator: &MlpNetwork,
    z_star: &[f64],
    l2_weight: f64,
) -> Result<CurvatureReport> {
    let d = generator.in_dim();
    if z_star.len() != d {
        return Err(Error::Shape(format!(
            "z has {} values, generator takes {d}",
            z_star.len()
        )));
    }
    let mut z = z_star.to_vec();
    if on_kink(generator, &z)? {
        z.iter_mut().for_each(|v| *v += KINK_NUDGE);
    }
    let x_star = generator.predict(&Matrix::row_vector(&z))?.into_vec();
    let j = jacobian(generator, &z)?;
    let mut gauss_newton = j.t_matmul(&j)?;
    for i in 0..d {
        gauss_newton.set(i, i, gauss_newton.get(i, i) + l2_weight);
    }
    let mut fd = Matrix::zeros(d, d);
    for c in 0..d {
        let mut plus = z.clone();
        let mut minus = z.clone();
        plus[c] += FD_STEP;
        minus[c] -= FD_STEP;
        let (_, gp) = loss_and_grad(generator, &plus, &x_star, l2_weight)?;
        let (_, gm) = loss_and_grad(generator, &minus, &x_star, l2_weight)?;
        if gp.is_empty() || gm.is_empty() {
            return Err(Error::Numeric("loss is not finite near z*".into()));
        }
        for r in 0..d {
            fd.set(r, c, (gp[r] - gm[r]) / (2.0 * FD_STEP));
        }
    }
    let fd_hessian = Matrix::from_fn(d, d, |r, c| 0.5 * (fd.get(r, c) + fd.get(c, r)));
    let min_eigenvalue = symmetric_eigenvalues(&fd_hessian)?[0];
    let max_abs_deviation = gauss_newton.max_abs_diff(&fd_hessian);
    Ok(CurvatureReport {
        gauss_newton,
        fd_hessian,
        min_eigenvalue,
        max_abs_deviation,
        z,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub codes: Matrix,
    pub reconstructions: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionExperiment {
    /// Mean loss over rows after each update, `0..=last snapshot step`.
    pub loss_curve: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub generator: MlpNetwork,
}

impl ReconstructionExperiment {
    pub fn mean_loss_at(&self, step: usize) -> Option<f64> {
        self.loss_curve.get(step).copied()
    }

    /// `loss_curve.csv`, `targets.pgm` and one `recon_step_NNNN.pgm` per
    /// snapshot (image grids only when rows are square images).
    pub fn write_outputs(
        &self,
        targets: &Matrix,
        cols: usize,
        dir: impl AsRef<Path>,
    ) -> Result<Vec<std::path::PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let rows: Vec<Vec<CsvField>> = self
            .loss_curve
            .iter()
            .enumerate()
            .map(|(s, &l)| vec![s.into(), l.into()])
            .collect();
        let csv = dir.join("loss_curve.csv");
        write_csv(&csv, LOSS_CURVE_HEADER, &rows)?;
        written.push(csv);
        if crate::data::pgm::image_side(targets.cols()).is_some() {
            let p = dir.join("targets.pgm");
            write_ppm_grid(targets, cols, &p)?;
            written.push(p);
            for s in &self.snapshots {
                let p = dir.join(format!("recon_step_{:04}.pgm", s.step));
                write_ppm_grid(&s.reconstructions, cols, &p)?;
                written.push(p);
            }
        }
        Ok(written)
    }
}

/// Reverse every row of `dataset` through an untrained generator built from
/// `arch`, recording the mean loss at every step and reconstructions at each
/// snapshot step. Early stopping is disabled so all rows run the full course.
pub fn random_reconstruction_experiment(
    arch: &[LayerSpec],
    dataset: &Matrix,
    snapshot_steps: &[usize],
    seed: u64,
    opts: &ReversalOptions,
) -> Result<ReconstructionExperiment> {
    if dataset.rows() == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if snapshot_steps.is_empty() || snapshot_steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(
            "snapshot steps must be non-empty and strictly ascending".into(),
        ));
    }
    let generator = MlpNetwork::init(arch, derive_seed(seed, &[STREAM_RECON_GENERATOR]))?;
    check_target(&generator, dataset.row(0))?;
    let last = *snapshot_steps.last().unwrap();
    let run_opts = ReversalOptions {
        max_steps: last.max(1),
        tolerance: f64::NEG_INFINITY,
        restarts: 1,
        ..opts.clone()
    };
    run_opts.validate()?;
    let d = generator.in_dim();
    let per_row = par::map_range(dataset.rows(), run_opts.execution, |i| {
        let row = dataset.row(i);
        let z0 = initial_code(d, &run_opts, row_seed(seed, i, row, run_opts.seeding));
        let mut snaps = Vec::with_capacity(snapshot_steps.len());
        let res = descend(&generator, row, z0, &run_opts, |k, z| {
            if snapshot_steps.binary_search(&k).is_ok() {
                snaps.push(z.to_vec());
            }
        })?;
        if res.failed {
            return Err(Error::NonFiniteLoss {
                step: res.steps_used as u64 + 1,
            });
        }
        Ok((res.loss_trace, snaps))
    });
    let per_row: Vec<(Vec<f64>, Vec<Vec<f64>>)> = per_row.into_iter().collect::<Result<_>>()?;
    let n = dataset.rows() as f64;
    let loss_curve: Vec<f64> = (0..=last)
        .map(|k| per_row.iter().map(|(t, _)| t[k]).sum::<f64>() / n)
        .collect();
    let mut snapshots = Vec::with_capacity(snapshot_steps.len());
    for (s, &step) in snapshot_steps.iter().enumerate() {
        let codes = Matrix::from_fn(dataset.rows(), d, |i, j| per_row[i].1[s][j]);
        let reconstructions = generator.predict(&codes)?;
        snapshots.push(Snapshot {
            step,
            codes,
            reconstructions,
        });
    }
    Ok(ReconstructionExperiment {
        loss_curve,
        snapshots,
        generator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::solve;
    use crate::nn::network::mlp_specs;
    use crate::nn::Activation;

    fn tanh_net(d: usize, h: usize, m: usize, seed: u64) -> MlpNetwork {
        MlpNetwork::init(
            &mlp_specs(d, &[h], m, Activation::Tanh, Activation::Tanh),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn identity_generator_recovers_target() {
        let g = MlpNetwork::linear(Matrix::identity(2), vec![0.0; 2]).unwrap();
        // the default window test stops near 2.5e-8 here; run the full budget
        let opts = ReversalOptions {
            tolerance: 0.0,
            ..ReversalOptions::default()
        };
        let r = reverse(&g, &[0.3, -0.7], &opts, 1).unwrap();
        assert!(r.final_loss() < 1e-10);
        let early = reverse(&g, &[0.3, -0.7], &ReversalOptions::default(), 1).unwrap();
        assert!(early.converged && early.final_loss() < 1e-7);
        assert!((r.code[0] - 0.3).abs() < 1e-5 && (r.code[1] + 0.7).abs() < 1e-5);
    }

    #[test]
    fn linear_generator_matches_direct_solve() {
        let w = Matrix::from_rows(&[[1.2, 0.3, -0.1], [0.2, 0.9, 0.4], [-0.3, 0.1, 1.1]]).unwrap();
        let g = MlpNetwork::linear(w.clone(), vec![0.0; 3]).unwrap();
        let x = [0.5, -0.2, 0.4];
        let opts = ReversalOptions {
            max_steps: 5000,
            tolerance: 1e-20,
            ..ReversalOptions::default()
        };
        let r = reverse(&g, &x, &opts, 3).unwrap();
        // row-vector convention: z W = x, i.e. Wᵀ zᵀ = xᵀ
        let direct = solve(&w.transpose(), &x).unwrap();
        for (a, b) in r.code.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn trace_ends_at_returned_code() {
        let g = tanh_net(3, 8, 5, 2);
        let x = g
            .predict(&Matrix::row_vector(&[0.4, -0.2, 0.1]))
            .unwrap()
            .into_vec();
        let opts = ReversalOptions {
            l2_weight: 0.01,
            ..ReversalOptions::default()
        };
        let r = reverse(&g, &x, &opts, 4).unwrap();
        let (loss, _) = loss_and_grad(&g, &r.code, &x, 0.01).unwrap();
        assert_eq!(loss, r.final_loss());
        assert_eq!(r.loss_trace.len(), r.steps_used + 1);
        assert!(r.final_loss() <= r.loss_trace[0]);
    }

    #[test]
    fn batch_of_one_matches_single_reversal() {
        let g = tanh_net(4, 8, 6, 5);
        let x = g
            .predict(&Matrix::row_vector(&[0.1, 0.2, -0.3, 0.0]))
            .unwrap();
        let opts = ReversalOptions::default();
        let set = reverse_batch(&g, &x, &opts, 9, "t").unwrap();
        let single = reverse(&g, x.row(0), &opts, row_seed(9, 0, x.row(0), opts.seeding)).unwrap();
        assert_eq!(set.codes.row(0), &single.code[..]);
        assert_eq!(set.reversal_losses[0], single.final_loss());
    }

    #[test]
    fn empty_batch_is_error() {
        let g = tanh_net(2, 4, 3, 1);
        assert!(
            reverse_batch(&g, &Matrix::zeros(0, 3), &ReversalOptions::default(), 0, "").is_err()
        );
    }

    #[test]
    fn wrong_target_width_is_shape_error() {
        let g = tanh_net(2, 4, 3, 1);
        assert!(matches!(
            reverse(&g, &[0.0; 2], &ReversalOptions::default(), 0),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let g = tanh_net(3, 6, 4, 7);
        let batch = random::gaussian_sample(16, 4, 0.0, 0.3, 8);
        let mut opts = ReversalOptions::default();
        let a = reverse_batch(&g, &batch, &opts, 1, "a").unwrap();
        opts.execution = Execution::Sequential;
        let b = reverse_batch(&g, &batch, &opts, 1, "a").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn linear_gauss_newton_is_w_wt() {
        let w = Matrix::from_rows(&[[1.0, 2.0, 0.5], [-0.3, 0.7, 1.5]]).unwrap();
        let g = MlpNetwork::linear(w.clone(), vec![0.1; 3]).unwrap();
        let r = curvature_check(&g, &[0.2, -0.4], 0.0).unwrap();
        assert_eq!(r.gauss_newton, w.matmul_t(&w).unwrap());
        assert!(r.max_abs_deviation < 1e-8);
    }

    #[test]
    fn tanh_curvature_matches() {
        let g = tanh_net(4, 10, 6, 13);
        let z = random::gaussian_sample(1, 4, 0.0, 1.0, 14).into_vec();
        let r = curvature_check(&g, &z, 0.0).unwrap();
        assert!(r.max_abs_deviation < 1e-4, "{}", r.max_abs_deviation);
        assert!(r.min_eigenvalue >= -1e-6);
        let lam = 0.3;
        let r = curvature_check(&g, &z, lam).unwrap();
        assert!(r.min_eigenvalue >= lam - 1e-6);
    }

    #[test]
    fn relu_kink_is_avoided() {
        let w = Matrix::from_rows(&[[1.0, -1.0]]).unwrap();
        let g = MlpNetwork::from_parameters(
            &[LayerSpec::new(1, 2, Activation::Relu)],
            vec![(w, vec![0.0, 0.0])],
        )
        .unwrap();
        let r = curvature_check(&g, &[0.0], 0.0).unwrap();
        assert_eq!(r.z, vec![KINK_NUDGE]);
    }

    #[test]
    fn reconstruction_snapshots() {
        let arch = mlp_specs(3, &[8], 16, Activation::Relu, Activation::Tanh);
        let data = random::gaussian_sample(6, 16, 0.0, 0.3, 2).map(|v| v.clamp(-1.0, 1.0));
        let exp = random_reconstruction_experiment(
            &arch,
            &data,
            &[1, 3, 10],
            5,
            &ReversalOptions::default(),
        )
        .unwrap();
        assert_eq!(exp.loss_curve.len(), 11);
        assert_eq!(
            exp.snapshots.iter().map(|s| s.step).collect::<Vec<_>>(),
            vec![1, 3, 10]
        );
        let dir = tempfile::tempdir().unwrap();
        let files = exp.write_outputs(&data, 3, dir.path()).unwrap();
        assert_eq!(files.len(), 5);
        assert!(random_reconstruction_experiment(
            &arch,
            &Matrix::zeros(0, 16),
            &[1],
            5,
            &ReversalOptions::default()
        )
        .is_err());
        assert!(random_reconstruction_experiment(
            &arch,
            &data,
            &[3, 1],
            5,
            &ReversalOptions::default()
        )
        .is_err());
    }
}
