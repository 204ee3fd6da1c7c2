use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lpl_core::data::csv::{write_csv, CsvField};
use lpl_core::data::dataset::Dataset;
use lpl_core::data::pgm::{image_side, write_ppm_grid};
use lpl_core::data::{
    load_idx_pair, make_blob_images, make_ring2d, parse_idx, read_checkpoint, read_codes,
    write_checkpoint,
};
use lpl_core::gan::{
    gan_train, sample_generator, GanArchitecture, GanModel, PriorKind, TrainConfig,
};
use lpl_core::metrics::{
    cluster_ratio, kl_decomposition_check, pag_from_codes, random_linear_gaussian, JointModel,
    LatentCodeSet,
};
use lpl_core::nn::random::derive_seed;
use lpl_core::nn::{mlp_specs, Activation};
use lpl_core::prior::{
    collect_induced_codes, disagreement_rank, retrain_with_induced_prior, train_pgan, PganConfig,
};
use lpl_core::reversal::random_reconstruction_experiment;
use serde::{Deserialize, Serialize};

use crate::args::*;

/// Bad flag combinations detected after parsing; exits like a clap error.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Command,
    pub seed: u64,
    pub out: PathBuf,
    pub version: String,
}

pub const MANIFEST_FILE: &str = "manifest.json";
const SAMPLE_COUNT: usize = 64;

pub fn run(command: Command) -> Result<()> {
    let command = match command {
        Command::Replay(a) => {
            let text = fs::read_to_string(&a.manifest)
                .with_context(|| format!("reading {}", a.manifest.display()))?;
            let manifest: RunManifest = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", a.manifest.display()))?;
            let mut inner = manifest.config;
            if matches!(inner, Command::Replay(_)) {
                return Err(usage("a manifest cannot record a replay"));
            }
            inner.common_mut().out = a.common.out;
            inner
        }
        other => other,
    };
    let out = command.common().out.clone();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let manifest = RunManifest {
        command: command.name().to_string(),
        seed: command.common().seed,
        out: out.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: command.clone(),
    };
    fs::write(
        out.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )
    .with_context(|| format!("writing manifest into {}", out.display()))?;

    match command {
        Command::Train(a) => train(&a),
        Command::Reverse(a) => reverse(&a),
        Command::Pag(a) => pag(&a),
        Command::ReportStructure(a) => structure(&a),
        Command::Disagree(a) => disagree(&a),
        Command::Pgan(a) => pgan(&a),
        Command::Retrain(a) => retrain(&a),
        Command::RandomRecon(a) => random_recon(&a),
        Command::Spectrum(a) => spectrum(&a),
        Command::CheckKl(a) => check_kl(&a),
        Command::Replay(_) => unreachable!("replay resolved above"),
    }
}

fn load_dataset(a: &DataArgs) -> Result<Dataset> {
    let ds = match a.dataset.as_str() {
        "ring" => make_ring2d(
            a.n_data,
            a.ring_modes,
            a.ring_radius,
            a.ring_std,
            a.data_seed,
        )?,
        "blobs" => make_blob_images(a.n_data, a.blob_grid, a.data_seed)?,
        path => match &a.labels {
            Some(labels) => load_idx_pair(path, labels)?,
            None => parse_idx(path)?,
        },
    };
    Ok(match a.rows {
        Some(n) if n < ds.len() => ds.head(n),
        _ => ds,
    })
}

fn write_samples(samples: &lpl_core::Matrix, dir: &Path) -> Result<PathBuf> {
    if image_side(samples.cols()).is_some() && samples.cols() > 1 {
        let path = dir.join("samples.pgm");
        write_ppm_grid(samples, 8, &path)?;
        return Ok(path);
    }
    let header: Vec<String> = (0..samples.cols()).map(|j| format!("x{j}")).collect();
    let rows: Vec<Vec<CsvField>> = samples
        .row_iter()
        .map(|r| r.iter().map(|&v| v.into()).collect())
        .collect();
    let path = dir.join("samples.csv");
    write_csv(&path, &header.join(","), &rows)?;
    Ok(path)
}

fn train(a: &TrainArgs) -> Result<()> {
    let data = load_dataset(&a.data)?;
    let mut model = match &a.resume {
        Some(path) => read_checkpoint(path)?,
        None => {
            let arch = GanArchitecture {
                generator_widths: a.gen_widths.clone(),
                discriminator_widths: a.disc_widths.clone(),
                ..GanArchitecture::new(a.latent_dim, data.dim())
            };
            GanModel::build(&arch, a.sigma, a.step_size, a.common.seed)?
        }
    };
    let out = &a.common.out;
    let config = TrainConfig {
        batch_size: a.batch_size,
        steps: a.steps,
        step_size: a.step_size,
        seed: a.common.seed,
        checkpoint_every: a.checkpoint_every,
        checkpoint_dir: (a.checkpoint_every > 0).then(|| out.join("checkpoints")),
        log_path: Some(out.join("metrics.csv")),
    };
    let metrics_path = out.join("metrics.csv");
    if metrics_path.exists() {
        fs::remove_file(&metrics_path)
            .with_context(|| format!("clearing {}", metrics_path.display()))?;
    }
    let outcome = gan_train(&mut model, &data.samples, &config)?;
    let path = out.join("model.lpl");
    write_checkpoint(&model, &path)?;
    let samples = sample_generator(&model, SAMPLE_COUNT, derive_seed(a.common.seed, &[0x5a]))?;
    write_samples(&samples, out)?;
    match outcome.metrics.last() {
        Some(m) => println!(
            "trained to step {}: d_loss {:.4} g_loss {:.4}",
            m.step, m.d_loss, m.g_loss
        ),
        None => println!("wrote untrained model at step {}", model.step),
    }
    println!("checkpoint: {}", path.display());
    Ok(())
}

fn reverse(a: &ReverseArgs) -> Result<()> {
    let model = read_checkpoint(&a.checkpoint)?;
    let data = load_dataset(&a.data)?;
    let path = a.common.out.join("codes.lpc");
    let codes = collect_induced_codes(
        &model.generator,
        &data.samples,
        &a.reversal.options(),
        a.common.seed,
        data.source.clone(),
        Some(&path),
    )?;
    write_reversal_log(&codes, &a.common.out)?;
    println!(
        "reversed {} rows: mean loss {:.3e}, {} failed",
        codes.len(),
        codes.mean_loss(),
        codes.failures()
    );
    println!("codes: {}", path.display());
    Ok(())
}

fn write_reversal_log(codes: &LatentCodeSet, dir: &Path) -> Result<()> {
    let rows: Vec<Vec<CsvField>> = codes
        .reversal_losses
        .iter()
        .zip(&codes.status)
        .enumerate()
        .map(|(i, (&l, s))| {
            vec![
                i.into(),
                l.into(),
                format!("{s:?}").to_lowercase().as_str().into(),
            ]
        })
        .collect();
    write_csv(dir.join("reversal.csv"), "index,loss,status", &rows)?;
    Ok(())
}

struct Resolved {
    codes: LatentCodeSet,
    model: Option<GanModel>,
    labels: Option<Vec<usize>>,
}

fn resolve_codes(src: &CodeSource, seed: u64, out: &Path) -> Result<Resolved> {
    let model = src.checkpoint.as_ref().map(read_checkpoint).transpose()?;
    let data = src.data_args().map(|d| load_dataset(&d)).transpose()?;
    let codes = match (&src.codes, &model, &data) {
        (Some(path), _, _) => read_codes(path)?,
        (None, Some(model), Some(data)) => {
            let path = out.join("codes.lpc");
            let codes = collect_induced_codes(
                &model.generator,
                &data.samples,
                &src.reversal.options(),
                seed,
                data.source.clone(),
                Some(&path),
            )?;
            write_reversal_log(&codes, out)?;
            codes
        }
        _ => {
            return Err(usage(
                "give --codes, or --checkpoint together with --dataset",
            ))
        }
    };
    let labels = data.and_then(|d| d.labels).map(|mut l| {
        l.truncate(codes.len());
        l
    });
    Ok(Resolved {
        codes,
        model,
        labels,
    })
}

fn pag(a: &PagArgs) -> Result<()> {
    let r = resolve_codes(&a.source, a.common.seed, &a.common.out)?;
    let sigma = match (a.sigma, r.model.as_ref().map(|m| m.prior.kind())) {
        (Some(s), _) => s,
        (None, Some(PriorKind::IsotropicGaussian { sigma })) => *sigma,
        _ => 1.0,
    };
    let report = pag_from_codes(&r.codes, sigma)?;
    report.write_csv(a.common.out.join("pag.csv"))?;
    report.write_spectrum_csv(a.common.out.join("spectrum.csv"))?;
    println!(
        "PAG {:.6} (n = {}, d = {}, sigma = {sigma})",
        report.pag,
        report.n,
        report.d()
    );
    Ok(())
}

fn structure(a: &StructureArgs) -> Result<()> {
    let r = resolve_codes(&a.source, a.common.seed, &a.common.out)?;
    let labels = r
        .labels
        .ok_or_else(|| usage("report-structure needs a labelled --dataset"))?;
    if labels.len() != r.codes.len() {
        bail!("{} labels for {} codes", labels.len(), r.codes.len());
    }
    let ratio = cluster_ratio(&r.codes.codes, &labels)?;
    let clusters = labels
        .iter()
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    write_csv(
        a.common.out.join("structure.csv"),
        "n,clusters,ratio",
        &[vec![r.codes.len().into(), clusters.into(), ratio.into()]],
    )?;
    println!("cluster ratio {ratio:.6} over {clusters} clusters");
    Ok(())
}

fn disagree(a: &DisagreeArgs) -> Result<()> {
    let r = resolve_codes(&a.source, a.common.seed, &a.common.out)?;
    let model = r
        .model
        .ok_or_else(|| usage("disagree needs --checkpoint"))?;
    let report = disagreement_rank(
        &model.generator,
        &model.prior,
        &r.codes,
        a.n,
        a.k,
        a.common.seed,
    )?;
    let written = report.write_outputs(&a.common.out, a.cols)?;
    if image_side(report.top_samples.cols()).is_none() {
        write_samples(&report.top_samples, &a.common.out)?;
    }
    println!(
        "ranked {} prior draws; top score {:.6}",
        a.n, report.scores[0]
    );
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn pgan(a: &PganArgs) -> Result<()> {
    let codes = read_codes(&a.codes)?;
    let config = PganConfig {
        aux_dim: a.aux_dim,
        generator_widths: a.widths.clone(),
        discriminator_widths: a.widths.clone(),
        steps: a.steps,
        batch_size: a.batch_size,
        step_size: a.step_size,
        seed: a.common.seed,
        ..Default::default()
    };
    let outcome = train_pgan(&codes, &config)?;
    let path = a.common.out.join("pgan.lpl");
    write_checkpoint(&outcome.model, &path)?;
    let rows: Vec<Vec<CsvField>> = outcome
        .metrics
        .iter()
        .map(|m| vec![(m.step as usize).into(), m.d_loss.into(), m.g_loss.into()])
        .collect();
    write_csv(
        a.common.out.join("metrics.csv"),
        lpl_core::gan::METRIC_HEADER,
        &rows,
    )?;
    if let Some(step) = outcome.diverged_at {
        println!("training went non-finite at step {step}; kept the last finite snapshot");
    }
    println!("secondary GAN: {}", path.display());
    Ok(())
}

fn retrain(a: &RetrainArgs) -> Result<()> {
    let model = read_checkpoint(&a.checkpoint)?;
    let mapping = read_checkpoint(&a.pgan)?.generator;
    let data = load_dataset(&a.data)?;
    let out = &a.common.out;
    let config = TrainConfig {
        batch_size: a.batch_size,
        steps: a.steps,
        step_size: a.step_size,
        seed: a.common.seed,
        log_path: Some(out.join("metrics.csv")),
        ..Default::default()
    };
    let metrics_path = out.join("metrics.csv");
    if metrics_path.exists() {
        fs::remove_file(&metrics_path)
            .with_context(|| format!("clearing {}", metrics_path.display()))?;
    }
    let (model, _) = retrain_with_induced_prior(&model, &mapping, &data.samples, &config)?;
    let path = out.join("model.lpl");
    write_checkpoint(&model, &path)?;
    let samples = sample_generator(&model, SAMPLE_COUNT, derive_seed(a.common.seed, &[0x5a]))?;
    write_samples(&samples, out)?;
    println!("retrained to step {}: {}", model.step, path.display());
    Ok(())
}

fn random_recon(a: &ReconArgs) -> Result<()> {
    let data = load_dataset(&a.data)?;
    let specs = mlp_specs(
        a.latent_dim,
        &a.widths,
        data.dim(),
        Activation::Relu,
        Activation::Tanh,
    );
    let opts = lpl_core::reversal::ReversalOptions {
        step_size: a.rev_lr,
        init_stddev: a.init_std,
        ..Default::default()
    };
    let exp = random_reconstruction_experiment(
        &specs,
        &data.samples,
        &a.snapshots,
        a.common.seed,
        &opts,
    )?;
    exp.write_outputs(&data.samples, a.cols, &a.common.out)?;
    for &s in &a.snapshots {
        println!(
            "step {s}: mean loss {:.6}",
            exp.mean_loss_at(s).unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn spectrum(a: &SpectrumArgs) -> Result<()> {
    let r = resolve_codes(&a.source, a.common.seed, &a.common.out)?;
    let values = lpl_core::metrics::singular_values(&r.codes.codes)?;
    lpl_core::metrics::pag::write_spectrum_csv(&values, a.common.out.join("spectrum.csv"))?;
    println!(
        "{} singular values, largest {:.6}",
        values.len(),
        values.first().copied().unwrap_or(0.0)
    );
    Ok(())
}

fn check_kl(a: &CheckKlArgs) -> Result<()> {
    if a.max_dim == 0 || a.pairs == 0 {
        return Err(usage("--pairs and --max-dim must be positive"));
    }
    let mut rows = Vec::with_capacity(a.pairs);
    let mut worst = 0.0f64;
    let mut shared_nonzero = 0;
    for i in 0..a.pairs {
        let d = 1 + i % a.max_dim;
        let m = 1 + (i / a.max_dim) % a.max_dim;
        let p = random_linear_gaussian(d, m, derive_seed(a.common.seed, &[i as u64, 0]))?;
        let q = random_linear_gaussian(d, m, derive_seed(a.common.seed, &[i as u64, 1]))?;
        let r = kl_decomposition_check(
            &JointModel::LinearGaussian(p.clone()),
            &JointModel::LinearGaussian(q.clone()),
        )?;
        worst = worst.max(r.gap);
        let mut shared = p.clone();
        shared.prior = q.prior.clone();
        let s = kl_decomposition_check(
            &JointModel::LinearGaussian(p),
            &JointModel::LinearGaussian(shared),
        )?;
        if s.rhs_conditional_term != 0.0 {
            shared_nonzero += 1;
        }
        rows.push(vec![
            i.into(),
            d.into(),
            m.into(),
            r.lhs.into(),
            r.rhs_prior_term.into(),
            r.rhs_conditional_term.into(),
            r.gap.into(),
            s.rhs_conditional_term.into(),
        ]);
    }
    write_csv(
        a.common.out.join("kl_check.csv"),
        "pair,d,m,lhs,prior_term,conditional_term,gap,shared_conditional_term",
        &rows,
    )?;
    println!("{} pairs: largest gap {worst:.3e}", a.pairs);
    if worst >= a.tolerance {
        bail!("largest gap {worst:.3e} exceeds {:.1e}", a.tolerance);
    }
    if shared_nonzero > 0 {
        bail!("{shared_nonzero} shared-conditional pairs had a non-zero conditional term");
    }
    Ok(())
}
