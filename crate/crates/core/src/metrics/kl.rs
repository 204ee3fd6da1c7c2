//! KL divergences: closed forms for Gaussians, a Monte Carlo estimator, and
//! the joint-versus-marginal-plus-conditional check for linear-Gaussian
//! latent models.

use crate::error::{Error, Result};
use crate::gan::PriorSpec;
use crate::linalg::{cholesky, cholesky_solve, log_det_cholesky};
use crate::matrix::Matrix;
use crate::nn::network::MlpNetwork;
use crate::nn::random::{self, derive_seed, Rng};
use crate::par::{self, Execution};

const MC_CHUNK: usize = 1 << 15;

fn check_variances(v: &[f64], which: &str) -> Result<()> {
    match v.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
        Some(i) => Err(Error::Domain(format!(
            "{which}[{i}] = {} is not a positive variance",
            v[i]
        ))),
        None => Ok(()),
    }
}

/// `KL(N(mu0, diag var0) ‖ N(mu1, diag var1))`.
pub fn kl_diag_gaussian(mu0: &[f64], var0: &[f64], mu1: &[f64], var1: &[f64]) -> Result<f64> {
    let d = mu0.len();
    if var0.len() != d || mu1.len() != d || var1.len() != d {
        return Err(Error::Shape(
            "mean and variance vectors must share one length".into(),
        ));
    }
    check_variances(var0, "var0")?;
    check_variances(var1, "var1")?;
    let mut total = 0.0;
    for i in 0..d {
        let diff = mu1[i] - mu0[i];
        total += var0[i] / var1[i] + diff * diff / var1[i] - 1.0 + (var1[i] / var0[i]).ln();
    }
    Ok(0.5 * total)
}

/// Log density of `N(mu, diag var)` at `x`.
pub fn diag_gaussian_log_density(x: &[f64], mu: &[f64], var: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.len() {
        let r = x[i] - mu[i];
        acc += r * r / var[i] + var[i].ln() + std::f64::consts::TAU.ln();
    }
    -0.5 * acc
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Monte Carlo `E_P[log p − log q]` with its standard error.
///
/// Samples are drawn in fixed-size chunks, each with its own derived seed, so
/// the estimate does not depend on `exec` or the thread count.
pub fn kl_mc_estimate<S, P, Q>(
    sample_p: S,
    log_p: P,
    log_q: Q,
    n_samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<McEstimate>
where
    S: Fn(&mut Rng) -> Vec<f64> + Sync + Send,
    P: Fn(&[f64]) -> f64 + Sync + Send,
    Q: Fn(&[f64]) -> f64 + Sync + Send,
{
    if n_samples == 0 {
        return Err(Error::Config(
            "Monte Carlo estimate needs at least one sample".into(),
        ));
    }
    let chunks = n_samples.div_ceil(MC_CHUNK);
    let partial = par::map_range(chunks, exec, |c| {
        let mut rng = random::rng(derive_seed(seed, &[c as u64]));
        let len = MC_CHUNK.min(n_samples - c * MC_CHUNK);
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..len {
            let x = sample_p(&mut rng);
            let r = log_p(&x) - log_q(&x);
            sum += r;
            sum_sq += r * r;
        }
        (sum, sum_sq)
    });
    let (sum, sum_sq) = partial
        .iter()
        .fold((0.0, 0.0), |(a, b), (s, q)| (a + s, b + q));
    let n = n_samples as f64;
    let mean = sum / n;
    let var = if n_samples > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    if !mean.is_finite() {
        return Err(Error::Numeric("Monte Carlo log-ratio is not finite".into()));
    }
    Ok(McEstimate {
        estimate: mean,
        std_error: (var / n).sqrt(),
        n: n_samples,
    })
}

/// A full-covariance Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    pub mean: Vec<f64>,
    pub cov: Matrix,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, cov: Matrix) -> Result<Self> {
        if cov.shape() != (mean.len(), mean.len()) {
            return Err(Error::Shape(format!(
                "{}-dimensional mean with {}x{} covariance",
                mean.len(),
                cov.rows(),
                cov.cols()
            )));
        }
        Ok(Gaussian { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// `KL(p ‖ q)` for full-covariance Gaussians. Bitwise-identical inputs give
/// exactly 0.
pub fn kl_gaussian(p: &Gaussian, q: &Gaussian) -> Result<f64> {
    let k = p.dim();
    if q.dim() != k {
        return Err(Error::Shape(format!(
            "dimensions {k} and {} differ",
            q.dim()
        )));
    }
    if same_bits(&p.mean, &q.mean) && same_bits(p.cov.as_slice(), q.cov.as_slice()) {
        cholesky(&p.cov)?;
        return Ok(0.0);
    }
    let lp = cholesky(&p.cov)?;
    let lq = cholesky(&q.cov)?;
    let qinv_p = cholesky_solve(&lq, &p.cov)?;
    let trace: f64 = (0..k).map(|i| qinv_p.get(i, i)).sum();
    let diff = Matrix::new(k, 1, (0..k).map(|i| q.mean[i] - p.mean[i]).collect())?;
    let solved = cholesky_solve(&lq, &diff)?;
    let maha: f64 = (0..k).map(|i| diff.get(i, 0) * solved.get(i, 0)).sum();
    Ok(0.5 * (trace + maha - k as f64 + log_det_cholesky(&lq) - log_det_cholesky(&lp)))
}

/// `z ~ N(prior_mean, prior_cov)`, `x = A z + b + ε`, `ε ~ N(0, noise_cov)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearGaussianModel {
    pub prior: Gaussian,
    /// `m x d`.
    pub a: Matrix,
    pub b: Vec<f64>,
    pub noise_cov: Matrix,
}

impl LinearGaussianModel {
    pub fn new(prior: Gaussian, a: Matrix, b: Vec<f64>, noise_cov: Matrix) -> Result<Self> {
        let (m, d) = a.shape();
        if d != prior.dim() || b.len() != m || noise_cov.shape() != (m, m) {
            return Err(Error::Shape(format!(
                "A is {m}x{d}, prior dim {}, offset {}, noise {}x{}",
                prior.dim(),
                b.len(),
                noise_cov.rows(),
                noise_cov.cols()
            )));
        }
        Ok(LinearGaussianModel {
            prior,
            a,
            b,
            noise_cov,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.a.cols()
    }

    pub fn data_dim(&self) -> usize {
        self.a.rows()
    }

    /// The joint Gaussian over `(z, x)`.
    pub fn joint(&self) -> Result<Gaussian> {
        let (m, d) = self.a.shape();
        let s = &self.prior.cov;
        let a_s = self.a.matmul(s)?;
        let a_s_at = a_s.matmul_t(&self.a)?;
        let mut cov = Matrix::zeros(d + m, d + m);
        for i in 0..d {
            for j in 0..d {
                cov.set(i, j, s.get(i, j));
            }
        }
        for i in 0..m {
            for j in 0..d {
                cov.set(d + i, j, a_s.get(i, j));
                cov.set(j, d + i, a_s.get(i, j));
            }
            for j in 0..m {
                cov.set(d + i, d + j, a_s_at.get(i, j) + self.noise_cov.get(i, j));
            }
        }
        let mut mean = self.prior.mean.clone();
        for i in 0..m {
            let az: f64 = (0..d).map(|j| self.a.get(i, j) * self.prior.mean[j]).sum();
            mean.push(az + self.b[i]);
        }
        Gaussian::new(mean, cov)
    }

    fn same_conditional(&self, other: &Self) -> bool {
        self.a.shape() == other.a.shape()
            && same_bits(self.a.as_slice(), other.a.as_slice())
            && same_bits(&self.b, &other.b)
            && same_bits(self.noise_cov.as_slice(), other.noise_cov.as_slice())
    }
}

/// Latent-variable models the decomposition check accepts as input.
#[derive(Clone, Debug)]
pub enum JointModel {
    LinearGaussian(LinearGaussianModel),
    /// A neural generator with additive Gaussian noise; its conditional KL
    /// has no closed form.
    Generator {
        generator: MlpNetwork,
        prior: PriorSpec,
        noise_var: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlDecomposition {
    pub lhs: f64,
    pub rhs_prior_term: f64,
    pub rhs_conditional_term: f64,
    pub gap: f64,
}

/// `E_{z~p}[KL(p(x|z) ‖ q(x|z))]` in closed form.
fn expected_conditional_kl(p: &LinearGaussianModel, q: &LinearGaussianModel) -> Result<f64> {
    if p.same_conditional(q) {
        cholesky(&p.noise_cov)?;
        return Ok(0.0);
    }
    let m = p.data_dim();
    let lp = cholesky(&p.noise_cov)?;
    let lq = cholesky(&q.noise_cov)?;
    let qinv_p = cholesky_solve(&lq, &p.noise_cov)?;
    let trace: f64 = (0..m).map(|i| qinv_p.get(i, i)).sum();
    // δ(z) = D z + e with D = A_p − A_q, e = b_p − b_q
    let dmat = p.a.sub(&q.a)?;
    let e: Vec<f64> = p.b.iter().zip(&q.b).map(|(x, y)| x - y).collect();
    let mean_delta: Vec<f64> = (0..m)
        .map(|i| {
            (0..p.latent_dim())
                .map(|j| dmat.get(i, j) * p.prior.mean[j])
                .sum::<f64>()
                + e[i]
        })
        .collect();
    // E[δᵀ M δ] = tr(M D Σ Dᵀ) + δ̄ᵀ M δ̄ with M = Ψ_q⁻¹
    let d_s_dt = dmat.matmul(&p.prior.cov)?.matmul_t(&dmat)?;
    let minv_dsdt = cholesky_solve(&lq, &d_s_dt)?;
    let quad_cov: f64 = (0..m).map(|i| minv_dsdt.get(i, i)).sum();
    let md = Matrix::new(m, 1, mean_delta.clone())?;
    let solved = cholesky_solve(&lq, &md)?;
    let quad_mean: f64 = (0..m).map(|i| mean_delta[i] * solved.get(i, 0)).sum();
    Ok(0.5
        * (trace - m as f64 + log_det_cholesky(&lq) - log_det_cholesky(&lp) + quad_cov + quad_mean))
}

/// Compare `KL(p(z,x) ‖ q(z,x))` against `KL(p(z) ‖ q(z)) + E_p KL(p(x|z) ‖ q(x|z))`.
pub fn kl_decomposition_check(p: &JointModel, q: &JointModel) -> Result<KlDecomposition> {
    let (p, q) = match (p, q) {
        (JointModel::LinearGaussian(p), JointModel::LinearGaussian(q)) => (p, q),
        _ => {
            return Err(Error::Unsupported(
                "closed-form decomposition needs linear-Gaussian models".into(),
            ))
        }
    };
    if p.a.shape() != q.a.shape() {
        return Err(Error::Shape(
            "models have different latent or data dimensions".into(),
        ));
    }
    let lhs = kl_gaussian(&p.joint()?, &q.joint()?)?;
    let prior = kl_gaussian(&p.prior, &q.prior)?;
    let conditional = expected_conditional_kl(p, q)?;
    Ok(KlDecomposition {
        lhs,
        rhs_prior_term: prior,
        rhs_conditional_term: conditional,
        gap: (lhs - (prior + conditional)).abs(),
    })
}

/// A random linear-Gaussian model with well-conditioned covariances.
pub fn random_linear_gaussian(d: usize, m: usize, seed: u64) -> Result<LinearGaussianModel> {
    let mut rng = random::rng(seed);
    let spd = |rng: &mut Rng, k: usize| -> Result<Matrix> {
        let g = random::gaussian_fill(rng, k, k, 0.0, 1.0);
        let mut c = g.matmul_t(&g)?.scale(1.0 / k as f64);
        for i in 0..k {
            c.set(i, i, c.get(i, i) + 0.5);
        }
        Ok(c)
    };
    let mean = random::gaussian_fill(&mut rng, 1, d, 0.0, 1.0).into_vec();
    let cov = spd(&mut rng, d)?;
    let a = random::gaussian_fill(&mut rng, m, d, 0.0, 1.0);
    let b = random::gaussian_fill(&mut rng, 1, m, 0.0, 1.0).into_vec();
    let noise = spd(&mut rng, m)?;
    LinearGaussianModel::new(Gaussian::new(mean, cov)?, a, b, noise)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_cases() {
        assert_eq!(
            kl_diag_gaussian(&[0.3], &[2.0], &[0.3], &[2.0]).unwrap(),
            0.0
        );
        let v = kl_diag_gaussian(&[0.0], &[2.0], &[0.0], &[1.0]).unwrap();
        assert!((v - 0.5 * (2.0 - 2f64.ln() - 1.0)).abs() < 1e-15);
        assert!((v - 0.15343).abs() < 1e-5);
        assert_eq!(
            kl_diag_gaussian(&[1.0], &[1.0], &[0.0], &[1.0]).unwrap(),
            0.5
        );
    }

    #[test]
    fn bad_variance_is_domain_error() {
        assert!(matches!(
            kl_diag_gaussian(&[0.0], &[0.0], &[0.0], &[1.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn full_covariance_agrees_with_diagonal() {
        let p = Gaussian::new(
            vec![0.1, -0.2],
            Matrix::from_rows(&[[2.0, 0.0], [0.0, 0.5]]).unwrap(),
        )
        .unwrap();
        let q = Gaussian::new(
            vec![0.0, 0.3],
            Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.5]]).unwrap(),
        )
        .unwrap();
        let full = kl_gaussian(&p, &q).unwrap();
        let diag = kl_diag_gaussian(&[0.1, -0.2], &[2.0, 0.5], &[0.0, 0.3], &[1.0, 1.5]).unwrap();
        assert!((full - diag).abs() < 1e-14);
    }

    #[test]
    fn mc_zero_samples_is_error() {
        let r = kl_mc_estimate(|_| vec![0.0], |_| 0.0, |_| 0.0, 0, 1, Execution::Sequential);
        assert!(r.is_err());
    }

    #[test]
    fn mc_same_distribution_is_near_zero() {
        let lp = |x: &[f64]| diag_gaussian_log_density(x, &[0.0], &[1.0]);
        let est = kl_mc_estimate(
            |r| vec![random::standard_normal(r)],
            lp,
            lp,
            10_000,
            4,
            Execution::Parallel,
        )
        .unwrap();
        assert!(est.estimate.abs() <= 3.0 * est.std_error + 1e-15);
    }

    #[test]
    fn mc_independent_of_execution() {
        let run = |exec| {
            kl_mc_estimate(
                |r| vec![2f64.sqrt() * random::standard_normal(r)],
                |x| diag_gaussian_log_density(x, &[0.0], &[2.0]),
                |x| diag_gaussian_log_density(x, &[0.0], &[1.0]),
                100_000,
                9,
                exec,
            )
            .unwrap()
        };
        assert_eq!(run(Execution::Parallel), run(Execution::Sequential));
    }

    #[test]
    fn identical_models_decompose_to_zero() {
        let p = JointModel::LinearGaussian(random_linear_gaussian(2, 3, 5).unwrap());
        let r = kl_decomposition_check(&p, &p).unwrap();
        assert_eq!(
            (r.lhs, r.rhs_prior_term, r.rhs_conditional_term, r.gap),
            (0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn random_pairs_satisfy_identity() {
        for s in 0..20 {
            let p = random_linear_gaussian(3, 2, 2 * s).unwrap();
            let q = random_linear_gaussian(3, 2, 2 * s + 1).unwrap();
            let r = kl_decomposition_check(
                &JointModel::LinearGaussian(p),
                &JointModel::LinearGaussian(q),
            )
            .unwrap();
            assert!(r.gap < 1e-10, "seed {s}: gap {}", r.gap);
            assert!(r.lhs > 0.0);
        }
    }

    #[test]
    fn shared_conditional_leaves_prior_term() {
        let p = random_linear_gaussian(2, 2, 11).unwrap();
        let mut q = p.clone();
        q.prior.cov = q.prior.cov.scale(2.5);
        let r = kl_decomposition_check(
            &JointModel::LinearGaussian(p),
            &JointModel::LinearGaussian(q),
        )
        .unwrap();
        assert_eq!(r.rhs_conditional_term, 0.0);
        assert!((r.lhs - r.rhs_prior_term).abs() < 1e-12);
    }

    #[test]
    fn generator_model_is_unsupported() {
        let g = MlpNetwork::linear(Matrix::identity(2), vec![0.0; 2]).unwrap();
        let m = JointModel::Generator {
            generator: g,
            prior: PriorSpec::isotropic(2, 1.0).unwrap(),
            noise_var: 0.1,
        };
        assert!(matches!(
            kl_decomposition_check(&m, &m),
            Err(Error::Unsupported(_))
        ));
    }
}
