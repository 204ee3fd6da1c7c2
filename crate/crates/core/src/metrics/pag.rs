//! Prior agreement between reversed codes and an isotropic Gaussian prior.

use std::path::Path;

use crate::data::csv::{write_csv, CsvField};
use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::Matrix;
use crate::metrics::codes::LatentCodeSet;

pub const SPECTRUM_HEADER: &str = "index,singular_value";
pub const PAG_HEADER: &str = "n,d,sigma,pag";

/// Principal standard deviations of `codes`: singular values of the
/// column-centred matrix divided by `√(n−1)`, descending.
pub fn singular_values(codes: &Matrix) -> Result<Vec<f64>> {
    let (n, d) = codes.shape();
    let needed = d.max(2);
    if n < needed {
        return Err(Error::InsufficientData { needed, got: n });
    }
    if !codes.is_finite() {
        return Err(Error::Numeric("codes contain non-finite values".into()));
    }
    let means = codes.column_means();
    let scale = 1.0 / ((n - 1) as f64).sqrt();
    let centred = Matrix::from_fn(n, d, |i, j| (codes.get(i, j) - means[j]) * scale);
    Ok(linalg::singular_values(&centred))
}

/// `½ Σ [ν²/σ² − ln(ν²/σ²) − 1]`, the divergence of `N(0, diag ν²)` from `N(0, σ² I)`.
pub fn pag_score(nu: &[f64], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let mut total = 0.0;
    for (i, &v) in nu.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Domain(format!("singular value {i} is {v}")));
        }
        if v == 0.0 {
            return Err(Error::InfiniteDivergence(format!(
                "singular value {i} is zero (degenerate covariance)"
            )));
        }
        let t = (v / sigma) * (v / sigma);
        total += t - t.ln() - 1.0;
    }
    Ok(0.5 * total)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PagReport {
    pub singular_values: Vec<f64>,
    pub prior_sigma: f64,
    pub pag: f64,
    pub n: usize,
}

impl PagReport {
    pub fn d(&self) -> usize {
        self.singular_values.len()
    }

    pub fn write_spectrum_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_spectrum_csv(&self.singular_values, path)
    }

    /// Single data row `n,d,sigma,pag`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_csv(
            path,
            PAG_HEADER,
            &[vec![
                self.n.into(),
                self.d().into(),
                self.prior_sigma.into(),
                self.pag.into(),
            ]],
        )
    }
}

pub fn write_spectrum_csv(values: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let rows: Vec<Vec<CsvField>> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| vec![i.into(), v.into()])
        .collect();
    write_csv(path, SPECTRUM_HEADER, &rows)
}

pub fn pag_from_codes(codes: &LatentCodeSet, sigma: f64) -> Result<PagReport> {
    let nu = singular_values(&codes.codes)?;
    let pag = pag_score(&nu, sigma)?;
    Ok(PagReport {
        singular_values: nu,
        prior_sigma: sigma,
        pag,
        n: codes.len(),
    })
}
