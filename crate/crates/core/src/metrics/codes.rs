use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// How a single row's reversal ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowStatus {
    Converged,
    /// Stopped at the step budget.
    MaxSteps,
    /// Loss became non-finite; the code is the last finite iterate.
    Failed,
}

impl RowStatus {
    pub fn to_byte(self) -> u8 {
        match self {
            RowStatus::Converged => 0,
            RowStatus::MaxSteps => 1,
            RowStatus::Failed => 2,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(RowStatus::Converged),
            1 => Some(RowStatus::MaxSteps),
            2 => Some(RowStatus::Failed),
            _ => None,
        }
    }
}

/// Reversed latent codes for a batch of data points (one row per point).
#[derive(Clone, Debug, PartialEq)]
pub struct LatentCodeSet {
    pub codes: Matrix,
    pub reversal_losses: Vec<f64>,
    pub status: Vec<RowStatus>,
    /// Dataset id and generator checkpoint id the codes came from.
    pub source: String,
}

impl LatentCodeSet {
    pub fn new(
        codes: Matrix,
        reversal_losses: Vec<f64>,
        status: Vec<RowStatus>,
        source: impl Into<String>,
    ) -> Result<Self> {
        if reversal_losses.len() != codes.rows() || status.len() != codes.rows() {
            return Err(Error::Shape(format!(
                "{} codes but {} losses and {} statuses",
                codes.rows(),
                reversal_losses.len(),
                status.len()
            )));
        }
        Ok(LatentCodeSet {
            codes,
            reversal_losses,
            status,
            source: source.into(),
        })
    }

    /// Codes without per-row bookkeeping (e.g. prior samples).
    pub fn from_codes(codes: Matrix, source: impl Into<String>) -> Self {
        let n = codes.rows();
        LatentCodeSet {
            codes,
            reversal_losses: vec![0.0; n],
            status: vec![RowStatus::Converged; n],
            source: source.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.codes.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.codes.cols()
    }

    pub fn mean_loss(&self) -> f64 {
        let finite: Vec<f64> = self
            .reversal_losses
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .collect();
        finite.iter().sum::<f64>() / finite.len().max(1) as f64
    }

    pub fn failures(&self) -> usize {
        self.status
            .iter()
            .filter(|s| **s == RowStatus::Failed)
            .count()
    }
}
