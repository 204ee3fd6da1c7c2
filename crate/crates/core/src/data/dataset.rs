//! Synthetic desk-scale datasets. Values always lie in `[−1, 1]` to match a
//! tanh generator output.

use std::f64::consts::PI;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::random::{self, derive_seed, standard_normal};

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Matrix,
    pub labels: Option<Vec<usize>>,
    pub source: String,
}

impl Dataset {
    pub fn new(
        samples: Matrix,
        labels: Option<Vec<usize>>,
        source: impl Into<String>,
    ) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != samples.rows() {
                return Err(Error::Shape(format!(
                    "{} labels for {} samples",
                    l.len(),
                    samples.rows()
                )));
            }
        }
        if samples.as_slice().iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::Domain("dataset values must lie in [-1, 1]".into()));
        }
        Ok(Dataset {
            samples,
            labels,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.samples.cols()
    }

    /// First `n` rows (or all of them).
    pub fn head(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: self.samples.select_rows(indices),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            source: self.source.clone(),
        }
    }
}

/// Balanced, shuffled class assignment: each class appears `n / classes` or
/// `n / classes + 1` times.
fn balanced_labels(n: usize, classes: usize, seed: u64) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    labels.shuffle(&mut random::rng(seed));
    labels
}

/// Mode centres of the ring mixture.
pub fn ring_centers(modes: usize, radius: f64) -> Vec<[f64; 2]> {
    (0..modes)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / modes as f64;
            [radius * a.cos(), radius * a.sin()]
        })
        .collect()
}

/// `n` points from `modes` equally weighted Gaussians with centres evenly
/// spaced on a circle of `radius`. Coordinates are clipped to `[−1, 1]`, so
/// choose `radius + 3 · mode_stddev ≤ 1` to leave the mixture intact.
pub fn make_ring2d(
    n: usize,
    modes: usize,
    radius: f64,
    mode_stddev: f64,
    seed: u64,
) -> Result<Dataset> {
    if modes < 2 {
        return Err(Error::Config(format!(
            "ring needs at least 2 modes, got {modes}"
        )));
    }
    if !(mode_stddev >= 0.0) || !(radius > 0.0 && radius <= 1.0) {
        return Err(Error::Config(format!(
            "ring radius must be in (0, 1] and stddev nonnegative (got {radius}, {mode_stddev})"
        )));
    }
    let labels = balanced_labels(n, modes, derive_seed(seed, &[0]));
    let centers = ring_centers(modes, radius);
    let mut rng = random::rng(derive_seed(seed, &[1]));
    let mut data = Vec::with_capacity(2 * n);
    for &k in &labels {
        for c in centers[k] {
            let v = if mode_stddev == 0.0 {
                c
            } else {
                c + mode_stddev * standard_normal(&mut rng)
            };
            data.push(v.clamp(-1.0, 1.0));
        }
    }
    Dataset::new(
        Matrix::new(n, 2, data)?,
        Some(labels),
        format!("ring2d-{modes}"),
    )
}

/// Blob positions for a `grid x grid` canvas: `grid` points on a circle
/// around the image centre.
pub fn blob_positions(grid: usize) -> Vec<[f64; 2]> {
    let c = (grid as f64 - 1.0) / 2.0;
    let r = 0.3 * grid as f64;
    (0..grid)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / grid as f64;
            [c + r * a.cos(), c + r * a.sin()]
        })
        .collect()
}

/// `n` grayscale `grid x grid` images of a single Gaussian blob placed at one
/// of `grid` positions with Gaussian jitter. Background is −1, blob peak 1.
pub fn make_blob_images(n: usize, grid: usize, seed: u64) -> Result<Dataset> {
    if grid < 4 {
        return Err(Error::Config(format!(
            "blob grid must be at least 4, got {grid}"
        )));
    }
    let labels = balanced_labels(n, grid, derive_seed(seed, &[0]));
    let positions = blob_positions(grid);
    let width = (grid as f64 / 8.0).max(1.0);
    let jitter = 0.35;
    let mut rng = random::rng(derive_seed(seed, &[1]));
    let mut data = Vec::with_capacity(n * grid * grid);
    for &k in &labels {
        let cy = positions[k][0] + jitter * standard_normal(&mut rng);
        let cx = positions[k][1] + jitter * standard_normal(&mut rng);
        for y in 0..grid {
            for x in 0..grid {
                let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                let v = 2.0 * (-d2 / (2.0 * width * width)).exp() - 1.0;
                data.push(v.clamp(-1.0, 1.0));
            }
        }
    }
    Dataset::new(
        Matrix::new(n, grid * grid, data)?,
        Some(labels),
        format!("blobs-{grid}"),
    )
}
