use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};

/// Index of the nearest center for each sample, or `None` when that center
/// is farther than `radius`.
pub fn assign_modes(
    samples: &Matrix,
    centers: &[Vec<f64>],
    radius: f64,
) -> Result<Vec<Option<usize>>> {
    if centers.is_empty() {
        return Err(Error::Config("at least one mode center is required".into()));
    }
    if let Some(c) = centers.iter().find(|c| c.len() != samples.cols()) {
        return Err(Error::Shape(format!(
            "center has {} coordinates, samples have {}",
            c.len(),
            samples.cols()
        )));
    }
    let r2 = radius * radius;
    Ok(samples
        .row_iter()
        .map(|x| {
            let (best, d2) = centers
                .iter()
                .enumerate()
                .map(|(i, c)| (i, squared_distance(x, c)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("centers is non-empty");
            (d2 <= r2).then_some(best)
        })
        .collect())
}

/// Number of modes that receive at least `min_count` samples within `radius`.
pub fn mode_coverage(
    samples: &Matrix,
    centers: &[Vec<f64>],
    radius: f64,
    min_count: usize,
) -> Result<usize> {
    let mut counts = vec![0usize; centers.len()];
    for m in assign_modes(samples, centers, radius)?
        .into_iter()
        .flatten()
    {
        counts[m] += 1;
    }
    Ok(counts.iter().filter(|&&c| c >= min_count.max(1)).count())
}
