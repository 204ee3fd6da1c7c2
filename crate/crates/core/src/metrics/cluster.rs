use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};

/// Lower bound on the within-cluster term.
pub const WITHIN_FLOOR: f64 = 1e-12;

/// Mean pairwise distance between cluster centroids divided by the mean
/// distance of points to their own centroid.
pub fn cluster_ratio(points: &Matrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != points.rows() {
        return Err(Error::Shape(format!(
            "{} labels for {} points",
            labels.len(),
            points.rows()
        )));
    }
    let d = points.cols();
    let mut sums: BTreeMap<usize, (Vec<f64>, usize)> = BTreeMap::new();
    for (row, &l) in points.row_iter().zip(labels) {
        let entry = sums.entry(l).or_insert_with(|| (vec![0.0; d], 0));
        for (s, v) in entry.0.iter_mut().zip(row) {
            *s += v;
        }
        entry.1 += 1;
    }
    if sums.len() < 2 {
        return Err(Error::Undefined(format!(
            "cluster ratio needs at least two clusters, got {}",
            sums.len()
        )));
    }
    let centroids: BTreeMap<usize, Vec<f64>> = sums
        .into_iter()
        .map(|(l, (s, c))| (l, s.into_iter().map(|v| v / c as f64).collect()))
        .collect();
    let cs: Vec<&Vec<f64>> = centroids.values().collect();
    let (mut between, mut pairs) = (0.0, 0usize);
    for i in 0..cs.len() {
        for j in (i + 1)..cs.len() {
            between += squared_distance(cs[i], cs[j]).sqrt();
            pairs += 1;
        }
    }
    between /= pairs as f64;
    let within = points
        .row_iter()
        .zip(labels)
        .map(|(row, l)| squared_distance(row, &centroids[l]).sqrt())
        .sum::<f64>()
        / points.rows() as f64;
    Ok(between / within.max(WITHIN_FLOOR))
}
