//! Mutual contour distance statistics.
//!
//! Distances are pooled over both directions: every pixel of `a` contributes
//! its distance to `b` and every pixel of `b` its distance to `a`. Variance
//! is the population variance of the pooled values.

use serde::{Deserialize, Serialize};

use crate::dtransform::compute_distance_transform;
use crate::raster::EdgeMap;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub mean: f64,
    pub max: f64,
    pub variance: f64,
    pub n_points: usize,
}

impl DistanceStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let max = values.iter().copied().fold(0.0, f64::max);
        Some(Self {
            mean,
            max,
            variance,
            n_points: values.len(),
        })
    }

    pub const CSV_HEADER: &'static str = "mean,max,variance,n_points";

    pub fn csv_row(&self) -> String {
        format!("{:.6},{:.6},{:.6},{}", self.mean, self.max, self.variance, self.n_points)
    }
}

/// Pooled distances of each contour to the other, `a` first.
pub fn mutual_distances(a: &EdgeMap, b: &EdgeMap) -> Result<Vec<f64>> {
    b.values().ensure_dims(a.dims())?;
    let da = compute_distance_transform(a)?;
    let db = compute_distance_transform(b)?;
    let mut out = Vec::with_capacity(a.contour_count() + b.contour_count());
    out.extend(a.contour_pixels().into_iter().map(|(x, y)| db.at(x, y)));
    out.extend(b.contour_pixels().into_iter().map(|(x, y)| da.at(x, y)));
    Ok(out)
}

pub fn mutual_distance_stats(a: &EdgeMap, b: &EdgeMap) -> Result<DistanceStats> {
    DistanceStats::from_values(&mutual_distances(a, b)?).ok_or(Error::NoContour)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_maps() {
        let a = EdgeMap::from_pixels(10, 10, &[(1, 1), (2, 2), (7, 3)]);
        let s = mutual_distance_stats(&a, &a).unwrap();
        assert_eq!((s.mean, s.max, s.variance, s.n_points), (0.0, 0.0, 0.0, 6));
    }

    #[test]
    fn two_points_five_apart() {
        let a = EdgeMap::from_pixels(12, 12, &[(1, 1)]);
        let b = EdgeMap::from_pixels(12, 12, &[(4, 5)]);
        let s = mutual_distance_stats(&a, &b).unwrap();
        assert_eq!((s.mean, s.max, s.variance, s.n_points), (5.0, 5.0, 0.0, 2));
        assert_eq!(s, mutual_distance_stats(&b, &a).unwrap());
    }

    #[test]
    fn population_variance() {
        // Pool is {0, 2, 0} -> mean 2/3, variance 8/9.
        let a = EdgeMap::from_pixels(10, 10, &[(1, 1), (3, 1)]);
        let b = EdgeMap::from_pixels(10, 10, &[(1, 1)]);
        let s = mutual_distance_stats(&a, &b).unwrap();
        assert!((s.mean - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.variance - 8.0 / 9.0).abs() < 1e-15);
        assert_eq!(s.max, 2.0);
    }

    #[test]
    fn empty_is_error() {
        let a = EdgeMap::from_pixels(10, 10, &[(1, 1)]);
        assert!(mutual_distance_stats(&a, &EdgeMap::empty(10, 10)).is_err());
    }
}
