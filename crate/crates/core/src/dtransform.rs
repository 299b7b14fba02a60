//! Exact unsigned Euclidean distance transforms.
//!
//! The transform is computed as the lower envelope of parabolas, one
//! dimension at a time (columns, then rows), on squared distances. Squared
//! distances between pixel centers are integers, so the result is exact and
//! matches a brute-force nearest-contour scan bit for bit.

use crate::par::{self, Exec};
use crate::raster::{EdgeMap, Grid, Vec2};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    dist: Grid<f64>,
}

impl DistanceField {
    pub fn width(&self) -> usize {
        self.dist.width()
    }

    pub fn height(&self) -> usize {
        self.dist.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dist.dims()
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        *self.dist.get(x, y)
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.dist
    }

    /// Central-difference gradient at an interior pixel.
    #[inline]
    fn pixel_gradient(&self, x: usize, y: usize) -> Vec2 {
        Vec2::new(
            0.5 * (self.at(x + 1, y) - self.at(x - 1, y)),
            0.5 * (self.at(x, y + 1) - self.at(x, y - 1)),
        )
    }
}

/// Exact Euclidean distance from every pixel to the nearest contour pixel.
pub fn compute_distance_transform(edges: &EdgeMap) -> Result<DistanceField> {
    compute_distance_transform_with(edges, Exec::default())
}

pub fn compute_distance_transform_with(edges: &EdgeMap, exec: Exec) -> Result<DistanceField> {
    let (w, h) = edges.dims();
    if edges.is_empty_contour() {
        return Err(Error::NoContour);
    }

    // Pass 1: squared distance along each column.
    let columns: Vec<Vec<f64>> = par::map_indices(exec, w, |x| {
        let f: Vec<f64> = (0..h)
            .map(|y| if edges.is_contour(x, y) { 0.0 } else { f64::INFINITY })
            .collect();
        let mut out = vec![0.0; h];
        lower_envelope_1d(&f, &mut out, &mut Envelope::with_capacity(h));
        out
    });

    // Pass 2: combine along rows, then take the root.
    let mut dist = vec![0.0; w * h];
    par::for_each_chunk_mut(exec, &mut dist, w, |y, row| {
        let f: Vec<f64> = columns.iter().map(|c| c[y]).collect();
        lower_envelope_1d(&f, row, &mut Envelope::with_capacity(w));
        for v in row.iter_mut() {
            *v = v.sqrt();
        }
    });

    Ok(DistanceField {
        dist: Grid::from_vec(w, h, dist)?,
    })
}

struct Envelope {
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            sites: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n + 1),
        }
    }
}

/// `out[q] = min_v (q - v)^2 + f[v]` over sites with finite `f[v]`.
fn lower_envelope_1d(f: &[f64], out: &mut [f64], env: &mut Envelope) {
    let Envelope { sites, bounds } = env;
    sites.clear();
    bounds.clear();

    let intersect = |q: usize, v: usize| -> f64 {
        let (qf, vf) = (q as f64, v as f64);
        ((f[q] + qf * qf) - (f[v] + vf * vf)) / (2.0 * qf - 2.0 * vf)
    };

    for q in (0..f.len()).filter(|&q| f[q].is_finite()) {
        loop {
            match sites.last() {
                None => {
                    sites.push(q);
                    bounds.clear();
                    bounds.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&v) => {
                    let s = intersect(q, v);
                    if s <= *bounds.last().unwrap() {
                        sites.pop();
                        bounds.pop();
                    } else {
                        sites.push(q);
                        bounds.push(s);
                        break;
                    }
                }
            }
        }
    }

    if sites.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    bounds.push(f64::INFINITY);
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while bounds[k + 1] < qf {
            k += 1;
        }
        let v = sites[k];
        let d = qf - v as f64;
        *o = d * d + f[v];
    }
}

/// Gradient of the distance field at a continuous position: bilinear
/// interpolation of per-pixel central differences. No normalization is
/// applied. The position must lie at least one pixel inside the border.
pub fn sample_gradient(field: &DistanceField, p: Vec2) -> Result<Vec2> {
    let (w, h) = field.dims();
    let (x, y) = (p.x, p.y);
    let inside = x.is_finite()
        && y.is_finite()
        && x >= 1.0
        && y >= 1.0
        && x <= (w as f64) - 2.0
        && y <= (h as f64) - 2.0;
    if !inside {
        return Err(Error::GradientOutOfBounds { x, y });
    }
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let mut g = Vec2::zeros();
    for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
        for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
            let wt = wx * wy;
            if wt > 0.0 {
                g += wt * field.pixel_gradient(x0 + dx, y0 + dy);
            }
        }
    }
    Ok(g)
}
