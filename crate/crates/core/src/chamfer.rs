//! Variational chamfer-matching energy and its approximate gradient.
//!
//! The energy is symmetric: warped-source pixels are scored against the
//! target's distance field (forward term) and target pixels against the
//! warped source's distance field (backward term), each normalized by its
//! contour mass. Integrals are pixel sums.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dtransform::{sample_gradient, DistanceField};
use crate::par::{self, Exec};
use crate::pu_model::{MeshlessModel, PartitionTable};
use crate::raster::{EdgeMap, Grid, Vec2};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub forward: f64,
    pub backward: f64,
    pub total: f64,
    pub a_s: f64,
    pub a_d: f64,
}

fn check_dims(
    warped_source: &EdgeMap,
    target: &EdgeMap,
    dt_target: &DistanceField,
    dt_warped: &DistanceField,
) -> Result<(usize, usize)> {
    let dims = target.dims();
    warped_source.values().ensure_dims(dims)?;
    dt_target.grid().ensure_dims(dims)?;
    dt_warped.grid().ensure_dims(dims)?;
    Ok(dims)
}

pub fn data_energy(
    warped_source: &EdgeMap,
    target: &EdgeMap,
    dt_target: &DistanceField,
    dt_warped: &DistanceField,
) -> Result<EnergyBreakdown> {
    data_energy_with(warped_source, target, dt_target, dt_warped, Exec::default())
}

pub fn data_energy_with(
    warped_source: &EdgeMap,
    target: &EdgeMap,
    dt_target: &DistanceField,
    dt_warped: &DistanceField,
    exec: Exec,
) -> Result<EnergyBreakdown> {
    let (w, h) = check_dims(warped_source, target, dt_target, dt_warped)?;
    // Per-row partials summed in row order keep the result deterministic.
    let rows: Vec<[f64; 4]> = par::map_indices(exec, h, |y| {
        let mut acc = [0.0; 4];
        for x in 0..w {
            let s = warped_source.value(x, y);
            let d = target.value(x, y);
            if s != 0.0 {
                let pd = dt_target.at(x, y);
                acc[0] += s * pd * pd;
                acc[2] += s;
            }
            if d != 0.0 {
                let ps = dt_warped.at(x, y);
                acc[1] += d * ps * ps;
                acc[3] += d;
            }
        }
        acc
    });
    let mut sums = [0.0; 4];
    for r in &rows {
        for k in 0..4 {
            sums[k] += r[k];
        }
    }
    let [ef, eb, a_s, a_d] = sums;
    if a_s <= 0.0 || a_d <= 0.0 {
        return Err(Error::NoContour);
    }
    let forward = ef / a_s;
    let backward = eb / a_d;
    Ok(EnergyBreakdown {
        forward,
        backward,
        total: forward + backward,
        a_s,
        a_d,
    })
}

/// Pointwise chamfer gradient over the raster.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    vectors: Grid<Vec2>,
}

impl GradientField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            vectors: Grid::filled(width, height, Vec2::zeros()),
        }
    }

    pub fn from_grid(vectors: Grid<Vec2>) -> Self {
        Self { vectors }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.vectors.dims()
    }

    pub fn at(&self, x: usize, y: usize) -> Vec2 {
        *self.vectors.get(x, y)
    }

    pub fn grid(&self) -> &Grid<Vec2> {
        &self.vectors
    }

    pub fn max_norm(&self) -> f64 {
        self.vectors.data().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Row-major indices of pixels with a nonzero vector.
    pub fn support(&self) -> Vec<usize> {
        self.vectors
            .data()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.x != 0.0 || v.y != 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// `J(x) = -P_D(x) grad P_D(x) S(x) + P_S(x) grad P_S(x) D(x)` with the
/// factor 2 and the contour-mass normalizers dropped.
///
/// Distance gradients need a one-pixel margin; contributions on the outer
/// border ring are zero.
pub fn chamfer_gradient_field(
    warped_source: &EdgeMap,
    target: &EdgeMap,
    dt_target: &DistanceField,
    dt_warped: &DistanceField,
) -> Result<GradientField> {
    chamfer_gradient_field_with(warped_source, target, dt_target, dt_warped, Exec::default())
}

pub fn chamfer_gradient_field_with(
    warped_source: &EdgeMap,
    target: &EdgeMap,
    dt_target: &DistanceField,
    dt_warped: &DistanceField,
    exec: Exec,
) -> Result<GradientField> {
    weighted_gradient_field(warped_source, target, dt_target, dt_warped, 1.0, 1.0, exec)
}

/// `forward_weight * forward force + backward_weight * backward force`.
pub fn weighted_gradient_field(
    warped_source: &EdgeMap,
    target: &EdgeMap,
    dt_target: &DistanceField,
    dt_warped: &DistanceField,
    forward_weight: f64,
    backward_weight: f64,
    exec: Exec,
) -> Result<GradientField> {
    let (w, h) = check_dims(warped_source, target, dt_target, dt_warped)?;
    let mut out = vec![Vec2::zeros(); w * h];
    par::for_each_chunk_mut(exec, &mut out, w, |y, row| {
        if y == 0 || y + 1 >= h {
            return;
        }
        for (x, j) in row.iter_mut().enumerate().take(w.saturating_sub(1)).skip(1) {
            let p = Vec2::new(x as f64, y as f64);
            let s = warped_source.value(x, y);
            let d = target.value(x, y);
            let mut v = Vec2::zeros();
            if s != 0.0 {
                let pd = dt_target.at(x, y);
                if pd != 0.0 {
                    v -= forward_weight * s * pd * sample_gradient(dt_target, p).expect("interior pixel");
                }
            }
            if d != 0.0 {
                let ps = dt_warped.at(x, y);
                if ps != 0.0 {
                    v += backward_weight * d * ps * sample_gradient(dt_warped, p).expect("interior pixel");
                }
            }
            *j = v;
        }
    });
    Ok(GradientField::from_grid(Grid::from_vec(w, h, out)?))
}

/// `sum_x r_p(x) phi_p(x) J(x)^T` over the support of patch `p`, as an
/// `n_b x 2` matrix.
pub fn data_gradient(field: &GradientField, model: &MeshlessModel, p: usize) -> Result<DMatrix<f64>> {
    model.check_index(p)?;
    let (w, h) = field.dims();
    let patch = model.patches()[p];
    let nb = model.basis().len();
    let mut phi = vec![0.0; nb];
    let mut g = DMatrix::zeros(nb, 2);
    let reach = patch.support_radius();
    let x0 = (patch.center.x - reach).floor().max(0.0) as usize;
    let y0 = (patch.center.y - reach).floor().max(0.0) as usize;
    let x1 = ((patch.center.x + reach).ceil() + 1.0).clamp(0.0, w as f64) as usize;
    let y1 = ((patch.center.y + reach).ceil() + 1.0).clamp(0.0, h as f64) as usize;
    for y in y0..y1 {
        for x in x0..x1 {
            let j = field.at(x, y);
            if j.x == 0.0 && j.y == 0.0 {
                continue;
            }
            let pos = Vec2::new(x as f64, y as f64);
            let wp = crate::pu_model::patch_weight(&patch, pos);
            if wp <= 0.0 {
                continue;
            }
            let r = wp / model.weight_sum(pos);
            model.basis().eval_into(pos - patch.center, &mut phi);
            for (i, &f) in phi.iter().enumerate() {
                g[(i, 0)] += r * f * j.x;
                g[(i, 1)] += r * f * j.y;
            }
        }
    }
    Ok(g)
}

/// [`data_gradient`] for every patch at once, as one flat interleaved
/// vector, using tabulated partition weights.
pub fn data_gradient_all(
    field: &GradientField,
    table: &PartitionTable,
    model: &MeshlessModel,
) -> Vec<f64> {
    let nb = model.basis().len();
    let patches = model.patches();
    let (w, _) = field.dims();
    let mut grad = vec![0.0; model.coeffs().len()];
    let mut phi = vec![0.0; nb];
    for px in field.support() {
        let j = field.grid().data()[px];
        let pos = Vec2::new((px % w) as f64, (px / w) as f64);
        for (p, r) in table.entries(px) {
            model.basis().eval_into(pos - patches[p].center, &mut phi);
            let g = &mut grad[p * 2 * nb..(p + 1) * 2 * nb];
            for (i, &f) in phi.iter().enumerate() {
                g[2 * i] += r * f * j.x;
                g[2 * i + 1] += r * f * j.y;
            }
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtransform::compute_distance_transform;
    use crate::pu_model::{MonomialBasis, Patch};

    fn setup(src: &[(usize, usize)], tgt: &[(usize, usize)], n: usize) -> (EdgeMap, EdgeMap, DistanceField, DistanceField) {
        let s = EdgeMap::from_pixels(n, n, src);
        let d = EdgeMap::from_pixels(n, n, tgt);
        let dt_d = compute_distance_transform(&d).unwrap();
        let dt_s = compute_distance_transform(&s).unwrap();
        (s, d, dt_d, dt_s)
    }

    #[test]
    fn identical_shapes_have_zero_energy_and_gradient() {
        let px = [(3, 3), (4, 3), (5, 4), (5, 5)];
        let (s, d, dd, ds) = setup(&px, &px, 10);
        let e = data_energy(&s, &d, &dd, &ds).unwrap();
        assert_eq!(e.total, 0.0);
        let j = chamfer_gradient_field(&s, &d, &dd, &ds).unwrap();
        assert_eq!(j.max_norm(), 0.0);
    }

    #[test]
    fn lone_pixels_five_apart() {
        let (s, d, dd, ds) = setup(&[(0, 0)], &[(3, 4)], 10);
        let e = data_energy(&s, &d, &dd, &ds).unwrap();
        assert_eq!((e.forward, e.backward, e.total), (25.0, 25.0, 50.0));
        assert_eq!((e.a_s, e.a_d), (1.0, 1.0));
    }

    #[test]
    fn swapping_swaps_terms() {
        let (s, d, dd, ds) = setup(&[(1, 1), (2, 1), (6, 6)], &[(3, 4), (7, 2)], 10);
        let e = data_energy(&s, &d, &dd, &ds).unwrap();
        let r = data_energy(&d, &s, &ds, &dd).unwrap();
        assert_eq!(e.forward, r.backward);
        assert_eq!(e.backward, r.forward);
        assert!((e.total - r.total).abs() < 1e-12);
    }

    #[test]
    fn empty_contour_is_an_error() {
        let (s, d, dd, ds) = setup(&[(1, 1)], &[(3, 4)], 10);
        let empty = EdgeMap::empty(10, 10);
        assert!(matches!(data_energy(&empty, &d, &dd, &ds), Err(Error::NoContour)));
        assert!(matches!(data_energy(&s, &empty, &dd, &ds), Err(Error::NoContour)));
    }

    #[test]
    fn dimension_mismatch() {
        let (s, d, dd, _) = setup(&[(1, 1)], &[(3, 4)], 10);
        let other = compute_distance_transform(&EdgeMap::from_pixels(9, 10, &[(1, 1)])).unwrap();
        assert!(matches!(
            data_energy(&s, &d, &dd, &other),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn forward_force_at_source_pixel() {
        let (s, d, dd, ds) = setup(&[(1, 2)], &[(5, 2)], 8);
        let j = chamfer_gradient_field(&s, &d, &dd, &ds).unwrap();
        // grad P_D = (-1, 0) at the source pixel, so -P_D grad P_D = (4, 0).
        let v = j.at(1, 2);
        assert!((v - Vec2::new(4.0, 0.0)).norm() < 1e-9, "{v:?}");
        // Zero wherever both indicators vanish.
        for y in 0..8 {
            for x in 0..8 {
                if !s.is_contour(x, y) && !d.is_contour(x, y) {
                    assert_eq!(j.at(x, y), Vec2::zeros());
                }
            }
        }
    }

    #[test]
    fn doubled_source_weights_keep_forward_energy() {
        let (s, d, dd, ds) = setup(&[(1, 1), (2, 1), (6, 6)], &[(3, 4), (7, 2)], 10);
        let e = data_energy(&s, &d, &dd, &ds).unwrap();
        let s2 = EdgeMap::new(s.values().map(|v| 2.0 * v));
        let e2 = data_energy(&s2, &d, &dd, &ds).unwrap();
        assert_eq!(e.forward, e2.forward);
    }

    #[test]
    fn constant_field_on_single_patch() {
        let n = 41;
        let c = 0.75;
        let field = GradientField::from_grid(Grid::filled(n, n, Vec2::new(c, 0.0)));
        let patch = Patch::new(Vec2::new(20.0, 20.0), 8.0, 1.0).unwrap();
        let model = MeshlessModel::new(MonomialBasis::tensor(1), vec![patch], n, n);
        let g = data_gradient(&field, &model, 0).unwrap();
        let count = (0..n * n)
            .filter(|i| {
                let p = Vec2::new((i % n) as f64, (i / n) as f64);
                crate::pu_model::patch_weight(&patch, p) > 0.0
            })
            .count() as f64;
        assert!((g[(0, 0)] - c * count).abs() < 1e-9);
        assert_eq!(g[(0, 1)], 0.0);
        let zero = data_gradient(&GradientField::zeros(n, n), &model, 0).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tabulated_gradient_matches_direct() {
        let (s, d, dd, ds) = setup(&[(5, 5), (6, 5), (7, 6)], &[(9, 9), (10, 9), (11, 10)], 20);
        let j = chamfer_gradient_field(&s, &d, &dd, &ds).unwrap();
        let patches: Vec<Patch> = [(4.0, 4.0), (10.0, 10.0), (8.0, 3.0)]
            .iter()
            .map(|&(x, y)| Patch::new(Vec2::new(x, y), 5.0, 1.0).unwrap())
            .collect();
        let model = MeshlessModel::new(MonomialBasis::tensor(1), patches.clone(), 20, 20);
        let table = PartitionTable::new(&patches, 20, 20, Exec::Sequential);
        let all = data_gradient_all(&j, &table, &model);
        for p in 0..3 {
            let g = data_gradient(&j, &model, p).unwrap();
            for i in 0..4 {
                for c in 0..2 {
                    assert!((g[(i, c)] - all[p * 8 + 2 * i + c]).abs() < 1e-9);
                }
            }
        }
    }
}
