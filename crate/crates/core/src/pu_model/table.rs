use super::basis::MonomialBasis;
use super::weight::Patch;
use crate::par::{self, Exec};
use crate::raster::{Grid, Vec2};

/// Partition weights `r_p(x)` tabulated at every pixel of a fixed layout.
///
/// Patches stay put during registration, so the normalized weights are
/// computed once per layout and reused for every blend and gradient
/// assembly. Entries for each pixel are stored in increasing patch order.
pub struct PartitionTable {
    width: usize,
    height: usize,
    offsets: Vec<usize>,
    patch_ids: Vec<u32>,
    weights: Vec<f64>,
    support_pixels: usize,
}

impl PartitionTable {
    pub fn new(patches: &[Patch], width: usize, height: usize, exec: Exec) -> Self {
        // Raw weights per patch over its clipped bounding box.
        let per_patch: Vec<Vec<(u32, f64)>> = par::map_indices(exec, patches.len(), |p| {
            let patch = &patches[p];
            let reach = patch.support_radius();
            let x0 = (patch.center.x - reach).floor().max(0.0) as usize;
            let y0 = (patch.center.y - reach).floor().max(0.0) as usize;
            let x1 = ((patch.center.x + reach).ceil().max(-1.0) + 1.0).min(width as f64) as usize;
            let y1 = ((patch.center.y + reach).ceil().max(-1.0) + 1.0).min(height as f64) as usize;
            let mut out = Vec::new();
            for y in y0..y1 {
                for x in x0..x1 {
                    let d = (Vec2::new(x as f64, y as f64) - patch.center).norm();
                    let w = patch.weight_at_distance(d);
                    if w > 0.0 {
                        out.push(((y * width + x) as u32, w));
                    }
                }
            }
            out
        });
        let support_pixels = per_patch.iter().map(Vec::len).sum();

        let n_pix = width * height;
        let mut counts = vec![0usize; n_pix + 1];
        for list in &per_patch {
            for &(px, _) in list {
                counts[px as usize + 1] += 1;
            }
        }
        for i in 0..n_pix {
            counts[i + 1] += counts[i];
        }
        let offsets = counts;
        let mut cursor = offsets.clone();
        let mut patch_ids = vec![0u32; support_pixels];
        let mut weights = vec![0.0; support_pixels];
        for (p, list) in per_patch.iter().enumerate() {
            for &(px, w) in list {
                let slot = &mut cursor[px as usize];
                patch_ids[*slot] = p as u32;
                weights[*slot] = w;
                *slot += 1;
            }
        }
        for px in 0..n_pix {
            let range = offsets[px]..offsets[px + 1];
            let total: f64 = weights[range.clone()].iter().sum();
            if total > 0.0 {
                for w in &mut weights[range] {
                    *w /= total;
                }
            }
        }
        Self {
            width,
            height,
            offsets,
            patch_ids,
            weights,
            support_pixels,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// `(patch, r_p)` pairs at a pixel index.
    pub fn entries(&self, pixel: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[pixel]..self.offsets[pixel + 1];
        self.patch_ids[range.clone()]
            .iter()
            .zip(&self.weights[range])
            .map(|(&p, &w)| (p as usize, w))
    }

    pub fn is_covered(&self, pixel: usize) -> bool {
        self.offsets[pixel + 1] > self.offsets[pixel]
    }

    pub fn coverage(&self) -> Grid<bool> {
        Grid::from_fn(self.width, self.height, |x, y| self.is_covered(y * self.width + x))
    }

    pub fn covered_count(&self) -> usize {
        (0..self.width * self.height).filter(|&i| self.is_covered(i)).count()
    }

    /// Sum of patch support sizes inside the domain: the number of pixels
    /// visited by per-patch gradient sums.
    pub fn support_pixels(&self) -> usize {
        self.support_pixels
    }

    /// Blended displacement at one pixel; `None` when uncovered.
    #[inline]
    pub fn displacement_at(
        &self,
        pixel: usize,
        basis: &MonomialBasis,
        patches: &[Patch],
        coeffs: &[f64],
        phi: &mut [f64],
    ) -> Option<Vec2> {
        if !self.is_covered(pixel) {
            return None;
        }
        let nb = basis.len();
        let x = Vec2::new((pixel % self.width) as f64, (pixel / self.width) as f64);
        let mut u = Vec2::zeros();
        for (p, r) in self.entries(pixel) {
            basis.eval_into(x - patches[p].center, phi);
            let d = &coeffs[p * 2 * nb..(p + 1) * 2 * nb];
            let (mut a, mut b) = (0.0, 0.0);
            for (i, &f) in phi.iter().enumerate() {
                a += d[2 * i] * f;
                b += d[2 * i + 1] * f;
            }
            u.x += r * a;
            u.y += r * b;
        }
        Some(u)
    }

    /// Dense blended field; uncovered pixels get zero displacement.
    pub fn blend_field(
        &self,
        basis: &MonomialBasis,
        patches: &[Patch],
        coeffs: &[f64],
        exec: Exec,
    ) -> Grid<Vec2> {
        let w = self.width;
        let mut out = vec![Vec2::zeros(); w * self.height];
        par::for_each_chunk_mut(exec, &mut out, w, |y, row| {
            let mut phi = vec![0.0; basis.len()];
            for (x, u) in row.iter_mut().enumerate() {
                if let Some(v) = self.displacement_at(y * w + x, basis, patches, coeffs, &mut phi) {
                    *u = v;
                }
            }
        });
        Grid::from_vec(w, self.height, out).expect("table dimensions")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pu_model::{blend, MeshlessModel};

    #[test]
    fn table_blend_matches_direct_blend() {
        let patches: Vec<Patch> = [(3.0, 4.0, 5.0), (9.0, 6.0, 4.0), (6.0, 12.0, 7.0)]
            .iter()
            .map(|&(x, y, r)| Patch::new(Vec2::new(x, y), r, 0.8).unwrap())
            .collect();
        let mut m = MeshlessModel::new(MonomialBasis::tensor(1), patches.clone(), 16, 18);
        for (i, c) in m.coeffs_mut().iter_mut().enumerate() {
            *c = (i as f64 * 0.37).sin();
        }
        let t = PartitionTable::new(&patches, 16, 18, Exec::Parallel);
        let f = t.blend_field(m.basis(), &patches, m.coeffs(), Exec::Parallel);
        for y in 0..18 {
            for x in 0..16 {
                let p = Vec2::new(x as f64, y as f64);
                match blend(&m, p) {
                    Ok(u) => {
                        assert!(t.is_covered(y * 16 + x));
                        assert!((u - f.get(x, y)).norm() < 1e-12);
                    }
                    Err(_) => {
                        assert!(!t.is_covered(y * 16 + x));
                        assert_eq!(*f.get(x, y), Vec2::zeros());
                    }
                }
            }
        }
    }
}
