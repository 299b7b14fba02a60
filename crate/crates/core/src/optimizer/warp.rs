//! Backward warping, edge re-detection and image pyramids.

use crate::par::{self, Exec};
use crate::raster::{EdgeMap, Grid, Raster, Vec2};
use crate::{Error, Result};

/// Smallest side allowed at the coarsest pyramid level.
pub const MIN_LEVEL_SIDE: usize = 16;

/// Dense displacement with its coverage mask. Uncovered pixels carry zero
/// displacement.
#[derive(Clone, Debug, PartialEq)]
pub struct DeformationField {
    u: Grid<Vec2>,
    covered: Grid<bool>,
}

impl DeformationField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            u: Grid::filled(width, height, Vec2::zeros()),
            covered: Grid::filled(width, height, true),
        }
    }

    pub fn constant(width: usize, height: usize, u: Vec2) -> Self {
        Self {
            u: Grid::filled(width, height, u),
            covered: Grid::filled(width, height, true),
        }
    }

    /// Zeroes the displacement wherever `covered` is false.
    pub fn new(mut u: Grid<Vec2>, covered: Grid<bool>) -> Result<Self> {
        covered.ensure_dims(u.dims())?;
        for (v, &c) in u.data_mut().iter_mut().zip(covered.data()) {
            if !c {
                *v = Vec2::zeros();
            }
        }
        Ok(Self { u, covered })
    }

    pub fn width(&self) -> usize {
        self.u.width()
    }

    pub fn height(&self) -> usize {
        self.u.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.u.dims()
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> Vec2 {
        *self.u.get(x, y)
    }

    #[inline]
    pub fn is_covered(&self, x: usize, y: usize) -> bool {
        *self.covered.get(x, y)
    }

    pub fn displacements(&self) -> &Grid<Vec2> {
        &self.u
    }

    pub fn coverage(&self) -> &Grid<bool> {
        &self.covered
    }

    pub fn max_norm(&self) -> f64 {
        self.u.data().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// `out(x) = image(x + u(x))`, sampled bilinearly; samples outside the
/// image read as 0.
pub fn warp_image(image: &Raster, field: &DeformationField) -> Result<Raster> {
    warp_image_with(image, field, Exec::default())
}

pub fn warp_image_with(image: &Raster, field: &DeformationField, exec: Exec) -> Result<Raster> {
    image.ensure_dims(field.dims())?;
    let (w, h) = image.dims();
    let mut out = vec![0.0; w * h];
    par::for_each_chunk_mut(exec, &mut out, w, |y, row| {
        for (x, v) in row.iter_mut().enumerate() {
            let u = field.at(x, y);
            *v = if u.x == 0.0 && u.y == 0.0 {
                *image.get(x, y)
            } else {
                image.sample_bilinear(x as f64 + u.x, y as f64 + u.y)
            };
        }
    });
    Grid::from_vec(w, h, out)
}

/// Binary edge map: 1 where `image >= threshold`, else 0.
pub fn detect_edges(image: &Raster, threshold: f64) -> EdgeMap {
    EdgeMap::new(image.map(|&v| if v >= threshold { 1.0 } else { 0.0 }))
}

/// Edge map of a box-filtered pyramid level: every pixel touched by the
/// contour is kept, so thin and diagonal curves survive downsampling.
pub fn detect_level_edges(image: &Raster) -> EdgeMap {
    EdgeMap::new(image.map(|&v| if v > 0.0 { 1.0 } else { 0.0 }))
}

fn downsample(image: &Raster) -> Raster {
    let (w, h) = (image.width() / 2, image.height() / 2);
    Raster::from_fn(w, h, |x, y| {
        let (sx, sy) = (2 * x, 2 * y);
        0.25 * (image.get(sx, sy) + image.get(sx + 1, sy) + image.get(sx, sy + 1) + image.get(sx + 1, sy + 1))
    })
}

/// Factor-2 box-filtered chain, finest first. Odd sizes drop the last row or
/// column.
pub fn build_pyramid(image: &Raster, levels: usize) -> Result<Vec<Raster>> {
    if levels == 0 {
        return Err(Error::InvalidConfig("pyramid_levels must be >= 1".into()));
    }
    let (w, h) = image.dims();
    let shrink = 1usize << (levels - 1).min(usize::BITS as usize - 1);
    if levels > usize::BITS as usize || w / shrink < MIN_LEVEL_SIDE || h / shrink < MIN_LEVEL_SIDE {
        return Err(Error::TooManyLevels {
            levels,
            width: w,
            height: h,
        });
    }
    let mut out = vec![image.clone()];
    for _ in 1..levels {
        let next = downsample(out.last().expect("nonempty"));
        out.push(next);
    }
    Ok(out)
}
