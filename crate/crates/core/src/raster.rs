//! Row-major rasters and edge maps.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Continuous 2-vector in pixel units, `x` along columns and `y` along rows.
pub type Vec2 = nalgebra::Vector2<f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Grayscale raster with intensities normalized to `[0, 1]`.
pub type Raster = Grid<f64>;

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                got: (data.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        &mut self.data[y * self.width + x]
    }

    /// Returns `None` for coordinates outside the grid.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> Option<&T> {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            None
        } else {
            Some(&self.data[y as usize * self.width + x as usize])
        }
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn ensure_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                got: self.dims(),
            });
        }
        Ok(())
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl Grid<f64> {
    /// Bilinear sample at a continuous position; samples outside the grid
    /// read as zero.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (xi, yi) = (x0 as isize, y0 as isize);
        let at = |dx: isize, dy: isize| self.get_signed(xi + dx, yi + dy).copied().unwrap_or(0.0);
        let top = at(0, 0) * (1.0 - fx) + at(1, 0) * fx;
        let bottom = at(0, 1) * (1.0 - fx) + at(1, 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// A contour raster. After edge detection every value is exactly 0 or 1;
/// interpolated (soft) maps with values in `[0, 1]` are admitted as weights.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMap {
    values: Raster,
}

impl EdgeMap {
    /// Value at or above which a pixel counts as a contour pixel.
    pub const CONTOUR_LEVEL: f64 = 0.5;

    pub fn new(values: Raster) -> Self {
        Self { values }
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self::new(Raster::filled(width, height, 0.0))
    }

    /// Binary map with the given pixels set.
    pub fn from_pixels(width: usize, height: usize, pixels: &[(usize, usize)]) -> Self {
        let mut values = Raster::filled(width, height, 0.0);
        for &(x, y) in pixels {
            *values.get_mut(x, y) = 1.0;
        }
        Self { values }
    }

    pub fn values(&self) -> &Raster {
        &self.values
    }

    pub fn into_raster(self) -> Raster {
        self.values
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }

    #[inline]
    pub fn value(&self, x: usize, y: usize) -> f64 {
        *self.values.get(x, y)
    }

    #[inline]
    pub fn is_contour(&self, x: usize, y: usize) -> bool {
        self.value(x, y) >= Self::CONTOUR_LEVEL
    }

    /// Contour pixels in row-major order.
    pub fn contour_pixels(&self) -> Vec<(usize, usize)> {
        let w = self.width();
        self.values
            .data()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v >= Self::CONTOUR_LEVEL)
            .map(|(i, _)| (i % w, i / w))
            .collect()
    }

    pub fn contour_count(&self) -> usize {
        self.values
            .data()
            .iter()
            .filter(|&&v| v >= Self::CONTOUR_LEVEL)
            .count()
    }

    /// Total contour mass, the sum of all values.
    pub fn mass(&self) -> f64 {
        self.values.data().iter().sum()
    }

    pub fn is_binary(&self) -> bool {
        self.values.data().iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn is_empty_contour(&self) -> bool {
        self.contour_count() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_at_integer_is_exact() {
        let g = Raster::from_fn(4, 3, |x, y| (x * 10 + y) as f64 * 0.1);
        for y in 0..3 {
            for x in 0..4 {
                assert_eq!(g.sample_bilinear(x as f64, y as f64), *g.get(x, y));
            }
        }
    }

    #[test]
    fn bilinear_outside_reads_zero() {
        let g = Raster::filled(3, 3, 1.0);
        assert_eq!(g.sample_bilinear(-1.0, 1.0), 0.0);
        assert_eq!(g.sample_bilinear(-0.5, 1.0), 0.5);
        assert_eq!(g.sample_bilinear(1.5, 1.5), 1.0);
    }

    #[test]
    fn edge_map_pixels_roundtrip() {
        let px = vec![(1, 0), (0, 2), (3, 2)];
        let e = EdgeMap::from_pixels(4, 3, &px);
        assert!(e.is_binary());
        assert_eq!(e.contour_pixels(), vec![(1, 0), (0, 2), (3, 2)]);
        assert_eq!(e.mass(), 3.0);
    }
}
