//! Patch layouts: regular grids and contour-adaptive placement.

use serde::{Deserialize, Serialize};

use crate::dtransform::DistanceField;
use crate::pu_model::Patch;
use crate::raster::{EdgeMap, Vec2};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlacementConfig {
    /// Spacing between patch centers (grid step or arc length), pixels.
    pub spacing: f64,
    /// Patch radius for regular layouts, pixels.
    pub radius: f64,
    /// Minimum adaptive radius as a multiple of `spacing`.
    pub rho: f64,
    /// Adaptive radius per pixel of target distance.
    pub kappa: f64,
    pub alpha: f64,
}

impl PlacementConfig {
    pub fn regular() -> Self {
        Self {
            spacing: 6.0,
            radius: 20.0,
            ..Self::adaptive()
        }
    }

    pub fn adaptive() -> Self {
        Self {
            spacing: 10.0,
            radius: 20.0,
            rho: 2.0,
            kappa: 2.0,
            alpha: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.spacing > 0.0) {
            return bad("placement spacing must be > 0");
        }
        if !(self.radius > 0.0) {
            return bad("placement radius must be > 0");
        }
        if !(self.rho >= 1.0) {
            return bad("placement rho must be >= 1");
        }
        if !(self.kappa >= 0.0) {
            return bad("placement kappa must be >= 0");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("placement alpha must be in (0, 1]");
        }
        Ok(())
    }

    /// Minimum adaptive radius `rho * spacing`.
    pub fn min_radius(&self) -> f64 {
        self.rho * self.spacing
    }
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self::regular()
    }
}

fn grid_count(extent: usize, spacing: f64) -> usize {
    if spacing >= extent as f64 {
        1
    } else {
        (extent as f64 / spacing).floor() as usize + 1
    }
}

/// Centers at multiples of the spacing from the origin up to the far edge of
/// the domain, row-major.
pub fn regular_patches(width: usize, height: usize, config: &PlacementConfig) -> Result<Vec<Patch>> {
    config.validate()?;
    if width == 0 || height == 0 {
        return Err(Error::InvalidConfig("empty domain".into()));
    }
    let cols = grid_count(width, config.spacing);
    let rows = grid_count(height, config.spacing);
    let mut out = Vec::with_capacity(cols * rows);
    for j in 0..rows {
        for i in 0..cols {
            let c = Vec2::new(i as f64 * config.spacing, j as f64 * config.spacing);
            out.push(Patch::new(c, config.radius, config.alpha)?);
        }
    }
    Ok(out)
}

const NEIGHBORS: [(isize, isize); 8] = [
    // 4-neighbors first so walks prefer unit steps.
    (1, 0),
    (0, 1),
    (-1, 0),
    (0, -1),
    (1, 1),
    (-1, 1),
    (-1, -1),
    (1, -1),
];

/// Contour pixels of each 8-connected component in walk order.
///
/// Components are ordered by their first pixel in row-major order. Each walk
/// is a depth-first traversal from that pixel which always prefers the first
/// unvisited 4-neighbor, then diagonal; on a simple closed or open curve
/// this is the curve order, and at junctions it continues along one branch
/// before returning for the next.
pub fn contour_walks(edges: &EdgeMap) -> Vec<Vec<(usize, usize)>> {
    let (w, h) = edges.dims();
    let mut visited = vec![false; w * h];
    let mut walks = Vec::new();
    for (sx, sy) in edges.contour_pixels() {
        if visited[sy * w + sx] {
            continue;
        }
        let mut walk = vec![(sx, sy)];
        let mut stack = vec![(sx, sy)];
        visited[sy * w + sx] = true;
        while let Some(&(x, y)) = stack.last() {
            let next = NEIGHBORS.iter().find_map(|&(dx, dy)| {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    return None;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                (edges.is_contour(nx, ny) && !visited[ny * w + nx]).then_some((nx, ny))
            });
            match next {
                Some((nx, ny)) => {
                    visited[ny * w + nx] = true;
                    walk.push((nx, ny));
                    stack.push((nx, ny));
                }
                None => {
                    stack.pop();
                }
            }
        }
        walks.push(walk);
    }
    walks
}

/// Points spaced `spacing` apart in arc length along each contour component.
/// Arc length accumulates the Euclidean step between consecutive walk
/// pixels, so diagonal steps count `sqrt(2)`. Every component yields at
/// least its first pixel.
pub fn contour_arc_samples(edges: &EdgeMap, spacing: f64) -> Vec<Vec2> {
    let mut out = Vec::new();
    for walk in contour_walks(edges) {
        let mut arc = 0.0;
        let mut next_mark = 0.0;
        let mut prev = walk[0];
        for &(x, y) in &walk {
            let step = ((x as f64 - prev.0 as f64).powi(2) + (y as f64 - prev.1 as f64).powi(2)).sqrt();
            arc += step;
            prev = (x, y);
            if arc >= next_mark - 1e-9 {
                out.push(Vec2::new(x as f64, y as f64));
                next_mark += spacing;
                while next_mark <= arc {
                    next_mark += spacing;
                }
            }
        }
    }
    out
}

/// One patch per arc sample of `edges`, with radius
/// `max(rho * spacing, kappa * dt_target(sample))`.
pub fn adaptive_patches(
    edges: &EdgeMap,
    dt_target: &DistanceField,
    config: &PlacementConfig,
) -> Result<Vec<Patch>> {
    config.validate()?;
    dt_target.grid().ensure_dims(edges.dims())?;
    if edges.is_empty_contour() {
        return Err(Error::NoContour);
    }
    contour_arc_samples(edges, config.spacing)
        .into_iter()
        .map(|c| {
            let pd = dt_target.at(c.x as usize, c.y as usize);
            let radius = config.min_radius().max(config.kappa * pd);
            Patch::new(c, radius, config.alpha)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtransform::compute_distance_transform;

    fn square_ring(x0: usize, y0: usize, side: usize, n: usize) -> EdgeMap {
        let mut px = Vec::new();
        for i in 0..side {
            px.push((x0 + i, y0));
            px.push((x0 + i, y0 + side - 1));
            px.push((x0, y0 + i));
            px.push((x0 + side - 1, y0 + i));
        }
        px.sort();
        px.dedup();
        EdgeMap::from_pixels(n, n, &px)
    }

    #[test]
    fn grid_of_676_patches() {
        let p = regular_patches(150, 150, &PlacementConfig::regular()).unwrap();
        assert_eq!(p.len(), 676);
        assert!(p.iter().all(|q| q.radius == 20.0 && q.influence == 1.0));
    }

    #[test]
    fn degenerate_grid_single_column() {
        let cfg = PlacementConfig {
            spacing: 40.0,
            ..PlacementConfig::regular()
        };
        let p = regular_patches(40, 100, &cfg).unwrap();
        assert!(p.iter().all(|q| q.center.x == 0.0));
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn square_of_perimeter_forty() {
        // An 11x11 ring has 40 pixels.
        let e = square_ring(5, 5, 11, 30);
        assert_eq!(e.contour_count(), 40);
        let s = contour_arc_samples(&e, 10.0);
        assert_eq!(s.len(), 4);
        assert_eq!(s[0], Vec2::new(5.0, 5.0));
    }

    #[test]
    fn long_spacing_gives_one_sample_per_component() {
        let mut px: Vec<(usize, usize)> = square_ring(2, 2, 5, 40).contour_pixels();
        px.extend(square_ring(20, 20, 6, 40).contour_pixels());
        let e = EdgeMap::from_pixels(40, 40, &px);
        let s = contour_arc_samples(&e, 1000.0);
        assert_eq!(s, vec![Vec2::new(2.0, 2.0), Vec2::new(20.0, 20.0)]);
        let s = contour_arc_samples(&e, 5.0);
        assert!(s.iter().any(|p| p.x < 10.0) && s.iter().any(|p| p.x >= 20.0));
    }

    #[test]
    fn adaptive_radii() {
        let e = square_ring(10, 10, 11, 60);
        let dt = compute_distance_transform(&e).unwrap();
        let cfg = PlacementConfig::adaptive();
        let p = adaptive_patches(&e, &dt, &cfg).unwrap();
        assert!(p.iter().all(|q| q.radius == 20.0));

        let far = EdgeMap::from_pixels(60, 60, &[(10, 50)]);
        let dt_far = compute_distance_transform(&far).unwrap();
        let cfg = PlacementConfig {
            spacing: 6.0,
            ..PlacementConfig::adaptive()
        };
        let p = adaptive_patches(&e, &dt_far, &cfg).unwrap();
        for q in &p {
            let pd = dt_far.at(q.center.x as usize, q.center.y as usize);
            assert_eq!(q.radius, (12.0f64).max(2.0 * pd));
        }
    }

    #[test]
    fn adaptive_covers_source_contour() {
        let e = square_ring(10, 10, 25, 60);
        let dt = compute_distance_transform(&EdgeMap::from_pixels(60, 60, &[(30, 30)])).unwrap();
        let p = adaptive_patches(&e, &dt, &PlacementConfig::adaptive()).unwrap();
        for (x, y) in e.contour_pixels() {
            let v = Vec2::new(x as f64, y as f64);
            assert!(p.iter().any(|q| (v - q.center).norm() < q.support_radius()));
        }
    }
}
