//! Seeded synthetic shape pairs with known deformations.
//!
//! A closed parametric curve is drawn as the source. The target is the same
//! curve pushed forward by a smooth field `g`: a constant translation plus a
//! sum of Gaussian bumps `a_k exp(-|x - c_k|^2 / (2 sigma_k^2))`. Bump
//! amplitudes are rescaled so the largest `|g - translation|` over the pixel
//! grid equals the requested peak. Occlusion removes the same contiguous arc
//! from both curves.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::raster::{EdgeMap, Grid, Raster, Vec2};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeFamily {
    Ellipse,
    Star,
    Polyline,
}

impl std::str::FromStr for ShapeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ellipse" => Ok(Self::Ellipse),
            "star" => Ok(Self::Star),
            "polyline" => Ok(Self::Polyline),
            _ => Err(Error::InvalidConfig(format!("unknown shape family {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub family: ShapeFamily,
    /// Side of the square image, pixels.
    pub size: usize,
    /// Peak magnitude of the bump part of the field, pixels.
    pub peak: f64,
    pub translation: [f64; 2],
    /// Fraction of the curve removed, in `[0, 1)`.
    pub occlusion: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            family: ShapeFamily::Ellipse,
            size: 150,
            peak: 10.0,
            translation: [0.0, 0.0],
            occlusion: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 2],
    pub sigma: f64,
    pub amplitude: [f64; 2],
}

/// The ground-truth forward displacement `g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthField {
    pub translation: [f64; 2],
    pub bumps: Vec<Bump>,
}

impl SynthField {
    pub fn eval(&self, p: Vec2) -> Vec2 {
        let mut g = Vec2::new(self.translation[0], self.translation[1]);
        for b in &self.bumps {
            let d2 = (p.x - b.center[0]).powi(2) + (p.y - b.center[1]).powi(2);
            let k = (-d2 / (2.0 * b.sigma * b.sigma)).exp();
            g.x += b.amplitude[0] * k;
            g.y += b.amplitude[1] * k;
        }
        g
    }

    pub fn dense(&self, width: usize, height: usize) -> Grid<Vec2> {
        Grid::from_fn(width, height, |x, y| self.eval(Vec2::new(x as f64, y as f64)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthPair {
    pub source: EdgeMap,
    pub target: EdgeMap,
    pub field: SynthField,
}

enum Curve {
    Ellipse { c: Vec2, a: f64, b: f64, rot: f64 },
    Star { c: Vec2, r: f64, amp: f64, lobes: f64, phase: f64 },
    Polygon(Vec<Vec2>),
}

impl Curve {
    fn random(family: ShapeFamily, size: f64, rng: &mut ChaCha8Rng) -> Self {
        let c = Vec2::new(size / 2.0, size / 2.0) + Vec2::new(rng.random_range(-0.03..0.03), rng.random_range(-0.03..0.03)) * size;
        match family {
            ShapeFamily::Ellipse => Curve::Ellipse {
                c,
                a: rng.random_range(0.24..0.32) * size,
                b: rng.random_range(0.16..0.24) * size,
                rot: rng.random_range(0.0..std::f64::consts::PI),
            },
            ShapeFamily::Star => Curve::Star {
                c,
                r: rng.random_range(0.22..0.27) * size,
                amp: rng.random_range(0.12..0.22),
                lobes: rng.random_range(3..=6) as f64,
                phase: rng.random_range(0.0..TAU),
            },
            ShapeFamily::Polyline => {
                let n = rng.random_range(6..=9);
                let mut angles: Vec<f64> = (0..n)
                    .map(|i| (i as f64 + rng.random_range(0.15..0.85)) * TAU / n as f64)
                    .collect();
                angles.sort_by(f64::total_cmp);
                Curve::Polygon(
                    angles
                        .into_iter()
                        .map(|a| c + rng.random_range(0.18..0.3) * size * Vec2::new(a.cos(), a.sin()))
                        .collect(),
                )
            }
        }
    }

    /// Point at parameter `s` in `[0, 1)`.
    fn at(&self, s: f64) -> Vec2 {
        let th = s * TAU;
        match self {
            Curve::Ellipse { c, a, b, rot } => {
                let (x, y) = (a * th.cos(), b * th.sin());
                c + Vec2::new(x * rot.cos() - y * rot.sin(), x * rot.sin() + y * rot.cos())
            }
            Curve::Star {
                c,
                r,
                amp,
                lobes,
                phase,
            } => {
                let rad = r * (1.0 + amp * (lobes * th + phase).cos());
                c + rad * Vec2::new(th.cos(), th.sin())
            }
            Curve::Polygon(v) => {
                let n = v.len();
                let f = s * n as f64;
                let i = (f.floor() as usize).min(n - 1);
                let t = f - i as f64;
                v[i] * (1.0 - t) + v[(i + 1) % n] * t
            }
        }
    }
}

/// Draws a polyline through `points` as a 4-connected pixel chain.
fn rasterize(points: &[Vec2], width: usize, height: usize) -> EdgeMap {
    let mut img = Raster::filled(width, height, 0.0);
    let mut set = |x: i64, y: i64| {
        if x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height {
            *img.get_mut(x as usize, y as usize) = 1.0;
        }
    };
    let mut prev: Option<(i64, i64)> = None;
    for p in points {
        let cur = (p.x.round() as i64, p.y.round() as i64);
        if let Some((px, py)) = prev {
            // Dense sampling moves at most one pixel per axis; fill the
            // corner of diagonal steps.
            if px != cur.0 && py != cur.1 {
                set(cur.0, py);
            }
        }
        set(cur.0, cur.1);
        prev = Some(cur);
    }
    EdgeMap::new(img)
}

fn random_bumps(size: f64, peak: f64, rng: &mut ChaCha8Rng) -> Vec<Bump> {
    let n = rng.random_range(2..=4);
    let mut bumps: Vec<Bump> = (0..n)
        .map(|_| {
            let a = rng.random_range(0.0..TAU);
            let m = rng.random_range(0.5..1.0);
            Bump {
                center: [rng.random_range(0.2..0.8) * size, rng.random_range(0.2..0.8) * size],
                sigma: rng.random_range(25.0..40.0),
                amplitude: [m * a.cos(), m * a.sin()],
            }
        })
        .collect();
    let unit = SynthField {
        translation: [0.0, 0.0],
        bumps: bumps.clone(),
    };
    let n_px = size as usize;
    let max = unit
        .dense(n_px, n_px)
        .data()
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    let scale = if max > 0.0 { peak / max } else { 0.0 };
    for b in &mut bumps {
        b.amplitude = [b.amplitude[0] * scale, b.amplitude[1] * scale];
    }
    bumps
}

const SAMPLES: usize = 20_000;

pub fn synth_pair(config: &SynthConfig, seed: u64) -> Result<SynthPair> {
    if config.size < 32 {
        return Err(Error::InvalidConfig("synthetic image size must be >= 32".into()));
    }
    if !(config.peak >= 0.0) || !(0.0..1.0).contains(&config.occlusion) {
        return Err(Error::InvalidConfig("peak must be >= 0 and occlusion in [0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = config.size as f64;
    let curve = Curve::random(config.family, size, &mut rng);
    let bumps = if config.peak > 0.0 {
        random_bumps(size, config.peak, &mut rng)
    } else {
        Vec::new()
    };
    let field = SynthField {
        translation: config.translation,
        bumps,
    };
    let gap_start = rng.random_range(0.0..1.0);
    let kept = |s: f64| config.occlusion == 0.0 || (s - gap_start).rem_euclid(1.0) >= config.occlusion;

    // Start right after the gap so the kept arc is one run of samples.
    let params: Vec<f64> = (0..=SAMPLES)
        .map(|i| (gap_start + config.occlusion + i as f64 / SAMPLES as f64).rem_euclid(1.0))
        .filter(|&s| kept(s))
        .collect();
    let src_pts: Vec<Vec2> = params.iter().map(|&s| curve.at(s)).collect();
    let tgt_pts: Vec<Vec2> = src_pts.iter().map(|&p| p + field.eval(p)).collect();
    let n = config.size;
    Ok(SynthPair {
        source: rasterize(&src_pts, n, n),
        target: rasterize(&tgt_pts, n, n),
        field,
    })
}
