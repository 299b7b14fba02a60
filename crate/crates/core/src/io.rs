//! Image, config and artifact files.
//!
//! Every writer goes through [`write_atomic`]: the bytes land in a temporary
//! file next to the destination, which is then renamed over it.

use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};

use image::{GrayImage, ImageFormat, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::dtransform::DistanceField;
use crate::optimizer::RegistrationConfig;
use crate::raster::{EdgeMap, Raster};
use crate::{Error, Result};

/// Default 8-bit intensity at or above which an input pixel is contour.
pub const DEFAULT_THRESHOLD: u8 = 128;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Grayscale image (PNG or binary PGM) normalized to `[0, 1]`.
pub fn load_image(path: &Path) -> Result<Raster> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let img = image::load_from_memory(&bytes).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let gray = img.to_luma8();
    let (w, h) = gray.dimensions();
    Raster::from_vec(
        w as usize,
        h as usize,
        gray.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
    )
}

/// Binary contour map: a pixel is contour iff its 8-bit intensity is at
/// least `threshold`.
pub fn load_edges(path: &Path, threshold: u8) -> Result<EdgeMap> {
    let img = load_image(path)?;
    let level = threshold as f64 / 255.0;
    Ok(EdgeMap::new(img.map(|&v| if v >= level - 1e-12 { 1.0 } else { 0.0 })))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.flush().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

fn format_for(path: &Path) -> ImageFormat {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("pgm") | Some("pnm") => ImageFormat::Pnm,
        _ => ImageFormat::Png,
    }
}

fn encode(img: image::DynamicImage, path: &Path) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, format_for(path)).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(buf.into_inner())
}

/// 8-bit grayscale PNG, or binary PGM for a `.pgm` extension.
pub fn save_image(path: &Path, image: &Raster) -> Result<()> {
    let (w, h) = image.dims();
    let gray = GrayImage::from_fn(w as u32, h as u32, |x, y| {
        Luma([(image.get(x as usize, y as usize).clamp(0.0, 1.0) * 255.0).round() as u8])
    });
    write_atomic(path, &encode(gray.into(), path)?)
}

pub fn save_edges(path: &Path, edges: &EdgeMap) -> Result<()> {
    save_image(path, edges.values())
}

/// Distance field as a blue-to-yellow color ramp, normalized by its maximum;
/// contour pixels are black.
pub fn save_distance_png(path: &Path, field: &DistanceField) -> Result<()> {
    let (w, h) = field.dims();
    let top = field.grid().data().iter().copied().fold(0.0, f64::max).max(1e-12);
    let img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let d = field.at(x as usize, y as usize);
        if d == 0.0 {
            return Rgb([0, 0, 0]);
        }
        let t = (d / top).sqrt();
        let c = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
        Rgb([c(30.0, 250.0), c(40.0, 230.0), c(160.0, 40.0)])
    });
    write_atomic(path, &encode(img.into(), path)?)
}

/// TOML config, or JSON when the extension is `.json`.
pub fn load_config(path: &Path) -> Result<RegistrationConfig> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let config: RegistrationConfig = if is_json {
        serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?
    };
    config.validate()?;
    Ok(config)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Inputs and settings that reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<PathBuf>,
    pub config: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, output_dir: &Path) -> Self {
        Self {
            command: command.to_string(),
            inputs: Vec::new(),
            config: None,
            output_dir: output_dir.to_path_buf(),
            seed: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// Fails with an I/O error naming the first missing input.
    pub fn check_inputs(&self) -> Result<()> {
        for p in self.inputs.iter().chain(self.config.iter()) {
            if !p.is_file() {
                return Err(Error::Io {
                    path: p.clone(),
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_and_pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let e = EdgeMap::from_pixels(7, 5, &[(1, 1), (6, 4), (3, 2)]);
        for name in ["a.png", "a.pgm"] {
            let p = dir.path().join(name);
            save_edges(&p, &e).unwrap();
            assert_eq!(load_edges(&p, DEFAULT_THRESHOLD).unwrap(), e);
        }
    }

    #[test]
    fn threshold_is_inclusive() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.png");
        let img = GrayImage::from_fn(3, 1, |x, _| Luma([[127u8, 128, 255][x as usize]]));
        img.save(&p).unwrap();
        let e = load_edges(&p, 128).unwrap();
        assert_eq!(e.contour_pixels(), vec![(1, 0), (2, 0)]);
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_image(Path::new("/nonexistent/x.png")).unwrap_err();
        assert!(err.is_io());
        assert!(err.to_string().contains("/nonexistent/x.png"));
    }

    #[test]
    fn config_toml_and_json() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("c.toml");
        std::fs::write(&t, "lambda = 0.01\nplacement = \"adaptive\"\n[line_search]\nmax_step_px = 1.5\n").unwrap();
        let c = load_config(&t).unwrap();
        assert_eq!(c.lambda, 0.01);
        assert_eq!(c.line_search.max_step_px, 1.5);
        assert_eq!(c.pyramid_levels, 3);
        let j = dir.path().join("c.json");
        std::fs::write(&j, "{\"basis_order\": 2}").unwrap();
        assert_eq!(load_config(&j).unwrap().basis_order, 2);
        std::fs::write(&t, "lamda = 1").unwrap();
        assert!(matches!(load_config(&t), Err(Error::Parse { .. })));
    }
}
