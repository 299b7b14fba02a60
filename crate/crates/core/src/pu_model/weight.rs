use crate::raster::Vec2;
use crate::{Error, Result};

/// Support of the B-spline weight in normalized radius.
pub const SUPPORT: f64 = 1.5;

/// Second-order B-spline of a normalized radius.
pub fn weight(rnorm: f64) -> Result<f64> {
    if rnorm.is_nan() || rnorm < 0.0 {
        return Err(Error::NegativeRadius(rnorm));
    }
    Ok(weight_unchecked(rnorm))
}

#[inline]
pub(crate) fn weight_unchecked(r: f64) -> f64 {
    if r < 0.5 {
        0.75 - r * r
    } else if r <= SUPPORT {
        let t = SUPPORT - r;
        0.5 * t * t
    } else {
        0.0
    }
}

/// A circular patch: center, radius and influence factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Patch {
    pub center: Vec2,
    pub radius: f64,
    pub influence: f64,
}

impl Patch {
    pub fn new(center: Vec2, radius: f64, influence: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidConfig(format!("patch radius must be > 0, got {radius}")));
        }
        if !(influence > 0.0 && influence <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "patch influence must be in (0, 1], got {influence}"
            )));
        }
        Ok(Self {
            center,
            radius,
            influence,
        })
    }

    /// Radius of the closed disk outside which the weight vanishes.
    pub fn support_radius(&self) -> f64 {
        SUPPORT * self.radius
    }

    /// Weight of this patch at distance `dist` from its center.
    #[inline]
    pub fn weight_at_distance(&self, dist: f64) -> f64 {
        self.influence * weight_unchecked(dist / self.radius)
    }

    /// Same patch in coordinates scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            center: self.center * factor,
            radius: self.radius * factor,
            influence: self.influence,
        }
    }
}

pub fn patch_weight(patch: &Patch, x: Vec2) -> f64 {
    patch.weight_at_distance((x - patch.center).norm())
}
