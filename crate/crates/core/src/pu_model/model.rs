use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::basis::{BasisFamily, MonomialBasis};
use super::weight::Patch;
use crate::raster::Vec2;
use crate::{Error, Result};

/// Coefficients of one local model: an `n_b x 2` matrix whose columns map
/// the re-centered basis to the `u` and `v` displacement components.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalModel {
    pub coeffs: DMatrix<f64>,
}

impl LocalModel {
    pub fn zeros(n_basis: usize) -> Self {
        Self {
            coeffs: DMatrix::zeros(n_basis, 2),
        }
    }

    /// Interleaved `vec(d_p) = (a_0, b_0, a_1, b_1, ...)`.
    pub fn to_interleaved(&self) -> Vec<f64> {
        (0..self.coeffs.nrows())
            .flat_map(|i| [self.coeffs[(i, 0)], self.coeffs[(i, 1)]])
            .collect()
    }

    pub fn from_interleaved(v: &[f64]) -> Self {
        let n = v.len() / 2;
        Self {
            coeffs: DMatrix::from_fn(n, 2, |i, c| v[2 * i + c]),
        }
    }
}

/// Patches, their local models, the basis, and the pixel domain.
///
/// Coefficients are stored as one flat vector, patch-major, each patch's
/// block interleaved as in [`LocalModel::to_interleaved`]. This is also the
/// optimization variable of the registration.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshlessModel {
    basis: MonomialBasis,
    patches: Vec<Patch>,
    coeffs: Vec<f64>,
    width: usize,
    height: usize,
}

impl MeshlessModel {
    /// A model with every local displacement set to zero.
    pub fn new(basis: MonomialBasis, patches: Vec<Patch>, width: usize, height: usize) -> Self {
        let coeffs = vec![0.0; patches.len() * basis.len() * 2];
        Self {
            basis,
            patches,
            coeffs,
            width,
            height,
        }
    }

    pub fn with_coeffs(mut self, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != self.coeffs.len() {
            return Err(Error::InvalidConfig(format!(
                "expected {} coefficients, got {}",
                self.coeffs.len(),
                coeffs.len()
            )));
        }
        self.coeffs = coeffs;
        Ok(self)
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Length of one patch's interleaved coefficient block.
    pub fn block_len(&self) -> usize {
        self.basis.len() * 2
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn block(&self, p: usize) -> &[f64] {
        let n = self.block_len();
        &self.coeffs[p * n..(p + 1) * n]
    }

    pub fn block_mut(&mut self, p: usize) -> &mut [f64] {
        let n = self.block_len();
        &mut self.coeffs[p * n..(p + 1) * n]
    }

    pub fn local(&self, p: usize) -> LocalModel {
        LocalModel::from_interleaved(self.block(p))
    }

    pub fn set_local(&mut self, p: usize, local: &LocalModel) {
        let v = local.to_interleaved();
        self.block_mut(p).copy_from_slice(&v);
    }

    pub(crate) fn check_index(&self, p: usize) -> Result<()> {
        if p >= self.patches.len() {
            return Err(Error::PatchIndex {
                index: p,
                len: self.patches.len(),
            });
        }
        Ok(())
    }

    /// Local displacement of patch `p` evaluated at `x`.
    pub fn local_displacement(&self, p: usize, x: Vec2, phi: &mut [f64]) -> Vec2 {
        self.basis.eval_into(x - self.patches[p].center, phi);
        let d = self.block(p);
        let mut u = Vec2::zeros();
        for (i, &f) in phi.iter().enumerate() {
            u.x += d[2 * i] * f;
            u.y += d[2 * i + 1] * f;
        }
        u
    }

    /// Sum of patch weights at `x`; the point is covered when this is > 0.
    pub fn weight_sum(&self, x: Vec2) -> f64 {
        self.patches
            .iter()
            .map(|p| super::weight::patch_weight(p, x))
            .sum()
    }

    /// Normalized partition weights `r_p(x)` of every patch.
    pub fn partition_weights(&self, x: Vec2) -> Result<Vec<f64>> {
        let w: Vec<f64> = self
            .patches
            .iter()
            .map(|p| super::weight::patch_weight(p, x))
            .collect();
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(Error::OutsideCoverage { x: x.x, y: x.y });
        }
        Ok(w.into_iter().map(|v| v / total).collect())
    }

    /// Model on a grid scaled by `factor` (a pyramid level change).
    ///
    /// Centers and radii scale with the grid; displacements scale by
    /// `factor`, and a coefficient of `x^s y^t` picks up `factor^(1-s-t)`
    /// because local coordinates also scale by `factor`.
    pub fn rescaled(&self, factor: f64, width: usize, height: usize) -> Self {
        let patches = self.patches.iter().map(|p| p.scaled(factor)).collect();
        let exps = self.basis.exponents().to_vec();
        let nb = exps.len();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let (s, t) = exps[(k / 2) % nb];
                c * factor.powi(1 - (s + t) as i32)
            })
            .collect();
        Self {
            basis: self.basis.clone(),
            patches,
            coeffs,
            width,
            height,
        }
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            basis_order: self.basis.order(),
            basis_family: self.basis.family(),
            width: self.width,
            height: self.height,
            patches: self
                .patches
                .iter()
                .map(|p| PatchDocument {
                    cx: p.center.x,
                    cy: p.center.y,
                    r: p.radius,
                    alpha: p.influence,
                })
                .collect(),
            coeffs: (0..self.len()).map(|p| self.block(p).to_vec()).collect(),
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let basis = MonomialBasis::new(doc.basis_order, doc.basis_family);
        let patches = doc
            .patches
            .iter()
            .map(|p| Patch::new(Vec2::new(p.cx, p.cy), p.r, p.alpha))
            .collect::<Result<Vec<_>>>()?;
        if doc.coeffs.len() != patches.len()
            || doc.coeffs.iter().any(|c| c.len() != basis.len() * 2)
        {
            return Err(Error::InvalidConfig(
                "coefficient blocks do not match patches and basis".into(),
            ));
        }
        let coeffs = doc.coeffs.concat();
        Self::new(basis, patches, doc.width, doc.height).with_coeffs(coeffs)
    }
}

/// Serialized form of a [`MeshlessModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub basis_order: usize,
    #[serde(default)]
    pub basis_family: BasisFamily,
    #[serde(default)]
    pub width: usize,
    #[serde(default)]
    pub height: usize,
    pub patches: Vec<PatchDocument>,
    /// One interleaved `vec(d_p)` per patch.
    pub coeffs: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchDocument {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
    pub alpha: f64,
}

/// Blended displacement `u(x) = sum_p r_p(x) u_p(x)`.
pub fn blend(model: &MeshlessModel, x: Vec2) -> Result<Vec2> {
    let mut phi = vec![0.0; model.basis().len()];
    let mut num = Vec2::zeros();
    let mut den = 0.0;
    for (p, patch) in model.patches().iter().enumerate() {
        let w = super::weight::patch_weight(patch, x);
        if w > 0.0 {
            num += w * model.local_displacement(p, x, &mut phi);
            den += w;
        }
    }
    if den <= 0.0 {
        return Err(Error::OutsideCoverage { x: x.x, y: x.y });
    }
    Ok(num / den)
}
