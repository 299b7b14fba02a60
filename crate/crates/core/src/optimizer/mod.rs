//! Multi-scale registration driver.
//!
//! Each pyramid level runs the edge-preserving loop: blend the deformation,
//! warp the source image, re-detect its edges, recompute the warped source's
//! distance transform, then take a quasi-Newton step on
//! `E_v = E_d + lambda * E_c`. The target edges and distance field are fixed
//! per level. Coefficients found on a coarse level seed the next finer one.

mod qn;
mod warp;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::chamfer::{data_energy_with, data_gradient_all, weighted_gradient_field, EnergyBreakdown};
use crate::dtransform::{compute_distance_transform_with, DistanceField};
use crate::metrics::{mutual_distance_stats, DistanceStats};
use crate::par::Exec;
use crate::placement::{adaptive_patches, regular_patches, PlacementConfig};
use crate::pu_model::{BasisFamily, ConsistencyTerms, MeshlessModel, MonomialBasis, PartitionTable, Patch};
use crate::raster::{EdgeMap, Grid, Raster, Vec2};
use crate::{Error, Result};

pub use qn::QuasiNewton;
pub use warp::{
    build_pyramid, detect_edges, detect_level_edges, warp_image, warp_image_with, DeformationField,
    MIN_LEVEL_SIDE,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    #[default]
    Regular,
    Adaptive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineSearchConfig {
    /// Sufficient-decrease constant.
    pub armijo: f64,
    /// Step multiplier per backtrack.
    pub shrink: f64,
    pub max_backtracks: usize,
    /// Largest displacement, in pixels of the current level, that a first
    /// trial step may move any active pixel.
    pub max_step_px: f64,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self {
            armijo: 1e-4,
            shrink: 0.5,
            max_backtracks: 20,
            max_step_px: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationConfig {
    pub lambda: f64,
    pub basis_order: usize,
    pub basis_family: BasisFamily,
    pub placement: Placement,
    /// Layout used when `placement = "regular"`.
    pub regular: PlacementConfig,
    /// Layout used when `placement = "adaptive"`.
    pub adaptive: PlacementConfig,
    pub pyramid_levels: usize,
    pub max_iters: usize,
    /// Stop when the largest coefficient-gradient component is at most this.
    pub grad_tol: f64,
    /// Stop when an accepted step lowers `E_v` by less than this fraction.
    pub energy_rel_tol: f64,
    pub line_search: LineSearchConfig,
    /// Threshold for re-detecting edges in the warped source, in `[0, 1]`.
    pub edge_threshold: f64,
    /// Dense BFGS up to this many coefficients, L-BFGS above.
    pub dense_limit: usize,
    pub lbfgs_memory: usize,
    /// Damping added to the diagonal preconditioner, relative to the
    /// constant term of each patch.
    pub preconditioner_damping: f64,
    pub exec: Exec,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            lambda: 0.001,
            basis_order: 1,
            basis_family: BasisFamily::Tensor,
            placement: Placement::Regular,
            regular: PlacementConfig::regular(),
            adaptive: PlacementConfig::adaptive(),
            pyramid_levels: 3,
            max_iters: 200,
            grad_tol: 1e-4,
            energy_rel_tol: 1e-6,
            line_search: LineSearchConfig::default(),
            edge_threshold: 0.5,
            dense_limit: 5000,
            lbfgs_memory: 10,
            preconditioner_damping: 1.0,
            exec: Exec::Parallel,
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda must be a finite value >= 0");
        }
        if self.basis_order > 15 {
            return bad("basis_order must be <= 15");
        }
        if self.pyramid_levels == 0 {
            return bad("pyramid_levels must be >= 1");
        }
        if !(self.grad_tol >= 0.0) || !(self.energy_rel_tol >= 0.0) {
            return bad("tolerances must be >= 0");
        }
        let ls = &self.line_search;
        if !(ls.armijo > 0.0 && ls.armijo < 1.0) {
            return bad("line_search.armijo must be in (0, 1)");
        }
        if !(ls.shrink > 0.0 && ls.shrink < 1.0) {
            return bad("line_search.shrink must be in (0, 1)");
        }
        if !(ls.max_step_px > 0.0) {
            return bad("line_search.max_step_px must be > 0");
        }
        if !(self.preconditioner_damping >= 0.0) || !self.preconditioner_damping.is_finite() {
            return bad("preconditioner_damping must be a finite value >= 0");
        }
        if !(self.edge_threshold > 0.0 && self.edge_threshold <= 1.0) {
            return bad("edge_threshold must be in (0, 1]");
        }
        self.placement_config().validate()
    }

    pub fn placement_config(&self) -> &PlacementConfig {
        match self.placement {
            Placement::Regular => &self.regular,
            Placement::Adaptive => &self.adaptive,
        }
    }

    pub fn basis(&self) -> MonomialBasis {
        MonomialBasis::new(self.basis_order, self.basis_family)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ZeroEnergy,
    GradientTolerance,
    EnergyTolerance,
    MaxIterations,
    Stalled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub level: usize,
    pub iteration: usize,
    pub data: f64,
    pub consistency: f64,
    pub total: f64,
    /// Largest coefficient-gradient component.
    pub grad_max: f64,
    /// Accepted step length along the search direction; 0 for the initial
    /// evaluation.
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    pub width: usize,
    pub height: usize,
    pub patches: usize,
    pub unknowns: usize,
    pub dense_bfgs: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: StopReason,
    pub energy: EnergyBreakdown,
    pub consistency: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegistrationReport {
    /// Levels in processing order, coarsest first.
    pub levels: Vec<LevelReport>,
    pub trace: Vec<TraceEntry>,
    /// Mutual distance between the warped source and target contours at
    /// full resolution.
    pub metrics: DistanceStats,
    pub patches: usize,
    /// Pixels inside the patch supports at full resolution: the work of one
    /// per-patch gradient assembly.
    pub gradient_pixel_work: usize,
    pub covered_pixels: usize,
    /// Not serialized, so reports of identical runs are identical.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RegistrationReport {
    pub fn total_iterations(&self) -> usize {
        self.levels.iter().map(|l| l.iterations).sum()
    }
}

#[derive(Clone, Debug)]
pub struct Registration {
    pub model: MeshlessModel,
    pub field: DeformationField,
    pub report: RegistrationReport,
    /// Binary edges of the source warped by the final field.
    pub warped: EdgeMap,
}

/// Everything that stays fixed while one pyramid level is optimized.
struct Level<'a> {
    index: usize,
    config: &'a RegistrationConfig,
    source: Raster,
    target: EdgeMap,
    dt_target: DistanceField,
    basis: MonomialBasis,
    patches: Vec<Patch>,
    table: PartitionTable,
    consistency: ConsistencyTerms,
}

/// One evaluation of the functional and its gradient.
struct Eval {
    coeffs: Vec<f64>,
    energy: EnergyBreakdown,
    consistency: f64,
    total: f64,
    grad: Vec<f64>,
    /// Pixels with a nonzero chamfer gradient.
    active: Vec<usize>,
    warped: EdgeMap,
}

impl Eval {
    fn grad_max(&self) -> f64 {
        self.grad.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

impl Level<'_> {
    fn dims(&self) -> (usize, usize) {
        self.target.dims()
    }

    fn field(&self, coeffs: &[f64]) -> Result<DeformationField> {
        let (w, h) = self.dims();
        let exec = self.config.exec;
        let u = self.table.blend_field(&self.basis, &self.patches, coeffs, exec);
        let covered = Grid::from_fn(w, h, |x, y| self.table.is_covered(y * w + x));
        DeformationField::new(u, covered)
    }

    fn warped_edges(&self, coeffs: &[f64]) -> Result<EdgeMap> {
        let field = self.field(coeffs)?;
        let warped = warp_image_with(&self.source, &field, self.config.exec)?;
        Ok(detect_edges(&warped, self.config.edge_threshold))
    }

    fn evaluate(&self, coeffs: Vec<f64>, iteration: usize) -> Result<Eval> {
        let exec = self.config.exec;
        let warped = self.warped_edges(&coeffs)?;
        if warped.is_empty_contour() {
            return Err(Error::DegenerateWarp {
                level: self.index,
                iteration,
            });
        }
        let dt_warped = compute_distance_transform_with(&warped, exec)?;
        let energy = data_energy_with(&warped, &self.target, &self.dt_target, &dt_warped, exec)?;
        let (consistency, cgrad) = self.consistency.energy_and_gradient(&coeffs, exec);
        let lambda = self.config.lambda;
        let total = energy.total + lambda * consistency;
        if !total.is_finite() {
            return Err(Error::NonFiniteEnergy {
                level: self.index,
                iteration,
                data: energy.total,
                consistency,
            });
        }
        let j = weighted_gradient_field(&warped, &self.target, &self.dt_target, &dt_warped, 1.0, 1.0, exec)?;
        let model = MeshlessModel::new(self.basis.clone(), self.patches.clone(), self.dims().0, self.dims().1);
        let mut grad = data_gradient_all(&j, &self.table, &model);
        for (g, c) in grad.iter_mut().zip(&cgrad) {
            *g += lambda * c;
        }
        let active = j.support();
        Ok(Eval {
            coeffs,
            energy,
            consistency,
            total,
            grad,
            active,
            warped,
        })
    }

    /// Diagonal inverse-Hessian guess: the reciprocal of
    /// `sum (r_p phi_i)^2` over contour pixels, damped toward the patch's
    /// constant term scaled by the mean of `phi_i^2` over its support, then
    /// floored per basis term at a thousandth of its largest value.
    fn preconditioner(&self, warped: &EdgeMap) -> Vec<f64> {
        let (w, _) = self.dims();
        let nb = self.basis.len();
        let n = self.patches.len();
        let mut diag = vec![0.0; n * nb];
        let mut phi = vec![0.0; nb];
        let pixels = self.target.values().data().iter().zip(warped.values().data());
        for (px, (&d, &s)) in pixels.enumerate() {
            if d == 0.0 && s == 0.0 {
                continue;
            }
            let pos = Vec2::new((px % w) as f64, (px / w) as f64);
            for (p, r) in self.table.entries(px) {
                self.basis.eval_into(pos - self.patches[p].center, &mut phi);
                for (i, f) in phi.iter().enumerate() {
                    diag[p * nb + i] += (r * f).powi(2);
                }
            }
        }
        let mu = self.config.preconditioner_damping;
        if mu > 0.0 {
            // Mean of phi_i^2 over each patch support, weighted by r_p.
            let mut mom = vec![0.0; n * nb];
            let mut mass = vec![0.0; n];
            let (w, h) = self.dims();
            for px in 0..w * h {
                let pos = Vec2::new((px % w) as f64, (px / w) as f64);
                for (p, r) in self.table.entries(px) {
                    self.basis.eval_into(pos - self.patches[p].center, &mut phi);
                    mass[p] += r;
                    for (i, f) in phi.iter().enumerate() {
                        mom[p * nb + i] += r * f * f;
                    }
                }
            }
            for p in 0..n {
                let h0 = diag[p * nb];
                if mass[p] > 0.0 {
                    for i in 0..nb {
                        diag[p * nb + i] += mu * h0 * mom[p * nb + i] / mass[p];
                    }
                }
            }
        }
        for i in 0..nb {
            let top = (0..n).map(|p| diag[p * nb + i]).fold(0.0, f64::max);
            let floor = if top > 0.0 { 1e-3 * top } else { 1.0 };
            for p in 0..n {
                diag[p * nb + i] = diag[p * nb + i].max(floor);
            }
        }
        diag.iter().flat_map(|&v| [1.0 / v, 1.0 / v]).collect()
    }

    /// Largest displacement that direction `d` produces at active pixels.
    fn max_displacement(&self, d: &[f64], active: &[usize]) -> f64 {
        let mut phi = vec![0.0; self.basis.len()];
        active
            .iter()
            .filter_map(|&px| self.table.displacement_at(px, &self.basis, &self.patches, d, &mut phi))
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Backtracking search along `d` from `cur`. Returns the accepted
    /// evaluation and step length, or `None` when no trial decreased `E_v`
    /// sufficiently. Trials whose warp loses the whole contour count as
    /// rejections.
    fn line_search(
        &self,
        cur: &Eval,
        d: &[f64],
        first: f64,
        iteration: usize,
        evaluations: &mut usize,
    ) -> Result<Option<(Eval, f64)>> {
        let ls = &self.config.line_search;
        let slope: f64 = cur.grad.iter().zip(d).map(|(g, di)| g * di).sum();
        let mut t = first;
        for _ in 0..=ls.max_backtracks {
            let trial: Vec<f64> = cur.coeffs.iter().zip(d).map(|(c, di)| c + t * di).collect();
            *evaluations += 1;
            match self.evaluate(trial, iteration) {
                Ok(e) if e.total <= cur.total + ls.armijo * t * slope && e.total < cur.total => {
                    return Ok(Some((e, t)));
                }
                Ok(_) | Err(Error::DegenerateWarp { .. }) => {}
                Err(e) => return Err(e),
            }
            t *= ls.shrink;
        }
        Ok(None)
    }

    fn first_step(&self, d: &[f64], active: &[usize]) -> f64 {
        let m = self.max_displacement(d, active);
        if m > 0.0 {
            (self.config.line_search.max_step_px / m).min(1.0)
        } else {
            1.0
        }
    }

    fn optimize(&self, coeffs: Vec<f64>, trace: &mut Vec<TraceEntry>) -> Result<(Eval, LevelReport)> {
        let cfg = self.config;
        let mut cur = self.evaluate(coeffs, 0)?;
        let mut evaluations = 1;
        let mut qn = QuasiNewton::new(self.preconditioner(&cur.warped), cfg.dense_limit, cfg.lbfgs_memory);
        let push = |trace: &mut Vec<TraceEntry>, e: &Eval, iteration: usize, step: f64| {
            trace.push(TraceEntry {
                level: self.index,
                iteration,
                data: e.energy.total,
                consistency: e.consistency,
                total: e.total,
                grad_max: e.grad_max(),
                step,
            })
        };
        push(trace, &cur, 0, 0.0);

        let mut iteration = 0;
        let stop = loop {
            if cur.total == 0.0 {
                break StopReason::ZeroEnergy;
            }
            if cur.grad_max() <= cfg.grad_tol {
                break StopReason::GradientTolerance;
            }
            if iteration >= cfg.max_iters {
                break StopReason::MaxIterations;
            }
            let mut d = qn.direction(&cur.grad);
            let slope: f64 = cur.grad.iter().zip(&d).map(|(g, di)| g * di).sum();
            if !(slope < 0.0) {
                qn.reset();
                d = qn.steepest(&cur.grad);
            }
            let t0 = self.first_step(&d, &cur.active);
            let mut found = self.line_search(&cur, &d, t0, iteration + 1, &mut evaluations)?;
            if found.is_none() && qn.updates() > 0 {
                qn.reset();
                d = qn.steepest(&cur.grad);
                let t0 = self.first_step(&d, &cur.active);
                found = self.line_search(&cur, &d, t0, iteration + 1, &mut evaluations)?;
            }
            let Some((next, t)) = found else {
                break StopReason::Stalled;
            };
            let s: Vec<f64> = d.iter().map(|di| t * di).collect();
            let y: Vec<f64> = next.grad.iter().zip(&cur.grad).map(|(a, b)| a - b).collect();
            qn.update(&s, &y);
            iteration += 1;
            push(trace, &next, iteration, t);
            let decrease = (cur.total - next.total) / cur.total;
            cur = next;
            if decrease < cfg.energy_rel_tol {
                break StopReason::EnergyTolerance;
            }
        };
        let (w, h) = self.dims();
        let report = LevelReport {
            level: self.index,
            width: w,
            height: h,
            patches: self.patches.len(),
            unknowns: cur.coeffs.len(),
            dense_bfgs: qn.is_dense(),
            iterations: iteration,
            evaluations,
            stop,
            energy: cur.energy,
            consistency: cur.consistency,
            total: cur.total,
        };
        Ok((cur, report))
    }
}

/// Patch layout at full resolution.
pub fn place_patches(source: &EdgeMap, target: &EdgeMap, config: &RegistrationConfig) -> Result<Vec<Patch>> {
    let (w, h) = source.dims();
    match config.placement {
        Placement::Regular => regular_patches(w, h, &config.regular),
        Placement::Adaptive => {
            let dt_target = compute_distance_transform_with(target, config.exec)?;
            adaptive_patches(source, &dt_target, &config.adaptive)
        }
    }
}

/// Registers `source` onto `target` and returns the model, its dense
/// field at full resolution, and the report.
pub fn register(
    source: &Raster,
    target: &Raster,
    config: &RegistrationConfig,
) -> Result<(MeshlessModel, DeformationField, RegistrationReport)> {
    let r = register_detailed(source, target, config)?;
    Ok((r.model, r.field, r.report))
}

pub fn register_detailed(source: &Raster, target: &Raster, config: &RegistrationConfig) -> Result<Registration> {
    let start = Instant::now();
    config.validate()?;
    source.ensure_dims(target.dims())?;
    let (w, h) = source.dims();
    let exec = config.exec;

    let source_edges = detect_edges(source, config.edge_threshold);
    let target_edges = detect_edges(target, config.edge_threshold);
    if source_edges.is_empty_contour() || target_edges.is_empty_contour() {
        return Err(Error::NoContour);
    }
    let full_patches = place_patches(&source_edges, &target_edges, config)?;
    let basis = config.basis();

    let source_pyr = build_pyramid(source_edges.values(), config.pyramid_levels)?;
    let target_pyr = build_pyramid(target_edges.values(), config.pyramid_levels)?;

    let mut levels = Vec::new();
    let mut trace = Vec::new();
    let mut coeffs = vec![0.0; full_patches.len() * basis.len() * 2];
    let mut prev_scale: Option<f64> = None;
    let mut last = None;
    for k in (0..config.pyramid_levels).rev() {
        let scale = 0.5f64.powi(k as i32);
        let (lw, lh) = source_pyr[k].dims();
        let patches: Vec<Patch> = full_patches.iter().map(|p| p.scaled(scale)).collect();
        if let Some(prev) = prev_scale {
            let m = MeshlessModel::new(basis.clone(), patches.iter().map(|p| p.scaled(prev / scale)).collect(), lw, lh)
                .with_coeffs(coeffs)?;
            coeffs = m.rescaled(scale / prev, lw, lh).coeffs().to_vec();
        }
        let (src, tgt) = if k == 0 {
            (source_edges.clone(), target_edges.clone())
        } else {
            (detect_level_edges(&source_pyr[k]), detect_level_edges(&target_pyr[k]))
        };
        if src.is_empty_contour() || tgt.is_empty_contour() {
            return Err(Error::NoContour);
        }
        let model = MeshlessModel::new(basis.clone(), patches.clone(), lw, lh);
        let level = Level {
            index: k,
            config,
            source: src.into_raster(),
            dt_target: compute_distance_transform_with(&tgt, exec)?,
            target: tgt,
            basis: basis.clone(),
            table: PartitionTable::new(&patches, lw, lh, exec),
            consistency: ConsistencyTerms::new(&model, exec),
            patches,
        };
        let (eval, report) = level.optimize(coeffs, &mut trace)?;
        levels.push(report);
        coeffs = eval.coeffs.clone();
        prev_scale = Some(scale);
        last = Some((level, eval));
    }
    let (level, eval) = last.expect("at least one level");
    let field = level.field(&eval.coeffs)?;
    let model = MeshlessModel::new(basis, full_patches, w, h).with_coeffs(eval.coeffs)?;
    let metrics = mutual_distance_stats(&eval.warped, &target_edges)?;
    let report = RegistrationReport {
        levels,
        trace,
        metrics,
        patches: model.len(),
        gradient_pixel_work: level.table.support_pixels(),
        covered_pixels: level.table.covered_count(),
        wall_time: start.elapsed(),
    };
    Ok(Registration {
        model,
        field,
        report,
        warped: eval.warped,
    })
}
