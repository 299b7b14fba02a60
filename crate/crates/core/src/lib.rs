//! Nonrigid 2-D shape registration.
//!
//! Shapes are binary contour rasters represented implicitly by their exact
//! Euclidean distance transforms. The deformation is a partition-of-unity
//! blend of local polynomial models carried by circular patches, regularized
//! by a coefficient-consistency penalty built on the basis-shifting operator.
//! Registration minimizes a symmetric, length-normalized chamfer energy plus
//! the weighted consistency energy with a quasi-Newton method over an image
//! pyramid.
//!
//! The crate is organized bottom-up:
//!
//! * [`raster`] and [`io`]: grids, edge maps, image and file I/O.
//! * [`dtransform`]: exact distance transforms and their sampled gradients.
//! * [`pu_model`]: patches, monomial bases, shift operators, blending and the
//!   consistency regularizer.
//! * [`chamfer`]: the chamfer energy and its approximate gradient.
//! * [`placement`]: regular and contour-adaptive patch layouts.
//! * [`optimizer`]: warping, pyramids and the registration driver.
//! * [`metrics`]: mutual contour distance statistics.
//! * [`synth`]: seeded synthetic shape pairs.
//! * [`export`]: CSV and SVG writers.
//!
//! Data-parallel loops go through [`par::Exec`]; with the `parallel` feature
//! disabled every loop runs sequentially and produces identical results.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chamfer;
pub mod dtransform;
mod error;
pub mod export;
pub mod io;
pub mod metrics;
pub mod optimizer;
pub mod par;
pub mod placement;
pub mod pu_model;
pub mod raster;
pub mod synth;

pub use error::{Error, Result};

pub use chamfer::{chamfer_gradient_field, data_energy, data_gradient, EnergyBreakdown, GradientField};
pub use dtransform::{compute_distance_transform, sample_gradient, DistanceField};
pub use metrics::{mutual_distance_stats, DistanceStats};
pub use optimizer::{
    build_pyramid, detect_edges, register, warp_image, DeformationField, RegistrationConfig,
    RegistrationReport,
};
pub use par::Exec;
pub use placement::{adaptive_patches, contour_arc_samples, regular_patches, PlacementConfig};
pub use pu_model::{
    BasisFamily, LocalModel, MeshlessModel, MonomialBasis, Patch, ShiftOperator,
};
pub use raster::{EdgeMap, Grid, Raster, Vec2};
