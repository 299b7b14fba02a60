//! Partition-of-unity meshless deformation model.
//!
//! A deformation is carried by circular patches, each holding a local
//! polynomial displacement model expressed in coordinates centered on the
//! patch. Local models are blended with normalized B-spline weights, and a
//! consistency regularizer compares neighboring models after re-expressing
//! them in a common frame with the basis-shifting operator.

mod basis;
mod consistency;
mod model;
mod table;
mod weight;

pub use basis::{basis_eval, pascal_exponents, shift_operator, BasisFamily, MonomialBasis, ShiftOperator};
pub use consistency::{consistency_energy, consistency_gradient, consistency_pair, ConsistencyTerms};
pub use model::{blend, LocalModel, MeshlessModel, ModelDocument, PatchDocument};
pub use table::PartitionTable;
pub use weight::{patch_weight, weight, Patch};
