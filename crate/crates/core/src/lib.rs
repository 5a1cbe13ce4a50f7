//! Normal-based surface segmentation on closed triangle meshes.
//!
//! Two convex-relaxation models are provided: total variation of per-triangle
//! label assignments ([`atv`]) and total variation of the per-triangle label
//! center of mass on the sphere ([`ltv`]).

pub mod atv;
pub mod error;
pub mod field;
pub mod fixtures;
pub mod io;
pub mod labels;
pub mod ltv;
pub mod mesh;
pub mod metrics;
pub mod simplex;
pub mod sphere;
pub mod sweep;

pub use error::{Error, Result};
pub use field::{AssignmentField, DualEdgeField, LabelField};
pub use labels::{LabelSet, SimilarityField};
pub use mesh::{Geometry, TriangleMesh};
