//! Unfitted finite elements on level-set domains.
//!
//! Solves −Δu + u = f with natural (Neumann or Robin) boundary conditions
//! without fitting the mesh to the boundary. The domain is {φ < 0} for a
//! level-set φ; a structured simplicial background mesh covers a bounding
//! box, the active cells are selected by the sign of the interpolated φ_h,
//! and the boundary condition is imposed through an auxiliary flux variable
//! on the strip of cut cells, penalized against the discrete level set.
//! No integration over the physical boundary ever happens.
//!
//! Modules follow the pipeline: [`mesh`] → [`levelset`] → [`assembly`] →
//! [`linalg`] → [`postproc`], with [`problems`] supplying manufactured
//! cases and [`study`] batching whole experiments.

pub mod assembly;
pub mod fem;
pub mod levelset;
pub mod linalg;
pub mod mesh;
pub mod postproc;
pub mod problems;
pub mod space;
pub mod study;

#[cfg(test)]
pub(crate) mod testutil;

use std::sync::Arc;

/// Shared scalar field evaluator.
pub type ScalarFn = Arc<dyn Fn(&mesh::Point) -> f64 + Send + Sync>;
/// Shared vector field evaluator.
pub type VectorFn = Arc<dyn Fn(&mesh::Point) -> [f64; 3] + Send + Sync>;
