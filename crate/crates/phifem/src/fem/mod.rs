//! Reference-element machinery: Lagrange bases, quadrature, facet embeddings.

mod basis;
mod quadrature;

pub use basis::{lagrange_basis, lattice_points, ReferenceBasis, Tabulation};
pub use quadrature::{cell_quadrature, facet_quadrature, FacetEmbedding, QuadratureRule};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("unsupported Lagrange degree {degree} in dimension {dim}")]
    UnsupportedDegree { dim: usize, degree: usize },
    #[error("unsupported quadrature exactness degree {degree} in dimension {dim}")]
    UnsupportedQuadrature { dim: usize, degree: usize },
    #[error("unsupported dimension {0}")]
    UnsupportedDim(usize),
}
