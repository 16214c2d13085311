//! Continuous scalar Lagrange spaces over a subset of mesh cells.
//!
//! Global DOFs are keyed by the mesh entity a lattice node sits on: the
//! set of cell vertices with nonzero barycentric weight together with the
//! integer weights. Two cells sharing an edge or face therefore agree on
//! the identity of every shared node regardless of local vertex order,
//! which is what makes the space H¹-conforming. Numbering follows first
//! encounter while scanning cells in ascending index order, so it is
//! deterministic.

use std::collections::HashMap;

use crate::fem::{lagrange_basis, FemError, ReferenceBasis};
use crate::mesh::{affine_map, Mesh, Point};

#[derive(Debug)]
pub struct ScalarSpace {
    pub degree: usize,
    /// background cell indices covered by the space, ascending
    pub cells: Vec<usize>,
    /// flat `[cell position][local node]` global DOF table
    cell_dofs: Vec<usize>,
    pub n_dofs: usize,
    /// physical coordinates of each global DOF
    pub dof_points: Vec<Point>,
    pub basis: ReferenceBasis,
}

impl ScalarSpace {
    pub fn build(mesh: &Mesh, cells: &[usize], degree: usize) -> Result<Self, FemError> {
        let basis = lagrange_basis(mesh.dim, degree)?;
        let nb = basis.len();
        let mut lookup: HashMap<Vec<(usize, usize)>, usize> = HashMap::new();
        let mut cell_dofs = vec![usize::MAX; cells.len() * nb];
        let mut dof_points: Vec<Point> = Vec::new();

        for (pos, &c) in cells.iter().enumerate() {
            let verts = mesh.cell(c);
            let map = affine_map(mesh, c).expect("space built on a valid mesh");
            for (local, mi) in basis.multi_indices.iter().enumerate() {
                let mut key: Vec<(usize, usize)> = verts
                    .iter()
                    .zip(mi.iter())
                    .filter(|(_, &w)| w > 0)
                    .map(|(&v, &w)| (v, w))
                    .collect();
                if key.is_empty() {
                    // degree-0 node: owned by the cell itself
                    key.push((c, 0));
                }
                key.sort_unstable();
                let dof = *lookup.entry(key).or_insert_with(|| {
                    dof_points.push(map.to_physical(basis.nodes[local]));
                    dof_points.len() - 1
                });
                cell_dofs[pos * nb + local] = dof;
            }
        }

        Ok(Self {
            degree,
            cells: cells.to_vec(),
            cell_dofs,
            n_dofs: dof_points.len(),
            dof_points,
            basis,
        })
    }

    /// Global DOFs of the cell at position `pos` in `self.cells`.
    pub fn dofs(&self, pos: usize) -> &[usize] {
        let nb = self.basis.len();
        &self.cell_dofs[pos * nb..(pos + 1) * nb]
    }

    /// Nodal interpolation of a function: coefficient i = f(dof point i).
    pub fn interpolate(&self, f: impl Fn(&Point) -> f64) -> Vec<f64> {
        self.dof_points.iter().map(f).collect()
    }
}
