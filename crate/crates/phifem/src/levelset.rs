//! Level-set interpolation, cell classification and geometry diagnostics.
//!
//! The physical domain is {φ < 0}. The discrete level set φ_h is the nodal
//! Lagrange interpolant of φ on the background mesh; cells are classified
//! by the sign of φ_h sampled on a fixed barycentric lattice. Exact sign
//! determination of a degree-l polynomial would be a polynomial-positivity
//! problem, so sampling is used; the lattice contains the degree-l nodes
//! plus the order max(2l, 4) lattice of each cell.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::fem::lattice_points;
use crate::mesh::{affine_map, Mesh, Point};
use crate::space::ScalarSpace;
use crate::{ScalarFn, VectorFn};

#[derive(Debug, Error)]
pub enum LevelSetError {
    #[error("level-set value at node {node} = {coords:?} is not finite")]
    NonFiniteNode { node: usize, coords: Point },
    #[error("domain not captured by mesh: no cell sees a negative level-set value")]
    EmptyDomain,
    #[error(transparent)]
    Fem(#[from] crate::fem::FemError),
}

/// Analytic level set with its gradient and the interpolation degree l.
#[derive(Clone)]
pub struct LevelSetSpec {
    pub value: ScalarFn,
    pub gradient: VectorFn,
    /// Lagrange degree l of the interpolant (l >= 1; l >= k+1 in practice).
    pub degree: usize,
}

impl LevelSetSpec {
    pub fn new(value: ScalarFn, gradient: VectorFn, degree: usize) -> Self {
        Self {
            value,
            gradient,
            degree,
        }
    }
}

/// Nodal interpolant φ_h on the whole background mesh.
pub struct LevelSetField {
    pub mesh: Arc<Mesh>,
    pub space: ScalarSpace,
    pub coeffs: Vec<f64>,
}

impl LevelSetField {
    pub fn degree(&self) -> usize {
        self.space.degree
    }

    /// Value of φ_h at a reference point of cell `c` (a background index).
    pub fn eval_on_cell(&self, background_pos: usize, r: &Point) -> f64 {
        let nb = self.space.basis.len();
        let mut vals = vec![0.0; nb];
        self.space.basis.eval(r, &mut vals);
        self.space
            .dofs(background_pos)
            .iter()
            .zip(&vals)
            .map(|(&d, v)| self.coeffs[d] * v)
            .sum()
    }
}

/// Interpolate φ into the degree-l Lagrange space; exact at every node.
pub fn interpolate_levelset(
    spec: &LevelSetSpec,
    mesh: Arc<Mesh>,
) -> Result<LevelSetField, LevelSetError> {
    let all: Vec<usize> = (0..mesh.n_cells()).collect();
    let space = ScalarSpace::build(&mesh, &all, spec.degree)?;
    let mut coeffs = Vec::with_capacity(space.n_dofs);
    for (node, p) in space.dof_points.iter().enumerate() {
        let v = (spec.value)(p);
        if !v.is_finite() {
            return Err(LevelSetError::NonFiniteNode { node, coords: *p });
        }
        coeffs.push(v);
    }
    Ok(LevelSetField {
        mesh,
        space,
        coeffs,
    })
}

/// A facet of ∂Ω_h together with its incident active cell.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryFacet {
    pub facet: usize,
    /// the active (cut, after promotion) cell on the inside of ∂Ω_h
    pub cell: usize,
}

/// Partition of the background mesh induced by the sign of φ_h.
#[derive(Debug)]
pub struct DomainDecomposition {
    /// cells intersecting {φ_h < 0}, ascending background indices
    pub active_cells: Vec<usize>,
    /// active cells crossed by Γ_h or owning a ∂Ω_h facet, ascending
    pub cut_cells: Vec<usize>,
    /// active cells that are not cut, ascending
    pub inside_cells: Vec<usize>,
    /// facets of the boundary of the active region
    pub boundary_facets: Vec<BoundaryFacet>,
    /// interior facets separating an inside cell from a cut cell
    pub interface_facets: Vec<usize>,
    /// background cell -> position in `active_cells`
    pub background_to_active: Vec<Option<usize>>,
    /// position in `active_cells` -> position in `cut_cells`
    pub active_to_cut: Vec<Option<usize>>,
}

impl DomainDecomposition {
    pub fn is_cut(&self, background_cell: usize) -> bool {
        self.background_to_active[background_cell]
            .map(|a| self.active_to_cut[a].is_some())
            .unwrap_or(false)
    }

    pub fn is_active(&self, background_cell: usize) -> bool {
        self.background_to_active[background_cell].is_some()
    }

    pub fn is_inside(&self, background_cell: usize) -> bool {
        self.is_active(background_cell) && !self.is_cut(background_cell)
    }
}

/// Sampling lattice orders used for sign classification.
fn classification_orders(l: usize) -> (usize, usize) {
    (l, (2 * l).max(4))
}

/// Classify background cells into inside / cut / excluded from the sign of
/// φ_h, promote boundary-owning cells to cut, and derive the facet sets.
pub fn classify_cells(field: &LevelSetField) -> Result<DomainDecomposition, LevelSetError> {
    let mesh = &*field.mesh;
    let l = field.degree();
    let n_cells = mesh.n_cells();
    let nb = field.space.basis.len();

    let (o1, o2) = classification_orders(l);
    // degree-l nodes first (their values are the coefficients themselves),
    // then the refinement lattice
    let extra = lattice_points(mesh.dim, o2.max(o1));
    let tab = field.space.basis.tabulate(&extra);

    let mut has_negative = vec![false; n_cells];
    let mut has_nonnegative = vec![false; n_cells];
    for c in 0..n_cells {
        let tol = 1e-14 * mesh.cell_diameters[c].max(1.0);
        let dofs = field.space.dofs(c);
        let mut check = |v: f64| {
            if v < -tol {
                has_negative[c] = true;
            } else {
                has_nonnegative[c] = true;
            }
        };
        for &d in dofs {
            check(field.coeffs[d]);
        }
        for q in 0..tab.n_points {
            let mut v = 0.0;
            for (i, &d) in dofs.iter().enumerate().take(nb) {
                v += field.coeffs[d] * tab.value(q, i);
            }
            check(v);
        }
    }

    let active: Vec<usize> = (0..n_cells).filter(|&c| has_negative[c]).collect();
    if active.is_empty() {
        return Err(LevelSetError::EmptyDomain);
    }
    let mut background_to_active = vec![None; n_cells];
    for (pos, &c) in active.iter().enumerate() {
        background_to_active[c] = Some(pos);
    }

    // ∂Ω_h: facets with exactly one active side
    let mut boundary_facets = Vec::new();
    for (f, facet) in mesh.facets.iter().enumerate() {
        let owner_active = has_negative[facet.owner];
        match facet.neighbor {
            Some(nb_cell) => {
                let nbr_active = has_negative[nb_cell];
                if owner_active != nbr_active {
                    let cell = if owner_active { facet.owner } else { nb_cell };
                    boundary_facets.push(BoundaryFacet { facet: f, cell });
                }
            }
            None => {
                if owner_active {
                    boundary_facets.push(BoundaryFacet {
                        facet: f,
                        cell: facet.owner,
                    });
                }
            }
        }
    }

    // cut = active with a sign change, plus promotion of ∂Ω_h owners
    let mut is_cut = vec![false; n_cells];
    for &c in &active {
        if has_nonnegative[c] {
            is_cut[c] = true;
        }
    }
    for bf in &boundary_facets {
        is_cut[bf.cell] = true;
    }

    let cut_cells: Vec<usize> = active.iter().copied().filter(|&c| is_cut[c]).collect();
    let inside_cells: Vec<usize> = active.iter().copied().filter(|&c| !is_cut[c]).collect();

    let mut active_to_cut = vec![None; active.len()];
    for (pos, &c) in cut_cells.iter().enumerate() {
        active_to_cut[background_to_active[c].unwrap()] = Some(pos);
    }

    // Γ_h^i: interior facets between an inside cell and a cut cell
    let mut interface_facets = Vec::new();
    for (f, facet) in mesh.facets.iter().enumerate() {
        let Some(nb_cell) = facet.neighbor else { continue };
        let o = facet.owner;
        if !has_negative[o] || !has_negative[nb_cell] {
            continue;
        }
        if is_cut[o] != is_cut[nb_cell] {
            interface_facets.push(f);
        }
    }

    Ok(DomainDecomposition {
        active_cells: active,
        cut_cells,
        inside_cells,
        boundary_facets,
        interface_facets,
        background_to_active,
        active_to_cut,
    })
}

/// Result of the element-patch diagnostic.
#[derive(Debug, Clone, Serialize)]
pub struct PatchReport {
    /// longest facet-path from any cut cell to an inside cell
    pub max_path: usize,
    /// cut cells with no path to an inside cell at all
    pub unreachable: Vec<usize>,
    pub max_allowed: usize,
    pub pass: bool,
}

/// Check that every cut cell reaches an inside cell through a short chain
/// of facet-adjacent cut cells (path length counts cut cells traversed).
pub fn check_patch_condition(
    mesh: &Mesh,
    decomp: &DomainDecomposition,
    max_patch: usize,
) -> PatchReport {
    // multi-source BFS from cut cells adjacent to inside cells
    let mut dist: Vec<Option<usize>> = vec![None; decomp.cut_cells.len()];
    let mut queue = VecDeque::new();
    for (pos, &c) in decomp.cut_cells.iter().enumerate() {
        let touches_inside = mesh.facets_of_cell(c).iter().any(|&f| {
            let facet = &mesh.facets[f];
            let other = if facet.owner == c {
                facet.neighbor
            } else {
                Some(facet.owner)
            };
            other.map(|o| decomp.is_inside(o)).unwrap_or(false)
        });
        if touches_inside {
            dist[pos] = Some(1);
            queue.push_back(pos);
        }
    }
    while let Some(pos) = queue.pop_front() {
        let c = decomp.cut_cells[pos];
        let d = dist[pos].unwrap();
        for &f in mesh.facets_of_cell(c) {
            let facet = &mesh.facets[f];
            let other = if facet.owner == c {
                facet.neighbor
            } else {
                Some(facet.owner)
            };
            let Some(o) = other else { continue };
            if !decomp.is_cut(o) {
                continue;
            }
            let opos = decomp.active_to_cut[decomp.background_to_active[o].unwrap()].unwrap();
            if dist[opos].is_none() {
                dist[opos] = Some(d + 1);
                queue.push_back(opos);
            }
        }
    }

    let mut max_path = 0;
    let mut unreachable = Vec::new();
    for (pos, &c) in decomp.cut_cells.iter().enumerate() {
        match dist[pos] {
            Some(d) => max_path = max_path.max(d),
            None => unreachable.push(c),
        }
    }
    let pass = unreachable.is_empty() && max_path <= max_patch;
    PatchReport {
        max_path,
        unreachable,
        max_allowed: max_patch,
        pass,
    }
}

/// Minimum of |∇φ_h| over the classification lattice of all cut cells.
pub fn min_gradient_norm(field: &LevelSetField, decomp: &DomainDecomposition) -> f64 {
    let mesh = &*field.mesh;
    let l = field.degree();
    let (o1, o2) = classification_orders(l);
    let mut pts = lattice_points(mesh.dim, o1);
    pts.extend(lattice_points(mesh.dim, o2));
    let tab = field.space.basis.tabulate(&pts);

    let mut min = f64::INFINITY;
    for &c in &decomp.cut_cells {
        let map = affine_map(mesh, c).expect("cut cell is nondegenerate");
        let dofs = field.space.dofs(c);
        for q in 0..tab.n_points {
            let mut gref = [0.0; 3];
            for (i, &d) in dofs.iter().enumerate() {
                let g = tab.gradient(q, i);
                for dd in 0..3 {
                    gref[dd] += field.coeffs[d] * g[dd];
                }
            }
            let g = map.grad_to_physical(gref);
            let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            min = min.min(norm);
        }
    }
    min
}

/// JSON-serializable summary of the decomposition.
#[derive(Debug, Serialize)]
pub struct LevelSetDiagnostics {
    pub n_cells: usize,
    pub n_active: usize,
    pub n_cut: usize,
    pub n_inside: usize,
    pub n_excluded: usize,
    pub n_boundary_facets: usize,
    pub n_interface_facets: usize,
    pub min_gradient_norm: f64,
    pub patch: PatchReport,
}

pub fn diagnostics(
    field: &LevelSetField,
    decomp: &DomainDecomposition,
    max_patch: usize,
) -> LevelSetDiagnostics {
    let n_cells = field.mesh.n_cells();
    LevelSetDiagnostics {
        n_cells,
        n_active: decomp.active_cells.len(),
        n_cut: decomp.cut_cells.len(),
        n_inside: decomp.inside_cells.len(),
        n_excluded: n_cells - decomp.active_cells.len(),
        n_boundary_facets: decomp.boundary_facets.len(),
        n_interface_facets: decomp.interface_facets.len(),
        min_gradient_norm: min_gradient_norm(field, decomp),
        patch: check_patch_condition(&field.mesh, decomp, max_patch),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_background_mesh, BoundingBox};

    fn constant_spec(value: f64, degree: usize) -> LevelSetSpec {
        LevelSetSpec::new(
            Arc::new(move |_: &Point| value),
            Arc::new(|_: &Point| [0.0; 3]),
            degree,
        )
    }

    fn plane_spec(degree: usize) -> LevelSetSpec {
        LevelSetSpec::new(
            Arc::new(|p: &Point| p[0] - 0.25),
            Arc::new(|_: &Point| [1.0, 0.0, 0.0]),
            degree,
        )
    }

    #[test]
    fn affine_interpolation_is_exact() {
        let mesh = Arc::new(
            build_background_mesh(&BoundingBox::square(0.0, 1.0).unwrap(), 3).unwrap(),
        );
        let field = interpolate_levelset(&plane_spec(1), mesh.clone()).unwrap();
        for c in 0..mesh.n_cells() {
            let map = affine_map(&mesh, c).unwrap();
            for r in [[0.2, 0.3, 0.0], [0.11, 0.52, 0.0]] {
                let x = map.to_physical(r);
                let v = field.eval_on_cell(c, &r);
                assert!((v - (x[0] - 0.25)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn quadratic_interpolation_reproduces_sphere() {
        let mesh = Arc::new(
            build_background_mesh(&BoundingBox::cube(-1.0, 1.0).unwrap(), 2).unwrap(),
        );
        let r2 = 0.75f64 * 0.75;
        let spec = LevelSetSpec::new(
            Arc::new(move |p: &Point| p[0] * p[0] + p[1] * p[1] + p[2] * p[2] - r2),
            Arc::new(|p: &Point| [2.0 * p[0], 2.0 * p[1], 2.0 * p[2]]),
            2,
        );
        let field = interpolate_levelset(&spec, mesh.clone()).unwrap();
        let mut max_dev: f64 = 0.0;
        for c in 0..mesh.n_cells() {
            let map = affine_map(&mesh, c).unwrap();
            for r in lattice_points(3, 3) {
                let x = map.to_physical(r);
                let exact = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] - r2;
                max_dev = max_dev.max((field.eval_on_cell(c, &r) - exact).abs());
            }
        }
        assert!(max_dev <= 1e-13, "max deviation {max_dev}");
    }

    #[test]
    fn non_finite_node_is_reported() {
        let mesh = Arc::new(
            build_background_mesh(&BoundingBox::square(0.0, 1.0).unwrap(), 2).unwrap(),
        );
        let spec = LevelSetSpec::new(
            Arc::new(|p: &Point| {
                if p[0] == 0.5 && p[1] == 0.5 {
                    f64::NAN
                } else {
                    -1.0
                }
            }),
            Arc::new(|_: &Point| [0.0; 3]),
            1,
        );
        let err = interpolate_levelset(&spec, mesh).unwrap_err();
        assert!(matches!(err, LevelSetError::NonFiniteNode { .. }));
    }

    #[test]
    fn everything_negative_promotes_box_boundary() {
        let mesh = Arc::new(
            build_background_mesh(&BoundingBox::square(0.0, 1.0).unwrap(), 4).unwrap(),
        );
        let field = interpolate_levelset(&constant_spec(-1.0, 1), mesh.clone()).unwrap();
        let decomp = classify_cells(&field).unwrap();
        assert_eq!(decomp.active_cells.len(), mesh.n_cells());
        // cut set = cells owning a box-boundary facet
        let mut expected: Vec<usize> = mesh
            .facets
            .iter()
            .filter(|f| f.neighbor.is_none())
            .map(|f| f.owner)
            .collect();
        expected.sort_unstable();
        expected.dedup();
        assert_eq!(decomp.cut_cells, expected);
        assert_eq!(
            decomp.inside_cells.len(),
            mesh.n_cells() - expected.len()
        );
        // patch condition: every promoted cell touches an inside cell
        let report = check_patch_condition(&mesh, &decomp, 1);
        assert!(report.pass);
        assert_eq!(report.max_path, 1);
        // degenerate level set flags itself through the gradient
        assert_eq!(min_gradient_norm(&field, &decomp), 0.0);
    }

    #[test]
    fn vertical_plane_classification_n2() {
        // φ = x - 0.25 on the unit square, n = 2: the 4 left-column
        // triangles mix signs, the right column is excluded
        let mesh = Arc::new(
            build_background_mesh(&BoundingBox::square(0.0, 1.0).unwrap(), 2).unwrap(),
        );
        let field = interpolate_levelset(&plane_spec(1), mesh.clone()).unwrap();
        let decomp = classify_cells(&field).unwrap();
        assert_eq!(decomp.active_cells.len(), 4);
        assert_eq!(decomp.cut_cells.len(), 4);
        assert!(decomp.inside_cells.is_empty());
        for &c in &decomp.active_cells {
            let xs: Vec<f64> = mesh.cell(c).iter().map(|&v| mesh.vertices[v][0]).collect();
            assert!(xs.iter().all(|&x| x <= 0.5 + 1e-12));
        }
        // with no inside cells the patch check must fail for every cut cell
        let report = check_patch_condition(&mesh, &decomp, 5);
        assert!(!report.pass);
        assert_eq!(report.unreachable.len(), 4);
        // |∇φ_h| = 1 exactly
        assert!((min_gradient_norm(&field, &decomp) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn positive_levelset_is_an_error() {
        let mesh = Arc::new(
            build_background_mesh(&BoundingBox::square(0.0, 1.0).unwrap(), 2).unwrap(),
        );
        let field = interpolate_levelset(&constant_spec(1.0, 1), mesh).unwrap();
        assert!(matches!(
            classify_cells(&field),
            Err(LevelSetError::EmptyDomain)
        ));
    }

    #[test]
    fn p1_lattice_classification_equals_vertex_signs() {
        let mesh = Arc::new(
            build_background_mesh(&BoundingBox::square(-0.5, 0.5).unwrap(), 8).unwrap(),
        );
        let spec = LevelSetSpec::new(
            Arc::new(|p: &Point| p[0] * p[0] + p[1] * p[1] - 0.09),
            Arc::new(|p: &Point| [2.0 * p[0], 2.0 * p[1], 0.0]),
            1,
        );
        let field = interpolate_levelset(&spec, mesh.clone()).unwrap();
        let decomp = classify_cells(&field).unwrap();
        for c in 0..mesh.n_cells() {
            let tol = 1e-14 * mesh.cell_diameters[c].max(1.0);
            let vals: Vec<f64> = mesh
                .cell(c)
                .iter()
                .map(|&v| {
                    let p = mesh.vertices[v];
                    p[0] * p[0] + p[1] * p[1] - 0.09
                })
                .collect();
            let active = vals.iter().any(|&v| v < -tol);
            assert_eq!(decomp.is_active(c), active, "cell {c}");
        }
    }

    #[test]
    fn structural_invariants_on_flower() {
        let mesh = Arc::new(
            build_background_mesh(&BoundingBox::square(-0.5, 0.5).unwrap(), 16).unwrap(),
        );
        let case = crate::problems::test_case_1(0.0);
        let mut spec = case.levelset.clone();
        spec.degree = 2;
        let field = interpolate_levelset(&spec, mesh.clone()).unwrap();
        let decomp = classify_cells(&field).unwrap();
        // active = cut ∪ inside, disjoint
        let mut merged = decomp.cut_cells.clone();
        merged.extend_from_slice(&decomp.inside_cells);
        merged.sort_unstable();
        assert_eq!(merged, decomp.active_cells);
        // every boundary facet's incident cell is cut
        for bf in &decomp.boundary_facets {
            assert!(decomp.is_cut(bf.cell));
        }
        // every interface facet has one inside and one cut side
        for &f in &decomp.interface_facets {
            let facet = &mesh.facets[f];
            let nb = facet.neighbor.unwrap();
            let sides = [decomp.is_inside(facet.owner), decomp.is_inside(nb)];
            assert_eq!(sides.iter().filter(|&&s| s).count(), 1);
            assert!(decomp.is_cut(facet.owner) || decomp.is_cut(nb));
        }
        let report = check_patch_condition(&mesh, &decomp, 3);
        assert!(report.pass, "max path {}", report.max_path);
    }
}
