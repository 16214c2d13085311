//! Assembly of the stabilized block system on the active mesh.
//!
//! Unknowns are ordered V, Z, Q: the scalar degree-k field on all active
//! cells, the vector degree-k flux on the cut strip, and the discontinuous
//! degree-(k-1) multiplier on the cut strip. The bilinear form combines
//!
//! * stiffness + mass on the active mesh,
//! * the boundary flux `∫_{∂Ω_h} (y·n) v` (the only unsymmetric term),
//! * least-squares couplings `γ_div (div y + u)(div z + v)` and
//!   `γ_u (y + ∇u)·(z + ∇v)` on the cut strip,
//! * the level-set penalty `(γ_p/h²)(y·∇φ_h + p φ_h/h)(z·∇φ_h + q φ_h/h)`,
//!   with an extra `-|∇φ_h| α u` factor for Robin conditions,
//! * the ghost penalty `σ h ∫ [∂u/∂n][∂v/∂n]` on the inside/cut interface.
//!
//! All scalings use the global background h. A symbolic pattern pass fixes
//! the sparsity once; numeric passes scatter into it, so re-assembly during
//! parameter sweeps reuses the structure.

use std::io::Write;

use thiserror::Error;

use crate::fem::{cell_quadrature, facet_quadrature, FacetEmbedding, FemError, QuadratureRule, Tabulation};
use crate::levelset::{DomainDecomposition, LevelSetField};
use crate::linalg::SparseMatrix;
use crate::mesh::{affine_map, Mesh, Point};
use crate::space::ScalarSpace;
use crate::{ScalarFn, VectorFn};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("empty cut-cell set: the formulation degenerates without a cut strip")]
    EmptyCutSet,
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("non-finite sample in term {term} on cell {cell}")]
    NonFinite { term: &'static str, cell: usize },
    #[error("unknown term id {0:?}")]
    UnknownTerm(String),
    #[error(transparent)]
    Fem(#[from] FemError),
}

/// Boundary condition on Γ, with the boundary datum already lifted to a
/// neighborhood of Γ (evaluated on the cut strip only).
#[derive(Clone)]
pub enum BoundaryCondition {
    NeumannHomogeneous,
    Neumann { g_ext: ScalarFn },
    Robin { alpha: f64, g_ext: ScalarFn },
}

impl BoundaryCondition {
    fn g_ext(&self) -> Option<&ScalarFn> {
        match self {
            BoundaryCondition::NeumannHomogeneous => None,
            BoundaryCondition::Neumann { g_ext } => Some(g_ext),
            BoundaryCondition::Robin { g_ext, .. } => Some(g_ext),
        }
    }

    fn robin_alpha(&self) -> f64 {
        match self {
            BoundaryCondition::Robin { alpha, .. } => *alpha,
            _ => 0.0,
        }
    }
}

/// Stabilization parameters and discretization degrees.
#[derive(Clone)]
pub struct PhiFemParams {
    pub gamma_div: f64,
    pub gamma_u: f64,
    pub gamma_p: f64,
    pub sigma: f64,
    /// primal degree k
    pub k: usize,
    /// level-set degree l
    pub l: usize,
    pub bc: BoundaryCondition,
}

impl PhiFemParams {
    /// The parameter set used throughout the experiments:
    /// γ_div = γ_u = γ_p = 10, σ = 0.01.
    pub fn standard(k: usize, l: usize) -> Self {
        Self {
            gamma_div: 10.0,
            gamma_u: 10.0,
            gamma_p: 10.0,
            sigma: 0.01,
            k,
            l,
            bc: BoundaryCondition::NeumannHomogeneous,
        }
    }

    pub fn validate(&self) -> Result<(), AssemblyError> {
        for (name, v) in [
            ("gamma_div", self.gamma_div),
            ("gamma_u", self.gamma_u),
            ("gamma_p", self.gamma_p),
            ("sigma", self.sigma),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(AssemblyError::BadParams(format!("{name} must be positive, got {v}")));
            }
        }
        if self.k < 1 {
            return Err(AssemblyError::BadParams("k must be at least 1".into()));
        }
        if self.l < 1 {
            return Err(AssemblyError::BadParams("l must be at least 1".into()));
        }
        if self.l < self.k + 1 {
            log::warn!(
                "level-set degree l = {} below k + 1 = {}; accuracy may degrade",
                self.l,
                self.k + 1
            );
        }
        Ok(())
    }
}

/// Problem data: the source term and optionally the manufactured solution.
#[derive(Clone)]
pub struct ProblemData {
    pub f: ScalarFn,
    pub exact: Option<ScalarFn>,
    pub exact_grad: Option<VectorFn>,
}

/// Block DOF numbering: V first, then Z (node-major, component-minor),
/// then Q (cell-major).
pub struct DofLayout {
    pub v_space: ScalarSpace,
    pub z_space: ScalarSpace,
    pub q_per_cell: usize,
    pub n_v: usize,
    pub n_z: usize,
    pub n_q: usize,
    pub dim: usize,
    pub k: usize,
}

impl DofLayout {
    pub fn total(&self) -> usize {
        self.n_v + self.n_z + self.n_q
    }

    pub fn z_global(&self, scalar_dof: usize, comp: usize) -> usize {
        self.n_v + scalar_dof * self.dim + comp
    }

    pub fn q_global(&self, cut_pos: usize, j: usize) -> usize {
        self.n_v + self.n_z + cut_pos * self.q_per_cell + j
    }
}

/// Build the block layout for primal degree `k` over a decomposition.
pub fn build_dof_layout(
    mesh: &Mesh,
    decomp: &DomainDecomposition,
    k: usize,
) -> Result<DofLayout, AssemblyError> {
    if k < 1 {
        return Err(AssemblyError::BadParams("k must be at least 1".into()));
    }
    if decomp.cut_cells.is_empty() {
        return Err(AssemblyError::EmptyCutSet);
    }
    let v_space = ScalarSpace::build(mesh, &decomp.active_cells, k)?;
    let z_space = ScalarSpace::build(mesh, &decomp.cut_cells, k)?;
    let q_per_cell = crate::fem::lagrange_basis(mesh.dim, k - 1)?.len();
    let n_v = v_space.n_dofs;
    let n_z = z_space.n_dofs * mesh.dim;
    let n_q = q_per_cell * decomp.cut_cells.len();
    Ok(DofLayout {
        v_space,
        z_space,
        q_per_cell,
        n_v,
        n_z,
        n_q,
        dim: mesh.dim,
        k,
    })
}

/// Assembled sparse system with its block sizes.
pub struct BlockSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub n_v: usize,
    pub n_z: usize,
    pub n_q: usize,
}

impl BlockSystem {
    pub fn export_matrix<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        self.matrix.write_matrix_market(w)
    }

    pub fn export_rhs<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        crate::linalg::write_vector_matrix_market(w, &self.rhs)
    }
}

/// One named term of the bilinear form or right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermId {
    StiffnessMass,
    BoundaryFlux,
    LsDiv,
    LsGrad,
    Penalty,
    Ghost,
    RhsSource,
    RhsLsDiv,
    RhsBoundaryData,
}

impl TermId {
    pub const ALL: [TermId; 9] = [
        TermId::StiffnessMass,
        TermId::BoundaryFlux,
        TermId::LsDiv,
        TermId::LsGrad,
        TermId::Penalty,
        TermId::Ghost,
        TermId::RhsSource,
        TermId::RhsLsDiv,
        TermId::RhsBoundaryData,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TermId::StiffnessMass => "stiffness_mass",
            TermId::BoundaryFlux => "boundary_flux",
            TermId::LsDiv => "ls_div",
            TermId::LsGrad => "ls_grad",
            TermId::Penalty => "penalty",
            TermId::Ghost => "ghost",
            TermId::RhsSource => "rhs_source",
            TermId::RhsLsDiv => "rhs_ls_div",
            TermId::RhsBoundaryData => "rhs_boundary_data",
        }
    }

    pub fn parse(s: &str) -> Result<Self, AssemblyError> {
        Self::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| AssemblyError::UnknownTerm(s.to_string()))
    }
}

#[derive(Clone, Copy, Default)]
struct TermMask {
    stiffness_mass: bool,
    boundary_flux: bool,
    ls_div: bool,
    ls_grad: bool,
    penalty: bool,
    ghost: bool,
    rhs_source: bool,
    rhs_ls_div: bool,
    rhs_boundary_data: bool,
}

impl TermMask {
    fn all() -> Self {
        Self {
            stiffness_mass: true,
            boundary_flux: true,
            ls_div: true,
            ls_grad: true,
            penalty: true,
            ghost: true,
            rhs_source: true,
            rhs_ls_div: true,
            rhs_boundary_data: true,
        }
    }

    fn only(term: TermId) -> Self {
        let mut m = Self::default();
        match term {
            TermId::StiffnessMass => m.stiffness_mass = true,
            TermId::BoundaryFlux => m.boundary_flux = true,
            TermId::LsDiv => m.ls_div = true,
            TermId::LsGrad => m.ls_grad = true,
            TermId::Penalty => m.penalty = true,
            TermId::Ghost => m.ghost = true,
            TermId::RhsSource => m.rhs_source = true,
            TermId::RhsLsDiv => m.rhs_ls_div = true,
            TermId::RhsBoundaryData => m.rhs_boundary_data = true,
        }
        m
    }

    fn any_cut_matrix(&self) -> bool {
        self.ls_div || self.ls_grad || self.penalty
    }

    fn any_cut(&self) -> bool {
        self.any_cut_matrix() || self.rhs_ls_div || self.rhs_boundary_data
    }
}

/// Assembles the system; holds quadrature tabulations and the symbolic
/// pattern so repeated numeric passes stay cheap.
pub struct Assembler<'a> {
    mesh: &'a Mesh,
    field: &'a LevelSetField,
    decomp: &'a DomainDecomposition,
    layout: &'a DofLayout,
    params: &'a PhiFemParams,
    data: &'a ProblemData,
    h: f64,
    cell_rule: QuadratureRule,
    facet_rule: QuadratureRule,
    tab_v: Tabulation,
    tab_q: Tabulation,
    tab_phi: Tabulation,
    pattern: Vec<(usize, usize)>,
}

impl<'a> Assembler<'a> {
    pub fn new(
        mesh: &'a Mesh,
        field: &'a LevelSetField,
        decomp: &'a DomainDecomposition,
        layout: &'a DofLayout,
        params: &'a PhiFemParams,
        data: &'a ProblemData,
    ) -> Result<Self, AssemblyError> {
        params.validate()?;
        if decomp.cut_cells.is_empty() {
            return Err(AssemblyError::EmptyCutSet);
        }
        if params.l != field.degree() {
            return Err(AssemblyError::BadParams(format!(
                "params.l = {} does not match the interpolated level-set degree {}",
                params.l,
                field.degree()
            )));
        }
        if params.k != layout.k {
            return Err(AssemblyError::BadParams(format!(
                "params.k = {} does not match the layout degree {}",
                params.k, layout.k
            )));
        }
        let k = params.k;
        let l = params.l;
        let cell_rule = cell_quadrature(mesh.dim, 2 * (k + l))?;
        let facet_rule = facet_quadrature(mesh.dim, 2 * k)?;
        let tab_v = layout.v_space.basis.tabulate(&cell_rule.points);
        let tab_q = crate::fem::lagrange_basis(mesh.dim, k - 1)?.tabulate(&cell_rule.points);
        let tab_phi = field.space.basis.tabulate(&cell_rule.points);

        let pattern = build_pattern(mesh, decomp, layout);
        Ok(Self {
            mesh,
            field,
            decomp,
            layout,
            params,
            data,
            h: mesh.h_max,
            cell_rule,
            facet_rule,
            tab_v,
            tab_q,
            tab_phi,
            pattern,
        })
    }

    /// Global mesh size used in every penalty scaling.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn assemble(&self) -> Result<BlockSystem, AssemblyError> {
        self.assemble_masked(TermMask::all())
    }

    pub fn assemble_term(&self, term: TermId) -> Result<BlockSystem, AssemblyError> {
        self.assemble_masked(TermMask::only(term))
    }

    fn assemble_masked(&self, mask: TermMask) -> Result<BlockSystem, AssemblyError> {
        let layout = self.layout;
        let total = layout.total();
        let mut matrix = SparseMatrix::from_pattern(total, total, &self.pattern);
        let mut rhs = vec![0.0; total];

        if mask.stiffness_mass || mask.rhs_source {
            self.assemble_active_cells(&mask, &mut matrix, &mut rhs)?;
        }
        if mask.any_cut() {
            self.assemble_cut_cells(&mask, &mut matrix, &mut rhs)?;
        }
        if mask.boundary_flux {
            self.assemble_boundary_flux(&mut matrix)?;
        }
        if mask.ghost {
            self.assemble_ghost(&mut matrix)?;
        }

        if !matrix.all_finite() {
            return Err(AssemblyError::NonFinite {
                term: "assembled matrix",
                cell: usize::MAX,
            });
        }
        Ok(BlockSystem {
            matrix,
            rhs,
            n_v: layout.n_v,
            n_z: layout.n_z,
            n_q: layout.n_q,
        })
    }

    /// Stiffness + mass and the `∫ f v` load over every active cell.
    fn assemble_active_cells(
        &self,
        mask: &TermMask,
        matrix: &mut SparseMatrix,
        rhs: &mut [f64],
    ) -> Result<(), AssemblyError> {
        let layout = self.layout;
        let nv = layout.v_space.basis.len();
        let nq_pts = self.cell_rule.len();
        let mut grads = vec![[0.0; 3]; nv];
        let mut local = vec![0.0; nv * nv];

        for (apos, &c) in self.decomp.active_cells.iter().enumerate() {
            let map = affine_map(self.mesh, c).expect("active cell is nondegenerate");
            let dofs = layout.v_space.dofs(apos);
            local.fill(0.0);
            for q in 0..nq_pts {
                let w = self.cell_rule.weights[q] * map.det_abs;
                for i in 0..nv {
                    grads[i] = map.grad_to_physical(self.tab_v.gradient(q, i));
                }
                if mask.stiffness_mass {
                    for i in 0..nv {
                        let vi = self.tab_v.value(q, i);
                        for j in 0..nv {
                            let vj = self.tab_v.value(q, j);
                            let g = grads[i][0] * grads[j][0]
                                + grads[i][1] * grads[j][1]
                                + grads[i][2] * grads[j][2];
                            local[i * nv + j] += w * (g + vi * vj);
                        }
                    }
                }
                if mask.rhs_source {
                    let x = map.to_physical(self.cell_rule.points[q]);
                    let f = (self.data.f)(&x);
                    if !f.is_finite() {
                        return Err(AssemblyError::NonFinite {
                            term: "rhs_source",
                            cell: c,
                        });
                    }
                    for i in 0..nv {
                        rhs[dofs[i]] += w * f * self.tab_v.value(q, i);
                    }
                }
            }
            if mask.stiffness_mass {
                for i in 0..nv {
                    for j in 0..nv {
                        matrix.add_to(dofs[i], dofs[j], local[i * nv + j]);
                    }
                }
            }
        }
        Ok(())
    }

    /// Least-squares, penalty and cut-strip load terms.
    fn assemble_cut_cells(
        &self,
        mask: &TermMask,
        matrix: &mut SparseMatrix,
        rhs: &mut [f64],
    ) -> Result<(), AssemblyError> {
        let layout = self.layout;
        let dim = self.mesh.dim;
        let nv = layout.v_space.basis.len();
        let nzs = layout.z_space.basis.len();
        let nq = layout.q_per_cell;
        let nloc = nv + nzs * dim + nq;
        let h = self.h;
        let inv_h = 1.0 / h;
        let pen = self.params.gamma_p / (h * h);
        let alpha = self.params.bc.robin_alpha();
        let is_robin = matches!(self.params.bc, BoundaryCondition::Robin { .. });
        let g_ext = self.params.bc.g_ext();

        let mut loc2glob = vec![0usize; nloc];
        let mut local = vec![0.0; nloc * nloc];
        let mut local_rhs = vec![0.0; nloc];
        let mut grads_v = vec![[0.0; 3]; nv];
        let mut grads_z = vec![[0.0; 3]; nzs];
        let mut factor_div = vec![0.0; nloc];
        let mut factor_pen = vec![0.0; nloc];
        let mut factor_grad = vec![0.0; nloc];

        for (cut_pos, &c) in self.decomp.cut_cells.iter().enumerate() {
            let apos = self.decomp.background_to_active[c].expect("cut cell is active");
            let map = affine_map(self.mesh, c).expect("cut cell is nondegenerate");
            let v_dofs = layout.v_space.dofs(apos);
            let z_dofs = layout.z_space.dofs(cut_pos);
            let phi_dofs = self.field.space.dofs(c);

            for (i, &d) in v_dofs.iter().enumerate() {
                loc2glob[i] = d;
            }
            for (s, &d) in z_dofs.iter().enumerate() {
                for comp in 0..dim {
                    loc2glob[nv + s * dim + comp] = layout.z_global(d, comp);
                }
            }
            for j in 0..nq {
                loc2glob[nv + nzs * dim + j] = layout.q_global(cut_pos, j);
            }

            local.fill(0.0);
            local_rhs.fill(0.0);

            for q in 0..self.cell_rule.len() {
                let w = self.cell_rule.weights[q] * map.det_abs;
                for i in 0..nv {
                    grads_v[i] = map.grad_to_physical(self.tab_v.gradient(q, i));
                }
                for s in 0..nzs {
                    grads_z[s] = map.grad_to_physical(self.tab_v.gradient(q, s));
                }
                // discrete level set and gradient at the quadrature point
                let mut phi_h = 0.0;
                let mut gphi_ref = [0.0; 3];
                for (i, &d) in phi_dofs.iter().enumerate() {
                    let cfe = self.field.coeffs[d];
                    phi_h += cfe * self.tab_phi.value(q, i);
                    let g = self.tab_phi.gradient(q, i);
                    for dd in 0..3 {
                        gphi_ref[dd] += cfe * g[dd];
                    }
                }
                let gphi = map.grad_to_physical(gphi_ref);
                let gphi_norm = crate::mesh::dot(gphi, gphi).sqrt();

                if mask.ls_div || mask.rhs_ls_div {
                    // div y + u against div z + v
                    for i in 0..nv {
                        factor_div[i] = self.tab_v.value(q, i);
                    }
                    for s in 0..nzs {
                        for comp in 0..dim {
                            factor_div[nv + s * dim + comp] = grads_z[s][comp];
                        }
                    }
                    for j in 0..nq {
                        factor_div[nv + nzs * dim + j] = 0.0;
                    }
                }
                if mask.ls_div {
                    let gd = self.params.gamma_div * w;
                    rank_one_update(&mut local, &factor_div, gd, nloc);
                }
                if mask.rhs_ls_div {
                    let x = map.to_physical(self.cell_rule.points[q]);
                    let f = (self.data.f)(&x);
                    if !f.is_finite() {
                        return Err(AssemblyError::NonFinite {
                            term: "rhs_ls_div",
                            cell: c,
                        });
                    }
                    let gd = self.params.gamma_div * w * f;
                    for i in 0..nloc {
                        local_rhs[i] += gd * factor_div[i];
                    }
                }

                if mask.ls_grad {
                    // (y + ∇u) · (z + ∇v), one rank-one update per component
                    for comp in 0..dim {
                        for i in 0..nv {
                            factor_grad[i] = grads_v[i][comp];
                        }
                        for s in 0..nzs {
                            for cc in 0..dim {
                                factor_grad[nv + s * dim + cc] = if cc == comp {
                                    self.tab_v.value(q, s)
                                } else {
                                    0.0
                                };
                            }
                        }
                        for j in 0..nq {
                            factor_grad[nv + nzs * dim + j] = 0.0;
                        }
                        rank_one_update(&mut local, &factor_grad, self.params.gamma_u * w, nloc);
                    }
                }

                if mask.penalty || mask.rhs_boundary_data {
                    // y·∇φ_h + (1/h) p φ_h, with -|∇φ_h| α u for Robin
                    for i in 0..nv {
                        factor_pen[i] = if is_robin {
                            -gphi_norm * alpha * self.tab_v.value(q, i)
                        } else {
                            0.0
                        };
                    }
                    for s in 0..nzs {
                        let val = self.tab_v.value(q, s);
                        for comp in 0..dim {
                            factor_pen[nv + s * dim + comp] = val * gphi[comp];
                        }
                    }
                    for j in 0..nq {
                        factor_pen[nv + nzs * dim + j] = inv_h * phi_h * self.tab_q.value(q, j);
                    }
                }
                if mask.penalty {
                    rank_one_update(&mut local, &factor_pen, pen * w, nloc);
                }
                if mask.rhs_boundary_data {
                    if let Some(g) = g_ext {
                        let x = map.to_physical(self.cell_rule.points[q]);
                        let gv = g(&x);
                        if !gv.is_finite() {
                            return Err(AssemblyError::NonFinite {
                                term: "rhs_boundary_data",
                                cell: c,
                            });
                        }
                        let s = -pen * w * gv * gphi_norm;
                        for i in 0..nloc {
                            local_rhs[i] += s * factor_pen[i];
                        }
                    }
                }
            }

            if mask.any_cut_matrix() {
                for i in 0..nloc {
                    for j in 0..nloc {
                        let v = local[i * nloc + j];
                        if v != 0.0 {
                            matrix.add_to(loc2glob[i], loc2glob[j], v);
                        }
                    }
                }
            }
            if mask.rhs_ls_div || mask.rhs_boundary_data {
                for i in 0..nloc {
                    rhs[loc2glob[i]] += local_rhs[i];
                }
            }
        }
        Ok(())
    }

    /// `∫_{∂Ω_h} (y·n) v` over the boundary of the active region. Both the
    /// test trace and the flux come from the incident cut cell.
    fn assemble_boundary_flux(&self, matrix: &mut SparseMatrix) -> Result<(), AssemblyError> {
        let layout = self.layout;
        let dim = self.mesh.dim;
        let nv = layout.v_space.basis.len();
        let nzs = layout.z_space.basis.len();
        let ref_measure = self.facet_rule.reference_measure();
        let mut vals_v = vec![0.0; nv];
        let mut vals_z = vec![0.0; nzs];

        for bf in &self.decomp.boundary_facets {
            let facet = &self.mesh.facets[bf.facet];
            let c = bf.cell;
            let apos = self.decomp.background_to_active[c].expect("boundary cell is active");
            let cut_pos = self.decomp.active_to_cut[apos].expect("boundary cell was promoted");
            let v_dofs = layout.v_space.dofs(apos);
            let z_dofs = layout.z_space.dofs(cut_pos);
            // outward normal of the active region
            let mut normal = facet.normal;
            if facet.owner != c {
                for d in 0..3 {
                    normal[d] = -normal[d];
                }
            }
            let embed = FacetEmbedding::new(self.mesh, facet, c);
            let scale = facet.measure / ref_measure;
            for (qp, w_ref) in self.facet_rule.points.iter().zip(&self.facet_rule.weights) {
                let r = embed.to_cell_reference(qp);
                layout.v_space.basis.eval(&r, &mut vals_v);
                layout.z_space.basis.eval(&r, &mut vals_z);
                let w = w_ref * scale;
                for (i, &vd) in v_dofs.iter().enumerate() {
                    for (s, &zd) in z_dofs.iter().enumerate() {
                        for comp in 0..dim {
                            let v = w * vals_v[i] * vals_z[s] * normal[comp];
                            matrix.add_to(vd, layout.z_global(zd, comp), v);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Normal-derivative jump penalty on the inside/cut interface.
    fn assemble_ghost(&self, matrix: &mut SparseMatrix) -> Result<(), AssemblyError> {
        let layout = self.layout;
        let nv = layout.v_space.basis.len();
        let sigma_h = self.params.sigma * self.h;
        let ref_measure = self.facet_rule.reference_measure();
        let mut grads = vec![[0.0; 3]; nv];
        let mut jump = vec![0.0; 2 * nv];
        let mut slots: Vec<usize> = Vec::with_capacity(2 * nv);

        for &f in &self.decomp.interface_facets {
            let facet = &self.mesh.facets[f];
            let owner = facet.owner;
            let neighbor = facet.neighbor.expect("interface facets are interior");
            let normal = facet.normal;

            slots.clear();
            let mut slot_of = |dof: usize, slots: &mut Vec<usize>| -> usize {
                match slots.iter().position(|&d| d == dof) {
                    Some(i) => i,
                    None => {
                        slots.push(dof);
                        slots.len() - 1
                    }
                }
            };
            let sides = [(owner, 1.0), (neighbor, -1.0)];
            let mut side_data = Vec::with_capacity(2);
            for &(cell, sign) in &sides {
                let apos = self.decomp.background_to_active[cell].expect("interface cell active");
                let dofs = layout.v_space.dofs(apos);
                let map = affine_map(self.mesh, cell).expect("interface cell nondegenerate");
                let embed = FacetEmbedding::new(self.mesh, facet, cell);
                let slot_ids: Vec<usize> =
                    dofs.iter().map(|&d| slot_of(d, &mut slots)).collect();
                side_data.push((map, embed, slot_ids, sign));
            }

            let scale = facet.measure / ref_measure;
            for (qp, w_ref) in self.facet_rule.points.iter().zip(&self.facet_rule.weights) {
                let w = w_ref * scale * sigma_h;
                jump[..slots.len()].fill(0.0);
                for (map, embed, slot_ids, sign) in &side_data {
                    let r = embed.to_cell_reference(qp);
                    layout.v_space.basis.eval_grad(&r, &mut grads);
                    for (i, &slot) in slot_ids.iter().enumerate() {
                        let g = map.grad_to_physical(grads[i]);
                        jump[slot] += sign * crate::mesh::dot(g, normal);
                    }
                }
                for i in 0..slots.len() {
                    if jump[i] == 0.0 {
                        continue;
                    }
                    for j in 0..slots.len() {
                        if jump[j] != 0.0 {
                            matrix.add_to(slots[i], slots[j], w * jump[i] * jump[j]);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn rank_one_update(local: &mut [f64], factor: &[f64], scale: f64, n: usize) {
    for i in 0..n {
        let fi = factor[i];
        if fi == 0.0 {
            continue;
        }
        let row = &mut local[i * n..(i + 1) * n];
        let s = scale * fi;
        for j in 0..n {
            row[j] += s * factor[j];
        }
    }
}

/// Symbolic pass: collect every (row, col) pair the numeric kernels can
/// touch, sorted and deduplicated.
fn build_pattern(
    mesh: &Mesh,
    decomp: &DomainDecomposition,
    layout: &DofLayout,
) -> Vec<(usize, usize)> {
    let dim = mesh.dim;
    let nv = layout.v_space.basis.len();
    let nzs = layout.z_space.basis.len();
    let nq = layout.q_per_cell;
    let mut pairs: Vec<(usize, usize)> = Vec::new();

    for (apos, _) in decomp.active_cells.iter().enumerate() {
        let dofs = layout.v_space.dofs(apos);
        for &r in dofs {
            for &c in dofs {
                pairs.push((r, c));
            }
        }
    }

    let mut loc = Vec::with_capacity(nv + nzs * dim + nq);
    for (cut_pos, &c) in decomp.cut_cells.iter().enumerate() {
        loc.clear();
        let apos = decomp.background_to_active[c].unwrap();
        loc.extend_from_slice(layout.v_space.dofs(apos));
        for &zd in layout.z_space.dofs(cut_pos) {
            for comp in 0..dim {
                loc.push(layout.z_global(zd, comp));
            }
        }
        for j in 0..nq {
            loc.push(layout.q_global(cut_pos, j));
        }
        for &r in &loc {
            for &cc in &loc {
                pairs.push((r, cc));
            }
        }
    }

    for &f in &decomp.interface_facets {
        let facet = &mesh.facets[f];
        let cells = [facet.owner, facet.neighbor.unwrap()];
        let mut dofs: Vec<usize> = Vec::with_capacity(2 * nv);
        for cell in cells {
            let apos = decomp.background_to_active[cell].unwrap();
            dofs.extend_from_slice(layout.v_space.dofs(apos));
        }
        for &r in &dofs {
            for &c in &dofs {
                pairs.push((r, c));
            }
        }
    }

    // boundary-flux rows live inside the cut-cell block already; included
    // here for clarity when the pattern is reused with other masks
    for bf in &decomp.boundary_facets {
        let apos = decomp.background_to_active[bf.cell].unwrap();
        let cut_pos = decomp.active_to_cut[apos].unwrap();
        for &r in layout.v_space.dofs(apos) {
            for &zd in layout.z_space.dofs(cut_pos) {
                for comp in 0..dim {
                    pairs.push((r, layout.z_global(zd, comp)));
                }
            }
        }
    }

    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// Assemble the full system.
pub fn assemble(
    mesh: &Mesh,
    field: &LevelSetField,
    decomp: &DomainDecomposition,
    layout: &DofLayout,
    params: &PhiFemParams,
    data: &ProblemData,
) -> Result<BlockSystem, AssemblyError> {
    Assembler::new(mesh, field, decomp, layout, params, data)?.assemble()
}

/// Assemble a single named term (testing and inspection).
pub fn assemble_term(
    mesh: &Mesh,
    field: &LevelSetField,
    decomp: &DomainDecomposition,
    layout: &DofLayout,
    params: &PhiFemParams,
    data: &ProblemData,
    term: TermId,
) -> Result<BlockSystem, AssemblyError> {
    Assembler::new(mesh, field, decomp, layout, params, data)?.assemble_term(term)
}
