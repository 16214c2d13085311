//! Error norms on the interior submesh and convergence-rate fitting.
//!
//! Errors are measured on Ω_h^i only (the cells strictly inside the
//! domain), exactly as the reference results report them; that avoids any
//! cut-cell quadrature.

use serde::Serialize;
use thiserror::Error;

use crate::assembly::DofLayout;
use crate::fem::cell_quadrature;
use crate::levelset::DomainDecomposition;
use crate::mesh::{affine_map, Mesh};
use crate::{ScalarFn, VectorFn};

#[derive(Debug, Error)]
pub enum PostprocError {
    #[error("interior submesh is empty; the mesh is too coarse to report errors")]
    EmptyInterior,
    #[error("rate fit needs at least two points")]
    TooFewPoints,
    #[error("rate fit needs positive h and error values")]
    NonPositive,
    #[error(transparent)]
    Fem(#[from] crate::fem::FemError),
}

/// Per-solve error summary. `residual` and `cond2` are filled by the caller
/// that ran the solver.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub h: f64,
    pub err_l2_rel: f64,
    pub err_h1_rel: f64,
    pub dofs_v: usize,
    pub dofs_z: usize,
    pub dofs_q: usize,
    pub residual: f64,
    pub cond2: Option<f64>,
}

/// Relative L² and H¹ errors of the primal field on the interior cells.
///
/// `u_coeffs` is the V block of the solution vector.
pub fn compute_errors(
    u_coeffs: &[f64],
    layout: &DofLayout,
    mesh: &Mesh,
    decomp: &DomainDecomposition,
    exact: &ScalarFn,
    exact_grad: &VectorFn,
) -> Result<ErrorReport, PostprocError> {
    if decomp.inside_cells.is_empty() {
        return Err(PostprocError::EmptyInterior);
    }
    let rule = cell_quadrature(mesh.dim, 2 * layout.k + 4)?;
    let tab = layout.v_space.basis.tabulate(&rule.points);
    let nv = layout.v_space.basis.len();

    let mut num_l2 = 0.0;
    let mut den_l2 = 0.0;
    let mut num_h1semi = 0.0;
    let mut den_h1semi = 0.0;

    for &c in &decomp.inside_cells {
        let apos = decomp.background_to_active[c].expect("inside cell is active");
        let dofs = layout.v_space.dofs(apos);
        let map = affine_map(mesh, c).expect("inside cell is nondegenerate");
        for q in 0..rule.len() {
            let w = rule.weights[q] * map.det_abs;
            let x = map.to_physical(rule.points[q]);
            let mut uh = 0.0;
            let mut guh = [0.0; 3];
            for i in 0..nv {
                let coeff = u_coeffs[dofs[i]];
                uh += coeff * tab.value(q, i);
                let g = map.grad_to_physical(tab.gradient(q, i));
                for d in 0..3 {
                    guh[d] += coeff * g[d];
                }
            }
            let ue = exact(&x);
            let ge = exact_grad(&x);
            num_l2 += w * (uh - ue) * (uh - ue);
            den_l2 += w * ue * ue;
            let mut dg = 0.0;
            let mut eg = 0.0;
            for d in 0..mesh.dim {
                dg += (guh[d] - ge[d]) * (guh[d] - ge[d]);
                eg += ge[d] * ge[d];
            }
            num_h1semi += w * dg;
            den_h1semi += w * eg;
        }
    }

    let err_l2_rel = (num_l2 / den_l2).sqrt();
    let err_h1_rel = ((num_l2 + num_h1semi) / (den_l2 + den_h1semi)).sqrt();
    Ok(ErrorReport {
        h: mesh.h_max,
        err_l2_rel,
        err_h1_rel,
        dofs_v: layout.n_v,
        dofs_z: layout.n_z,
        dofs_q: layout.n_q,
        residual: 0.0,
        cond2: None,
    })
}

/// Least-squares slope of log(error) against log(h).
pub fn fit_rate(points: &[(f64, f64)]) -> Result<f64, PostprocError> {
    if points.len() < 2 {
        return Err(PostprocError::TooFewPoints);
    }
    if points.iter().any(|&(h, e)| h <= 0.0 || e <= 0.0) {
        return Err(PostprocError::NonPositive);
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(h, e) in points {
        let x = h.ln();
        let y = e.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}
