//! Quadrature on reference simplices and their facets.
//!
//! Low exactness degrees use the classical symmetric rules; higher degrees
//! fall back to collapsed (Duffy) tensor products of Gauss-Legendre lines,
//! which stay exact for polynomials at any requested degree.

use super::FemError;
use crate::mesh::{Facet, Mesh, Point};

/// Highest exactness degree served before erroring out.
pub const MAX_EXACTNESS: usize = 30;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// dimension of the integration domain (1 = edge, 2 = triangle, 3 = tet)
    pub dim: usize,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Measure of the reference domain (= sum of the weights).
    pub fn reference_measure(&self) -> f64 {
        match self.dim {
            1 => 1.0,
            2 => 0.5,
            _ => 1.0 / 6.0,
        }
    }
}

/// Gauss-Legendre nodes/weights on [0,1], exact to degree `2m - 1`.
fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        // Newton iteration from the Chebyshev estimate
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(m, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1,1] -> [0,1]
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 0.5 * w;
    }
    // ascending order for reproducibility
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| nodes[a].total_cmp(&nodes[b]));
    (
        idx.iter().map(|&i| nodes[i]).collect(),
        idx.iter().map(|&i| weights[i]).collect(),
    )
}

/// Legendre polynomial P_m and derivative at x, by the three-term recurrence.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn gl_points_for(degree: usize) -> usize {
    degree / 2 + 1
}

/// Quadrature on the reference cell (triangle or tetrahedron), exact for
/// polynomials of total degree `degree`.
pub fn cell_quadrature(dim: usize, degree: usize) -> Result<QuadratureRule, FemError> {
    if dim != 2 && dim != 3 {
        return Err(FemError::UnsupportedDim(dim));
    }
    if degree > MAX_EXACTNESS {
        return Err(FemError::UnsupportedQuadrature { dim, degree });
    }
    let rule = match (dim, degree) {
        (2, 0) | (2, 1) => QuadratureRule {
            dim: 2,
            points: vec![[1.0 / 3.0, 1.0 / 3.0, 0.0]],
            weights: vec![0.5],
            exactness: 1,
        },
        (2, 2) => QuadratureRule {
            dim: 2,
            points: vec![
                [0.5, 0.0, 0.0],
                [0.5, 0.5, 0.0],
                [0.0, 0.5, 0.0],
            ],
            weights: vec![1.0 / 6.0; 3],
            exactness: 2,
        },
        (3, 0) | (3, 1) => QuadratureRule {
            dim: 3,
            points: vec![[0.25, 0.25, 0.25]],
            weights: vec![1.0 / 6.0],
            exactness: 1,
        },
        (3, 2) => {
            let a = (5.0 + 3.0 * 5.0f64.sqrt()) / 20.0;
            let b = (5.0 - 5.0f64.sqrt()) / 20.0;
            QuadratureRule {
                dim: 3,
                points: vec![
                    [b, b, b],
                    [a, b, b],
                    [b, a, b],
                    [b, b, a],
                ],
                weights: vec![1.0 / 24.0; 4],
                exactness: 2,
            }
        }
        (2, d) => duffy_triangle(d),
        (3, d) => duffy_tetrahedron(d),
        _ => unreachable!(),
    };
    Ok(rule)
}

/// Collapsed rule on the triangle via x = u, y = v(1-u), dxdy = (1-u) dudv.
/// A monomial x^a y^b with a+b <= d becomes degree <= d+1 in u and <= d in v.
fn duffy_triangle(degree: usize) -> QuadratureRule {
    let (un, uw) = gauss_legendre_unit(gl_points_for(degree + 1));
    let (vn, vw) = gauss_legendre_unit(gl_points_for(degree));
    let mut points = Vec::with_capacity(un.len() * vn.len());
    let mut weights = Vec::with_capacity(un.len() * vn.len());
    for (iu, &u) in un.iter().enumerate() {
        for (iv, &v) in vn.iter().enumerate() {
            points.push([u, v * (1.0 - u), 0.0]);
            weights.push(uw[iu] * vw[iv] * (1.0 - u));
        }
    }
    QuadratureRule {
        dim: 2,
        points,
        weights,
        exactness: degree,
    }
}

/// Collapsed rule on the tetrahedron: x = u, y = v(1-u), z = t(1-u)(1-v),
/// with Jacobian (1-u)^2 (1-v).
fn duffy_tetrahedron(degree: usize) -> QuadratureRule {
    let (un, uw) = gauss_legendre_unit(gl_points_for(degree + 2));
    let (vn, vw) = gauss_legendre_unit(gl_points_for(degree + 1));
    let (tn, tw) = gauss_legendre_unit(gl_points_for(degree));
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (iu, &u) in un.iter().enumerate() {
        for (iv, &v) in vn.iter().enumerate() {
            for (it, &t) in tn.iter().enumerate() {
                let y = v * (1.0 - u);
                let z = t * (1.0 - u) * (1.0 - v);
                points.push([u, y, z]);
                weights.push(uw[iu] * vw[iv] * tw[it] * (1.0 - u) * (1.0 - u) * (1.0 - v));
            }
        }
    }
    QuadratureRule {
        dim: 3,
        points,
        weights,
        exactness: degree,
    }
}

/// Quadrature on the reference facet of a `dim`-dimensional cell: a line
/// rule for 2D meshes, a triangle rule for 3D meshes.
pub fn facet_quadrature(dim: usize, degree: usize) -> Result<QuadratureRule, FemError> {
    match dim {
        2 => {
            if degree > MAX_EXACTNESS {
                return Err(FemError::UnsupportedQuadrature { dim: 1, degree });
            }
            let (n, w) = gauss_legendre_unit(gl_points_for(degree));
            Ok(QuadratureRule {
                dim: 1,
                points: n.iter().map(|&t| [t, 0.0, 0.0]).collect(),
                weights: w,
                exactness: degree,
            })
        }
        3 => cell_quadrature(2, degree),
        d => Err(FemError::UnsupportedDim(d)),
    }
}

/// Maps facet-reference coordinates into the reference coordinates of an
/// incident cell.
///
/// Both incident cells build the map from the facet's own vertex order, so
/// a facet quadrature point lands on the same physical point from either
/// side.
#[derive(Debug, Clone, Copy)]
pub struct FacetEmbedding {
    corners: [Point; 3],
    facet_dim: usize,
}

impl FacetEmbedding {
    pub fn new(mesh: &Mesh, facet: &Facet, cell: usize) -> Self {
        let cell_verts = mesh.cell(cell);
        let mut corners = [[0.0; 3]; 3];
        let facet_dim = mesh.dim - 1;
        for (i, &gv) in facet.vertices[..mesh.dim].iter().enumerate() {
            let local = cell_verts
                .iter()
                .position(|&v| v == gv)
                .expect("facet vertex must belong to the incident cell");
            // reference vertex: local 0 is the origin, local j is e_{j-1}
            let mut r = [0.0; 3];
            if local > 0 {
                r[local - 1] = 1.0;
            }
            corners[i] = r;
        }
        Self { corners, facet_dim }
    }

    /// Facet reference point (t) or (s,t) to cell reference coordinates.
    pub fn to_cell_reference(&self, p: &Point) -> Point {
        let mut lam = [0.0; 3];
        match self.facet_dim {
            1 => {
                lam[0] = 1.0 - p[0];
                lam[1] = p[0];
            }
            _ => {
                lam[0] = 1.0 - p[0] - p[1];
                lam[1] = p[0];
                lam[2] = p[1];
            }
        }
        let mut out = [0.0; 3];
        for (i, &l) in lam.iter().enumerate().take(self.facet_dim + 1) {
            for d in 0..3 {
                out[d] += l * self.corners[i][d];
            }
        }
        out
    }
}
