//! Nodal Lagrange bases on the reference simplex.
//!
//! Shape functions are evaluated in the Silvester product form over
//! barycentric coordinates, which gives the Kronecker-delta nodal property
//! by construction at equispaced lattice nodes. Degrees 1..=4 are supported
//! in 2D and 1..=3 in 3D (the ranges actually exercised by the solver),
//! plus degree 0 (a single constant function) for the discontinuous
//! multiplier space.

use super::FemError;
use crate::mesh::Point;

/// Barycentric lattice nodes of the given order on the reference simplex.
///
/// Order 0 returns the barycenter. Nodes are listed in lexicographic order
/// of the reference-coordinate multi-index.
pub fn lattice_points(dim: usize, order: usize) -> Vec<Point> {
    let mut pts = Vec::new();
    if order == 0 {
        let c = 1.0 / (dim as f64 + 1.0);
        let mut p = [0.0; 3];
        for d in 0..dim {
            p[d] = c;
        }
        pts.push(p);
        return pts;
    }
    let h = 1.0 / order as f64;
    match dim {
        2 => {
            for i in 0..=order {
                for j in 0..=(order - i) {
                    pts.push([i as f64 * h, j as f64 * h, 0.0]);
                }
            }
        }
        3 => {
            for i in 0..=order {
                for j in 0..=(order - i) {
                    for k in 0..=(order - i - j) {
                        pts.push([i as f64 * h, j as f64 * h, k as f64 * h]);
                    }
                }
            }
        }
        _ => unreachable!("dimension checked by callers"),
    }
    pts
}

fn lattice_multi_indices(dim: usize, order: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    if order == 0 {
        out.push([0; 4]);
        return out;
    }
    match dim {
        2 => {
            for i in 0..=order {
                for j in 0..=(order - i) {
                    out.push([order - i - j, i, j, 0]);
                }
            }
        }
        3 => {
            for i in 0..=order {
                for j in 0..=(order - i) {
                    for k in 0..=(order - i - j) {
                        out.push([order - i - j - k, i, j, k]);
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    out
}

/// Basis values and reference gradients tabulated at a point set.
pub struct Tabulation {
    pub n_basis: usize,
    pub n_points: usize,
    /// row-major `[point][basis]`
    pub values: Vec<f64>,
    /// row-major `[point][basis]`, reference-coordinate gradients
    pub gradients: Vec<Point>,
}

impl Tabulation {
    pub fn value(&self, point: usize, basis: usize) -> f64 {
        self.values[point * self.n_basis + basis]
    }

    pub fn gradient(&self, point: usize, basis: usize) -> Point {
        self.gradients[point * self.n_basis + basis]
    }
}

/// Scalar Lagrange basis of a fixed degree on the reference simplex.
#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    pub dim: usize,
    pub degree: usize,
    pub nodes: Vec<Point>,
    /// barycentric numerators of each node, summing to `degree`
    pub multi_indices: Vec<[usize; 4]>,
}

/// Build the degree-`degree` Lagrange basis on the reference simplex.
pub fn lagrange_basis(dim: usize, degree: usize) -> Result<ReferenceBasis, FemError> {
    if dim != 2 && dim != 3 {
        return Err(FemError::UnsupportedDim(dim));
    }
    let max = if dim == 2 { 4 } else { 3 };
    if degree > max {
        return Err(FemError::UnsupportedDegree { dim, degree });
    }
    Ok(ReferenceBasis {
        dim,
        degree,
        nodes: lattice_points(dim, degree),
        multi_indices: lattice_multi_indices(dim, degree),
    })
}

impl ReferenceBasis {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn barycentric(&self, p: &Point) -> [f64; 4] {
        let mut lam = [0.0; 4];
        let mut s = 0.0;
        for d in 0..self.dim {
            lam[d + 1] = p[d];
            s += p[d];
        }
        lam[0] = 1.0 - s;
        lam
    }

    /// Evaluate all basis functions at reference point `p`.
    pub fn eval(&self, p: &Point, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        if self.degree == 0 {
            out[0] = 1.0;
            return;
        }
        let lam = self.barycentric(p);
        let deg = self.degree as f64;
        for (b, mi) in self.multi_indices.iter().enumerate() {
            let mut val = 1.0;
            for v in 0..=self.dim {
                val *= silvester(mi[v], deg, lam[v]).0;
            }
            out[b] = val;
        }
    }

    /// Evaluate all reference-coordinate gradients at `p`.
    pub fn eval_grad(&self, p: &Point, out: &mut [Point]) {
        debug_assert_eq!(out.len(), self.len());
        if self.degree == 0 {
            out[0] = [0.0; 3];
            return;
        }
        let lam = self.barycentric(p);
        let deg = self.degree as f64;
        for (b, mi) in self.multi_indices.iter().enumerate() {
            let mut vals = [1.0; 4];
            let mut ders = [0.0; 4];
            for v in 0..=self.dim {
                let (value, der) = silvester(mi[v], deg, lam[v]);
                vals[v] = value;
                ders[v] = der;
            }
            // derivative w.r.t. each barycentric coordinate, then chain rule:
            // dλ_0/dξ_d = -1, dλ_{d+1}/dξ_d = 1
            let mut dlam = [0.0; 4];
            for v in 0..=self.dim {
                let mut d = ders[v];
                for w in 0..=self.dim {
                    if w != v {
                        d *= vals[w];
                    }
                }
                dlam[v] = d;
            }
            let mut g = [0.0; 3];
            for d in 0..self.dim {
                g[d] = dlam[d + 1] - dlam[0];
            }
            out[b] = g;
        }
    }

    pub fn tabulate(&self, points: &[Point]) -> Tabulation {
        let nb = self.len();
        let mut values = vec![0.0; nb * points.len()];
        let mut gradients = vec![[0.0; 3]; nb * points.len()];
        for (q, p) in points.iter().enumerate() {
            self.eval(p, &mut values[q * nb..(q + 1) * nb]);
            self.eval_grad(p, &mut gradients[q * nb..(q + 1) * nb]);
        }
        Tabulation {
            n_basis: nb,
            n_points: points.len(),
            values,
            gradients,
        }
    }
}

/// Silvester polynomial `P_a(λ) = Π_{i<a} (deg·λ - i)/(a - i)` and its
/// derivative with respect to λ.
fn silvester(a: usize, deg: f64, lam: f64) -> (f64, f64) {
    if a == 0 {
        return (1.0, 0.0);
    }
    let mut value = 1.0;
    let mut der = 0.0;
    for i in 0..a {
        let factor = (deg * lam - i as f64) / (a - i) as f64;
        // product rule: d(value * factor) = der * factor + value * deg/(a-i)
        der = der * factor + value * deg / (a - i) as f64;
        value *= factor;
    }
    (value, der)
}
