//! Structured simplicial background meshes on axis-aligned boxes.
//!
//! 2D boxes are split into a uniform grid of squares, each cut into two
//! triangles along the diagonal from its lower-left to its upper-right
//! corner. 3D boxes use the Kuhn (Freudenthal) decomposition of each cube
//! into six tetrahedra sharing the main diagonal. Both patterns are
//! conforming and translation-invariant, so the mesh has no hanging nodes
//! and identical inputs always produce identical connectivity.

use std::collections::HashMap;
use std::io::Write;

use thiserror::Error;

/// Points are stored padded to three components; `z = 0` in 2D.
pub type Point = [f64; 3];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("subdivision count must be at least 1")]
    ZeroSubdivisions,
    #[error("degenerate bounding box: lo must be strictly below hi componentwise")]
    DegenerateBox,
    #[error("unsupported dimension {0}, only 2 and 3 are handled")]
    UnsupportedDim(usize),
    #[error("cell {0} is degenerate (zero volume)")]
    DegenerateCell(usize),
}

/// Axis-aligned box housing the physical domain.
#[derive(Debug, Clone, Copy)]
pub struct BoundingBox {
    pub lo: Point,
    pub hi: Point,
    pub dim: usize,
}

impl BoundingBox {
    pub fn new(dim: usize, lo: Point, hi: Point) -> Result<Self, MeshError> {
        if dim != 2 && dim != 3 {
            return Err(MeshError::UnsupportedDim(dim));
        }
        if (0..dim).any(|i| !(lo[i] < hi[i]) || !lo[i].is_finite() || !hi[i].is_finite()) {
            return Err(MeshError::DegenerateBox);
        }
        Ok(Self { lo, hi, dim })
    }

    pub fn square(lo: f64, hi: f64) -> Result<Self, MeshError> {
        Self::new(2, [lo, lo, 0.0], [hi, hi, 0.0])
    }

    pub fn cube(lo: f64, hi: f64) -> Result<Self, MeshError> {
        Self::new(3, [lo, lo, lo], [hi, hi, hi])
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|i| self.side(i)).product()
    }

    /// Total measure of the box boundary (perimeter in 2D, area in 3D).
    pub fn surface_measure(&self) -> f64 {
        match self.dim {
            2 => 2.0 * (self.side(0) + self.side(1)),
            _ => {
                let (a, b, c) = (self.side(0), self.side(1), self.side(2));
                2.0 * (a * b + b * c + a * c)
            }
        }
    }
}

/// A (dim-1)-dimensional mesh facet: edge in 2D, triangle in 3D.
///
/// The unit normal points from the owner cell towards the neighbor, or
/// outward on the mesh boundary.
#[derive(Debug, Clone)]
pub struct Facet {
    pub vertices: [usize; 3],
    pub owner: usize,
    pub neighbor: Option<usize>,
    pub measure: f64,
    pub normal: Point,
}

/// Simplicial mesh with facet adjacency and per-cell size data.
#[derive(Debug)]
pub struct Mesh {
    pub dim: usize,
    pub vertices: Vec<Point>,
    cells: Vec<usize>,
    pub facets: Vec<Facet>,
    cell_facets: Vec<usize>,
    pub cell_diameters: Vec<f64>,
    pub h_max: f64,
    /// Measured quasi-uniformity constant: min over cells of
    /// (inscribed-ball radius) / h_max.
    pub quasi_uniformity: f64,
}

impl Mesh {
    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.cells[c * k..(c + 1) * k]
    }

    /// Facet indices incident to cell `c`, one per local facet.
    pub fn facets_of_cell(&self, c: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.cell_facets[c * k..(c + 1) * k]
    }

    pub fn cell_vertex(&self, c: usize, local: usize) -> Point {
        self.vertices[self.cell(c)[local]]
    }

    pub fn cell_centroid(&self, c: usize) -> Point {
        let mut x = [0.0; 3];
        let verts = self.cell(c);
        for &v in verts {
            for d in 0..3 {
                x[d] += self.vertices[v][d];
            }
        }
        for d in 0..3 {
            x[d] /= verts.len() as f64;
        }
        x
    }

    /// Plain-text dump (vertices, then cells) for debugging. Not a stable format.
    pub fn write_listing<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "dim {}", self.dim)?;
        writeln!(w, "vertices {}", self.vertices.len())?;
        for v in &self.vertices {
            writeln!(w, "{:.17e} {:.17e} {:.17e}", v[0], v[1], v[2])?;
        }
        writeln!(w, "cells {}", self.n_cells())?;
        for c in 0..self.n_cells() {
            let ids: Vec<String> = self.cell(c).iter().map(|i| i.to_string()).collect();
            writeln!(w, "{}", ids.join(" "))?;
        }
        Ok(())
    }
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

fn distance(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

/// Affine reference-to-physical map of one cell.
///
/// The reference simplex has vertices at the origin and the unit points
/// `e_1..e_dim`; `x = origin + J ξ`.
#[derive(Debug, Clone, Copy)]
pub struct AffineMap {
    pub origin: Point,
    pub jacobian: [[f64; 3]; 3],
    pub inv_transpose: [[f64; 3]; 3],
    pub det_abs: f64,
    pub volume: f64,
    pub dim: usize,
}

impl AffineMap {
    pub fn to_physical(&self, r: Point) -> Point {
        let j = &self.jacobian;
        [
            self.origin[0] + j[0][0] * r[0] + j[0][1] * r[1] + j[0][2] * r[2],
            self.origin[1] + j[1][0] * r[0] + j[1][1] * r[1] + j[1][2] * r[2],
            self.origin[2] + j[2][0] * r[0] + j[2][1] * r[1] + j[2][2] * r[2],
        ]
    }

    /// Push a reference gradient to the physical gradient: `∇x = J⁻ᵀ ∇ξ`.
    pub fn grad_to_physical(&self, g: Point) -> Point {
        let m = &self.inv_transpose;
        [
            m[0][0] * g[0] + m[0][1] * g[1] + m[0][2] * g[2],
            m[1][0] * g[0] + m[1][1] * g[1] + m[1][2] * g[2],
            m[2][0] * g[0] + m[2][1] * g[1] + m[2][2] * g[2],
        ]
    }

    /// Pull a physical point back to reference coordinates.
    pub fn to_reference(&self, x: Point) -> Point {
        let d = sub(x, self.origin);
        let m = &self.inv_transpose;
        // J⁻¹ = (J⁻ᵀ)ᵀ
        [
            m[0][0] * d[0] + m[1][0] * d[1] + m[2][0] * d[2],
            m[0][1] * d[0] + m[1][1] * d[1] + m[2][1] * d[2],
            m[0][2] * d[0] + m[1][2] * d[1] + m[2][2] * d[2],
        ]
    }
}

/// Reference-to-physical map for one cell; errors on zero volume.
pub fn affine_map(mesh: &Mesh, cell: usize) -> Result<AffineMap, MeshError> {
    let dim = mesh.dim;
    let v0 = mesh.cell_vertex(cell, 0);
    let mut j = [[0.0; 3]; 3];
    for col in 0..dim {
        let e = sub(mesh.cell_vertex(cell, col + 1), v0);
        for row in 0..3 {
            j[row][col] = e[row];
        }
    }
    // pad unused directions so the 3x3 determinant equals the dim x dim one
    for col in dim..3 {
        j[col][col] = 1.0;
    }
    let det = det3(&j);
    let factorial = if dim == 2 { 2.0 } else { 6.0 };
    let volume = det.abs() / factorial;
    if !(volume > 0.0) || !volume.is_finite() {
        return Err(MeshError::DegenerateCell(cell));
    }
    let inv = inv3(&j, det);
    let mut inv_t = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            inv_t[r][c] = inv[c][r];
        }
    }
    Ok(AffineMap {
        origin: v0,
        jacobian: j,
        inv_transpose: inv_t,
        det_abs: det.abs(),
        volume,
        dim,
    })
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inv3(m: &[[f64; 3]; 3], det: f64) -> [[f64; 3]; 3] {
    let c = |r: usize, s: usize| -> f64 {
        let r1 = (r + 1) % 3;
        let r2 = (r + 2) % 3;
        let s1 = (s + 1) % 3;
        let s2 = (s + 2) % 3;
        m[r1][s1] * m[r2][s2] - m[r1][s2] * m[r2][s1]
    };
    let mut inv = [[0.0; 3]; 3];
    for r in 0..3 {
        for s in 0..3 {
            inv[r][s] = c(s, r) / det;
        }
    }
    inv
}

/// Build the uniform background mesh with `n` subdivisions per axis.
pub fn build_background_mesh(bbox: &BoundingBox, n: usize) -> Result<Mesh, MeshError> {
    if n == 0 {
        return Err(MeshError::ZeroSubdivisions);
    }
    let dim = bbox.dim;
    let (vertices, cells) = match dim {
        2 => build_2d(bbox, n),
        3 => build_3d(bbox, n),
        d => return Err(MeshError::UnsupportedDim(d)),
    };
    finish_mesh(dim, vertices, cells)
}

fn build_2d(bbox: &BoundingBox, n: usize) -> (Vec<Point>, Vec<usize>) {
    let np = n + 1;
    let mut vertices = Vec::with_capacity(np * np);
    for iy in 0..np {
        for ix in 0..np {
            vertices.push([
                bbox.lo[0] + bbox.side(0) * ix as f64 / n as f64,
                bbox.lo[1] + bbox.side(1) * iy as f64 / n as f64,
                0.0,
            ]);
        }
    }
    let idx = |ix: usize, iy: usize| iy * np + ix;
    let mut cells = Vec::with_capacity(2 * n * n * 3);
    for iy in 0..n {
        for ix in 0..n {
            let (v00, v10) = (idx(ix, iy), idx(ix + 1, iy));
            let (v01, v11) = (idx(ix, iy + 1), idx(ix + 1, iy + 1));
            // diagonal from lower-left to upper-right, both triangles CCW
            cells.extend_from_slice(&[v00, v10, v11]);
            cells.extend_from_slice(&[v00, v11, v01]);
        }
    }
    (vertices, cells)
}

const KUHN_PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

fn build_3d(bbox: &BoundingBox, n: usize) -> (Vec<Point>, Vec<usize>) {
    let np = n + 1;
    let mut vertices = Vec::with_capacity(np * np * np);
    for iz in 0..np {
        for iy in 0..np {
            for ix in 0..np {
                vertices.push([
                    bbox.lo[0] + bbox.side(0) * ix as f64 / n as f64,
                    bbox.lo[1] + bbox.side(1) * iy as f64 / n as f64,
                    bbox.lo[2] + bbox.side(2) * iz as f64 / n as f64,
                ]);
            }
        }
    }
    let idx = |c: [usize; 3]| (c[2] * np + c[1]) * np + c[0];
    let mut cells = Vec::with_capacity(6 * n * n * n * 4);
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                let base = [ix, iy, iz];
                for perm in &KUHN_PERMUTATIONS {
                    // vertex path from the cube's min corner to its max corner
                    let mut corner = base;
                    let mut tet = [idx(corner), 0, 0, 0];
                    for (step, &axis) in perm.iter().enumerate() {
                        corner[axis] += 1;
                        tet[step + 1] = idx(corner);
                    }
                    cells.extend_from_slice(&tet);
                }
            }
        }
    }
    (vertices, cells)
}

fn finish_mesh(dim: usize, vertices: Vec<Point>, mut cells: Vec<usize>) -> Result<Mesh, MeshError> {
    let k = dim + 1;
    let n_cells = cells.len() / k;
    // enforce positive orientation by swapping the last two vertices
    for c in 0..n_cells {
        let verts = &cells[c * k..(c + 1) * k];
        if signed_volume(dim, &vertices, verts) < 0.0 {
            cells.swap(c * k + dim - 1, c * k + dim);
        }
    }
    let (facets, cell_facets) = facet_topology(dim, &vertices, &cells);

    let mut cell_diameters = Vec::with_capacity(n_cells);
    let mut h_max: f64 = 0.0;
    for c in 0..n_cells {
        let verts = &cells[c * k..(c + 1) * k];
        let mut diam: f64 = 0.0;
        for i in 0..k {
            for jj in (i + 1)..k {
                diam = diam.max(distance(vertices[verts[i]], vertices[verts[jj]]));
            }
        }
        cell_diameters.push(diam);
        h_max = h_max.max(diam);
    }

    let mut mesh = Mesh {
        dim,
        vertices,
        cells,
        facets,
        cell_facets,
        cell_diameters,
        h_max,
        quasi_uniformity: 0.0,
    };
    let mut min_ratio = f64::INFINITY;
    for c in 0..n_cells {
        let map = affine_map(&mesh, c)?;
        let facet_measure: f64 = mesh
            .facets_of_cell(c)
            .iter()
            .map(|&f| mesh.facets[f].measure)
            .sum();
        // inradius of a simplex: dim * volume / (sum of facet measures)
        let inradius = dim as f64 * map.volume / facet_measure;
        min_ratio = min_ratio.min(inradius / h_max);
    }
    mesh.quasi_uniformity = min_ratio;
    Ok(mesh)
}

fn signed_volume(dim: usize, vertices: &[Point], cell: &[usize]) -> f64 {
    let v0 = vertices[cell[0]];
    let mut j = [[0.0; 3]; 3];
    for col in 0..dim {
        let e = sub(vertices[cell[col + 1]], v0);
        for row in 0..3 {
            j[row][col] = e[row];
        }
    }
    for col in dim..3 {
        j[col][col] = 1.0;
    }
    det3(&j)
}

/// Enumerate facets with owner/neighbor adjacency.
///
/// Facets are numbered in first-encounter order while scanning cells in
/// index order, so the result is deterministic for a given cell list.
pub fn facet_topology(
    dim: usize,
    vertices: &[Point],
    cells: &[usize],
) -> (Vec<Facet>, Vec<usize>) {
    let k = dim + 1;
    let n_cells = cells.len() / k;
    let mut lookup: HashMap<[usize; 3], usize> = HashMap::new();
    let mut facets: Vec<Facet> = Vec::new();
    let mut cell_facets = vec![usize::MAX; n_cells * k];

    for c in 0..n_cells {
        let verts = &cells[c * k..(c + 1) * k];
        for local in 0..k {
            // facet opposite local vertex `local`
            let mut fv = [usize::MAX; 3];
            let mut m = 0;
            for (i, &v) in verts.iter().enumerate() {
                if i != local {
                    fv[m] = v;
                    m += 1;
                }
            }
            let mut key = fv;
            key[..dim].sort_unstable();
            match lookup.get(&key) {
                Some(&f) => {
                    facets[f].neighbor = Some(c);
                    cell_facets[c * k + local] = f;
                }
                None => {
                    let f = facets.len();
                    lookup.insert(key, f);
                    facets.push(Facet {
                        vertices: fv,
                        owner: c,
                        neighbor: None,
                        measure: 0.0,
                        normal: [0.0; 3],
                    });
                    cell_facets[c * k + local] = f;
                }
            }
        }
    }

    for facet in facets.iter_mut() {
        let (measure, mut normal) = facet_geometry(dim, vertices, &facet.vertices);
        // orient from the owner outward
        let mut centroid = [0.0; 3];
        for &v in &facet.vertices[..dim] {
            for d in 0..3 {
                centroid[d] += vertices[v][d] / dim as f64;
            }
        }
        let owner_c = cell_centroid_of(dim, vertices, cells, facet.owner);
        if dot(normal, sub(centroid, owner_c)) < 0.0 {
            for d in 0..3 {
                normal[d] = -normal[d];
            }
        }
        facet.measure = measure;
        facet.normal = normal;
    }

    (facets, cell_facets)
}

fn cell_centroid_of(dim: usize, vertices: &[Point], cells: &[usize], c: usize) -> Point {
    let k = dim + 1;
    let mut x = [0.0; 3];
    for &v in &cells[c * k..(c + 1) * k] {
        for d in 0..3 {
            x[d] += vertices[v][d] / k as f64;
        }
    }
    x
}

fn facet_geometry(dim: usize, vertices: &[Point], fv: &[usize; 3]) -> (f64, Point) {
    if dim == 2 {
        let t = sub(vertices[fv[1]], vertices[fv[0]]);
        let len = norm(t);
        (len, [t[1] / len, -t[0] / len, 0.0])
    } else {
        let e1 = sub(vertices[fv[1]], vertices[fv[0]]);
        let e2 = sub(vertices[fv[2]], vertices[fv[0]]);
        let c = cross(e1, e2);
        let area2 = norm(c);
        (area2 / 2.0, [c[0] / area2, c[1] / area2, c[2] / area2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square_mesh(n: usize) -> Mesh {
        build_background_mesh(&BoundingBox::square(0.0, 1.0).unwrap(), n).unwrap()
    }

    #[test]
    fn counts_2d_n4() {
        let bbox = BoundingBox::square(-0.5, 0.5).unwrap();
        let mesh = build_background_mesh(&bbox, 4).unwrap();
        assert_eq!(mesh.vertices.len(), 25);
        assert_eq!(mesh.n_cells(), 32);
        let expected_h = (2.0f64).sqrt() / 4.0;
        assert!((mesh.h_max - expected_h).abs() < 1e-14);
    }

    #[test]
    fn counts_3d_n2() {
        let bbox = BoundingBox::cube(-1.0, 1.0).unwrap();
        let mesh = build_background_mesh(&bbox, 2).unwrap();
        assert_eq!(mesh.vertices.len(), 27);
        assert_eq!(mesh.n_cells(), 48);
    }

    #[test]
    fn single_square_topology() {
        let mesh = unit_square_mesh(1);
        assert_eq!(mesh.vertices.len(), 4);
        assert_eq!(mesh.n_cells(), 2);
        assert_eq!(mesh.facets.len(), 5);
        let interior = mesh.facets.iter().filter(|f| f.neighbor.is_some()).count();
        assert_eq!(interior, 1);
    }

    #[test]
    fn rejects_bad_input() {
        let bbox = BoundingBox::square(0.0, 1.0).unwrap();
        assert!(matches!(
            build_background_mesh(&bbox, 0),
            Err(MeshError::ZeroSubdivisions)
        ));
        assert!(BoundingBox::square(1.0, 1.0).is_err());
        assert!(BoundingBox::new(4, [0.0; 3], [1.0; 3]).is_err());
    }

    /// Brute-force facet enumeration oracle: list every cell sub-simplex and
    /// deduplicate by sorted vertex tuple.
    fn oracle_facet_counts(mesh: &Mesh) -> (usize, usize) {
        let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
        for c in 0..mesh.n_cells() {
            let verts = mesh.cell(c);
            for skip in 0..verts.len() {
                let mut key: Vec<usize> = verts
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != skip)
                    .map(|(_, &v)| v)
                    .collect();
                key.sort_unstable();
                *seen.entry(key).or_insert(0) += 1;
            }
        }
        let total = seen.len();
        let interior = seen.values().filter(|&&n| n == 2).count();
        (total, interior)
    }

    #[test]
    fn facet_counts_2d_n2_match_oracle() {
        let mesh = unit_square_mesh(2);
        let (total, interior) = oracle_facet_counts(&mesh);
        assert_eq!((total, interior), (16, 8));
        assert_eq!(mesh.facets.len(), total);
        let got_interior = mesh.facets.iter().filter(|f| f.neighbor.is_some()).count();
        assert_eq!(got_interior, interior);
    }

    #[test]
    fn facet_counts_3d_n1_match_oracle() {
        let bbox = BoundingBox::cube(0.0, 1.0).unwrap();
        let mesh = build_background_mesh(&bbox, 1).unwrap();
        assert_eq!(mesh.n_cells(), 6);
        let (total, interior) = oracle_facet_counts(&mesh);
        assert_eq!(mesh.facets.len(), total);
        let got_interior = mesh.facets.iter().filter(|f| f.neighbor.is_some()).count();
        assert_eq!(got_interior, interior);
        // 6 tets * 4 faces = 24 slots, 12 on the cube surface
        assert_eq!(interior, 6);
        // every tet contains the main diagonal (vertex 0 and vertex 7)
        for c in 0..6 {
            let verts = mesh.cell(c);
            assert!(verts.contains(&0) && verts.contains(&7));
        }
    }

    #[test]
    fn affine_map_reference_and_scaled() {
        // reference triangle mapped to itself
        let vertices = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let cells = vec![0, 1, 2];
        let mesh = finish_mesh(2, vertices, cells).unwrap();
        let map = affine_map(&mesh, 0).unwrap();
        assert!((map.volume - 0.5).abs() < 1e-15);
        assert!((map.jacobian[0][0] - 1.0).abs() < 1e-15);
        assert!((map.jacobian[1][1] - 1.0).abs() < 1e-15);
        assert!(map.jacobian[0][1].abs() < 1e-15);

        let vertices = vec![[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 2.0, 0.0]];
        let mesh = finish_mesh(2, vertices, vec![0, 1, 2]).unwrap();
        let map = affine_map(&mesh, 0).unwrap();
        assert!((map.det_abs - 4.0).abs() < 1e-14);
        assert!((map.volume - 2.0).abs() < 1e-14);
    }

    #[test]
    fn affine_map_round_trip_random_triangle() {
        let vertices = vec![
            [0.12, -0.73, 0.0],
            [0.98, 0.11, 0.0],
            [-0.35, 0.62, 0.0],
        ];
        let mesh = finish_mesh(2, vertices, vec![0, 1, 2]).unwrap();
        let map = affine_map(&mesh, 0).unwrap();
        for r in [[0.1, 0.3, 0.0], [0.25, 0.5, 0.0], [0.7, 0.05, 0.0]] {
            let x = map.to_physical(r);
            let back = map.to_reference(x);
            for d in 0..2 {
                assert!((back[d] - r[d]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn degenerate_cell_rejected() {
        let vertices = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let cells = vec![0, 1, 2];
        let (facets, cell_facets) = facet_topology(2, &vertices, &cells);
        let mesh = Mesh {
            dim: 2,
            vertices,
            cells,
            facets,
            cell_facets,
            cell_diameters: vec![2.0],
            h_max: 2.0,
            quasi_uniformity: 0.0,
        };
        assert!(matches!(
            affine_map(&mesh, 0),
            Err(MeshError::DegenerateCell(0))
        ));
    }

    fn total_cell_volume(mesh: &Mesh) -> f64 {
        (0..mesh.n_cells())
            .map(|c| affine_map(mesh, c).unwrap().volume)
            .sum()
    }

    #[test]
    fn volumes_and_boundary_measure() {
        for (bbox, n) in [
            (BoundingBox::square(-0.5, 0.5).unwrap(), 7),
            (BoundingBox::new(2, [-1.0, 0.5, 0.0], [2.0, 3.5, 0.0]).unwrap(), 5),
            (BoundingBox::cube(-1.0, 1.0).unwrap(), 3),
        ] {
            let mesh = build_background_mesh(&bbox, n).unwrap();
            let vol = total_cell_volume(&mesh);
            assert!((vol - bbox.volume()).abs() <= 1e-12 * bbox.volume());
            let boundary: f64 = mesh
                .facets
                .iter()
                .filter(|f| f.neighbor.is_none())
                .map(|f| f.measure)
                .sum();
            assert!((boundary - bbox.surface_measure()).abs() <= 1e-12 * bbox.surface_measure());
        }
    }

    #[test]
    fn facet_normals_unit_and_orthogonal() {
        let bbox = BoundingBox::cube(0.0, 1.0).unwrap();
        let mesh = build_background_mesh(&bbox, 2).unwrap();
        for f in &mesh.facets {
            assert!((norm(f.normal) - 1.0).abs() < 1e-12);
            for i in 1..mesh.dim {
                let edge = sub(mesh.vertices[f.vertices[i]], mesh.vertices[f.vertices[0]]);
                assert!(dot(f.normal, edge).abs() < 1e-12);
            }
            // normal points from owner towards neighbor / outward
            let oc = mesh.cell_centroid(f.owner);
            let mut fc = [0.0; 3];
            for &v in &f.vertices[..mesh.dim] {
                for d in 0..3 {
                    fc[d] += mesh.vertices[v][d] / mesh.dim as f64;
                }
            }
            assert!(dot(f.normal, sub(fc, oc)) > 0.0);
            if let Some(nb) = f.neighbor {
                let nc = mesh.cell_centroid(nb);
                assert!(dot(f.normal, sub(nc, oc)) > 0.0);
            }
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let bbox = BoundingBox::cube(-1.0, 1.0).unwrap();
        let a = build_background_mesh(&bbox, 3).unwrap();
        let b = build_background_mesh(&bbox, 3).unwrap();
        assert_eq!(a.cells, b.cells);
        assert_eq!(a.vertices, b.vertices);
        let fa: Vec<_> = a.facets.iter().map(|f| (f.vertices, f.owner, f.neighbor)).collect();
        let fb: Vec<_> = b.facets.iter().map(|f| (f.vertices, f.owner, f.neighbor)).collect();
        assert_eq!(fa, fb);
    }

    #[test]
    fn quasi_uniformity_positive() {
        let mesh = unit_square_mesh(4);
        // right isoceles triangle: inradius/h = (2 - sqrt(2))/2 / sqrt(2)
        let expected = (2.0 - 2.0f64.sqrt()) / 2.0 / 2.0f64.sqrt();
        assert!((mesh.quasi_uniformity - expected / 4.0 * 4.0).abs() < 1e-12);
        let bbox = BoundingBox::cube(0.0, 1.0).unwrap();
        let mesh3 = build_background_mesh(&bbox, 2).unwrap();
        assert!(mesh3.quasi_uniformity > 0.05);
    }
}
