//! Triangle meshes: storage, validation, similarity scaling and exact
//! re-triangulation.
//!
//! A [`TriMesh`] is immutable once built. Refinement operators return new
//! meshes whose piecewise-linear surface is pointwise identical to the input,
//! so statistics gathered on two triangulations describe the same geometry.

mod io;
mod refine;
mod shapes;

use std::collections::HashMap;

use crate::error::{Error, Result};

pub use io::{load_obj, load_ply, parse_obj, save_ply, write_ply, VertexProperties};
pub use refine::{bisect_edges, subdivide_midpoint};
pub use shapes::{grid, icosahedron, icosphere, unit_square};

pub type Point = [f64; 3];

/// Area threshold, relative to the squared bounding-box diagonal, below which
/// a face counts as degenerate.
pub const DEGENERATE_AREA_RATIO: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point>,
    faces: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Builds a mesh, checking that every face references three distinct,
    /// in-range vertices.
    pub fn new(vertices: Vec<Point>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= n {
                    return Err(Error::IndexOutOfRange {
                        index: v as i64,
                        count: n,
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::RepeatedFaceIndex { face: fi });
            }
        }
        if let Some(p) = vertices.iter().flatten().find(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite vertex coordinate {p}")));
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Corner positions of face `f`.
    pub fn triangle(&self, f: usize) -> [Point; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.triangle(f);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn bounding_box(&self) -> Option<(Point, Point)> {
        let first = *self.vertices.first()?;
        let mut lo = first;
        let mut hi = first;
        for p in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Some((lo, hi))
    }

    pub fn bbox_diagonal(&self) -> f64 {
        self.bounding_box().map(|(lo, hi)| norm(sub(hi, lo))).unwrap_or(0.0)
    }

    /// Area below which a face is treated as degenerate.
    pub fn degenerate_area_threshold(&self) -> f64 {
        DEGENERATE_AREA_RATIO * self.bbox_diagonal().powi(2)
    }

    /// Unique undirected edges as `[lo, hi]` pairs, sorted.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges: Vec<[usize; 2]> = self
            .faces
            .iter()
            .flat_map(|f| (0..3).map(move |k| undirected(f[k], f[(k + 1) % 3])))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Map from each undirected edge to the faces containing it.
    pub fn edge_faces(&self) -> HashMap<[usize; 2], Vec<usize>> {
        let mut map: HashMap<[usize; 2], Vec<usize>> = HashMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                map.entry(undirected(f[k], f[(k + 1) % 3])).or_default().push(fi);
            }
        }
        map
    }

    /// Connected components of the vertex graph; unreferenced vertices form
    /// their own components.
    pub fn connected_components(&self) -> usize {
        let mut uf = UnionFind::new(self.vertices.len());
        for f in &self.faces {
            uf.union(f[0], f[1]);
            uf.union(f[1], f[2]);
        }
        uf.count()
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    pub fn scale(&self, k: f64) -> Result<TriMesh> {
        scale(self, k)
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ValidationReport {
    /// Every undirected edge is shared by at most two faces.
    pub is_manifold: bool,
    /// Interior edges are traversed in opposite directions by their two faces.
    pub is_oriented: bool,
    pub boundary_edge_count: usize,
    pub non_manifold_edge_count: usize,
    pub edge_count: usize,
    pub connected_components: usize,
    pub degenerate_faces: Vec<usize>,
    /// Smallest interior angle over all faces, in radians.
    pub min_angle: f64,
}

impl ValidationReport {
    /// Manifold, consistently oriented and free of degenerate faces.
    pub fn is_valid(&self) -> bool {
        self.is_manifold && self.is_oriented && self.degenerate_faces.is_empty()
    }
}

pub fn validate(mesh: &TriMesh) -> ValidationReport {
    // directed half-edge counts per undirected edge
    let mut uses: HashMap<[usize; 2], (usize, usize)> = HashMap::new();
    for f in &mesh.faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            let e = uses.entry(undirected(a, b)).or_default();
            if a < b {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
    }
    let mut boundary = 0;
    let mut non_manifold = 0;
    let mut oriented = true;
    for &(fwd, bwd) in uses.values() {
        match fwd + bwd {
            1 => boundary += 1,
            2 => oriented &= fwd == 1 && bwd == 1,
            _ => {
                non_manifold += 1;
                oriented = false;
            }
        }
    }

    let threshold = mesh.degenerate_area_threshold();
    let degenerate_faces = (0..mesh.faces.len())
        .filter(|&f| mesh.face_area(f) < threshold)
        .collect();

    let mut min_angle = f64::INFINITY;
    for f in 0..mesh.faces.len() {
        let p = mesh.triangle(f);
        for k in 0..3 {
            let u = sub(p[(k + 1) % 3], p[k]);
            let v = sub(p[(k + 2) % 3], p[k]);
            let angle = norm(cross(u, v)).atan2(dot(u, v));
            min_angle = min_angle.min(angle);
        }
    }
    if mesh.faces.is_empty() {
        min_angle = 0.0;
    }

    ValidationReport {
        is_manifold: non_manifold == 0,
        is_oriented: oriented,
        boundary_edge_count: boundary,
        non_manifold_edge_count: non_manifold,
        edge_count: uses.len(),
        connected_components: mesh.connected_components(),
        degenerate_faces,
        min_angle,
    }
}

/// Multiplies all coordinates by `k`; connectivity is unchanged.
pub fn scale(mesh: &TriMesh, k: f64) -> Result<TriMesh> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::NonPositive {
            name: "scale factor",
            value: k,
        });
    }
    Ok(TriMesh {
        vertices: mesh.vertices.iter().map(|p| [p[0] * k, p[1] * k, p[2] * k]).collect(),
        faces: mesh.faces.clone(),
    })
}

pub(crate) fn undirected(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
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

pub(crate) fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])]
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }

    pub(crate) fn count(&mut self) -> usize {
        (0..self.parent.len()).filter(|&i| self.find(i) == i).count()
    }
}
