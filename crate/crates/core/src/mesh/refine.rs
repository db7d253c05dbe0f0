use std::collections::HashMap;

use super::{midpoint, undirected, TriMesh};
use crate::error::{Error, Result};

/// 1→4 split of every face at its edge midpoints.
///
/// Original vertices keep their indices; the midpoint of the `e`-th edge of
/// [`TriMesh::edges`] gets index `V + e`. The result has `V + E` vertices and
/// `4F` faces and lies exactly on the input surface.
pub fn subdivide_midpoint(mesh: &TriMesh) -> TriMesh {
    let edges = mesh.edges();
    let n = mesh.vertex_count();
    let mut vertices = mesh.vertices.clone();
    vertices.reserve(edges.len());
    let mut mid_of: HashMap<[usize; 2], usize> = HashMap::with_capacity(edges.len());
    for (e, &[a, b]) in edges.iter().enumerate() {
        vertices.push(midpoint(mesh.vertices[a], mesh.vertices[b]));
        mid_of.insert([a, b], n + e);
    }

    let mut faces = Vec::with_capacity(4 * mesh.face_count());
    for &[a, b, c] in &mesh.faces {
        let ab = mid_of[&undirected(a, b)];
        let bc = mid_of[&undirected(b, c)];
        let ca = mid_of[&undirected(c, a)];
        faces.push([a, ab, ca]);
        faces.push([ab, b, bc]);
        faces.push([ca, bc, c]);
        faces.push([ab, bc, ca]);
    }
    TriMesh { vertices, faces }
}

/// Splits the given edges one at a time at their midpoints.
///
/// Each split inserts one vertex and cuts the one or two incident triangles
/// in two, keeping the triangulation conforming. Every listed edge must be an
/// edge of the input mesh; duplicates are ignored. Edges of the input that are
/// not split survive unchanged, so the order of `edges` only affects face
/// numbering.
pub fn bisect_edges(mesh: &TriMesh, edges: &[[usize; 2]]) -> Result<TriMesh> {
    let mut vertices = mesh.vertices.clone();
    let mut faces = mesh.faces.clone();
    let mut incident = mesh.edge_faces();

    let mut requested: Vec<[usize; 2]> = Vec::with_capacity(edges.len());
    for &[a, b] in edges {
        let e = undirected(a, b);
        if !requested.contains(&e) {
            requested.push(e);
        }
    }
    for &[a, b] in &requested {
        if !incident.contains_key(&[a, b]) {
            return Err(Error::UnknownEdge(a, b));
        }
    }

    for [a, b] in requested {
        let owners = incident.remove(&[a, b]).ok_or(Error::UnknownEdge(a, b))?;
        let m = vertices.len();
        vertices.push(midpoint(vertices[a], vertices[b]));

        for f in owners {
            // rotate so the split edge is (x, y) in face order, apex c
            let face = faces[f];
            let k = (0..3)
                .find(|&k| undirected(face[k], face[(k + 1) % 3]) == [a, b])
                .expect("incidence map out of sync with faces");
            let (x, y, c) = (face[k], face[(k + 1) % 3], face[(k + 2) % 3]);

            let g = faces.len();
            faces[f] = [x, m, c];
            faces.push([m, y, c]);

            if let Some(list) = incident.get_mut(&undirected(y, c)) {
                for owner in list.iter_mut() {
                    if *owner == f {
                        *owner = g;
                    }
                }
            }
            incident.entry(undirected(x, m)).or_default().push(f);
            incident.entry(undirected(m, y)).or_default().push(g);
            incident.entry(undirected(m, c)).or_default().extend([f, g]);
        }
    }
    Ok(TriMesh { vertices, faces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{cross, dot, icosahedron, icosphere, norm, sub, unit_square, Point};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn euler(m: &TriMesh) -> i64 {
        m.vertex_count() as i64 - m.edges().len() as i64 + m.face_count() as i64
    }

    /// Distance from `p` to triangle `t`, brute force over the face plane,
    /// edges and corners.
    fn point_triangle_distance(p: Point, t: [Point; 3]) -> f64 {
        let n = cross(sub(t[1], t[0]), sub(t[2], t[0]));
        let nn = dot(n, n);
        let d = dot(sub(p, t[0]), n) / nn;
        let q = [p[0] - d * n[0], p[1] - d * n[1], p[2] - d * n[2]];
        let inside = (0..3).all(|k| {
            let e = sub(t[(k + 1) % 3], t[k]);
            dot(cross(e, sub(q, t[k])), n) >= -1e-15 * nn
        });
        if inside {
            return norm(sub(p, q));
        }
        (0..3)
            .map(|k| {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let ab = sub(b, a);
                let s = (dot(sub(p, a), ab) / dot(ab, ab)).clamp(0.0, 1.0);
                norm(sub(p, [a[0] + s * ab[0], a[1] + s * ab[1], a[2] + s * ab[2]]))
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn assert_same_surface(original: &TriMesh, refined: &TriMesh) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tol = 1e-12 * original.bbox_diagonal();
        for _ in 0..1000 {
            let f = rng.random_range(0..original.face_count());
            let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            let [a, b, c] = original.triangle(f);
            let p = [0, 1, 2].map(|k| a[k] + u * (b[k] - a[k]) + v * (c[k] - a[k]));
            let d = (0..refined.face_count())
                .map(|g| point_triangle_distance(p, refined.triangle(g)))
                .fold(f64::INFINITY, f64::min);
            assert!(d < tol, "sample point {p:?} is {d:e} from refined surface");
        }
        assert!((refined.total_area() - original.total_area()).abs() < 1e-12 * original.total_area());
    }

    #[test]
    fn subdivide_counts() {
        let tri = TriMesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        let s = subdivide_midpoint(&tri);
        assert_eq!((s.vertex_count(), s.face_count()), (6, 4));

        let ico = icosahedron();
        assert_eq!(euler(&ico), 2);
        let s = subdivide_midpoint(&ico);
        assert_eq!((s.vertex_count(), s.face_count()), (42, 80));
        assert_eq!(euler(&s), 2);

        let sq = unit_square();
        assert_eq!((sq.vertex_count(), sq.edges().len(), sq.face_count()), (4, 5, 2));
        let s = subdivide_midpoint(&sq);
        assert_eq!((s.vertex_count(), s.face_count()), (9, 8));
    }

    #[test]
    fn subdivide_preserves_surface_and_orientation() {
        let m = icosphere(1);
        let s = subdivide_midpoint(&m);
        assert_eq!(s.vertex_count(), m.vertex_count() + m.edges().len());
        assert_eq!(s.face_count(), 4 * m.face_count());
        let r = s.validate();
        assert!(r.is_manifold && r.is_oriented && r.boundary_edge_count == 0);
        assert_same_surface(&m, &s);
    }

    #[test]
    fn bisect_empty_is_identity() {
        let m = icosahedron();
        assert_eq!(bisect_edges(&m, &[]).unwrap(), m);
    }

    #[test]
    fn bisect_interior_edge() {
        let m = unit_square();
        let b = bisect_edges(&m, &[[0, 2]]).unwrap();
        assert_eq!((b.vertex_count(), b.face_count()), (5, 4));
        assert_eq!(b.vertices()[4], [0.5, 0.5, 0.0]);
        assert!(b.validate().is_oriented);
        assert_same_surface(&m, &b);
    }

    #[test]
    fn bisect_boundary_edge_of_triangle() {
        let tri = TriMesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        let b = bisect_edges(&tri, &[[1, 0]]).unwrap();
        assert_eq!((b.vertex_count(), b.face_count()), (4, 2));
        assert_eq!(b.faces(), &[[0, 3, 2], [3, 1, 2]]);
    }

    #[test]
    fn bisect_unknown_edge() {
        let m = unit_square();
        assert!(matches!(bisect_edges(&m, &[[1, 3]]), Err(Error::UnknownEdge(1, 3))));
        assert!(matches!(bisect_edges(&m, &[[0, 9]]), Err(Error::UnknownEdge(0, 9))));
    }

    #[test]
    fn bisect_many_edges_stays_conforming() {
        let m = icosphere(1);
        let chosen: Vec<[usize; 2]> = m
            .edges()
            .into_iter()
            .filter(|&[a, b]| m.vertices()[a][2] + m.vertices()[b][2] > 0.0)
            .collect();
        let b = bisect_edges(&m, &chosen).unwrap();
        assert_eq!(b.vertex_count(), m.vertex_count() + chosen.len());
        let r = b.validate();
        assert!(r.is_manifold && r.is_oriented);
        assert_eq!(r.boundary_edge_count, 0);
        assert_eq!(euler(&b), 2);
        assert!(r.degenerate_faces.is_empty());
        assert_same_surface(&m, &b);
    }
}
