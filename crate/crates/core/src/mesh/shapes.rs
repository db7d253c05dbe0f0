//! Built-in test surfaces.

use super::{subdivide_midpoint, TriMesh};

/// Regular icosahedron inscribed in the unit sphere, faces oriented outward.
pub fn icosahedron() -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let vertices = raw.iter().map(|&p| normalized(p)).collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    TriMesh { vertices, faces }
}

/// Unit icosphere: `level` rounds of midpoint subdivision of the icosahedron,
/// each followed by projection onto the sphere. Level 3 has 642 vertices.
pub fn icosphere(level: u32) -> TriMesh {
    let mut mesh = icosahedron();
    for _ in 0..level {
        mesh = subdivide_midpoint(&mesh);
        for p in &mut mesh.vertices {
            *p = normalized(*p);
        }
    }
    mesh
}

/// The unit square as two triangles split along (0,0)-(1,1), vertices in the
/// order (0,0), (1,0), (1,1), (0,1).
pub fn unit_square() -> TriMesh {
    TriMesh {
        vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
        faces: vec![[0, 1, 2], [0, 2, 3]],
    }
}

/// Regular `nx × ny` grid over the unit square in the z = 0 plane, each cell
/// split along its (i, j)-(i+1, j+1) diagonal. Vertices are row-major in x.
///
/// # Panics
/// If `nx` or `ny` is zero.
pub fn grid(nx: usize, ny: usize) -> TriMesh {
    assert!(nx > 0 && ny > 0, "grid needs at least one cell per side");
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([i as f64 / nx as f64, j as f64 / ny as f64, 0.0]);
        }
    }
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriMesh { vertices, faces }
}

fn normalized(p: [f64; 3]) -> [f64; 3] {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / r, p[1] / r, p[2] / r]
}
