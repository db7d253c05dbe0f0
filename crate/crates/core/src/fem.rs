//! Linear finite-element operators on a triangle mesh: the barycentric lumped
//! mass matrix, the cotangent stiffness matrix, the screened operator
//! `L + τM`, and the spectral normalization factor Γ.
//!
//! `L` is assembled positive semidefinite (negative off-diagonals), i.e. as
//! the stiffness matrix `∫ ∇φ_i · ∇φ_j`, so generalized eigenvalues are
//! non-negative and `L + τM` is positive definite for every `τ > 0`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::mesh::{cross, dot, norm, sub, TriMesh};
use crate::sparse::SparseMatrix;

/// Screening term used when none is given.
pub const DEFAULT_TAU: f64 = 100.0;

/// Diagonal lumped mass matrix; entries are vertex areas.
#[derive(Clone, Debug, PartialEq)]
pub struct MassMatrix {
    diag: Vec<f64>,
}

impl MassMatrix {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if let Some(vertex) = diag.iter().position(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::ZeroMass { vertex });
        }
        Ok(Self { diag })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn total(&self) -> f64 {
        self.diag.iter().sum()
    }

    /// Entrywise square root, the `√M` of the sampling right-hand side.
    pub fn sqrt_diag(&self) -> Vec<f64> {
        self.diag.iter().map(|m| m.sqrt()).collect()
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.diag.iter().zip(f).map(|(m, x)| m * x).collect()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "index,mass")?;
        for (i, m) in self.diag.iter().enumerate() {
            writeln!(out, "{i},{m}")?;
        }
        Ok(())
    }
}

/// Symmetric positive semidefinite cotangent Laplacian.
#[derive(Clone, Debug, PartialEq)]
pub struct Laplacian {
    matrix: SparseMatrix,
}

impl Laplacian {
    /// Wraps an assembled matrix. The caller vouches for symmetry and
    /// semidefiniteness.
    pub fn from_matrix(matrix: SparseMatrix) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(f)
    }

    /// Coordinate triplets sorted by row then column.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "row,col,value")?;
        for (r, c, v) in self.matrix.triplets() {
            writeln!(out, "{r},{c},{v}")?;
        }
        Ok(())
    }
}

/// `L + τM`, symmetric positive definite for `τ > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScreenedOperator {
    matrix: SparseMatrix,
    tau: f64,
}

impl ScreenedOperator {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// How the screening term is chosen.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Screening {
    /// Fixed `τ`.
    Tau(f64),
    /// `τ = c·Γ`, output multiplied by `√Γ`.
    Normalized(f64),
}

impl Screening {
    pub fn validate(self) -> Result<Self> {
        let (name, value) = match self {
            Screening::Tau(t) => ("tau", t),
            Screening::Normalized(c) => ("c", c),
        };
        if value > 0.0 && value.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonPositive { name, value })
        }
    }
}

impl Default for Screening {
    fn default() -> Self {
        Screening::Tau(DEFAULT_TAU)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct NoiseParams {
    pub screening: Screening,
    pub seed: u64,
}

fn check_faces(mesh: &TriMesh) -> Result<()> {
    let threshold = mesh.degenerate_area_threshold();
    for f in 0..mesh.face_count() {
        let area = mesh.face_area(f);
        if !(area >= threshold) || area == 0.0 {
            return Err(Error::DegenerateFace { face: f, area });
        }
    }
    Ok(())
}

/// Barycentric lumping: each vertex receives a third of the area of every
/// incident face.
pub fn lumped_mass(mesh: &TriMesh) -> Result<MassMatrix> {
    check_faces(mesh)?;
    let mut diag = vec![0.0; mesh.vertex_count()];
    for (fi, face) in mesh.faces().iter().enumerate() {
        let third = mesh.face_area(fi) / 3.0;
        for &v in face {
            diag[v] += third;
        }
    }
    MassMatrix::new(diag)
}

/// Cotangent stiffness matrix: `L_ij = -½(cot α_ij + cot β_ij)` for each edge
/// (one term on boundary edges), `L_ii = -Σ_j L_ij`. Obtuse angles give
/// negative weights, which are kept.
pub fn cotan_laplacian(mesh: &TriMesh) -> Result<Laplacian> {
    check_faces(mesh)?;
    let mut triplets = Vec::with_capacity(12 * mesh.face_count());
    for fi in 0..mesh.face_count() {
        let face = mesh.faces()[fi];
        let p = mesh.triangle(fi);
        for k in 0..3 {
            // angle at corner k is opposite edge (k+1, k+2)
            let u = sub(p[(k + 1) % 3], p[k]);
            let v = sub(p[(k + 2) % 3], p[k]);
            let w = 0.5 * dot(u, v) / norm(cross(u, v));
            let (i, j) = (face[(k + 1) % 3], face[(k + 2) % 3]);
            triplets.push((i, j, -w));
            triplets.push((j, i, -w));
            triplets.push((i, i, w));
            triplets.push((j, j, w));
        }
    }
    Ok(Laplacian {
        matrix: SparseMatrix::from_triplets(mesh.vertex_count(), triplets),
    })
}

pub fn screened_operator(l: &Laplacian, m: &MassMatrix, tau: f64) -> Result<ScreenedOperator> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::NonPositive {
            name: "tau",
            value: tau,
        });
    }
    if l.dim() != m.dim() {
        return Err(Error::LengthMismatch {
            what: "mass matrix",
            expected: l.dim(),
            found: m.dim(),
        });
    }
    let shift: Vec<f64> = m.diag().iter().map(|mi| tau * mi).collect();
    Ok(ScreenedOperator {
        matrix: l.matrix().add_diagonal(&shift),
        tau,
    })
}

/// Γ, the Frobenius norm of the symmetrized operator `M^{-1/2} L M^{-1/2}`,
/// evaluated entrywise. Its square equals the sum of squared generalized
/// eigenvalues of `(L, M)`.
pub fn normalization_gamma(l: &Laplacian, m: &MassMatrix) -> Result<f64> {
    if l.dim() != m.dim() {
        return Err(Error::LengthMismatch {
            what: "mass matrix",
            expected: l.dim(),
            found: m.dim(),
        });
    }
    let d = m.diag();
    if let Some(vertex) = d.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::ZeroMass { vertex });
    }
    let sum: f64 = l.matrix().triplets().map(|(r, c, v)| v * v / (d[r] * d[c])).sum();
    Ok(sum.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{icosphere, unit_square};
    use nalgebra::SymmetricEigen;

    fn equilateral() -> TriMesh {
        TriMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 3f64.sqrt() / 2.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn unit_square_mass() {
        let m = lumped_mass(&unit_square()).unwrap();
        let expected = [1.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0, 1.0 / 6.0];
        for (a, b) in m.diag().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((m.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unit_square_cotan_weights() {
        let l = cotan_laplacian(&unit_square()).unwrap();
        let a = l.matrix();
        assert!(a.get(0, 2).abs() < 1e-15, "diagonal edge has two right angles");
        for (i, j) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
            assert!((a.get(i, j) + 0.5).abs() < 1e-15, "boundary edge ({i},{j})");
        }
        assert!((a.get(0, 0) - 1.0).abs() < 1e-15);
        // the diagonal edge stays in the pattern
        assert_eq!(a.nnz(), 4 + 2 * 5);
    }

    #[test]
    fn equilateral_weights() {
        let l = cotan_laplacian(&equilateral()).unwrap();
        let expected = 1.0 / (2.0 * 3f64.sqrt());
        for (r, c, v) in l.matrix().triplets() {
            if r != c {
                assert!((v + expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mass_sums_to_area_and_scales() {
        let mesh = icosphere(2);
        let m = lumped_mass(&mesh).unwrap();
        assert!((m.total() - mesh.total_area()).abs() < 1e-10 * mesh.total_area());
        for k in [0.1, 2.0, 10.0] {
            let mk = lumped_mass(&mesh.scale(k).unwrap()).unwrap();
            for (a, b) in mk.diag().iter().zip(m.diag()) {
                assert!((a - k * k * b).abs() <= 1e-12 * k * k * b);
            }
        }
    }

    #[test]
    fn laplacian_rows_sum_to_zero_and_symmetric() {
        for mesh in [icosphere(2), crate::mesh::grid(5, 7)] {
            let l = cotan_laplacian(&mesh).unwrap();
            let ones = vec![1.0; mesh.vertex_count()];
            let r = l.apply(&ones);
            let tol = 1e-10 * l.matrix().max_abs() * mesh.vertex_count() as f64;
            assert!(r.iter().all(|x| x.abs() < tol));
            assert_eq!(l.matrix().asymmetry(), 0.0);
        }
    }

    #[test]
    fn laplacian_is_scale_invariant() {
        let mesh = icosphere(2);
        let l = cotan_laplacian(&mesh).unwrap();
        // power-of-two scaling is exact in floating point
        assert_eq!(cotan_laplacian(&mesh.scale(2.0).unwrap()).unwrap(), l);
        for k in [0.1, 10.0] {
            let lk = cotan_laplacian(&mesh.scale(k).unwrap()).unwrap();
            for ((_, _, a), (_, _, b)) in lk.matrix().triplets().zip(l.matrix().triplets()) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-3));
            }
        }
    }

    #[test]
    fn laplacian_is_psd_with_obtuse_triangles() {
        // bisected mesh has obtuse angles, so some cotangent weights are negative
        let mesh = icosphere(1);
        let edges: Vec<_> = mesh.edges().into_iter().step_by(3).collect();
        let mesh = crate::mesh::bisect_edges(&mesh, &edges).unwrap();
        let l = cotan_laplacian(&mesh).unwrap();
        assert!(l.matrix().triplets().any(|(r, c, v)| r != c && v > 0.0));
        let eig = SymmetricEigen::new(l.matrix().to_dense()).eigenvalues;
        let max = eig.max();
        assert!(eig.min() >= -1e-9 * max);
    }

    #[test]
    fn degenerate_face_is_an_error() {
        let mesh = TriMesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(lumped_mass(&mesh), Err(Error::DegenerateFace { face: 0, .. })));
        assert!(matches!(
            cotan_laplacian(&mesh),
            Err(Error::DegenerateFace { face: 0, .. })
        ));
    }

    #[test]
    fn unreferenced_vertex_has_zero_mass() {
        let mesh = TriMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [9.0, 9.0, 9.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(lumped_mass(&mesh), Err(Error::ZeroMass { vertex: 3 })));
    }

    #[test]
    fn screened_operator_on_constants() {
        let mesh = equilateral();
        let l = cotan_laplacian(&mesh).unwrap();
        let m = lumped_mass(&mesh).unwrap();
        let tau = 100.0;
        let a = screened_operator(&l, &m, tau).unwrap();
        let y = a.matrix().mul_vec(&[1.0; 3]);
        for (yi, mi) in y.iter().zip(m.diag()) {
            assert!((yi - tau * mi).abs() < 1e-12);
        }
        assert_eq!(a.matrix().asymmetry(), 0.0);
        assert_eq!(a.matrix().nnz(), l.matrix().nnz());

        // equal vertex masses A/3: the constant vector is the bottom
        // eigenvector of L + τM with eigenvalue τA/3
        let eig = SymmetricEigen::new(a.matrix().to_dense());
        let (k, lo) = eig.eigenvalues.argmin();
        assert!((lo - tau * m.total() / 3.0).abs() < 1e-10);
        let v = eig.eigenvectors.column(k);
        assert!((v[0] - v[1]).abs() < 1e-12 && (v[1] - v[2]).abs() < 1e-12);
    }

    #[test]
    fn screened_operator_rejects_bad_tau() {
        let mesh = equilateral();
        let l = cotan_laplacian(&mesh).unwrap();
        let m = lumped_mass(&mesh).unwrap();
        for tau in [0.0, -1.0, f64::NAN] {
            assert!(matches!(screened_operator(&l, &m, tau), Err(Error::NonPositive { .. })));
        }
    }

    #[test]
    fn gamma_with_identity_mass_is_frobenius() {
        let mesh = icosphere(1);
        let l = cotan_laplacian(&mesh).unwrap();
        let ident = MassMatrix::new(vec![1.0; mesh.vertex_count()]).unwrap();
        let frob = l.matrix().values().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((normalization_gamma(&l, &ident).unwrap() - frob).abs() < 1e-13 * frob);
    }

    #[test]
    fn gamma_scales_inverse_square() {
        let mesh = icosphere(2);
        let g = |m: &TriMesh| normalization_gamma(&cotan_laplacian(m).unwrap(), &lumped_mass(m).unwrap()).unwrap();
        let g1 = g(&mesh);
        for k in [0.1, 2.0, 10.0] {
            let gk = g(&mesh.scale(k).unwrap());
            assert!((gk - g1 / (k * k)).abs() <= 1e-12 * gk);
        }
    }

    /// Γ² against Σλ² from the dense generalized eigensolver.
    fn assert_gamma_matches_eigen_sum(mesh: &TriMesh) {
        let l = cotan_laplacian(mesh).unwrap();
        let m = lumped_mass(mesh).unwrap();
        let spectrum = crate::linalg::generalized_eigs(&l, &m, mesh.vertex_count()).unwrap();
        let sum_sq: f64 = spectrum.eigenvalues().iter().map(|x| x * x).sum();
        let gamma = normalization_gamma(&l, &m).unwrap();
        assert!(
            (gamma * gamma - sum_sq).abs() < 1e-8 * sum_sq,
            "{} vs {}",
            gamma * gamma,
            sum_sq
        );
    }

    #[test]
    fn gamma_squared_is_eigenvalue_power_sum() {
        assert_gamma_matches_eigen_sum(&unit_square());
        assert_gamma_matches_eigen_sum(&icosphere(2));
        assert_gamma_matches_eigen_sum(&crate::mesh::grid(6, 4));
    }

    #[test]
    fn csv_dumps() {
        let mesh = unit_square();
        let mut buf = Vec::new();
        cotan_laplacian(&mesh).unwrap().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<(usize, usize)> = text
            .lines()
            .skip(1)
            .map(|l| {
                let mut it = l.split(',');
                (it.next().unwrap().parse().unwrap(), it.next().unwrap().parse().unwrap())
            })
            .collect();
        let mut sorted = rows.clone();
        sorted.sort();
        assert_eq!(rows, sorted);
        assert_eq!(rows.len(), 14);

        let mut buf = Vec::new();
        lumped_mass(&mesh).unwrap().write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("index,mass\n0,0.333"));
    }
}
