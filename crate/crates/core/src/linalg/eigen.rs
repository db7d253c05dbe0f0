use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fem::{Laplacian, MassMatrix};
use crate::mesh::UnionFind;

/// Vertex count above which the dense eigensolver refuses to run.
pub const DENSE_LIMIT: usize = 4000;

/// Lowest generalized eigenpairs of `(L, M)`, ascending, with M-orthonormal
/// eigenvectors stored column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    n: usize,
    eigenvalues: Vec<f64>,
    vectors: Vec<f64>,
}

impl Spectrum {
    /// Assembles a spectrum from parts; `vectors` is `n × k` column-major.
    pub fn from_parts(eigenvalues: Vec<f64>, vectors: Vec<f64>, n: usize) -> Result<Self> {
        let k = eigenvalues.len();
        if vectors.len() != n * k {
            return Err(Error::LengthMismatch {
                what: "eigenvector storage",
                expected: n * k,
                found: vectors.len(),
            });
        }
        if eigenvalues.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidInput("eigenvalues must be ascending".into()));
        }
        Ok(Self {
            n,
            eigenvalues,
            vectors,
        })
    }

    /// Number of vertices.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of retained modes.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvector of the mode at zero-based position `j`.
    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.n..(j + 1) * self.n]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.vectors.chunks_exact(self.n.max(1)).take(self.len())
    }

    /// Keeps the first `k` modes.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.min(self.len());
        Self {
            n: self.n,
            eigenvalues: self.eigenvalues[..k].to_vec(),
            vectors: self.vectors[..k * self.n].to_vec(),
        }
    }

    /// `index,eigenvalue` rows, index 1-based.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "index,eigenvalue")?;
        for (i, l) in self.eigenvalues.iter().enumerate() {
            writeln!(out, "{},{}", i + 1, l)?;
        }
        Ok(())
    }
}

/// The `k` smallest generalized eigenpairs `L φ = λ M φ`, by a dense
/// symmetric eigendecomposition of `M^{-1/2} L M^{-1/2}`.
pub fn generalized_eigs(l: &Laplacian, m: &MassMatrix, k: usize) -> Result<Spectrum> {
    let n = l.dim();
    if m.dim() != n {
        return Err(Error::LengthMismatch {
            what: "mass matrix",
            expected: n,
            found: m.dim(),
        });
    }
    if n > DENSE_LIMIT {
        return Err(Error::TooLargeForDense { n, limit: DENSE_LIMIT });
    }
    if k > n {
        return Err(Error::OutOfRange {
            what: "mode count",
            index: k,
            valid: format!("0..={n}"),
        });
    }
    let mut uf = UnionFind::new(n);
    for (r, c, _) in l.matrix().triplets() {
        uf.union(r, c);
    }
    let components = uf.count();
    if components > 1 {
        return Err(Error::Disconnected { components });
    }

    let inv_sqrt: Vec<f64> = m.diag().iter().map(|x| 1.0 / x.sqrt()).collect();
    let mut s = DMatrix::zeros(n, n);
    for (r, c, v) in l.matrix().triplets() {
        s[(r, c)] = v * inv_sqrt[r] * inv_sqrt[c];
    }
    // exact symmetry for the symmetric solver
    let s = (&s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut eigenvalues = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(n * k);
    for &j in &order[..k] {
        eigenvalues.push(eig.eigenvalues[j].max(0.0));
        let col = eig.eigenvectors.column(j);
        let mut phi: Vec<f64> = col.iter().zip(&inv_sqrt).map(|(u, d)| u * d).collect();
        let pivot = phi
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > phi[best].abs() { i } else { best });
        if phi[pivot] < 0.0 {
            phi.iter_mut().for_each(|x| *x = -*x);
        }
        vectors.extend(phi);
    }
    Ok(Spectrum {
        n,
        eigenvalues,
        vectors,
    })
}
