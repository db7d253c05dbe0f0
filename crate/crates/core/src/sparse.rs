//! Square sparse matrices in compressed-row form.

use nalgebra::DMatrix;

/// Square CSR matrix with sorted, unique column indices per row. Explicit
/// zeros are kept so the sparsity pattern reflects mesh connectivity.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Assembles from (row, col, value) triplets, summing duplicates.
    ///
    /// # Panics
    /// If an index is `>= n`.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        assert!(
            triplets.iter().all(|&(r, c, _)| r < n && c < n),
            "triplet index out of range"
        );
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self {
            n: d.len(),
            row_ptr: (0..=d.len()).collect(),
            col_idx: (0..d.len()).collect(),
            values: d.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map(|k| vals[k]).unwrap_or(0.0)
    }

    /// Iterates stored entries row by row, columns ascending.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "dimension mismatch in mul_vec");
        (0..self.n)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.n, self.triplets().map(|(r, c, v)| (c, r, v)).collect())
    }

    /// Largest `|A_ij - A_ji|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `A + diag(d)`, inserting diagonal entries where the pattern lacks them.
    pub fn add_diagonal(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.n, "dimension mismatch in add_diagonal");
        let mut t: Vec<_> = self.triplets().collect();
        t.extend(d.iter().enumerate().map(|(i, &v)| (i, i, v)));
        Self::from_triplets(self.n, t)
    }

    /// Off-diagonal adjacency lists of the pattern (symmetrized).
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for (r, c, _) in self.triplets() {
            if r != c {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }
}
