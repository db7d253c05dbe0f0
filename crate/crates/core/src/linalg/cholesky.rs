//! Sparse Cholesky factorization `P A Pᵀ = L Lᵀ` for symmetric positive
//! definite matrices.
//!
//! The ordering is a greedy minimum-degree elimination on the explicit
//! graph. Symbolic analysis (elimination tree, row patterns via `ereach`) and
//! the up-looking numeric kernel follow the classic CSparse formulation.

use std::cell::Cell;
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::fem::ScreenedOperator;
use crate::sparse::SparseMatrix;

const NONE: usize = usize::MAX;

thread_local! {
    static FACTORIZATIONS: Cell<u64> = const { Cell::new(0) };
}

/// Numeric factorizations performed on the calling thread so far.
pub fn factorization_count() -> u64 {
    FACTORIZATIONS.with(Cell::get)
}

/// Prefactorized SPD matrix. Immutable after construction; `solve` takes
/// `&self` and may be called from many threads at once.
#[derive(Debug)]
pub struct SpdFactor {
    n: usize,
    /// `perm[k]` is the original index eliminated at step `k`.
    perm: Vec<usize>,
    /// Column pointers of `L` (CSC, diagonal entry first in each column).
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    solves: AtomicU64,
}

pub fn factorize(op: &ScreenedOperator) -> Result<SpdFactor> {
    SpdFactor::new(op.matrix())
}

impl SpdFactor {
    /// Factorizes a symmetric positive definite matrix. Only the pattern's
    /// symmetric part is used; values are read from the upper triangle of
    /// the permuted matrix.
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        let n = a.dim();
        let perm = minimum_degree(&a.adjacency());
        let (cols, parent, col_ptr) = symbolic(a, &perm);
        let mut stack = vec![0usize; n];
        let mut mark = vec![NONE; n];
        let nnz = col_ptr[n];
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];

        // up-looking numeric factorization, one row of L per step
        let mut next: Vec<usize> = col_ptr[..n].to_vec();
        let mut x = vec![0.0; n];
        for k in 0..n {
            let top = ereach(&cols[k], k, &parent, &mut stack, &mut mark);
            for &(i, v) in &cols[k] {
                x[i] += v;
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / values[col_ptr[i]];
                x[i] = 0.0;
                for p in col_ptr[i] + 1..next[i] {
                    x[row_idx[p]] -= values[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                row_idx[p] = k;
                values[p] = lki;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    pivot: perm[k],
                    value: d,
                });
            }
            let p = next[k];
            next[k] += 1;
            row_idx[p] = k;
            values[p] = d.sqrt();
        }

        FACTORIZATIONS.with(|c| c.set(c.get() + 1));
        Ok(Self {
            n,
            perm,
            col_ptr,
            row_idx,
            values,
            solves: AtomicU64::new(0),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Nonzeros in the triangular factor, diagonal included.
    pub fn factor_nnz(&self) -> usize {
        self.values.len()
    }

    /// Number of solves performed against this factor.
    pub fn solve_count(&self) -> u64 {
        self.solves.load(Ordering::Relaxed)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut work = vec![0.0; self.n];
        let mut out = vec![0.0; self.n];
        self.solve_with(rhs, &mut work, &mut out)?;
        Ok(out)
    }

    /// Solves `A x = rhs` into `out`, using `work` (length n) as scratch.
    pub fn solve_with(&self, rhs: &[f64], work: &mut [f64], out: &mut [f64]) -> Result<()> {
        for (what, len) in [
            ("right-hand side", rhs.len()),
            ("workspace", work.len()),
            ("output", out.len()),
        ] {
            if len != self.n {
                return Err(Error::LengthMismatch {
                    what,
                    expected: self.n,
                    found: len,
                });
            }
        }
        for (k, &p) in self.perm.iter().enumerate() {
            work[k] = rhs[p];
        }
        // L y = b
        for j in 0..self.n {
            let start = self.col_ptr[j];
            work[j] /= self.values[start];
            let yj = work[j];
            for p in start + 1..self.col_ptr[j + 1] {
                work[self.row_idx[p]] -= self.values[p] * yj;
            }
        }
        // Lᵀ x = y
        for j in (0..self.n).rev() {
            let start = self.col_ptr[j];
            let mut s = work[j];
            for p in start + 1..self.col_ptr[j + 1] {
                s -= self.values[p] * work[self.row_idx[p]];
            }
            work[j] = s / self.values[start];
        }
        for (k, &p) in self.perm.iter().enumerate() {
            out[p] = work[k];
        }
        self.solves.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }
}

type Columns = Vec<Vec<(usize, f64)>>;

/// Upper triangle of `P A Pᵀ` by column, its elimination tree, and the
/// column pointers of the factor.
fn symbolic(a: &SparseMatrix, perm: &[usize]) -> (Columns, Vec<usize>, Vec<usize>) {
    let n = a.dim();
    let mut pinv = vec![0; n];
    for (k, &p) in perm.iter().enumerate() {
        pinv[p] = k;
    }
    let mut cols: Columns = vec![Vec::new(); n];
    for (r, c, v) in a.triplets() {
        let (pr, pc) = (pinv[r], pinv[c]);
        if pr <= pc {
            cols[pc].push((pr, v));
        }
    }
    let parent = etree(&cols);
    let mut counts = vec![1usize; n];
    let mut stack = vec![0usize; n];
    let mut mark = vec![NONE; n];
    for (k, col) in cols.iter().enumerate() {
        let top = ereach(col, k, &parent, &mut stack, &mut mark);
        for &i in &stack[top..] {
            counts[i] += 1;
        }
    }
    let mut col_ptr = vec![0usize; n + 1];
    for j in 0..n {
        col_ptr[j + 1] = col_ptr[j] + counts[j];
    }
    (cols, parent, col_ptr)
}

/// Elimination tree of a matrix given by the upper-triangular entries of
/// each column.
fn etree(cols: &[Vec<(usize, f64)>]) -> Vec<usize> {
    let n = cols.len();
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for (k, col) in cols.iter().enumerate() {
        for &(row, _) in col {
            let mut i = row;
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

/// Pattern of row `k` of the factor (off-diagonal), written to
/// `stack[top..]` in topological order. Returns `top`.
fn ereach(col: &[(usize, f64)], k: usize, parent: &[usize], stack: &mut [usize], mark: &mut [usize]) -> usize {
    let n = stack.len();
    let mut top = n;
    mark[k] = k;
    for &(row, _) in col {
        if row > k {
            continue;
        }
        let mut i = row;
        let mut len = 0;
        while mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

/// Greedy minimum-degree ordering on the explicit elimination graph; ties go
/// to the lowest index so the ordering is deterministic.
// TODO: replace with a quotient-graph AMD if meshes well beyond 1e5 vertices
// need factoring; the explicit clique updates get slow there.
fn minimum_degree(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut adj: Vec<Vec<usize>> = adjacency.to_vec();
    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
    let mut order = Vec::with_capacity(n);
    let mut merged = Vec::new();
    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        order.push(v);
        let clique = std::mem::take(&mut adj[v]);
        for &u in &clique {
            merged.clear();
            let (a, b) = (&adj[u], &clique);
            let (mut i, mut j) = (0, 0);
            while i < a.len() || j < b.len() {
                let next = match (a.get(i), b.get(j)) {
                    (Some(&x), Some(&y)) if x == y => {
                        i += 1;
                        j += 1;
                        x
                    }
                    (Some(&x), Some(&y)) if x < y => {
                        i += 1;
                        x
                    }
                    (Some(_), Some(&y)) => {
                        j += 1;
                        y
                    }
                    (Some(&x), None) => {
                        i += 1;
                        x
                    }
                    (None, Some(&y)) => {
                        j += 1;
                        y
                    }
                    (None, None) => unreachable!(),
                };
                if next != u && next != v {
                    merged.push(next);
                }
            }
            std::mem::swap(&mut adj[u], &mut merged);
            heap.push(Reverse((adj[u].len(), u)));
        }
    }
    order
}
