//! Cholesky factorization A = R^T R with multi-right-hand-side solves.
//!
//! Small matrices (n <= `dense_threshold`) are factorized densely. Larger
//! ones go through an up-looking sparse Cholesky with an elimination-tree
//! symbolic phase. An optional reverse Cuthill-McKee reordering reduces fill;
//! by default blocks are factorized in their natural order since the DBBD
//! permutation already localizes fill at desk scale.

use crate::dense::DenseBlock;
use crate::error::FactorError;
use crate::partition::DBBDSystem;
use crate::sparse::{Permutation, SparseMatrix};

/// Which triangular pieces of A = R^T R to apply.
///
/// With the factor stored as L = R^T: `Full` solves A x = b,
/// `ForwardOnly` applies R^{-T} = L^{-1}, `BackwardOnly` applies R^{-1} = L^{-T}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    Full,
    ForwardOnly,
    BackwardOnly,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FillStats {
    pub nnz_matrix: usize,
    pub nnz_factor: usize,
}

#[derive(Debug, Clone)]
pub struct CholeskyOptions {
    /// Below this dimension the factorization is dense.
    pub dense_threshold: usize,
    /// Reverse Cuthill-McKee reordering before the sparse factorization.
    pub rcm: bool,
}

impl Default for CholeskyOptions {
    fn default() -> Self {
        Self { dense_threshold: 512, rcm: false }
    }
}

#[derive(Debug, Clone)]
enum FactorKind {
    /// Dense lower factor L, column-major.
    Dense(DenseBlock),
    /// Sparse lower factor in CSR; each row sorted ascending, diagonal last.
    Sparse { row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64> },
}

/// Cholesky factor of an SPD matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    kind: FactorKind,
    perm: Option<Permutation>,
    pub fill_stats: FillStats,
}

/// Factorizes a symmetric positive definite matrix with default options.
pub fn cholesky_factor(a: &SparseMatrix) -> Result<CholeskyFactor, FactorError> {
    cholesky_factor_with(a, &CholeskyOptions::default())
}

pub fn cholesky_factor_with(
    a: &SparseMatrix,
    opts: &CholeskyOptions,
) -> Result<CholeskyFactor, FactorError> {
    let n = a.n();
    if n <= opts.dense_threshold {
        let l = dense_cholesky(&a.to_dense())?;
        let nnz_factor = n * (n + 1) / 2;
        return Ok(CholeskyFactor {
            n,
            kind: FactorKind::Dense(l),
            perm: None,
            fill_stats: FillStats { nnz_matrix: a.nnz(), nnz_factor },
        });
    }
    let (work, perm) = if opts.rcm {
        let p = reverse_cuthill_mckee(a);
        (a.permute_symmetric(&p)?, Some(p))
    } else {
        (a.clone(), None)
    };
    let (row_ptr, col_idx, values) = sparse_up_looking(&work)?;
    let nnz_factor = col_idx.len();
    Ok(CholeskyFactor {
        n,
        kind: FactorKind::Sparse { row_ptr, col_idx, values },
        perm,
        fill_stats: FillStats { nnz_matrix: a.nnz(), nnz_factor },
    })
}

fn dense_cholesky(a: &DenseBlock) -> Result<DenseBlock, FactorError> {
    let n = a.rows;
    let mut l = DenseBlock::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            let ljk = l.get(j, k);
            d -= ljk * ljk;
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(FactorError::NotPositiveDefinite { pivot: j });
        }
        let djj = d.sqrt();
        l.set(j, j, djj);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / djj);
        }
    }
    Ok(l)
}

/// Elimination tree of a symmetric matrix (full storage): parent[k] is the
/// parent of column k, usize::MAX at roots.
fn elimination_tree(a: &SparseMatrix) -> Vec<usize> {
    let n = a.n();
    let mut parent = vec![usize::MAX; n];
    let mut ancestor = vec![usize::MAX; n];
    for k in 0..n {
        let (cols, _) = a.row(k);
        for &j0 in cols.iter().filter(|&&j| j < k) {
            let mut j = j0;
            while j != usize::MAX && j < k {
                let next = ancestor[j];
                ancestor[j] = k;
                if next == usize::MAX {
                    parent[j] = k;
                }
                j = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row i of L: nodes reachable from the below-diagonal
/// entries of row i by climbing the elimination tree. Returned sorted
/// ascending, which is a valid elimination order for the row solve.
fn ereach(
    a: &SparseMatrix,
    i: usize,
    parent: &[usize],
    stamp: &mut [usize],
    out: &mut Vec<usize>,
) {
    out.clear();
    stamp[i] = i;
    let (cols, _) = a.row(i);
    for &j0 in cols.iter().filter(|&&j| j < i) {
        let mut j = j0;
        while stamp[j] != i {
            stamp[j] = i;
            out.push(j);
            j = parent[j];
            if j == usize::MAX {
                break;
            }
        }
    }
    out.sort_unstable();
}

/// Up-looking sparse Cholesky producing L row by row in CSR with the
/// diagonal entry last in each row.
fn sparse_up_looking(
    a: &SparseMatrix,
) -> Result<(Vec<usize>, Vec<usize>, Vec<f64>), FactorError> {
    let n = a.n();
    let parent = elimination_tree(a);
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0usize);
    let mut col_idx: Vec<usize> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut x = vec![0.0f64; n];
    let mut stamp = vec![usize::MAX; n];
    let mut pattern: Vec<usize> = Vec::new();

    for i in 0..n {
        ereach(a, i, &parent, &mut stamp, &mut pattern);
        // scatter row i of A (below-diagonal part and the diagonal)
        let (cols, vals) = a.row(i);
        let mut aii = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if j < i {
                x[j] = v;
            } else if j == i {
                aii = v;
            }
        }
        let mut sum_sq = 0.0;
        for &j in &pattern {
            // x[j] = (x[j] - L(j, :) x) / L(j, j), summing over row j of L
            let (lo, hi) = (row_ptr[j], row_ptr[j + 1]);
            let mut s = x[j];
            for t in lo..hi - 1 {
                s -= values[t] * x[col_idx[t]];
            }
            let ljj = values[hi - 1];
            let xj = s / ljj;
            x[j] = xj;
            sum_sq += xj * xj;
        }
        let d = aii - sum_sq;
        if d <= 0.0 || !d.is_finite() {
            return Err(FactorError::NotPositiveDefinite { pivot: i });
        }
        for &j in &pattern {
            col_idx.push(j);
            values.push(x[j]);
            x[j] = 0.0;
        }
        col_idx.push(i);
        values.push(d.sqrt());
        row_ptr.push(col_idx.len());
        // reset any scattered A entries not in the pattern (none: pattern
        // always contains the below-diagonal entries of row i)
    }
    Ok((row_ptr, col_idx, values))
}

/// Reverse Cuthill-McKee ordering from a BFS rooted at a minimum-degree
/// vertex of each component, neighbors visited in increasing degree order.
pub fn reverse_cuthill_mckee(a: &SparseMatrix) -> Permutation {
    let n = a.n();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&v| (degree[v], v));
    for &s in &starts {
        if visited[s] {
            continue;
        }
        visited[s] = true;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> =
                a.row(v).0.iter().copied().filter(|&w| w != v && !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                if !visited[w] {
                    visited[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    order.reverse();
    Permutation::new(order).expect("RCM produced a non-permutation")
}

impl CholeskyFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves with the requested triangular mode for a block of right-hand
    /// sides. `Full` is exactly `BackwardOnly(ForwardOnly(B))`.
    pub fn solve(&self, b: &DenseBlock, mode: SolveMode) -> Result<DenseBlock, FactorError> {
        if b.rows != self.n {
            return Err(FactorError::DimensionMismatch { expected: self.n, got: b.rows });
        }
        match mode {
            SolveMode::Full => {
                let y = self.solve(b, SolveMode::ForwardOnly)?;
                self.solve(&y, SolveMode::BackwardOnly)
            }
            SolveMode::ForwardOnly => {
                let mut y = match &self.perm {
                    Some(p) => permute_rows(b, p.perm()),
                    None => b.clone(),
                };
                self.forward_in_place(&mut y);
                Ok(y)
            }
            SolveMode::BackwardOnly => {
                let mut y = b.clone();
                self.backward_in_place(&mut y);
                Ok(match &self.perm {
                    Some(p) => permute_rows(&y, p.inverse()),
                    None => y,
                })
            }
        }
    }

    fn forward_in_place(&self, b: &mut DenseBlock) {
        match &self.kind {
            FactorKind::Dense(l) => {
                for c in 0..b.cols {
                    let col = b.col_mut(c);
                    for i in 0..self.n {
                        let mut s = col[i];
                        for k in 0..i {
                            s -= l.get(i, k) * col[k];
                        }
                        col[i] = s / l.get(i, i);
                    }
                }
            }
            FactorKind::Sparse { row_ptr, col_idx, values } => {
                for c in 0..b.cols {
                    let col = b.col_mut(c);
                    for i in 0..self.n {
                        let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
                        let mut s = col[i];
                        for t in lo..hi - 1 {
                            s -= values[t] * col[col_idx[t]];
                        }
                        col[i] = s / values[hi - 1];
                    }
                }
            }
        }
    }

    fn backward_in_place(&self, b: &mut DenseBlock) {
        match &self.kind {
            FactorKind::Dense(l) => {
                for c in 0..b.cols {
                    let col = b.col_mut(c);
                    for i in (0..self.n).rev() {
                        let xi = col[i] / l.get(i, i);
                        col[i] = xi;
                        for k in 0..i {
                            col[k] -= l.get(i, k) * xi;
                        }
                    }
                }
            }
            FactorKind::Sparse { row_ptr, col_idx, values } => {
                for c in 0..b.cols {
                    let col = b.col_mut(c);
                    for i in (0..self.n).rev() {
                        let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
                        let xi = col[i] / values[hi - 1];
                        col[i] = xi;
                        for t in lo..hi - 1 {
                            col[col_idx[t]] -= values[t] * xi;
                        }
                    }
                }
            }
        }
    }

    /// Convenience single-vector full solve.
    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>, FactorError> {
        let x = self.solve(&DenseBlock::from_column(b), SolveMode::Full)?;
        Ok(x.values)
    }
}

fn permute_rows(b: &DenseBlock, map: &[usize]) -> DenseBlock {
    let mut out = DenseBlock::zeros(b.rows, b.cols);
    for c in 0..b.cols {
        let src = b.col(c);
        let dst = out.col_mut(c);
        for (new, &old) in map.iter().enumerate() {
            dst[new] = src[old];
        }
    }
    out
}

/// Independent Cholesky factors of the interior diagonal blocks.
#[derive(Debug, Clone)]
pub struct BlockDiagFactor {
    pub factors: Vec<CholeskyFactor>,
    pub offsets: Vec<usize>,
    n: usize,
}

/// Factorizes every interior block of a DBBD system; a failure reports the
/// offending block id and pivot.
pub fn block_diag_factor(sys: &DBBDSystem) -> Result<BlockDiagFactor, FactorError> {
    block_diag_factor_with(sys, &CholeskyOptions::default())
}

pub fn block_diag_factor_with(
    sys: &DBBDSystem,
    opts: &CholeskyOptions,
) -> Result<BlockDiagFactor, FactorError> {
    let mut factors = Vec::with_capacity(sys.interior_blocks.len());
    for (b, blk) in sys.interior_blocks.iter().enumerate() {
        let f = cholesky_factor_with(blk, opts).map_err(|e| match e {
            FactorError::NotPositiveDefinite { pivot } => {
                FactorError::BlockNotPositiveDefinite { block: b, pivot }
            }
            other => other,
        })?;
        factors.push(f);
    }
    Ok(BlockDiagFactor { factors, offsets: sys.block_offsets.clone(), n: sys.n_interior })
}

impl BlockDiagFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &DenseBlock, mode: SolveMode) -> Result<DenseBlock, FactorError> {
        if b.rows != self.n {
            return Err(FactorError::DimensionMismatch { expected: self.n, got: b.rows });
        }
        let mut out = DenseBlock::zeros(self.n, b.cols);
        for (k, f) in self.factors.iter().enumerate() {
            let (lo, hi) = (self.offsets[k], self.offsets[k + 1]);
            let mut bk = DenseBlock::zeros(hi - lo, b.cols);
            for c in 0..b.cols {
                bk.col_mut(c).copy_from_slice(&b.col(c)[lo..hi]);
            }
            let xk = f.solve(&bk, mode)?;
            for c in 0..b.cols {
                out.col_mut(c)[lo..hi].copy_from_slice(xk.col(c));
            }
        }
        Ok(out)
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>, FactorError> {
        let x = self.solve(&DenseBlock::from_column(b), SolveMode::Full)?;
        Ok(x.values)
    }
}

/// Generic multi-RHS triangular solve over either factor kind.
pub trait TriangularFactor {
    fn dim(&self) -> usize;
    fn tri_solve(&self, b: &DenseBlock, mode: SolveMode) -> Result<DenseBlock, FactorError>;
}

impl TriangularFactor for CholeskyFactor {
    fn dim(&self) -> usize {
        self.n
    }
    fn tri_solve(&self, b: &DenseBlock, mode: SolveMode) -> Result<DenseBlock, FactorError> {
        self.solve(b, mode)
    }
}

impl TriangularFactor for BlockDiagFactor {
    fn dim(&self) -> usize {
        self.n
    }
    fn tri_solve(&self, b: &DenseBlock, mode: SolveMode) -> Result<DenseBlock, FactorError> {
        self.solve(b, mode)
    }
}

/// Free-function form of the multi-RHS triangular solve.
pub fn tri_solve_multi<F: TriangularFactor + ?Sized>(
    f: &F,
    b: &DenseBlock,
    mode: SolveMode,
) -> Result<DenseBlock, FactorError> {
    f.tri_solve(b, mode)
}
