//! CSR sparse matrices, symmetric permutations, and Matrix Market I/O.
//!
//! Symmetric matrices are stored with the full pattern (both triangles); the
//! `symmetric` flag only records that the values are symmetric. All kernels
//! accumulate in a fixed left-to-right per-row order so results are
//! reproducible run to run.

use std::io::{BufRead, Write};

use crate::dense::DenseBlock;
use crate::error::SparseError;

/// Compressed sparse row matrix. Rectangular storage is allowed (used for the
/// interface-to-interior coupling block); most operations require square.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, checking the structural invariants:
    /// `row_ptr` nondecreasing, column indices strictly increasing within each
    /// row and in range.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
        symmetric: bool,
    ) -> Result<Self, SparseError> {
        if row_ptr.len() != nrows + 1 {
            return Err(SparseError::InvalidStructure(format!(
                "row_ptr length {} != nrows + 1 = {}",
                row_ptr.len(),
                nrows + 1
            )));
        }
        if row_ptr[0] != 0 || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(SparseError::InvalidStructure(
                "row_ptr must start at 0 and end at nnz".into(),
            ));
        }
        if col_idx.len() != values.len() {
            return Err(SparseError::InvalidStructure("col_idx/values length mismatch".into()));
        }
        for i in 0..nrows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(SparseError::InvalidStructure(format!(
                    "row_ptr decreases at row {i}"
                )));
            }
            let row = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            for w in row.windows(2) {
                if w[0] >= w[1] {
                    return Err(SparseError::InvalidStructure(format!(
                        "columns not strictly increasing in row {i}"
                    )));
                }
            }
            if let Some(&last) = row.last() {
                if last >= ncols {
                    return Err(SparseError::IndexOutOfBounds {
                        row: i,
                        col: last,
                        rows: nrows,
                        cols: ncols,
                    });
                }
            }
        }
        let m = Self { nrows, ncols, row_ptr, col_idx, values, symmetric };
        if symmetric {
            m.check_symmetric_storage()?;
        }
        Ok(m)
    }

    /// Builds from coordinate triples; duplicates are summed (Matrix Market
    /// convention). Entries are sorted row-major.
    pub fn from_coo(
        nrows: usize,
        ncols: usize,
        mut entries: Vec<(usize, usize, f64)>,
        symmetric: bool,
    ) -> Result<Self, SparseError> {
        for &(i, j, _) in &entries {
            if i >= nrows || j >= ncols {
                return Err(SparseError::IndexOutOfBounds { row: i, col: j, rows: nrows, cols: ncols });
            }
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_counts = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_counts[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_counts[i + 1] += row_counts[i];
        }
        Self::from_csr(nrows, ncols, row_counts, col_idx, values, symmetric)
    }

    pub fn identity(n: usize) -> Self {
        let row_ptr: Vec<usize> = (0..=n).collect();
        let col_idx: Vec<usize> = (0..n).collect();
        Self { nrows: n, ncols: n, row_ptr, col_idx, values: vec![1.0; n], symmetric: true }
    }

    /// Dimension of a square matrix. Panics if rectangular.
    pub fn n(&self) -> usize {
        assert_eq!(self.nrows, self.ncols, "matrix is not square");
        self.nrows
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn is_symmetric_flagged(&self) -> bool {
        self.symmetric
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries of row `i` as parallel (columns, values) slices.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Verifies that every stored (i, j, v) has a stored mirror (j, i, v).
    fn check_symmetric_storage(&self) -> Result<(), SparseError> {
        if self.nrows != self.ncols {
            return Err(SparseError::NotSquare { rows: self.nrows, cols: self.ncols });
        }
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if self.get(j, i) != v {
                    return Err(SparseError::InvalidStructure(format!(
                        "symmetric flag set but entry ({i}, {j}) has no identical mirror"
                    )));
                }
            }
        }
        Ok(())
    }

    /// y = A x with fixed left-to-right accumulation per row.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>, SparseError> {
        if x.len() != self.ncols {
            return Err(SparseError::DimensionMismatch { expected: self.ncols, got: x.len() });
        }
        let mut y = vec![0.0; self.nrows];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
        Ok(y)
    }

    /// y = A^T x. Rows are scattered in index order, so the result is
    /// deterministic as well.
    pub fn spmv_t(&self, x: &[f64]) -> Result<Vec<f64>, SparseError> {
        if x.len() != self.nrows {
            return Err(SparseError::DimensionMismatch { expected: self.nrows, got: x.len() });
        }
        let mut y = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
        Ok(y)
    }

    /// Y = A X, column by column; bitwise identical to looping `spmv` over
    /// the columns of X.
    pub fn spmm(&self, x: &DenseBlock) -> Result<DenseBlock, SparseError> {
        if x.rows != self.ncols {
            return Err(SparseError::DimensionMismatch { expected: self.ncols, got: x.rows });
        }
        let mut y = DenseBlock::zeros(self.nrows, x.cols);
        for c in 0..x.cols {
            let xin = x.col(c);
            let yout = y.col_mut(c);
            for i in 0..self.nrows {
                let (cols, vals) = self.row(i);
                let mut acc = 0.0;
                for (&j, &v) in cols.iter().zip(vals) {
                    acc += v * xin[j];
                }
                yout[i] = acc;
            }
        }
        Ok(y)
    }

    /// Y = A^T X.
    pub fn spmm_t(&self, x: &DenseBlock) -> Result<DenseBlock, SparseError> {
        if x.rows != self.nrows {
            return Err(SparseError::DimensionMismatch { expected: self.nrows, got: x.rows });
        }
        let mut y = DenseBlock::zeros(self.ncols, x.cols);
        for c in 0..x.cols {
            let xin = x.col(c);
            let yout = y.col_mut(c);
            for i in 0..self.nrows {
                let (cols, vals) = self.row(i);
                let xi = xin[i];
                if xi == 0.0 {
                    continue;
                }
                for (&j, &v) in cols.iter().zip(vals) {
                    yout[j] += v * xi;
                }
            }
        }
        Ok(y)
    }

    /// Symmetric permutation: result(i, j) = A(perm(i), perm(j)).
    pub fn permute_symmetric(&self, p: &Permutation) -> Result<SparseMatrix, SparseError> {
        if self.nrows != self.ncols {
            return Err(SparseError::NotSquare { rows: self.nrows, cols: self.ncols });
        }
        if p.len() != self.nrows {
            return Err(SparseError::InvalidPermutation(format!(
                "permutation length {} != matrix dimension {}",
                p.len(),
                self.nrows
            )));
        }
        let n = self.nrows;
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(self.nnz());
        for new_i in 0..n {
            let old_i = p.perm()[new_i];
            let (cols, vals) = self.row(old_i);
            for (&old_j, &v) in cols.iter().zip(vals) {
                entries.push((new_i, p.inverse()[old_j], v));
            }
        }
        SparseMatrix::from_coo(n, n, entries, self.symmetric)
    }

    /// Extracts the submatrix with the given row and column index sets.
    /// `row_local[g]` must map a global index to its local position, with
    /// `usize::MAX` marking "not selected".
    pub fn extract(
        &self,
        rows: &[usize],
        col_local: &[usize],
        out_cols: usize,
        symmetric: bool,
    ) -> Result<SparseMatrix, SparseError> {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &gi in rows {
            let (cols, vals) = self.row(gi);
            let mut row_entries: Vec<(usize, f64)> = Vec::new();
            for (&gj, &v) in cols.iter().zip(vals) {
                let lj = col_local[gj];
                if lj != usize::MAX {
                    row_entries.push((lj, v));
                }
            }
            row_entries.sort_by_key(|e| e.0);
            for (j, v) in row_entries {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix::from_csr(rows.len(), out_cols, row_ptr, col_idx, values, symmetric)
    }

    /// Frobenius norm of the stored entries.
    pub fn frob_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Materializes the matrix densely (desk-scale debugging and oracles).
    pub fn to_dense(&self) -> DenseBlock {
        let mut d = DenseBlock::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d.set(i, j, v);
            }
        }
        d
    }
}

/// A permutation of [0, n): `perm[new] = old`, with its inverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    perm: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn new(perm: Vec<usize>) -> Result<Self, SparseError> {
        let n = perm.len();
        let mut inverse = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            if old >= n {
                return Err(SparseError::InvalidPermutation(format!(
                    "index {old} out of range for length {n}"
                )));
            }
            if inverse[old] != usize::MAX {
                return Err(SparseError::InvalidPermutation(format!("index {old} repeated")));
            }
            inverse[old] = new;
        }
        Ok(Self { perm, inverse })
    }

    pub fn identity(n: usize) -> Self {
        Self { perm: (0..n).collect(), inverse: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// new position -> old index
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// old index -> new position
    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    /// Gathers `x` into the permuted ordering: out[new] = x[perm[new]].
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&old| x[old]).collect()
    }

    /// Scatters a permuted vector back: out[perm[new]] = x[new].
    pub fn apply_inverse(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Matrix Market coordinate format
// ---------------------------------------------------------------------------

/// Parses a Matrix Market coordinate file (real, symmetric or general).
///
/// Symmetric inputs, stored as the lower triangle, are expanded to full
/// storage with mirrored values. Indices are converted from 1-based to
/// 0-based and duplicate entries are summed.
pub fn parse_matrix_market<R: BufRead>(reader: R) -> Result<SparseMatrix, SparseError> {
    let mut lines = reader.lines();
    let header = loop {
        match lines.next() {
            Some(line) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => return Err(SparseError::MalformedHeader("empty file".into())),
        }
    };

    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(SparseError::MalformedHeader(header.clone()));
    }
    if tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(SparseError::MalformedHeader(format!(
            "expected `matrix coordinate`, got `{} {}`",
            tokens[1], tokens[2]
        )));
    }
    match tokens[3].as_str() {
        "real" => {}
        "pattern" => return Err(SparseError::PatternOnly),
        other => return Err(SparseError::NonRealField(other.to_string())),
    }
    let symmetric = match tokens[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => {
            return Err(SparseError::MalformedHeader(format!("unsupported symmetry `{other}`")))
        }
    };

    // size line: first non-comment, non-empty line
    let mut line_no = 1usize;
    let size_line = loop {
        let line = lines
            .next()
            .ok_or_else(|| SparseError::MalformedHeader("missing size line".into()))??;
        line_no += 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        break line;
    };
    let dims: Vec<&str> = size_line.split_whitespace().collect();
    if dims.len() != 3 {
        return Err(SparseError::MalformedEntry {
            line: line_no,
            msg: format!("size line must have 3 fields, got {}", dims.len()),
        });
    }
    let parse_dim = |s: &str, line: usize| {
        s.parse::<usize>().map_err(|_| SparseError::MalformedEntry {
            line,
            msg: format!("invalid integer `{s}`"),
        })
    };
    let nrows = parse_dim(dims[0], line_no)?;
    let ncols = parse_dim(dims[1], line_no)?;
    let nnz = parse_dim(dims[2], line_no)?;
    if symmetric && nrows != ncols {
        return Err(SparseError::NotSquare { rows: nrows, cols: ncols });
    }

    let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(if symmetric {
        2 * nnz
    } else {
        nnz
    });
    let mut seen = 0usize;
    for line in lines {
        let line = line?;
        line_no += 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(SparseError::MalformedEntry {
                line: line_no,
                msg: format!("expected `i j value`, got {} fields", fields.len()),
            });
        }
        let i = parse_dim(fields[0], line_no)?;
        let j = parse_dim(fields[1], line_no)?;
        let v: f64 = fields[2].parse().map_err(|_| SparseError::MalformedEntry {
            line: line_no,
            msg: format!("invalid real value `{}`", fields[2]),
        })?;
        if i < 1 || j < 1 || i > nrows || j > ncols {
            return Err(SparseError::IndexOutOfBounds {
                row: i,
                col: j,
                rows: nrows,
                cols: ncols,
            });
        }
        let (i0, j0) = (i - 1, j - 1);
        if symmetric && j0 > i0 {
            return Err(SparseError::UpperEntryInSymmetric { row: i, col: j });
        }
        entries.push((i0, j0, v));
        if symmetric && i0 != j0 {
            entries.push((j0, i0, v));
        }
        seen += 1;
    }
    if seen != nnz {
        return Err(SparseError::MalformedEntry {
            line: line_no,
            msg: format!("header declares {nnz} entries, file has {seen}"),
        });
    }
    SparseMatrix::from_coo(nrows, ncols, entries, symmetric)
}

/// Writes a matrix in Matrix Market coordinate format. Symmetric-flagged
/// matrices are written as the lower triangle under a `symmetric` header, so
/// write-then-parse round-trips exactly.
pub fn write_matrix_market<W: Write>(m: &SparseMatrix, out: &mut W) -> Result<(), SparseError> {
    let sym = m.is_symmetric_flagged();
    let kind = if sym { "symmetric" } else { "general" };
    writeln!(out, "%%MatrixMarket matrix coordinate real {kind}")?;
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..m.nrows() {
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if !sym || j <= i {
                entries.push((i, j, v));
            }
        }
    }
    writeln!(out, "{} {} {}", m.nrows(), m.ncols(), entries.len())?;
    for (i, j, v) in entries {
        writeln!(out, "{} {} {:.17e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

/// Reads a Matrix Market file from disk.
pub fn read_matrix_market_file(path: &std::path::Path) -> Result<SparseMatrix, SparseError> {
    let f = std::fs::File::open(path)?;
    parse_matrix_market(std::io::BufReader::new(f))
}
