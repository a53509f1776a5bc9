//! Column-major dense blocks: tall-skinny multivectors and small dense factors.

use nalgebra::DMatrix;

use crate::error::SparseError;

/// A dense `rows x cols` block stored column-major.
///
/// Used for multivectors (blocks of right-hand sides, sketches, deflation
/// bases) and for small dense factors. Column-major layout keeps per-column
/// slices contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseBlock {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl DenseBlock {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, values: vec![0.0; rows * cols] }
    }

    /// Builds a block from column-major data. Errors if the length is wrong.
    pub fn from_values(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, SparseError> {
        if values.len() != rows * cols {
            return Err(SparseError::DimensionMismatch {
                expected: rows * cols,
                got: values.len(),
            });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn identity(n: usize) -> Self {
        let mut b = Self::zeros(n, n);
        for i in 0..n {
            b.values[i * n + i] = 1.0;
        }
        b
    }

    /// Single-column block wrapping a vector.
    pub fn from_column(v: &[f64]) -> Self {
        Self { rows: v.len(), cols: 1, values: v.to_vec() }
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.values[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.rows..(j + 1) * self.rows]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.rows + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[j * self.rows + i] = v;
    }

    /// Gathers the given columns into a new block.
    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, idx.len());
        for (c, &j) in idx.iter().enumerate() {
            out.col_mut(c).copy_from_slice(self.col(j));
        }
        out
    }

    pub fn frob_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn col_norm(&self, j: usize) -> f64 {
        self.col(j).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.values[i * self.cols + j] = self.values[j * self.rows + i];
            }
        }
        out
    }

    /// `self * other`, plain triple loop over column-major storage.
    pub fn matmul(&self, other: &DenseBlock) -> DenseBlock {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = DenseBlock::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let bcol = other.col(j);
            let ocol = out.col_mut(j);
            for (k, &bkj) in bcol.iter().enumerate() {
                if bkj == 0.0 {
                    continue;
                }
                let acol = &self.values[k * self.rows..(k + 1) * self.rows];
                for i in 0..self.rows {
                    ocol[i] += acol[i] * bkj;
                }
            }
        }
        out
    }

    /// `self^T * other` without forming the transpose.
    pub fn transpose_matmul(&self, other: &DenseBlock) -> DenseBlock {
        assert_eq!(self.rows, other.rows, "transpose_matmul dimension mismatch");
        let mut out = DenseBlock::zeros(self.cols, other.cols);
        for j in 0..other.cols {
            let bcol = other.col(j);
            for i in 0..self.cols {
                let acol = self.col(i);
                let mut s = 0.0;
                for r in 0..self.rows {
                    s += acol[r] * bcol[r];
                }
                out.values[j * self.cols + i] = s;
            }
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &DenseBlock) {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }

    /// Scales column `j` in place by `s`.
    pub fn scale_col(&mut self, j: usize, s: f64) {
        for v in self.col_mut(j) {
            *v *= s;
        }
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.rows, self.cols, &self.values)
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        Self { rows: m.nrows(), cols: m.ncols(), values: m.as_slice().to_vec() }
    }
}

/// Euclidean norm of a vector slice.
pub fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Dot product of two slices.
pub fn vec_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_major_layout() {
        let b = DenseBlock::from_values(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(b.get(0, 0), 1.);
        assert_eq!(b.get(1, 0), 2.);
        assert_eq!(b.get(0, 1), 3.);
        assert_eq!(b.col(2), &[5., 6.]);
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(DenseBlock::from_values(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn matmul_matches_nalgebra() {
        let a = DenseBlock::from_values(3, 2, vec![1., 4., 7., 2., 5., 8.]).unwrap();
        let b = DenseBlock::from_values(2, 2, vec![1., 3., 2., 4.]).unwrap();
        let c = a.matmul(&b);
        let oracle = a.to_dmatrix() * b.to_dmatrix();
        assert_eq!(c.to_dmatrix(), oracle);
        let ct = a.transpose_matmul(&a);
        let oracle_t = a.to_dmatrix().transpose() * a.to_dmatrix();
        assert_eq!(ct.to_dmatrix(), oracle_t);
    }
}
