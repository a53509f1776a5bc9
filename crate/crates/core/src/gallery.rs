//! Small gallery of test matrices and seeded right-hand-side generators.
//!
//! These are the desk-scale problems used throughout the test suite and the
//! benchmark harness: discrete Laplacians, arrow matrices, and seeded random
//! SPD matrices.

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::sparse::SparseMatrix;

/// 1D Laplacian tridiag(-1, 2, -1) of dimension `n`.
pub fn laplacian_1d(n: usize) -> SparseMatrix {
    let mut entries = Vec::with_capacity(3 * n);
    for i in 0..n {
        if i > 0 {
            entries.push((i, i - 1, -1.0));
        }
        entries.push((i, i, 2.0));
        if i + 1 < n {
            entries.push((i, i + 1, -1.0));
        }
    }
    SparseMatrix::from_coo(n, n, entries, true).unwrap()
}

/// 2D five-point Laplacian on an `nx` by `ny` grid (dimension nx*ny),
/// row-major grid numbering.
pub fn laplacian_2d(nx: usize, ny: usize) -> SparseMatrix {
    let n = nx * ny;
    let idx = |x: usize, y: usize| y * nx + x;
    let mut entries = Vec::with_capacity(5 * n);
    for y in 0..ny {
        for x in 0..nx {
            let i = idx(x, y);
            entries.push((i, i, 4.0));
            if x > 0 {
                entries.push((i, idx(x - 1, y), -1.0));
            }
            if x + 1 < nx {
                entries.push((i, idx(x + 1, y), -1.0));
            }
            if y > 0 {
                entries.push((i, idx(x, y - 1), -1.0));
            }
            if y + 1 < ny {
                entries.push((i, idx(x, y + 1), -1.0));
            }
        }
    }
    SparseMatrix::from_coo(n, n, entries, true).unwrap()
}

/// Arrow matrix: diagonal `diag` everywhere, dense last row and column with
/// value `coupling`, and `hub` on the last diagonal entry. SPD for
/// hub > (n-1) * coupling^2 / diag.
pub fn arrow(n: usize, diag: f64, coupling: f64, hub: f64) -> SparseMatrix {
    let mut entries = Vec::with_capacity(3 * n);
    for i in 0..n - 1 {
        entries.push((i, i, diag));
        entries.push((i, n - 1, coupling));
        entries.push((n - 1, i, coupling));
    }
    entries.push((n - 1, n - 1, hub));
    SparseMatrix::from_coo(n, n, entries, true).unwrap()
}

/// Random sparse SPD matrix: a random symmetric pattern with off-diagonal
/// values in [-1, 1], made diagonally dominant. `density` is the expected
/// fraction of stored off-diagonal pairs.
pub fn random_sparse_spd(n: usize, density: f64, seed: u64) -> SparseMatrix {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut row_sums = vec![0.0f64; n];
    for i in 0..n {
        for j in 0..i {
            if rng.gen::<f64>() < density {
                let v = 2.0 * rng.gen::<f64>() - 1.0;
                entries.push((i, j, v));
                entries.push((j, i, v));
                row_sums[i] += v.abs();
                row_sums[j] += v.abs();
            }
        }
    }
    for i in 0..n {
        entries.push((i, i, row_sums[i] + 1.0 + rng.gen::<f64>()));
    }
    SparseMatrix::from_coo(n, n, entries, true).unwrap()
}

/// Dense-spectrum SPD matrix Q D Q^T with prescribed eigenvalues, as a full
/// sparse matrix. Useful for conditioning-sensitive tests.
pub fn spd_with_spectrum(eigenvalues: &[f64], seed: u64) -> SparseMatrix {
    let n = eigenvalues.len();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let g = nalgebra::DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let d = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(eigenvalues));
    let a = &q * d * q.transpose();
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            // symmetrize exactly so the storage invariant holds
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            entries.push((i, j, v));
        }
    }
    SparseMatrix::from_coo(n, n, entries, true).unwrap()
}

/// Right-hand side with entries uniform in [0, 1].
pub fn uniform_rhs(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

/// Right-hand side with standard normal entries.
pub fn gaussian_rhs(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplacian_2d_row_sums() {
        let a = laplacian_2d(4, 3);
        assert_eq!(a.n(), 12);
        // interior rows sum to zero, boundary rows are positive
        let ones = vec![1.0; 12];
        let y = a.spmv(&ones).unwrap();
        assert!(y.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn random_spd_is_positive_definite() {
        let a = random_sparse_spd(25, 0.2, 3);
        let chol = nalgebra::Cholesky::new(a.to_dense().to_dmatrix());
        assert!(chol.is_some());
    }

    #[test]
    fn rhs_generators_are_deterministic() {
        assert_eq!(uniform_rhs(10, 7), uniform_rhs(10, 7));
        assert_eq!(gaussian_rhs(10, 7), gaussian_rhs(10, 7));
        assert!(uniform_rhs(100, 1).iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
