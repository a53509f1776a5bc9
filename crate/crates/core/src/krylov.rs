//! Iterative solvers and eigensolvers: preconditioned CG, breakdown-free
//! block PCG for multiple right-hand sides, and thick-restart Lanczos.
//!
//! Convergence is measured against the recurrence residual, with the true
//! residual recomputed every 50 iterations to guard against drift. All
//! solvers are deterministic for fixed inputs.

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::dense::{vec_dot, vec_norm, DenseBlock};
use crate::error::KrylovError;
use crate::sparse::SparseMatrix;

/// How often the recurrence residual is replaced by the true residual.
const TRUE_RESIDUAL_PERIOD: usize = 50;

/// A symmetric linear operator applied to multivectors.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// Applies the operator to a `dim x m` block.
    fn apply_block(&self, x: &DenseBlock) -> DenseBlock;

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        self.apply_block(&DenseBlock::from_column(x)).values
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply_block(&self, x: &DenseBlock) -> DenseBlock {
        (**self).apply_block(x)
    }
}

impl LinearOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.n()
    }
    fn apply_block(&self, x: &DenseBlock) -> DenseBlock {
        self.spmm(x).expect("operator dimension mismatch")
    }
}

/// The identity operator.
pub struct IdentityOp(pub usize);

impl LinearOperator for IdentityOp {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply_block(&self, x: &DenseBlock) -> DenseBlock {
        x.clone()
    }
}

/// Pointwise division by a fixed diagonal (a Jacobi-style preconditioner).
pub struct DiagInvOp(pub Vec<f64>);

impl LinearOperator for DiagInvOp {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn apply_block(&self, x: &DenseBlock) -> DenseBlock {
        let mut y = x.clone();
        for c in 0..y.cols {
            for (v, d) in y.col_mut(c).iter_mut().zip(&self.0) {
                *v /= d;
            }
        }
        y
    }
}

/// A dense symmetric matrix as an operator.
pub struct DenseOp(pub DenseBlock);

impl LinearOperator for DenseOp {
    fn dim(&self) -> usize {
        self.0.rows
    }
    fn apply_block(&self, x: &DenseBlock) -> DenseBlock {
        self.0.matmul(x)
    }
}

/// Echo of the solver parameters recorded in each report.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SolveConfigEcho {
    pub tol: f64,
    pub maxit: usize,
}

/// Outcome of a (block) PCG solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// ||r_j||_2 / ||b||_2 per iteration, including the initial residual;
    /// for block solves this is the worst column. Length iterations + 1.
    pub relative_residual_history: Vec<f64>,
    pub converged: bool,
    pub rhs_count: usize,
    pub config_echo: SolveConfigEcho,
    /// Active search directions per iteration (block solves only).
    pub direction_counts: Vec<usize>,
}

impl SolveReport {
    fn new(tol: f64, maxit: usize, rhs_count: usize) -> Self {
        Self {
            iterations: 0,
            relative_residual_history: Vec::new(),
            converged: false,
            rhs_count,
            config_echo: SolveConfigEcho { tol, maxit },
            direction_counts: Vec::new(),
        }
    }
}

/// Preconditioned conjugate gradients for a single right-hand side.
///
/// Stops when ||b - A x||_2 / ||b||_2 <= tol or at `maxit` (reported as
/// `converged = false`, not an error).
pub fn pcg<A, M>(
    a: &A,
    m: &M,
    b: &[f64],
    tol: f64,
    maxit: usize,
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveReport), KrylovError>
where
    A: LinearOperator + ?Sized,
    M: LinearOperator + ?Sized,
{
    let n = a.dim();
    if b.len() != n {
        return Err(KrylovError::DimensionMismatch { expected: n, got: b.len() });
    }
    if tol < 0.0 {
        return Err(KrylovError::InvalidConfig("tol must be nonnegative".into()));
    }
    let mut report = SolveReport::new(tol, maxit, 1);
    let bnorm = vec_norm(b);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    if bnorm == 0.0 {
        report.converged = true;
        report.relative_residual_history.push(0.0);
        return Ok((vec![0.0; n], report));
    }

    let ax = a.apply_vec(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z = m.apply_vec(&r);
    let mut p = z.clone();
    let mut rz = vec_dot(&r, &z);
    report.relative_residual_history.push(vec_norm(&r) / bnorm);
    if report.relative_residual_history[0] <= tol {
        report.converged = true;
        return Ok((x, report));
    }

    for it in 1..=maxit {
        let q = a.apply_vec(&p);
        let pq = vec_dot(&p, &q);
        if pq <= 0.0 {
            return Err(KrylovError::IndefiniteOperator { iteration: it, value: pq });
        }
        let alpha = rz / pq;
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += alpha * pi;
        }
        if it % TRUE_RESIDUAL_PERIOD == 0 {
            let ax = a.apply_vec(&x);
            for ((ri, bi), ai) in r.iter_mut().zip(b).zip(&ax) {
                *ri = bi - ai;
            }
        } else {
            for (ri, qi) in r.iter_mut().zip(&q) {
                *ri -= alpha * qi;
            }
        }
        let res = vec_norm(&r) / bnorm;
        report.relative_residual_history.push(res);
        report.iterations = it;
        if res <= tol {
            report.converged = true;
            break;
        }
        z = m.apply_vec(&r);
        let rz_new = vec_dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Ok((x, report))
}

/// Rank-revealing orthonormalization via column-pivoted QR: returns the
/// orthonormal columns whose pivot magnitude is at least `tol`.
fn orthonormalize_rank_revealing(w: &DenseBlock, tol: f64) -> DenseBlock {
    if w.cols == 0 {
        return w.clone();
    }
    let qr = w.to_dmatrix().col_piv_qr();
    let diag = qr.r().diagonal();
    let rank = (0..diag.len().min(w.cols)).take_while(|&i| diag[i].abs() >= tol).count();
    let q = qr.q();
    let mut out = DenseBlock::zeros(w.rows, rank);
    for j in 0..rank {
        for i in 0..w.rows {
            out.set(i, j, q[(i, j)]);
        }
    }
    out
}

/// Breakdown-free block PCG: search directions are re-orthonormalized with a
/// rank-revealing QR every iteration and near-dependent directions are
/// deflated out. Converges when every column meets the tolerance.
pub fn block_pcg<A, M>(
    a: &A,
    m: &M,
    b: &DenseBlock,
    tol: f64,
    maxit: usize,
) -> Result<(DenseBlock, SolveReport), KrylovError>
where
    A: LinearOperator + ?Sized,
    M: LinearOperator + ?Sized,
{
    let n = a.dim();
    let s = b.cols;
    if b.rows != n {
        return Err(KrylovError::DimensionMismatch { expected: n, got: b.rows });
    }
    let mut report = SolveReport::new(tol, maxit, s);
    let mut x = DenseBlock::zeros(n, s);
    if s == 0 {
        report.converged = true;
        report.relative_residual_history.push(0.0);
        return Ok((x, report));
    }
    let denoms: Vec<f64> = (0..s).map(|c| b.col_norm(c)).collect();
    let all_zero = denoms.iter().all(|&d| d == 0.0);
    if all_zero {
        report.converged = true;
        report.relative_residual_history.push(0.0);
        return Ok((x, report));
    }

    let mut r = b.clone();
    let mut z = m.apply_block(&r);
    // deflation threshold pinned to the initial direction block norm
    let breakdown_tol = 1e-12 * z.frob_norm();
    let mut p = orthonormalize_rank_revealing(&z, breakdown_tol);

    let rel_res = |r: &DenseBlock| -> f64 {
        (0..s)
            .map(|c| if denoms[c] == 0.0 { 0.0 } else { r.col_norm(c) / denoms[c] })
            .fold(0.0, f64::max)
    };
    report.relative_residual_history.push(rel_res(&r));
    if report.relative_residual_history[0] <= tol {
        report.converged = true;
        return Ok((x, report));
    }

    for it in 1..=maxit {
        if p.cols == 0 {
            return Err(KrylovError::Stagnation { iteration: it });
        }
        report.direction_counts.push(p.cols);
        let q = a.apply_block(&p);
        let gram = p.transpose_matmul(&q);
        let chol = match nalgebra::Cholesky::new(gram.to_dmatrix()) {
            Some(c) => c,
            None => {
                return Err(KrylovError::IndefiniteOperator { iteration: it, value: f64::NAN })
            }
        };
        let ptr = p.transpose_matmul(&r);
        let alpha = DenseBlock::from_dmatrix(&chol.solve(&ptr.to_dmatrix()));
        let pa = p.matmul(&alpha);
        x.axpy(1.0, &pa);
        if it % TRUE_RESIDUAL_PERIOD == 0 {
            let ax = a.apply_block(&x);
            r = b.clone();
            r.axpy(-1.0, &ax);
        } else {
            let qa = q.matmul(&alpha);
            r.axpy(-1.0, &qa);
        }
        let res = rel_res(&r);
        report.relative_residual_history.push(res);
        report.iterations = it;
        if res <= tol {
            report.converged = true;
            break;
        }
        z = m.apply_block(&r);
        // conjugate the new block against the current directions:
        // W = Z - P (P^T Q)^{-1} (Q^T Z)
        let qtz = q.transpose_matmul(&z);
        let beta = DenseBlock::from_dmatrix(&chol.solve(&qtz.to_dmatrix()));
        let mut w = z.clone();
        let pb = p.matmul(&beta);
        w.axpy(-1.0, &pb);
        p = orthonormalize_rank_revealing(&w, breakdown_tol);
    }
    Ok((x, report))
}

/// Which end of the spectrum an eigensolve targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenWhich {
    Largest,
    Smallest,
}

/// Result of a Lanczos eigensolve. Values are sorted descending.
#[derive(Debug, Clone)]
pub struct EigenReport {
    pub values: Vec<f64>,
    pub vectors: DenseBlock,
    pub residual_norms: Vec<f64>,
    /// Number of operator applications (the iteration count).
    pub lanczos_iterations: usize,
    pub converged: bool,
}

const LANCZOS_MAX_CYCLES: usize = 500;

/// Thick-restart Lanczos with full reorthogonalization inside the basis.
///
/// Returns `k` eigenpairs from the requested end of the spectrum with
/// residuals below `tol` times the operator norm estimate, restarting with
/// the wanted Ritz vectors when the basis reaches `restart_dim`.
pub fn lanczos_thick_restart<A>(
    a: &A,
    k: usize,
    restart_dim: usize,
    tol: f64,
    which: EigenWhich,
) -> Result<EigenReport, KrylovError>
where
    A: LinearOperator + ?Sized,
{
    let n = a.dim();
    if k == 0 {
        return Err(KrylovError::InvalidConfig("k must be at least 1".into()));
    }
    if restart_dim < k + 2 {
        return Err(KrylovError::InvalidConfig(format!(
            "restart_dim {restart_dim} must be at least k + 2 = {}",
            k + 2
        )));
    }
    if k > n {
        return Err(KrylovError::DimensionMismatch { expected: n, got: k });
    }
    let m = restart_dim.min(n);
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
    let gen_vec = |rng: &mut ChaCha20Rng| -> Vec<f64> {
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    };

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let v0 = {
        let mut v = gen_vec(&mut rng);
        let nv = vec_norm(&v);
        for vi in &mut v {
            *vi /= nv;
        }
        v
    };
    basis.push(v0);
    let mut t = DMatrix::<f64>::zeros(m + 1, m + 1);
    let mut size = 0usize; // completed columns of t
    let mut ops = 0usize;

    let order_idx = |vals: &[f64], which: EigenWhich| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..vals.len()).collect();
        match which {
            EigenWhich::Largest => {
                idx.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).unwrap())
            }
            EigenWhich::Smallest => {
                idx.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap())
            }
        }
        idx
    };

    for _cycle in 0..LANCZOS_MAX_CYCLES {
        // extend the basis to m columns
        while size < m {
            let w0 = a.apply_vec(&basis[size]);
            ops += 1;
            let mut w = w0;
            let cols = basis.len();
            let mut h = vec![0.0f64; cols];
            for _pass in 0..2 {
                for (i, vi) in basis.iter().enumerate() {
                    let c = vec_dot(vi, &w);
                    h[i] += c;
                    for (wj, vj) in w.iter_mut().zip(vi) {
                        *wj -= c * vj;
                    }
                }
            }
            for (i, &hi) in h.iter().enumerate().take(size + 1) {
                t[(i, size)] = hi;
                t[(size, i)] = hi;
            }
            let beta = vec_norm(&w);
            let v_next = if beta > 1e-300 && size + 1 < n {
                t[(size + 1, size)] = beta;
                t[(size, size + 1)] = beta;
                w.iter().map(|wi| wi / beta).collect()
            } else if size + 1 < n {
                // invariant subspace hit: continue with a fresh direction
                let mut v = gen_vec(&mut rng);
                for vi in basis.iter() {
                    let c = vec_dot(vi, &v);
                    for (vj, bj) in v.iter_mut().zip(vi) {
                        *vj -= c * bj;
                    }
                }
                let nv = vec_norm(&v);
                if nv < 1e-300 {
                    vec![0.0; n]
                } else {
                    v.iter().map(|vi| vi / nv).collect()
                }
            } else {
                // basis spans the whole space
                vec![0.0; n]
            };
            basis.push(v_next);
            size += 1;
            if size == n {
                break;
            }
        }

        // Rayleigh-Ritz on the projected block
        let tj = t.view((0, 0), (size, size)).into_owned();
        let eig = nalgebra::SymmetricEigen::new(tj);
        let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let idx = order_idx(&vals, which);
        let beta_last = t[(size, size - 1)];
        let opnorm = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300);

        let kk = k.min(size);
        let residual = |col: usize| -> f64 { (beta_last * eig.eigenvectors[(size - 1, col)]).abs() };
        let all_converged =
            idx.iter().take(kk).all(|&c| residual(c) <= tol * opnorm) && kk == k;
        let out_of_budget = _cycle + 1 == LANCZOS_MAX_CYCLES || size == n;

        if all_converged || out_of_budget {
            // assemble the k pairs, sorted by eigenvalue descending
            let mut chosen: Vec<usize> = idx.iter().take(kk).copied().collect();
            chosen.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).unwrap());
            let mut vectors = DenseBlock::zeros(n, chosen.len());
            let mut values = Vec::with_capacity(chosen.len());
            let mut residuals = Vec::with_capacity(chosen.len());
            for (out_c, &c) in chosen.iter().enumerate() {
                values.push(vals[c]);
                residuals.push(residual(c));
                let col = vectors.col_mut(out_c);
                for (i, vi) in basis.iter().enumerate().take(size) {
                    let w = eig.eigenvectors[(i, c)];
                    if w != 0.0 {
                        for (cj, vj) in col.iter_mut().zip(vi) {
                            *cj += w * vj;
                        }
                    }
                }
            }
            let converged = all_converged
                || chosen.iter().all(|&c| residual(c) <= tol * opnorm) && kk == k;
            return Ok(EigenReport {
                values,
                vectors,
                residual_norms: residuals,
                lanczos_iterations: ops,
                converged,
            });
        }

        // thick restart: keep the wanted Ritz vectors plus a small buffer
        let extra = (m.saturating_sub(k + 1)).min(4);
        let l = (k + extra).min(size - 1).max(1);
        let keep: Vec<usize> = idx.iter().take(l).copied().collect();
        let mut new_basis: Vec<Vec<f64>> = Vec::with_capacity(l + 1);
        for &c in &keep {
            let mut y = vec![0.0f64; n];
            for (i, vi) in basis.iter().enumerate().take(size) {
                let w = eig.eigenvectors[(i, c)];
                if w != 0.0 {
                    for (yj, vj) in y.iter_mut().zip(vi) {
                        *yj += w * vj;
                    }
                }
            }
            new_basis.push(y);
        }
        new_basis.push(basis[size].clone());
        basis = new_basis;
        t.fill(0.0);
        for (i, &c) in keep.iter().enumerate() {
            t[(i, i)] = vals[c];
        }
        size = l;
    }
    unreachable!("loop returns on budget exhaustion");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;

    /// Plain textbook CG, kept independent of the pcg implementation.
    fn reference_cg(a: &SparseMatrix, b: &[f64], tol: f64, maxit: usize) -> (Vec<f64>, usize) {
        let n = a.n();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut rr = vec_dot(&r, &r);
        let bnorm = vec_norm(b);
        for it in 1..=maxit {
            let q = a.spmv(&p).unwrap();
            let alpha = rr / vec_dot(&p, &q);
            for i in 0..n {
                x[i] += alpha * p[i];
            }
            for i in 0..n {
                r[i] -= alpha * q[i];
            }
            let rr_new = vec_dot(&r, &r);
            if rr_new.sqrt() / bnorm <= tol {
                return (x, it);
            }
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
        }
        (x, maxit)
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let a = SparseMatrix::identity(9);
        let b = gallery::uniform_rhs(9, 1);
        let (x, rep) = pcg(&a, &IdentityOp(9), &b, 1e-12, 100, None).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() <= 1e-14);
        }
    }

    #[test]
    fn exact_preconditioner_converges_in_one_iteration() {
        let diag: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let a = SparseMatrix::from_coo(
            10,
            10,
            diag.iter().enumerate().map(|(i, &d)| (i, i, d)).collect(),
            true,
        )
        .unwrap();
        let m = DiagInvOp(diag);
        let b = gallery::uniform_rhs(10, 2);
        let (_, rep) = pcg(&a, &m, &b, 1e-10, 100, None).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
    }

    #[test]
    fn laplacian_count_matches_textbook_reference() {
        let a = gallery::laplacian_2d(32, 32);
        let b = gallery::uniform_rhs(a.n(), 3);
        let (_, oracle_count) = reference_cg(&a, &b, 1e-6, 5000);
        let (_, rep) = pcg(&a, &IdentityOp(a.n()), &b, 1e-6, 5000, None).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, oracle_count);
    }

    #[test]
    fn indefinite_operator_detected() {
        let a = SparseMatrix::from_coo(2, 2, vec![(0, 0, 1.0), (1, 1, -1.0)], true).unwrap();
        let b = vec![1.0, 1.0];
        let err = pcg(&a, &IdentityOp(2), &b, 1e-8, 50, None);
        assert!(matches!(err, Err(KrylovError::IndefiniteOperator { .. })));
    }

    #[test]
    fn maxit_exhaustion_is_not_an_error() {
        let a = gallery::laplacian_2d(16, 16);
        let b = gallery::uniform_rhs(a.n(), 4);
        let (_, rep) = pcg(&a, &IdentityOp(a.n()), &b, 1e-12, 3, None).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
        assert_eq!(rep.relative_residual_history.len(), 4);
    }

    #[test]
    fn pcg_error_is_monotone_in_a_norm() {
        let a = gallery::random_sparse_spd(40, 0.3, 21);
        let b = gallery::uniform_rhs(40, 22);
        let ad = a.to_dense().to_dmatrix();
        let x_star = ad.clone().lu().solve(&nalgebra::DVector::from_column_slice(&b)).unwrap();
        let mut prev = f64::INFINITY;
        for j in 1..=25 {
            let (x, _) = pcg(&a, &IdentityOp(40), &b, 0.0, j, None).unwrap();
            let e = nalgebra::DVector::from_column_slice(&x) - &x_star;
            let err_a = (e.transpose() * &ad * &e)[(0, 0)].max(0.0).sqrt();
            assert!(err_a <= prev * (1.0 + 1e-10), "A-norm error grew at step {j}");
            prev = err_a;
        }
    }

    #[test]
    fn cg_error_bound_holds_at_every_iteration() {
        // ||x* - x_k||_A <= 2 ||x* - x_0||_A ((sqrt(k)-1)/(sqrt(k)+1))^k
        for seed in 0..5u64 {
            let n = 60 + 20 * seed as usize;
            let spectrum: Vec<f64> =
                (0..n).map(|i| 1.0 + 99.0 * i as f64 / (n - 1) as f64).collect();
            let a = gallery::spd_with_spectrum(&spectrum, seed);
            let b = gallery::gaussian_rhs(n, 100 + seed);
            let ad = a.to_dense().to_dmatrix();
            let x_star =
                ad.clone().lu().solve(&nalgebra::DVector::from_column_slice(&b)).unwrap();
            let kappa: f64 = 100.0; // by construction of the spectrum
            let rho = (kappa.sqrt() - 1.0) / (kappa.sqrt() + 1.0);
            let e0 = x_star.clone();
            let err0_a = (e0.transpose() * &ad * &e0)[(0, 0)].sqrt();
            let kmax = 60;
            for j in 1..=kmax {
                let (x, rep) = pcg(&a, &IdentityOp(n), &b, 1e-8, j, None).unwrap();
                let e = nalgebra::DVector::from_column_slice(&x) - &x_star;
                let err_a = (e.transpose() * &ad * &e)[(0, 0)].max(0.0).sqrt();
                let bound = 2.0 * err0_a * rho.powi(j as i32);
                assert!(
                    err_a <= bound * (1.0 + 1e-8),
                    "seed {seed} iter {j}: {err_a:.3e} > {bound:.3e}"
                );
                if rep.converged {
                    break;
                }
            }
        }
    }

    #[test]
    fn block_identity_converges_in_one_iteration() {
        let a = SparseMatrix::identity(8);
        let b = DenseBlock::from_values(8, 3, gallery::uniform_rhs(24, 5)).unwrap();
        let (x, rep) = block_pcg(&a, &IdentityOp(8), &b, 1e-12, 50).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        let mut diff = x;
        diff.axpy(-1.0, &b);
        assert!(diff.frob_norm() <= 1e-13);
    }

    #[test]
    fn duplicate_columns_deflate_at_first_iteration() {
        let diag: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let a = SparseMatrix::from_coo(
            20,
            20,
            diag.iter().enumerate().map(|(i, &d)| (i, i, d)).collect(),
            true,
        )
        .unwrap();
        let col = gallery::uniform_rhs(20, 6);
        let mut b = DenseBlock::zeros(20, 2);
        b.col_mut(0).copy_from_slice(&col);
        b.col_mut(1).copy_from_slice(&col);
        let (x, rep) = block_pcg(&a, &IdentityOp(20), &b, 1e-10, 100).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.direction_counts[0], 1, "duplicate direction must deflate at iteration 1");
        assert_eq!(x.col(0), x.col(1));
    }

    #[test]
    fn block_iterations_bounded_by_worst_single_rhs() {
        let a = gallery::laplacian_2d(24, 24);
        let n = a.n();
        for seed in 0..3u64 {
            let b = DenseBlock::from_values(n, 8, gallery::gaussian_rhs(8 * n, 30 + seed)).unwrap();
            let (_, block_rep) = block_pcg(&a, &IdentityOp(n), &b, 1e-6, 5000).unwrap();
            assert!(block_rep.converged);
            let mut worst = 0usize;
            for c in 0..8 {
                let (_, rep) = pcg(&a, &IdentityOp(n), b.col(c), 1e-6, 5000, None).unwrap();
                worst = worst.max(rep.iterations);
            }
            assert!(
                block_rep.iterations <= worst,
                "seed {seed}: block {} > worst single {}",
                block_rep.iterations,
                worst
            );
        }
    }

    #[test]
    fn block_with_one_rhs_matches_pcg_iterates() {
        let a = gallery::random_sparse_spd(30, 0.25, 40);
        let b = gallery::uniform_rhs(30, 41);
        let bb = DenseBlock::from_column(&b);
        for j in 1..=12 {
            let (x1, _) = pcg(&a, &IdentityOp(30), &b, 0.0, j, None).unwrap();
            let (xb, _) = block_pcg(&a, &IdentityOp(30), &bb, 0.0, j).unwrap();
            let scale = vec_norm(&x1).max(1.0);
            for (u, v) in x1.iter().zip(xb.col(0)) {
                assert!(
                    (u - v).abs() <= 1e-12 * scale,
                    "iterate {j} differs: {u} vs {v}"
                );
            }
        }
    }

    #[test]
    fn stagnation_when_rhs_in_tiny_subspace() {
        // all columns zero except one already-converged direction is fine;
        // a fully zero block converges immediately instead of stagnating
        let a = SparseMatrix::identity(5);
        let b = DenseBlock::zeros(5, 2);
        let (_, rep) = block_pcg(&a, &IdentityOp(5), &b, 1e-10, 10).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn lanczos_diagonal_largest() {
        let diag: Vec<f64> = (1..=50).map(|i| i as f64).collect();
        let a = SparseMatrix::from_coo(
            50,
            50,
            diag.iter().enumerate().map(|(i, &d)| (i, i, d)).collect(),
            true,
        )
        .unwrap();
        let rep = lanczos_thick_restart(&a, 3, 12, 1e-10, EigenWhich::Largest).unwrap();
        assert!(rep.converged);
        assert!((rep.values[0] - 50.0).abs() <= 1e-10 * 50.0);
        assert!((rep.values[1] - 49.0).abs() <= 1e-10 * 50.0);
        assert!((rep.values[2] - 48.0).abs() <= 1e-10 * 50.0);
    }

    #[test]
    fn lanczos_rank_one() {
        let n = 25;
        let u = gallery::gaussian_rhs(n, 50);
        let unorm2 = vec_dot(&u, &u);
        let mut dense = DenseBlock::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                dense.set(i, j, u[i] * u[j]);
            }
        }
        let op = DenseOp(dense);
        let rep = lanczos_thick_restart(&op, 1, 4, 1e-10, EigenWhich::Largest).unwrap();
        assert!(rep.converged);
        assert!((rep.values[0] - unorm2).abs() <= 1e-9 * unorm2);
        // vector parallel to u
        let v = rep.vectors.col(0);
        let cos = vec_dot(v, &u).abs() / (vec_norm(v) * vec_norm(&u));
        assert!((cos - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn lanczos_smallest_matches_dense_oracle() {
        let a = gallery::laplacian_2d(30, 30);
        let rep = lanczos_thick_restart(&a, 10, 40, 1e-10, EigenWhich::Smallest).unwrap();
        assert!(rep.converged);
        let eig = nalgebra::SymmetricEigen::new(a.to_dense().to_dmatrix());
        let mut all: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        all.sort_by(|x, y| x.partial_cmp(y).unwrap());
        // report is descending; compare against the 10 smallest
        let mut got = rep.values.clone();
        got.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (g, e) in got.iter().zip(all.iter().take(10)) {
            assert!((g - e).abs() <= 1e-8 * e.abs().max(1.0), "{g} vs {e}");
        }
        // reported residual bound holds and values are descending
        let opnorm = *all.last().unwrap();
        for w in rep.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        for (i, &r) in rep.residual_norms.iter().enumerate() {
            let av = a.spmv(rep.vectors.col(i)).unwrap();
            let mut res = av.clone();
            for (rj, vj) in res.iter_mut().zip(rep.vectors.col(i)) {
                *rj -= rep.values[i] * vj;
            }
            assert!(vec_norm(&res) <= (r + 1e-10) + 1e-8 * opnorm);
        }
    }

    #[test]
    fn lanczos_rejects_bad_restart_dim() {
        let a = SparseMatrix::identity(10);
        assert!(matches!(
            lanczos_thick_restart(&a, 4, 5, 1e-8, EigenWhich::Largest),
            Err(KrylovError::InvalidConfig(_))
        ));
    }
}
