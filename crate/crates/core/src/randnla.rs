//! Gaussian sketching and the Nystrom low-rank approximation of SPSD
//! operators, with oversampling, power iteration, and eigenvalue
//! thresholding.
//!
//! The sketch generator is ChaCha20 with standard-normal entries drawn
//! column by column, so a given seed reproduces the same sketch everywhere.

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::dense::DenseBlock;
use crate::error::RandNlaError;
use crate::krylov::LinearOperator;

/// Parameters of a randomized sketch: target rank `k`, oversampling `p`,
/// power iterations `q`, eigenvalue threshold `epsilon` (0 selects the
/// default 1e-12 times the largest core eigenvalue), and the sketch seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SketchConfig {
    pub k: usize,
    pub p: usize,
    pub q: usize,
    pub epsilon: f64,
    pub seed: u64,
}

impl SketchConfig {
    pub fn new(k: usize) -> Self {
        Self { k, p: 0, q: 0, epsilon: 0.0, seed: 0 }
    }

    pub fn sketch_cols(&self) -> usize {
        self.k + self.p
    }

    fn validate(&self, dim: usize) -> Result<(), RandNlaError> {
        if self.k == 0 {
            return Err(RandNlaError::InvalidConfig("rank k must be at least 1".into()));
        }
        if self.k + self.p > dim {
            return Err(RandNlaError::InvalidConfig(format!(
                "k + p = {} exceeds the operator dimension {dim}",
                self.k + self.p
            )));
        }
        if self.epsilon < 0.0 {
            return Err(RandNlaError::InvalidConfig("epsilon must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Orthonormal factor and eigenvalues of a truncated SPSD approximation
/// B ~= U diag(sigma) U^T. `sigma` is nonnegative and descending; the rank
/// may come out below the requested k when the core spectrum collapses.
#[derive(Debug, Clone)]
pub struct LowRankApprox {
    pub u: DenseBlock,
    pub sigma: Vec<f64>,
}

impl LowRankApprox {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn empty(n: usize) -> Self {
        Self { u: DenseBlock::zeros(n, 0), sigma: Vec::new() }
    }

    /// Applies U diag(sigma) U^T to a block.
    pub fn apply(&self, x: &DenseBlock) -> DenseBlock {
        let mut utx = self.u.transpose_matmul(x);
        for c in 0..utx.cols {
            for (v, s) in utx.col_mut(c).iter_mut().zip(&self.sigma) {
                *v *= s;
            }
        }
        self.u.matmul(&utx)
    }
}

/// An `n x m` block of i.i.d. standard normal entries from a seeded ChaCha20
/// generator, filled column by column. Identical seeds give identical
/// matrices on every platform.
pub fn gaussian_sketch(n: usize, m: usize, seed: u64) -> DenseBlock {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut g = DenseBlock::zeros(n, m);
    for j in 0..m {
        for i in 0..n {
            g.set(i, j, rng.sample::<f64, _>(StandardNormal));
        }
    }
    g
}

/// Thin QR orthonormalization (all columns kept).
fn orthonormalize(x: &DenseBlock) -> DenseBlock {
    let qr = x.to_dmatrix().qr();
    let q = qr.q();
    let mut out = DenseBlock::zeros(x.rows, x.cols.min(q.ncols()));
    for j in 0..out.cols {
        for i in 0..out.rows {
            out.set(i, j, q[(i, j)]);
        }
    }
    out
}

/// Symmetric eigendecomposition sorted descending.
fn sym_eig_desc(m: &DenseBlock) -> (Vec<f64>, DenseBlock) {
    let n = m.rows;
    // symmetrize before decomposing
    let mut s = m.clone();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (s.get(i, j) + s.get(j, i));
            s.set(i, j, v);
            s.set(j, i, v);
        }
    }
    let eig = nalgebra::SymmetricEigen::new(s.to_dmatrix());
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let values: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DenseBlock::zeros(n, n);
    for (out_c, &c) in idx.iter().enumerate() {
        for i in 0..n {
            vectors.set(i, out_c, eig.eigenvectors[(i, c)]);
        }
    }
    (values, vectors)
}

/// Nystrom approximation of an SPSD operator.
///
/// Draws a Gaussian sketch with k + p columns, optionally runs q power
/// iterations with orthonormalization between applications, then builds the
/// pseudo-inverse core through a thresholded eigendecomposition: the sketch
/// F = BG is factored F = QR, the core C = G^T F is split at the threshold,
/// T = (R V1) D1^{-1} (R V1)^T is decomposed, and the top min(r, k) pairs are
/// assembled with U = Q W.
pub fn nystrom_approx<B>(b: &B, cfg: &SketchConfig) -> Result<LowRankApprox, RandNlaError>
where
    B: LinearOperator + ?Sized,
{
    let n = b.dim();
    cfg.validate(n)?;
    let mut g = gaussian_sketch(n, cfg.sketch_cols(), cfg.seed);
    for _ in 0..cfg.q {
        g = orthonormalize(&b.apply_block(&g));
    }
    let f = b.apply_block(&g);
    if !f.values.iter().all(|v| v.is_finite()) {
        return Err(RandNlaError::NumericalFailure);
    }

    let fd = f.to_dmatrix();
    let qr = fd.clone().qr();
    let q = qr.q();
    let r = qr.r();

    let c = g.transpose_matmul(&f);
    let (d, v) = sym_eig_desc(&c);
    let d_max = d.first().copied().unwrap_or(0.0);
    if d_max <= 0.0 {
        return Err(RandNlaError::RankCollapse);
    }
    let eps = if cfg.epsilon > 0.0 { cfg.epsilon } else { 1e-12 * d_max };
    let r_count = d.iter().take_while(|&&x| x >= eps).count();
    if r_count == 0 {
        return Err(RandNlaError::RankCollapse);
    }

    // T = (R V1) D1^{-1} (R V1)^T, assembled as W W^T with W = R V1 D1^{-1/2}
    let v1 = v.select_columns(&(0..r_count).collect::<Vec<_>>());
    let mut rv = DenseBlock::from_dmatrix(&(&r * v1.to_dmatrix()));
    for j in 0..r_count {
        let scale = 1.0 / d[j].sqrt();
        rv.scale_col(j, scale);
    }
    let t = rv.matmul(&rv.transpose());
    let (e, w) = sym_eig_desc(&t);

    let rank = r_count.min(cfg.k);
    let w_top = w.select_columns(&(0..rank).collect::<Vec<_>>());
    let u = DenseBlock::from_dmatrix(&(&q * w_top.to_dmatrix()));
    let sigma: Vec<f64> = e.iter().take(rank).map(|&x| x.max(0.0)).collect();
    if !sigma.iter().all(|v| v.is_finite()) || !u.values.iter().all(|v| v.is_finite()) {
        return Err(RandNlaError::NumericalFailure);
    }
    Ok(LowRankApprox { u, sigma })
}

/// Sine of the largest principal angle between two orthonormal ranges,
/// computed as || U U^T - V V^T ||_2 by a dense singular-value oracle.
pub fn subspace_angle(u: &DenseBlock, v: &DenseBlock) -> Result<f64, RandNlaError> {
    if u.rows != v.rows {
        return Err(RandNlaError::DimensionMismatch(format!(
            "row dimensions differ: {} vs {}",
            u.rows, v.rows
        )));
    }
    for (name, m) in [("first", u), ("second", v)] {
        let gram = m.transpose_matmul(m);
        let mut dev = 0.0f64;
        for i in 0..gram.rows {
            for j in 0..gram.cols {
                let expect = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((gram.get(i, j) - expect).abs());
            }
        }
        if dev > 1e-8 {
            let _ = name;
            return Err(RandNlaError::NotOrthonormal(dev));
        }
    }
    let n = u.rows;
    let mut diff = nalgebra::DMatrix::<f64>::zeros(n, n);
    let ud = u.to_dmatrix();
    let vd = v.to_dmatrix();
    diff += &ud * ud.transpose();
    diff -= &vd * vd.transpose();
    Ok(diff.svd(false, false).singular_values.max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::DenseOp;

    fn diag_op(values: &[f64]) -> DenseOp {
        let n = values.len();
        let mut d = DenseBlock::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            d.set(i, i, v);
        }
        DenseOp(d)
    }

    fn spectral_norm(m: &DenseBlock) -> f64 {
        m.to_dmatrix().svd(false, false).singular_values.max()
    }

    #[test]
    fn sketch_is_deterministic_and_normal() {
        let a = gaussian_sketch(50, 3, 42);
        let b = gaussian_sketch(50, 3, 42);
        assert_eq!(a.values, b.values);
        // law of large numbers on a bigger sample
        let g = gaussian_sketch(10000, 2, 0);
        for c in 0..2 {
            let col = g.col(c);
            let mean: f64 = col.iter().sum::<f64>() / 10000.0;
            let var: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 9999.0;
            assert!(mean.abs() <= 4.0 / 100.0, "mean {mean}");
            assert!((var - 1.0).abs() <= 0.1, "variance {var}");
        }
        // degenerate empty block
        let empty = gaussian_sketch(5, 0, 1);
        assert_eq!(empty.cols, 0);
    }

    #[test]
    fn rank_one_recovered_exactly() {
        let n = 30;
        let mut u = crate::gallery::gaussian_rhs(n, 7);
        let nu = crate::dense::vec_norm(&u);
        for v in &mut u {
            *v /= nu;
        }
        let mut m = DenseBlock::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, u[i] * u[j]);
            }
        }
        let approx = nystrom_approx(
            &DenseOp(m),
            &SketchConfig { k: 1, p: 2, q: 0, epsilon: 0.0, seed: 3 },
        )
        .unwrap();
        assert_eq!(approx.rank(), 1);
        assert!((approx.sigma[0] - 1.0).abs() <= 1e-10);
        let cos = crate::dense::vec_dot(approx.u.col(0), &u).abs();
        assert!((cos - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn zero_matrix_collapses() {
        let z = DenseOp(DenseBlock::zeros(10, 10));
        let err = nystrom_approx(&z, &SketchConfig { k: 2, p: 2, q: 0, epsilon: 0.0, seed: 0 });
        assert!(matches!(err, Err(RandNlaError::RankCollapse)));
    }

    #[test]
    fn decaying_diagonal_error_within_truncation_bound() {
        let vals = [10.0, 5.0, 2.0, 1.0, 0.5, 0.1, 0.05, 0.01, 0.005, 0.001];
        let op = diag_op(&vals);
        let mut total = 0.0;
        for seed in 0..20 {
            let ap = nystrom_approx(
                &op,
                &SketchConfig { k: 3, p: 3, q: 1, epsilon: 0.0, seed },
            )
            .unwrap();
            // || B - U S U^T ||_2
            let mut diff = op.0.clone();
            let approx = ap.apply(&DenseBlock::identity(10));
            diff.axpy(-1.0, &approx);
            total += spectral_norm(&diff);
        }
        let mean = total / 20.0;
        assert!(mean <= 10.0 * 1.0, "mean spectral error {mean} above 10 * sigma_4");
    }

    #[test]
    fn exact_on_low_rank_inputs() {
        for seed in 0..20u64 {
            let n = 40;
            let r = 3 + (seed as usize % 3);
            let y = gaussian_sketch(n, r, 900 + seed);
            let b = y.matmul(&y.transpose());
            let op = DenseOp(b.clone());
            let k = r + 1;
            let ap = nystrom_approx(
                &op,
                &SketchConfig { k, p: 2, q: 0, epsilon: 0.0, seed: 33 + seed },
            )
            .unwrap();
            assert!(ap.rank() <= k);
            let approx = ap.apply(&DenseBlock::identity(n));
            let mut diff = b.clone();
            diff.axpy(-1.0, &approx);
            let rel = diff.frob_norm() / b.frob_norm();
            assert!(rel <= 1e-9, "seed {seed}: relative error {rel}");
            // PSD output
            assert!(ap.sigma.iter().all(|&s| s >= 0.0));
            for w in ap.sigma.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn orthonormality_invariant() {
        let vals: Vec<f64> = (0..40).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let op = diag_op(&vals);
        let ap = nystrom_approx(
            &op,
            &SketchConfig { k: 6, p: 4, q: 1, epsilon: 0.0, seed: 5 },
        )
        .unwrap();
        let gram = ap.u.transpose_matmul(&ap.u);
        let mut dev: f64 = 0.0;
        for i in 0..gram.rows {
            for j in 0..gram.cols {
                let e = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((gram.get(i, j) - e).abs());
            }
        }
        assert!(dev <= 1e-10);
    }

    #[test]
    fn power_iteration_improves_slow_spectra() {
        // slowly decaying spectrum; mean error over 20 seeds must not grow in q
        let vals: Vec<f64> = (0..60).map(|i| 1.0 / (1.0 + i as f64).sqrt()).collect();
        let op = diag_op(&vals);
        let mut means = Vec::new();
        for q in [0usize, 1, 2, 4] {
            let mut total = 0.0;
            for seed in 0..20 {
                let ap = nystrom_approx(
                    &op,
                    &SketchConfig { k: 5, p: 2, q, epsilon: 0.0, seed: 100 + seed },
                )
                .unwrap();
                let approx = ap.apply(&DenseBlock::identity(60));
                let mut diff = op.0.clone();
                diff.axpy(-1.0, &approx);
                total += spectral_norm(&diff);
            }
            means.push(total / 20.0);
        }
        for w in means.windows(2) {
            assert!(w[1] <= w[0], "mean error grew with q: {means:?}");
        }
    }

    #[test]
    fn angle_bound_expectation_holds() {
        // sin angle(u_j, range(U_full)) <= gamma^(q+1) E(c) in the mean
        let n = 80;
        let k = 8;
        let p = 4;
        let mu: Vec<f64> = (0..n).map(|i| 2f64.powi(-(i as i32))).collect();
        let op = diag_op(&mu);
        let e_c = (k as f64 / (p as f64 - 1.0)).sqrt()
            + std::f64::consts::E * (((k + p) * (n - k)) as f64).sqrt() / p as f64;
        for q in [0usize, 1] {
            let mut mean_angle = vec![0.0f64; k];
            let trials = 50;
            for seed in 0..trials {
                let full = nystrom_approx(
                    &op,
                    &SketchConfig { k: k + p, p: 0, q, epsilon: 0.0, seed: 5000 + seed },
                )
                .unwrap();
                // measure ||e_j - U U^T e_j|| for the top-k eigenvectors e_j
                for j in 0..k {
                    let mut ej = vec![0.0; n];
                    ej[j] = 1.0;
                    let utej = full.u.transpose_matmul(&DenseBlock::from_column(&ej));
                    let proj = full.u.matmul(&utej);
                    let mut resid = ej;
                    for (r, p) in resid.iter_mut().zip(&proj.values) {
                        *r -= p;
                    }
                    mean_angle[j] += crate::dense::vec_norm(&resid);
                }
            }
            for j in 0..k {
                mean_angle[j] /= trials as f64;
                let gamma = mu[k] / mu[j];
                let bound = gamma.powi(q as i32 + 1) * e_c;
                assert!(
                    mean_angle[j] <= bound,
                    "q={q} j={j}: mean angle {:.3e} above bound {:.3e}",
                    mean_angle[j],
                    bound
                );
            }
        }
    }

    #[test]
    fn subspace_angle_examples() {
        let u = DenseBlock::from_values(3, 1, vec![1.0, 0.0, 0.0]).unwrap();
        let v = DenseBlock::from_values(3, 1, vec![0.0, 1.0, 0.0]).unwrap();
        assert!(subspace_angle(&u, &u).unwrap() <= 1e-12);
        assert!((subspace_angle(&u, &v).unwrap() - 1.0).abs() <= 1e-12);
        // non-orthonormal input rejected
        let bad = DenseBlock::from_values(3, 1, vec![2.0, 0.0, 0.0]).unwrap();
        assert!(matches!(subspace_angle(&bad, &u), Err(RandNlaError::NotOrthonormal(_))));
    }

    #[test]
    fn subspace_angle_matches_svd_oracle() {
        let g1 = gaussian_sketch(30, 3, 60);
        let g2 = gaussian_sketch(30, 3, 61);
        let u = orthonormalize(&g1);
        let v = orthonormalize(&g2);
        let angle = subspace_angle(&u, &v).unwrap();
        // principal angles via the SVD of U^T V
        let svd = u.transpose_matmul(&v).to_dmatrix().svd(false, false);
        let min_cos = svd.singular_values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let oracle = (1.0 - min_cos * min_cos).max(0.0).sqrt();
        assert!((angle - oracle).abs() <= 1e-12, "{angle} vs {oracle}");
    }
}
