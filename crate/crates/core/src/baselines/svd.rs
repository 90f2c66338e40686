//! Truncated SVD of a sparse matrix by randomized subspace iteration.
//!
//! A Gaussian test block is pushed through `A` and `A^T` repeatedly, with a
//! QR re-orthonormalisation after every product, until the leading singular
//! values of the projected matrix stop moving. The small projected problem
//! is solved densely.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SparseMatrix;
use crate::error::{Error, Result};

const OVERSAMPLE: usize = 10;
const MAX_ITERS: usize = 500;
const TOLERANCE: f64 = 1e-13;

/// Rank-`d` factorisation `A ~ left * diag(singular_values) * right^T`.
#[derive(Clone, Debug)]
pub struct LatentFactorization {
    /// `rows x d`, orthonormal columns.
    pub left: DMatrix<f64>,
    /// Descending, non-negative.
    pub singular_values: DVector<f64>,
    /// `cols x d`, orthonormal columns.
    pub right: DMatrix<f64>,
}

impl LatentFactorization {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.left * DMatrix::from_diagonal(&self.singular_values) * self.right.transpose()
    }

    /// Frobenius norm of `m - reconstruct()`.
    pub fn residual(&self, m: &SparseMatrix) -> f64 {
        (m.to_dense() - self.reconstruct()).norm()
    }
}

fn orthonormal_basis(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

pub fn truncated_svd(m: &SparseMatrix, d: usize, seed: u64) -> Result<LatentFactorization> {
    let max_rank = m.rows().min(m.cols());
    if d == 0 || d > max_rank {
        return Err(Error::validation(format!(
            "rank {d} requested for a {}x{} matrix (must be in 1..={max_rank})",
            m.rows(),
            m.cols()
        )));
    }
    let block = (d + OVERSAMPLE).min(max_rank);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(m.cols(), block, |_, _| StandardNormal.sample(&mut rng));

    let mut q = orthonormal_basis(m.mul_dense(&omega));
    let mut previous: Option<DVector<f64>> = None;
    // full-rank blocks span the whole column space after one product
    let iterations = if block == max_rank { 1 } else { MAX_ITERS };
    for _ in 0..iterations {
        let z = orthonormal_basis(m.tr_mul_dense(&q));
        q = orthonormal_basis(m.mul_dense(&z));
        let sv = m.tr_mul_dense(&q).transpose().singular_values();
        let mut top: Vec<f64> = sv.iter().copied().collect();
        top.sort_by(|a, b| b.total_cmp(a));
        let top = DVector::from_vec(top[..d].to_vec());
        let scale = top[0].max(f64::MIN_POSITIVE);
        let converged = previous
            .as_ref()
            .is_some_and(|p| (p - &top).amax() / scale < TOLERANCE);
        previous = Some(top);
        if converged {
            break;
        }
    }

    // B = Q^T A is block x cols
    let b = m.tr_mul_dense(&q).transpose();
    let svd = b.svd(true, true);
    let (u_b, v_t) = (svd.u.expect("requested U"), svd.v_t.expect("requested V^T"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]).then(i.cmp(&j)));
    order.truncate(d);

    let left_full = &q * u_b;
    let mut left = DMatrix::zeros(m.rows(), d);
    let mut right = DMatrix::zeros(m.cols(), d);
    let mut singular_values = DVector::zeros(d);
    for (k, &src) in order.iter().enumerate() {
        let mut u_col = left_full.column(src).into_owned();
        let mut v_col = v_t.row(src).transpose();
        // deterministic sign: largest-magnitude entry of the right vector is positive
        let pivot = v_col.iamax();
        if v_col[pivot] < 0.0 {
            u_col.neg_mut();
            v_col.neg_mut();
        }
        left.set_column(k, &u_col);
        right.set_column(k, &v_col);
        singular_values[k] = svd.singular_values[src];
    }
    Ok(LatentFactorization {
        left,
        singular_values,
        right,
    })
}
