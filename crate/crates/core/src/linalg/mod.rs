//! Dense real-symmetric kernels shared by the subspace solver, the ground
//! truth oracle, and the tests.

mod jacobi;
mod matrix;
mod qr;
mod tridiag;

pub use jacobi::small_symmetric_eig;
pub use matrix::{
    abs_value_order, axpy, dot, matmul_block, norm2, DenseHermitian, EigenPairs, MatvecCounter,
    VectorBlock,
};
pub use qr::{project_out, qr_orthonormalize, QrOrtho};
pub(crate) use qr::orthonormalize_dropping;

pub(crate) use matrix::{gemm, rotate};

use crate::error::{EigenError, Result};

/// Largest dimension the O(n^3) dense oracle accepts.
pub const ORACLE_CAP: usize = 2000;

/// `G = Q^T A Q`, symmetrized to kill roundoff asymmetry.
pub fn rayleigh_quotient(a: &DenseHermitian, q: &VectorBlock) -> Result<DenseHermitian> {
    if a.n() != q.n() {
        return Err(EigenError::DimensionMismatch(format!(
            "matrix is {0}x{0} but block has {1} rows",
            a.n(),
            q.n()
        )));
    }
    let aq = gemm(a, q);
    let k = q.k();
    let mut g = DenseHermitian::zeros(k);
    for i in 0..k {
        for j in i..k {
            let gij = dot(q.col(i), aq.col(j));
            let gji = dot(q.col(j), aq.col(i));
            g.set_sym(i, j, 0.5 * (gij + gji));
        }
    }
    Ok(g)
}

/// The `l` eigenpairs of `A` smallest in absolute value, from a full dense
/// decomposition. Ties on `|lambda|` break by signed value ascending.
pub fn dense_eig_oracle(a: &DenseHermitian, l: usize) -> Result<EigenPairs> {
    let n = a.n();
    if n > ORACLE_CAP {
        return Err(EigenError::OracleTooLarge { n, cap: ORACLE_CAP });
    }
    if l == 0 || l > n {
        return Err(EigenError::InvalidParameter(format!(
            "requested {l} eigenpairs from a {n}x{n} matrix"
        )));
    }
    let (values, vectors) = tridiag::symmetric_eig_ql(a)?;
    let order = abs_value_order(&values);
    let take = &order[..l];
    Ok(EigenPairs {
        values: take.iter().map(|&i| values[i]).collect(),
        vectors: vectors.select_columns(take),
    })
}

/// Per-pair relative residual `||A v - lambda v|| / ||A v||`.
///
/// When `||A v|| = 0` the metric is undefined; the residual falls back to
/// `||A v - 0 v|| / ||v||`.
pub fn relative_residuals(a: &DenseHermitian, pairs: &EigenPairs) -> Vec<f64> {
    let av = gemm(a, &pairs.vectors);
    (0..pairs.len())
        .map(|j| {
            let avj = av.col(j);
            let vj = pairs.vectors.col(j);
            let av_norm = norm2(avj);
            if norm2(vj) == 0.0 {
                // a vanished vector can never certify an eigenpair
                f64::INFINITY
            } else if av_norm == 0.0 {
                pairs.values[j].abs()
            } else {
                let lambda = pairs.values[j];
                let mut r2 = 0.0;
                for (a_i, v_i) in avj.iter().zip(vj) {
                    let d = a_i - lambda * v_i;
                    r2 += d * d;
                }
                r2.sqrt() / av_norm
            }
        })
        .collect()
}
