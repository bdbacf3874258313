use super::matrix::{DenseHermitian, EigenPairs, VectorBlock};
use crate::error::{EigenError, Result};

const MAX_SWEEPS: usize = 100;
const OFF_DIAG_TOL: f64 = 1e-14;

/// Full spectrum of a small symmetric matrix by cyclic Jacobi rotations.
///
/// Values come back in ascending signed order with the matching orthonormal
/// eigenvector columns. Stops when the off-diagonal Frobenius norm drops
/// below `1e-14 * ||G||_F`; errors out after 100 sweeps.
pub fn small_symmetric_eig(g: &DenseHermitian) -> Result<EigenPairs> {
    let n = g.n();
    let mut a: Vec<f64> = g.as_slice().to_vec();
    let mut v = vec![0.0f64; n * n]; // row-major accumulator
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let fro = g.norm_fro();
    let stop = OFF_DIAG_TOL * fro;

    let mut converged = fro == 0.0 || n == 1;
    let mut last_off = 0.0;
    if !converged {
        for _sweep in 0..MAX_SWEEPS {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += 2.0 * a[p * n + q] * a[p * n + q];
                }
            }
            last_off = off.sqrt();
            if last_off <= stop {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = if theta.abs() > 1e150 {
                        0.5 / theta
                    } else {
                        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                        sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                    };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;

                    a[p * n + p] = app - t * apq;
                    a[q * n + q] = aqq + t * apq;
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    for i in 0..n {
                        if i != p && i != q {
                            let aip = a[i * n + p];
                            let aiq = a[i * n + q];
                            a[i * n + p] = c * aip - s * aiq;
                            a[p * n + i] = a[i * n + p];
                            a[i * n + q] = s * aip + c * aiq;
                            a[q * n + i] = a[i * n + q];
                        }
                    }
                    for i in 0..n {
                        let vip = v[i * n + p];
                        let viq = v[i * n + q];
                        v[i * n + p] = c * vip - s * viq;
                        v[i * n + q] = s * vip + c * viq;
                    }
                }
            }
        }
    }
    if !converged {
        return Err(EigenError::JacobiNonConvergence {
            off_diagonal: last_off,
            sweeps: MAX_SWEEPS,
        });
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values: Vec<f64> = idx.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = VectorBlock::zeros(n, n);
    for (dst, &src) in idx.iter().enumerate() {
        let col = vectors.col_mut(dst);
        for i in 0..n {
            col[i] = v[i * n + src];
        }
    }
    Ok(EigenPairs { values, vectors })
}
