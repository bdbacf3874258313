//! Full-spectrum dense symmetric eigensolver: Householder tridiagonalization
//! followed by implicit-shift QL. This is the ground-truth path; the
//! subspace solver never calls into it, so the two routes stay independent.

use super::matrix::{DenseHermitian, VectorBlock};
use crate::error::{EigenError, Result};

const QL_MAX_ITERS: usize = 60;

/// Eigenvalues (ascending signed) and orthonormal eigenvectors of a dense
/// symmetric matrix.
pub(crate) fn symmetric_eig_ql(a: &DenseHermitian) -> Result<(Vec<f64>, VectorBlock)> {
    let n = a.n();
    let mut z: Vec<f64> = a.as_slice().to_vec(); // row-major, becomes the transform
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];

    tred2(n, &mut z, &mut d, &mut e);
    tql2(n, &mut z, &mut d, &mut e)?;

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values: Vec<f64> = idx.iter().map(|&i| d[i]).collect();
    let mut vectors = VectorBlock::zeros(n, n);
    for (dst, &src) in idx.iter().enumerate() {
        let col = vectors.col_mut(dst);
        for i in 0..n {
            col[i] = z[i * n + src];
        }
    }
    Ok((values, vectors))
}

/// Householder reduction to tridiagonal form with accumulated transform.
fn tred2(n: usize, z: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| z[i * n + k].abs()).sum();
            if scale == 0.0 {
                e[i] = z[i * n + l];
            } else {
                for k in 0..=l {
                    z[i * n + k] /= scale;
                    h += z[i * n + k] * z[i * n + k];
                }
                let f = z[i * n + l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z[i * n + l] = f - g;
                let mut f_acc = 0.0;
                for j in 0..=l {
                    z[j * n + i] = z[i * n + j] / h;
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += z[j * n + k] * z[i * n + k];
                    }
                    for k in j + 1..=l {
                        g += z[k * n + j] * z[i * n + k];
                    }
                    e[j] = g / h;
                    f_acc += e[j] * z[i * n + j];
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f = z[i * n + j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        z[j * n + k] -= f * e[k] + g * z[i * n + k];
                    }
                }
            }
        } else {
            e[i] = z[i * n + l];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += z[i * n + k] * z[k * n + j];
                }
                for k in 0..i {
                    z[k * n + j] -= g * z[k * n + i];
                }
            }
        }
        d[i] = z[i * n + i];
        z[i * n + i] = 1.0;
        for j in 0..i {
            z[j * n + i] = 0.0;
            z[i * n + j] = 0.0;
        }
    }
}

/// Implicit-shift QL on the tridiagonal (d, e) with eigenvector accumulation.
fn tql2(n: usize, z: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    if n == 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_ITERS {
                return Err(EigenError::JacobiNonConvergence {
                    off_diagonal: e[l].abs(),
                    sweeps: QL_MAX_ITERS,
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let sign_r = if g >= 0.0 { r } else { -r };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[k * n + i + 1];
                    z[k * n + i + 1] = s * z[k * n + i] + c * f;
                    z[k * n + i] = c * z[k * n + i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::jacobi::small_symmetric_eig;
    use crate::linalg::matrix::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_jacobi_on_random_symmetric_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for &n in &[2usize, 5, 17, 40] {
            let raw: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = DenseHermitian::from_rows(n, &raw).unwrap();
            let (vals, vecs) = symmetric_eig_ql(&a).unwrap();
            let jac = small_symmetric_eig(&a).unwrap();
            for (ql, j) in vals.iter().zip(&jac.values) {
                assert!((ql - j).abs() < 1e-10, "n={n}: {ql} vs {j}");
            }
            assert!(vecs.gram_deviation() < 1e-11);
        }
    }

    #[test]
    fn analytic_tridiagonal_laplacian_spectrum() {
        // -d2/dx2 on 5 interior points, dx = 1/6: eigenvalues of -A are
        // (4/dx^2) sin^2(k pi / 12).
        let n = 5;
        let dx = 1.0 / 6.0;
        let mut a = DenseHermitian::zeros(n);
        for i in 0..n {
            a.set_sym(i, i, -2.0 / (dx * dx));
            if i + 1 < n {
                a.set_sym(i, i + 1, 1.0 / (dx * dx));
            }
        }
        let (vals, _) = symmetric_eig_ql(&a).unwrap();
        let mut expect: Vec<f64> = (1..=n)
            .map(|k| {
                -4.0 / (dx * dx) * (k as f64 * std::f64::consts::PI / 12.0).sin().powi(2)
            })
            .collect();
        expect.sort_by(f64::total_cmp);
        for (got, want) in vals.iter().zip(&expect) {
            assert!((got - want).abs() < 1e-10 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn eigenvector_residuals_are_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let n = 50;
        let raw: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = DenseHermitian::from_rows(n, &raw).unwrap();
        let (vals, vecs) = symmetric_eig_ql(&a).unwrap();
        for j in 0..n {
            let v = vecs.col(j);
            let mut r2 = 0.0;
            for i in 0..n {
                let av = dot(a.row(i), v);
                let d = av - vals[j] * v[i];
                r2 += d * d;
            }
            assert!(r2.sqrt() < 1e-10 * a.norm_fro());
        }
    }
}
