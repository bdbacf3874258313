use super::matrix::{dot, norm2, VectorBlock};
use rand::Rng;
use rand_distr::StandardNormal;

/// Relative threshold below which a post-projection column counts as
/// numerically dependent and gets replaced by a random direction.
const RANK_TOL: f64 = 1e-12;

pub struct QrOrtho {
    pub q: VectorBlock,
    /// Indices of input columns that were rank-deficient and replaced.
    pub replaced: Vec<usize>,
}

/// Householder orthonormalization of a column block.
///
/// Returns `Q` with the same span as the numerically independent input
/// columns. Columns whose post-projection norm falls below
/// `1e-12 * max(column norm)` are replaced with random Gaussian directions so
/// the block width stays constant.
pub fn qr_orthonormalize(y: &VectorBlock, rng: &mut impl Rng) -> QrOrtho {
    let n = y.n();
    let k = y.k();
    assert!(k <= n, "cannot orthonormalize {k} columns in dimension {n}");

    let mut m = y.clone();
    let max_norm = (0..k).map(|j| norm2(y.col(j))).fold(0.0f64, f64::max);
    let threshold = if max_norm > 0.0 {
        RANK_TOL * max_norm
    } else {
        f64::MIN_POSITIVE
    };

    let mut replaced = Vec::new();
    // Reflector j lives over rows j..n.
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(k);

    for j in 0..k {
        let mut sub_norm = norm2(&m.col(j)[j..]);
        if sub_norm < threshold {
            replaced.push(j);
            loop {
                for v in m.col_mut(j)[j..].iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                sub_norm = norm2(&m.col(j)[j..]);
                if sub_norm >= threshold {
                    break;
                }
            }
        }
        let a0 = m.col(j)[j];
        let alpha = if a0 >= 0.0 { -sub_norm } else { sub_norm };
        let mut u = m.col(j)[j..].to_vec();
        u[0] -= alpha;
        let unorm2 = dot(&u, &u);
        if unorm2 > 0.0 {
            for c in j + 1..k {
                let col = &mut m.col_mut(c)[j..];
                let s = 2.0 * dot(&u, col) / unorm2;
                for (ci, ui) in col.iter_mut().zip(&u) {
                    *ci -= s * ui;
                }
            }
        }
        reflectors.push(u);
    }

    // Q = H_0 ... H_{k-1} [I_k; 0]
    let mut q = VectorBlock::zeros(n, k);
    for j in 0..k {
        q.col_mut(j)[j] = 1.0;
    }
    for j in (0..k).rev() {
        let u = &reflectors[j];
        let unorm2 = dot(u, u);
        if unorm2 == 0.0 {
            continue;
        }
        for c in 0..k {
            let col = &mut q.col_mut(c)[j..];
            let s = 2.0 * dot(u, col) / unorm2;
            for (ci, ui) in col.iter_mut().zip(u) {
                *ci -= s * ui;
            }
        }
    }

    QrOrtho { q, replaced }
}

/// Modified Gram-Schmidt that drops dependent columns instead of repairing
/// them. Columns are orthogonalized (two passes) against `basis` and all
/// previously accepted columns; a column whose remaining norm falls below
/// `1e-12` of its original norm is discarded. Used on merged filter sweeps,
/// where the two sweeps may span the same invariant subspace and repair
/// directions would pollute it.
pub(crate) fn orthonormalize_dropping(basis: Option<&VectorBlock>, y: &VectorBlock) -> VectorBlock {
    let n = y.n();
    let mut accepted: Vec<Vec<f64>> = Vec::new();
    for j in 0..y.k() {
        let mut v = y.col(j).to_vec();
        let orig = norm2(&v);
        if !(orig > 0.0) {
            continue;
        }
        for _ in 0..2 {
            if let Some(b) = basis {
                for c in 0..b.k() {
                    let s = dot(b.col(c), &v);
                    for (vi, bi) in v.iter_mut().zip(b.col(c)) {
                        *vi -= s * bi;
                    }
                }
            }
            for u in &accepted {
                let s = dot(u, &v);
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= s * ui;
                }
            }
        }
        let rem = norm2(&v);
        if rem < RANK_TOL * orig {
            continue;
        }
        for vi in &mut v {
            *vi /= rem;
        }
        accepted.push(v);
    }
    let k = accepted.len();
    let mut q = VectorBlock::zeros(n, k);
    for (j, col) in accepted.into_iter().enumerate() {
        q.col_mut(j).copy_from_slice(&col);
    }
    q
}

/// Subtracts from every column of `block` its projection onto the columns of
/// `basis` (assumed orthonormal). Two passes keep the result orthogonal to
/// `basis` at working precision.
pub fn project_out(basis: &VectorBlock, block: &mut VectorBlock) {
    assert_eq!(basis.n(), block.n());
    for _ in 0..2 {
        for c in 0..block.k() {
            for b in 0..basis.k() {
                let s = dot(basis.col(b), block.col(c));
                let col = block.col_mut(c);
                for (ci, bi) in col.iter_mut().zip(basis.col(b)) {
                    *ci -= s * bi;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthonormalizes_unit_columns_up_to_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y = VectorBlock::from_columns(3, 2, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let out = qr_orthonormalize(&y, &mut rng);
        assert!(out.replaced.is_empty());
        assert!((out.q.col(0)[0].abs() - 1.0).abs() < 1e-14);
        assert!((out.q.col(1)[1].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exact_rank_deficiency_flags_second_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = VectorBlock::from_columns(3, 2, vec![1.0, 0.0, 0.0, 2.0, 0.0, 0.0]).unwrap();
        let out = qr_orthonormalize(&y, &mut rng);
        assert_eq!(out.replaced, vec![1]);
        assert!(out.q.gram_deviation() < 1e-12);
    }

    #[test]
    fn random_block_gram_matrix_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = VectorBlock::gaussian(50, 10, &mut rng);
        let out = qr_orthonormalize(&y, &mut rng);
        assert!(out.replaced.is_empty());
        assert!(out.q.gram_deviation() < 1e-12);
    }

    #[test]
    fn span_contains_independent_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = VectorBlock::gaussian(40, 8, &mut rng);
        let out = qr_orthonormalize(&y, &mut rng);
        // Y - Q Q^T Y should vanish for full-rank input.
        let mut resid = y.clone();
        project_out(&out.q, &mut resid);
        let max = resid.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max < 1e-10, "reconstruction error {max}");
    }

    #[test]
    fn project_out_leaves_orthogonal_complement() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let basis = qr_orthonormalize(&VectorBlock::gaussian(30, 5, &mut rng), &mut rng).q;
        let mut block = VectorBlock::gaussian(30, 4, &mut rng);
        project_out(&basis, &mut block);
        for b in 0..5 {
            for c in 0..4 {
                assert!(dot(basis.col(b), block.col(c)).abs() < 1e-12);
            }
        }
    }
}
