//! Degree-m Chebyshev polynomial filter and estimation of the damping
//! interval from prior spectral information.

use crate::error::{EigenError, Result};
use crate::linalg::{matmul_block, small_symmetric_eig, DenseHermitian, MatvecCounter, VectorBlock};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Fractional inflation applied to the damping interval edges. Prior-problem
/// Ritz values only approximate the new spectrum, so a margin keeps wanted
/// eigenvalues from landing inside the damped region.
pub const INTERVAL_MARGIN: f64 = 0.01;

/// Default filter degree.
pub const DEFAULT_DEGREE: usize = 20;

/// Scaled Chebyshev filter parameters: damping interval `[c - e, c + e]` and
/// the target edge `lambda` used for normalization.
#[derive(Debug, Clone, Copy)]
pub struct FilterParams {
    pub m: usize,
    pub lambda: f64,
    pub c: f64,
    pub e: f64,
}

impl FilterParams {
    pub fn new(m: usize, lambda: f64, c: f64, e: f64) -> Result<Self> {
        if m < 1 {
            return Err(EigenError::InvalidParameter("filter degree must be >= 1".into()));
        }
        if !(e > 0.0) || !e.is_finite() {
            return Err(EigenError::InvalidParameter(format!(
                "interval half-width must be positive, got {e}"
            )));
        }
        if lambda >= c - e && lambda <= c + e {
            return Err(EigenError::InvalidParameter(format!(
                "target edge {lambda} lies inside the damping interval [{}, {}]",
                c - e,
                c + e
            )));
        }
        Ok(Self { m, lambda, c, e })
    }

    pub fn alpha(&self) -> f64 {
        self.c - self.e
    }

    pub fn beta(&self) -> f64 {
        self.c + self.e
    }
}

/// Applies the degree-m scaled Chebyshev polynomial of `(A - cI)/e` to the
/// block, with the sigma-recurrence keeping the target edge normalized.
/// Counts exactly `m * Y0.k()` matvecs.
pub fn chebyshev_filter(
    a: &DenseHermitian,
    y0: &VectorBlock,
    params: &FilterParams,
    counter: &mut MatvecCounter,
) -> Result<VectorBlock> {
    if a.n() != y0.n() {
        return Err(EigenError::DimensionMismatch(format!(
            "matrix is {0}x{0} but block has {1} rows",
            a.n(),
            y0.n()
        )));
    }
    let FilterParams { m, lambda, c, e } = *params;
    let sigma1 = e / (lambda - c);

    // One application of the shifted operator (A - cI)/e.
    let shifted = |y: &VectorBlock, counter: &mut MatvecCounter| -> Result<VectorBlock> {
        let mut z = matmul_block(a, y, counter)?;
        let inv_e = 1.0 / e;
        for (zi, yi) in z.as_mut_slice().iter_mut().zip(y.as_slice()) {
            *zi = (*zi - c * yi) * inv_e;
        }
        Ok(z)
    };

    let mut y_prev = y0.clone();
    let mut y_curr = shifted(y0, counter)?;
    for v in y_curr.as_mut_slice() {
        *v *= sigma1;
    }

    let mut sigma = sigma1;
    for _ in 1..m {
        let sigma_next = 1.0 / (2.0 / sigma1 - sigma);
        let mut y_next = shifted(&y_curr, counter)?;
        let two_sigma_next = 2.0 * sigma_next;
        let decay = sigma_next * sigma;
        for (ni, pi) in y_next.as_mut_slice().iter_mut().zip(y_prev.as_slice()) {
            *ni = two_sigma_next * *ni - decay * pi;
        }
        y_prev = y_curr;
        y_curr = y_next;
        sigma = sigma_next;
    }
    Ok(y_curr)
}

/// Builds filter parameters for the standard case where the unwanted
/// spectrum sits above the current estimates.
///
/// `prior_values` are the current spectral estimates (the full solved/iterated
/// window); `upper_bound` must bound the spectrum from above. The interval
/// lower edge goes one margin above the largest prior value, the upper edge
/// one margin above the bound, and the target edge is the smallest prior
/// value.
pub fn build_filter_params(prior_values: &[f64], upper_bound: f64, m: usize) -> Result<FilterParams> {
    if prior_values.len() < 2 {
        return Err(EigenError::InvalidParameter(
            "need at least two prior values to build a filter interval".into(),
        ));
    }
    let mut sorted = prior_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let vmin = sorted[0];
    let vmax = sorted[sorted.len() - 1];
    let spread = vmax - vmin;
    let alpha = vmax + INTERVAL_MARGIN * spread;
    let beta = upper_bound + INTERVAL_MARGIN * upper_bound.abs();
    if upper_bound <= alpha || beta <= alpha {
        return Err(EigenError::EmptyInterval {
            upper: upper_bound,
            alpha,
        });
    }
    FilterParams::new(m, vmin, 0.5 * (alpha + beta), 0.5 * (beta - alpha))
}

/// Mirror image of [`build_filter_params`]: the unwanted spectrum sits below
/// the current estimates, so the damping interval spans from the lower bound
/// up to one margin below the smallest prior value.
pub fn build_filter_params_below(
    prior_values: &[f64],
    lower_bound: f64,
    m: usize,
) -> Result<FilterParams> {
    if prior_values.len() < 2 {
        return Err(EigenError::InvalidParameter(
            "need at least two prior values to build a filter interval".into(),
        ));
    }
    let mut sorted = prior_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let vmin = sorted[0];
    let vmax = sorted[sorted.len() - 1];
    let spread = vmax - vmin;
    let alpha = lower_bound - INTERVAL_MARGIN * lower_bound.abs();
    let beta = vmin - INTERVAL_MARGIN * spread;
    if lower_bound >= beta || beta <= alpha {
        return Err(EigenError::EmptyInterval {
            upper: lower_bound,
            alpha: beta,
        });
    }
    FilterParams::new(m, vmax, 0.5 * (alpha + beta), 0.5 * (beta - alpha))
}

/// Result of a short Lanczos run: outer estimates of the spectrum edges.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SpectralBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Upper estimate of the largest eigenvalue from `k` Lanczos steps with full
/// reorthogonalization. Costs `k` matvecs (fewer on breakdown).
pub fn estimate_upper_bound(
    a: &DenseHermitian,
    k: usize,
    seed: u64,
    counter: &mut MatvecCounter,
) -> Result<f64> {
    Ok(lanczos_bounds(a, k, seed, counter)?.upper)
}

pub(crate) fn lanczos_bounds(
    a: &DenseHermitian,
    k: usize,
    seed: u64,
    counter: &mut MatvecCounter,
) -> Result<SpectralBounds> {
    if k < 4 {
        return Err(EigenError::InvalidParameter(
            "Lanczos bound estimation needs at least 4 steps".into(),
        ));
    }
    let n = a.n();
    let steps = k.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alphas: Vec<f64> = Vec::with_capacity(steps);
    let mut betas: Vec<f64> = Vec::with_capacity(steps);

    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = crate::linalg::norm2(&v);
    for x in &mut v {
        *x /= norm;
    }

    let scale = a.norm_max().max(f64::MIN_POSITIVE);
    let mut last_beta = 0.0;
    let mut broke_down = false;

    for _ in 0..steps {
        basis.push(v.clone());
        let vb = VectorBlock::from_columns(n, 1, v.clone())?;
        let w_block = matmul_block(a, &vb, counter)?;
        let mut w = w_block.col(0).to_vec();
        let alpha = crate::linalg::dot(basis.last().unwrap(), &w);
        alphas.push(alpha);
        // full reorthogonalization, two passes
        for _ in 0..2 {
            for b in &basis {
                let s = crate::linalg::dot(b, &w);
                crate::linalg::axpy(-s, b, &mut w);
            }
        }
        let beta = crate::linalg::norm2(&w);
        if beta <= 1e-14 * scale || basis.len() == n {
            broke_down = true;
            break;
        }
        last_beta = beta;
        betas.push(beta);
        for x in w.iter_mut() {
            *x /= beta;
        }
        v = w;
    }

    let j = alphas.len();
    let mut t = DenseHermitian::zeros(j);
    for i in 0..j {
        t.set_sym(i, i, alphas[i]);
        if i + 1 < j {
            t.set_sym(i, i + 1, betas[i]);
        }
    }
    let eig = small_symmetric_eig(&t)?;
    let theta_min = eig.values[0];
    let theta_max = eig.values[j - 1];
    if broke_down {
        // invariant subspace: Ritz values are exact
        return Ok(SpectralBounds {
            lower: theta_min,
            upper: theta_max,
        });
    }
    // pad by the Ritz residual norm with a safety factor; the raw residual
    // bound only localizes *some* eigenvalue near theta, so it undershoots
    // lambda_max too often on its own
    let s_min = eig.vectors.col(0)[j - 1].abs();
    let s_max = eig.vectors.col(j - 1)[j - 1].abs();
    Ok(SpectralBounds {
        lower: theta_min - 3.0 * last_beta * s_min,
        upper: theta_max + 3.0 * last_beta * s_max,
    })
}

/// Scalar evaluation of the same sigma-scaled recurrence the block filter
/// uses. The solver relies on it for nothing; it exists for parameter
/// diagnostics and mirrors the definition exactly.
pub fn scalar_filter_value(x: f64, params: &FilterParams) -> f64 {
    let FilterParams { m, lambda, c, e } = *params;
    let sigma1 = e / (lambda - c);
    let t = (x - c) / e;
    let mut y_prev = 1.0;
    let mut y_curr = sigma1 * t;
    let mut sigma = sigma1;
    for _ in 1..m {
        let sigma_next = 1.0 / (2.0 / sigma1 - sigma);
        let y_next = 2.0 * sigma_next * t * y_curr - sigma_next * sigma * y_prev;
        y_prev = y_curr;
        y_curr = y_next;
        sigma = sigma_next;
    }
    y_curr
}
