//! Chebyshev filtered subspace iteration with locking and warm starts: the
//! filter, orthonormalize, Rayleigh-Ritz, residual-lock loop.

use crate::cheb::{
    build_filter_params, build_filter_params_below, chebyshev_filter, lanczos_bounds,
    DEFAULT_DEGREE,
};
use crate::error::{EigenError, Result};
use crate::linalg::{
    abs_value_order, orthonormalize_dropping, project_out, qr_orthonormalize, rayleigh_quotient,
    relative_residuals, rotate, small_symmetric_eig, DenseHermitian, EigenPairs, MatvecCounter,
    VectorBlock,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Lanczos steps spent on the one-off spectral bound estimate.
pub const BOUND_STEPS: usize = 12;

/// Orthonormality slack accepted from a warm start before re-orthonormalizing.
const WARM_GRAM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Wanted eigenpair count.
    pub l: usize,
    /// Inherited-subspace padding beyond the wanted count.
    pub extra: usize,
    /// Filter degree.
    pub m: usize,
    /// Relative-residual convergence threshold.
    pub tol: f64,
    pub max_iters: usize,
    /// Seed for random initialization and rank repair.
    pub seed: u64,
}

impl SolverConfig {
    /// Defaults: padding of 20% of L, degree 20, 200-iteration cap.
    pub fn new(l: usize, tol: f64) -> Self {
        Self {
            l,
            extra: l.div_ceil(5),
            m: DEFAULT_DEGREE,
            tol,
            max_iters: 200,
            seed: 0,
        }
    }

    /// Total iterated subspace width.
    pub fn width(&self) -> usize {
        self.l + self.extra
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.l < 1 {
            return Err(EigenError::InvalidParameter("L must be >= 1".into()));
        }
        if self.width() > n {
            return Err(EigenError::InvalidParameter(format!(
                "subspace width {} exceeds dimension {n}",
                self.width()
            )));
        }
        if !(self.tol > 0.0) {
            return Err(EigenError::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.m < 1 || self.max_iters < 1 {
            return Err(EigenError::InvalidParameter(
                "filter degree and iteration cap must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarmStartOrigin {
    PreviousProblem,
    Random,
}

/// Initial subspace and spectral estimates for one solve.
#[derive(Debug, Clone)]
pub struct WarmStart {
    /// Prior Ritz values; may be empty, in which case the solver derives them
    /// with one Rayleigh-Ritz pass on the block.
    pub values: Vec<f64>,
    pub vectors: VectorBlock,
    pub origin: WarmStartOrigin,
}

/// Outcome of one converged (or partially converged) solve.
#[derive(Debug, Clone)]
pub struct SolveRecord {
    /// The L wanted pairs, ascending `|lambda|`.
    pub pairs: EigenPairs,
    /// Relative residuals of the wanted pairs.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub matvecs: u64,
    /// `2 n^2 matvecs`: dense matvec cost model.
    pub filter_flops_estimate: f64,
    pub wall_seconds: f64,
    /// Locked count after each iteration.
    pub locked_history: Vec<usize>,
    /// The full final width-(L+extra) Ritz set, kept for warm-starting the
    /// next problem.
    pub subspace: EigenPairs,
}

#[derive(Debug)]
pub enum SolveError {
    /// Iteration cap hit; carries the best available partial record.
    MaxIters {
        partial: Box<SolveRecord>,
        worst_residual: f64,
    },
    Numeric(EigenError),
}

impl std::fmt::Display for SolveError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveError::MaxIters { worst_residual, .. } => write!(
                f,
                "iteration cap reached with worst wanted residual {worst_residual:.3e}"
            ),
            SolveError::Numeric(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SolveError {}

impl From<EigenError> for SolveError {
    fn from(e: EigenError) -> Self {
        SolveError::Numeric(e)
    }
}

pub type SolveResult = std::result::Result<SolveRecord, SolveError>;

/// Orthonormalized Gaussian block; Ritz values are derived lazily inside the
/// solve. Deterministic per seed.
pub fn random_warm_start(n: usize, width: usize, seed: u64) -> Result<WarmStart> {
    if width > n || width == 0 {
        return Err(EigenError::InvalidParameter(format!(
            "warm start width {width} invalid for dimension {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vectors = qr_orthonormalize(&VectorBlock::gaussian(n, width, &mut rng), &mut rng).q;
    Ok(WarmStart {
        values: Vec::new(),
        vectors,
        origin: WarmStartOrigin::Random,
    })
}

/// Warm start from a prior solve: its final subspace, truncated or padded
/// with random orthonormal columns to the configured width.
pub fn make_warm_start(prior: &SolveRecord, cfg: &SolverConfig) -> WarmStart {
    let width = cfg.width();
    let have = prior.subspace.len();
    if have >= width {
        let idx: Vec<usize> = (0..width).collect();
        return WarmStart {
            values: prior.subspace.values[..width].to_vec(),
            vectors: prior.subspace.vectors.select_columns(&idx),
            origin: WarmStartOrigin::PreviousProblem,
        };
    }
    let n = prior.subspace.vectors.n();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_5A17_F00D_BEEF);
    let mut pad = VectorBlock::gaussian(n, width - have, &mut rng);
    project_out(&prior.subspace.vectors, &mut pad);
    let pad = qr_orthonormalize(&pad, &mut rng).q;
    let vectors = prior
        .subspace
        .vectors
        .hcat(&pad)
        .expect("row counts match");
    // values stay partial: the solver re-derives them with a Rayleigh-Ritz
    // pass when the count does not match the width
    WarmStart {
        values: prior.subspace.values.clone(),
        vectors,
        origin: WarmStartOrigin::PreviousProblem,
    }
}

/// Runs the full filter / orthonormalize / Rayleigh-Ritz / lock loop.
///
/// The damping interval is rebuilt every iteration from the current Ritz
/// values. Locking is contiguous in the ascending-`|lambda|` target order.
/// When the Ritz window straddles zero, each outer iteration runs one
/// filtered sweep per spectral edge and merges the candidates before the
/// Rayleigh-Ritz step.
pub fn chfsi_solve(a: &DenseHermitian, warm: &WarmStart, cfg: &SolverConfig) -> SolveResult {
    let started = Instant::now();
    let n = a.n();
    cfg.validate(n)?;
    let width = cfg.width();
    if warm.vectors.n() != n || warm.vectors.k() != width {
        return Err(SolveError::Numeric(EigenError::DimensionMismatch(format!(
            "warm start block is {}x{}, expected {}x{}",
            warm.vectors.n(),
            warm.vectors.k(),
            n,
            width
        ))));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut counter = MatvecCounter::new();

    let mut q = warm.vectors.clone();
    if q.gram_deviation() > WARM_GRAM_TOL {
        q = qr_orthonormalize(&q, &mut rng).q;
    }
    let mut vals: Vec<f64>;
    if warm.origin == WarmStartOrigin::Random || warm.values.len() != width {
        // derive spectral estimates with one Rayleigh-Ritz pass
        let g = rayleigh_quotient(a, &q)?;
        let eig = small_symmetric_eig(&g)?;
        let ritz = rotate(&q, &eig.vectors);
        let order = abs_value_order(&eig.values);
        vals = order.iter().map(|&i| eig.values[i]).collect();
        q = ritz.select_columns(&order);
    } else {
        let order = abs_value_order(&warm.values);
        vals = order.iter().map(|&i| warm.values[i]).collect();
        q = q.select_columns(&order);
    }

    let bounds = lanczos_bounds(a, BOUND_STEPS, cfg.seed, &mut counter)?;

    let mut locked = 0usize;
    let mut locked_history = Vec::new();
    let mut iterations = 0usize;

    while locked < cfg.l && iterations < cfg.max_iters {
        iterations += 1;
        let w_act = width - locked;
        let locked_block = if locked > 0 {
            Some(q.select_columns(&(0..locked).collect::<Vec<_>>()))
        } else {
            None
        };
        let active = q.select_columns(&(locked..width).collect::<Vec<_>>());

        let vmin = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let vmax = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ztol = 1e-12 * vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let ub = bounds.upper.max(vmax);
        let lb = bounds.lower.min(vmin);

        // a sweep whose damping interval collapses (window already touches
        // that spectral edge) is skipped rather than fatal
        let sweep_above = |counter: &mut MatvecCounter| -> Result<Option<VectorBlock>> {
            match build_filter_params(&vals, ub, cfg.m) {
                Ok(p) => Ok(Some(chebyshev_filter(a, &active, &p, counter)?)),
                Err(EigenError::EmptyInterval { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        };
        let sweep_below = |counter: &mut MatvecCounter| -> Result<Option<VectorBlock>> {
            match build_filter_params_below(&vals, lb, cfg.m) {
                Ok(p) => Ok(Some(chebyshev_filter(a, &active, &p, counter)?)),
                Err(EigenError::EmptyInterval { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        };

        let mut candidates: Option<VectorBlock> = None;
        let mut merge = |blk: Option<VectorBlock>| -> Result<()> {
            if let Some(b) = blk {
                candidates = Some(match candidates.take() {
                    Some(c) => c.hcat(&b)?,
                    None => b,
                });
            }
            Ok(())
        };
        if vmin >= -ztol {
            // window at the bottom of the spectrum: damp above it
            merge(sweep_above(&mut counter).map_err(SolveError::Numeric)?)?;
        } else if vmax <= ztol {
            // window at the top: damp below it
            merge(sweep_below(&mut counter).map_err(SolveError::Numeric)?)?;
        } else {
            // indefinite window straddling zero: one sweep per spectral edge
            merge(sweep_above(&mut counter).map_err(SolveError::Numeric)?)?;
            merge(sweep_below(&mut counter).map_err(SolveError::Numeric)?)?;
        }
        // no usable damping interval: refine by Rayleigh-Ritz alone
        let mut cand = candidates.unwrap_or_else(|| active.clone());
        if cand.k() + locked > n {
            let keep: Vec<usize> = (0..n - locked).collect();
            cand = cand.select_columns(&keep);
        }

        // dependent columns (e.g. both sweeps imaging the same invariant
        // subspace) are dropped; random directions restore the width only if
        // the surviving rank falls short of the active block
        let mut q_act = orthonormalize_dropping(locked_block.as_ref(), &cand);
        while q_act.k() < w_act {
            let pad = VectorBlock::gaussian(n, w_act - q_act.k(), &mut rng);
            let joined = q_act.hcat(&pad).map_err(SolveError::Numeric)?;
            q_act = orthonormalize_dropping(locked_block.as_ref(), &joined);
        }

        let g = rayleigh_quotient(a, &q_act)?;
        let eig = small_symmetric_eig(&g)?;
        let ritz = rotate(&q_act, &eig.vectors);
        let keep: Vec<usize> = abs_value_order(&eig.values)
            .into_iter()
            .take(w_act)
            .collect();
        let act_vals: Vec<f64> = keep.iter().map(|&i| eig.values[i]).collect();
        let act_vecs = ritz.select_columns(&keep);

        let res = relative_residuals(
            a,
            &EigenPairs {
                values: act_vals.clone(),
                vectors: act_vecs.clone(),
            },
        );
        let mut newly = 0usize;
        while newly < res.len() && res[newly] <= cfg.tol {
            newly += 1;
        }

        q = match locked_block {
            Some(lb_block) => lb_block.hcat(&act_vecs)?,
            None => act_vecs,
        };
        vals.truncate(locked);
        vals.extend_from_slice(&act_vals);
        locked += newly;
        locked_history.push(locked);
    }

    let wanted_idx: Vec<usize> = (0..cfg.l).collect();
    let pairs = EigenPairs {
        values: vals[..cfg.l].to_vec(),
        vectors: q.select_columns(&wanted_idx),
    };
    let residuals = relative_residuals(a, &pairs);
    let record = SolveRecord {
        pairs,
        residuals: residuals.clone(),
        iterations,
        matvecs: counter.get(),
        filter_flops_estimate: 2.0 * (n * n) as f64 * counter.get() as f64,
        wall_seconds: started.elapsed().as_secs_f64(),
        locked_history,
        subspace: EigenPairs {
            values: vals,
            vectors: q,
        },
    };
    if locked >= cfg.l {
        Ok(record)
    } else {
        let worst = residuals.iter().cloned().fold(0.0f64, f64::max);
        Err(SolveError::MaxIters {
            partial: Box::new(record),
            worst_residual: worst,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense_eig_oracle;
    use rand::Rng;

    fn diag_matrix(vals: &[f64]) -> DenseHermitian {
        DenseHermitian::from_diagonal(vals)
    }

    fn cfg(l: usize, tol: f64, seed: u64) -> SolverConfig {
        let mut c = SolverConfig::new(l, tol);
        c.seed = seed;
        c
    }

    #[test]
    fn random_start_finds_the_bottom_of_a_diagonal() {
        let diag: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let a = diag_matrix(&diag);
        let c = cfg(3, 1e-10, 1);
        let warm = random_warm_start(10, c.width(), c.seed).unwrap();
        let rec = chfsi_solve(&a, &warm, &c).unwrap();
        for (got, want) in rec.pairs.values.iter().zip(&[1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        for r in &rec.residuals {
            assert!(*r < 1e-10);
        }
    }

    #[test]
    fn mirrored_spectrum_finds_the_top() {
        let diag: Vec<f64> = (1..=12).map(|i| -(i as f64)).collect();
        let a = diag_matrix(&diag);
        let c = cfg(3, 1e-10, 2);
        let warm = random_warm_start(12, c.width(), c.seed).unwrap();
        let rec = chfsi_solve(&a, &warm, &c).unwrap();
        for (got, want) in rec.pairs.values.iter().zip(&[-1.0, -2.0, -3.0]) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
    }

    #[test]
    fn straddling_spectrum_finds_smallest_magnitudes() {
        let diag = [-50.0, -40.0, -30.0, -20.0, -10.0, -3.0, -1.0, 2.0, 5.0, 60.0];
        let a = diag_matrix(&diag);
        let c = cfg(4, 1e-10, 3);
        let warm = random_warm_start(10, c.width(), c.seed).unwrap();
        let rec = chfsi_solve(&a, &warm, &c).unwrap();
        for (got, want) in rec.pairs.values.iter().zip(&[-1.0, 2.0, -3.0, 5.0]) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        for r in &rec.residuals {
            assert!(*r < 1e-10);
        }
    }

    #[test]
    fn exact_warm_start_locks_in_one_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let n = 30;
        let mut raw: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for i in 0..n {
            raw[i * n + i] += 8.0;
        }
        let a = DenseHermitian::from_rows(n, &raw).unwrap();
        let c = cfg(5, 1e-10, 4);
        let exact = dense_eig_oracle(&a, c.width()).unwrap();
        let warm = WarmStart {
            values: exact.values.clone(),
            vectors: exact.vectors.clone(),
            origin: WarmStartOrigin::PreviousProblem,
        };
        let rec = chfsi_solve(&a, &warm, &c).unwrap();
        assert_eq!(rec.iterations, 1);
        assert_eq!(rec.locked_history, vec![c.width()]);
    }

    #[test]
    fn matvec_accounting_on_an_exact_start() {
        let diag: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let a = diag_matrix(&diag);
        let c = cfg(3, 1e-8, 5);
        let exact = dense_eig_oracle(&a, c.width()).unwrap();
        let warm = WarmStart {
            values: exact.values.clone(),
            vectors: exact.vectors.clone(),
            origin: WarmStartOrigin::PreviousProblem,
        };
        let rec = chfsi_solve(&a, &warm, &c).unwrap();
        assert_eq!(rec.iterations, 1);
        // one full-width filter pass plus the Lanczos bound run, which
        // breaks down after exhausting the 10-dimensional space
        let expected = (c.m * c.width()) as u64 + 10;
        assert_eq!(rec.matvecs, expected);
        assert_eq!(
            rec.filter_flops_estimate,
            2.0 * 100.0 * rec.matvecs as f64
        );
    }

    #[test]
    fn locked_counts_never_decrease() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let n = 40;
        let mut raw: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // diagonal shift keeps the matrix positive definite, so the wanted
        // smallest-magnitude window sits at the lower spectral edge
        for i in 0..n {
            raw[i * n + i] += 8.0;
        }
        let a = DenseHermitian::from_rows(n, &raw).unwrap();
        let c = cfg(6, 1e-10, 6);
        let warm = random_warm_start(n, c.width(), c.seed).unwrap();
        let rec = chfsi_solve(&a, &warm, &c).unwrap();
        for pair in rec.locked_history.windows(2) {
            assert!(pair[1] >= pair[0], "{:?}", rec.locked_history);
        }
        // values must be the smallest-|lambda| oracle values
        let oracle = dense_eig_oracle(&a, c.l).unwrap();
        for (got, want) in rec.pairs.values.iter().zip(&oracle.values) {
            assert!((got - want).abs() < 1e-8 * a.norm_max(), "{got} vs {want}");
        }
    }

    #[test]
    fn warm_start_beats_random_on_perturbed_sequences() {
        let n = 60;
        let l = 8;
        let mut wins = 0;
        for trial in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
            let mut raw: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for i in 0..n {
                raw[i * n + i] += 10.0;
            }
            let a1 = DenseHermitian::from_rows(n, &raw).unwrap();
            let mut e: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fro = e.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in &mut e {
                *v /= fro;
            }
            let perturbed: Vec<f64> = raw
                .iter()
                .zip(&e)
                .map(|(x, y)| x + 1e-3 * y)
                .collect();
            let a2 = DenseHermitian::from_rows(n, &perturbed).unwrap();

            let c = cfg(l, 1e-10, trial);
            let r1 = chfsi_solve(&a1, &random_warm_start(n, c.width(), c.seed).unwrap(), &c)
                .unwrap();
            let warm = make_warm_start(&r1, &c);
            let warm_rec = chfsi_solve(&a2, &warm, &c).unwrap();
            let rand_rec =
                chfsi_solve(&a2, &random_warm_start(n, c.width(), c.seed).unwrap(), &c).unwrap();
            if warm_rec.iterations <= rand_rec.iterations {
                wins += 1;
            }
        }
        assert!(wins >= 18, "warm start won only {wins}/20 trials");
    }

    #[test]
    fn random_warm_start_is_deterministic_and_orthonormal() {
        let a = random_warm_start(50, 10, 7).unwrap();
        let b = random_warm_start(50, 10, 7).unwrap();
        assert_eq!(a.vectors.as_slice(), b.vectors.as_slice());
        assert!(a.vectors.gram_deviation() < 1e-12);
        assert!(a.values.is_empty());
    }

    #[test]
    fn make_warm_start_pads_to_the_requested_width() {
        let diag: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let a = diag_matrix(&diag);
        let c = cfg(4, 1e-10, 8);
        let rec = chfsi_solve(&a, &random_warm_start(20, c.width(), c.seed).unwrap(), &c)
            .unwrap();
        let mut wider = c;
        wider.extra = c.extra + 5;
        let warm = make_warm_start(&rec, &wider);
        assert_eq!(warm.vectors.k(), wider.width());
        assert!(warm.vectors.gram_deviation() < 1e-10);
        assert_eq!(warm.origin, WarmStartOrigin::PreviousProblem);
    }

    #[test]
    fn iteration_cap_returns_partial_results() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let n = 30;
        let raw: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = DenseHermitian::from_rows(n, &raw).unwrap();
        let mut c = cfg(5, 1e-10, 9);
        c.max_iters = 1;
        c.m = 2;
        let err = chfsi_solve(&a, &random_warm_start(n, c.width(), c.seed).unwrap(), &c)
            .unwrap_err();
        match err {
            SolveError::MaxIters {
                partial,
                worst_residual,
            } => {
                assert_eq!(partial.iterations, 1);
                assert!(worst_residual > 1e-10);
                assert_eq!(partial.pairs.len(), 5);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let a = diag_matrix(&[1.0, 2.0, 3.0]);
        let c = cfg(4, 1e-10, 0); // width 5 > n = 3
        assert!(c.validate(3).is_err());
        let warm = random_warm_start(3, 2, 0).unwrap();
        assert!(chfsi_solve(&a, &warm, &c).is_err());
    }
}
