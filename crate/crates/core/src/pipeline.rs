//! Orchestration of full runs over a problem set: sorted warm-started solves,
//! the unsorted ablation, the random-init baseline, and the dense oracle.

use crate::chfsi::{
    chfsi_solve, make_warm_start, random_warm_start, SolveError, SolveRecord, SolverConfig,
};
use crate::error::{EigenError, Result};
use crate::fftsort::{sort_problems, SortTimings};
use crate::linalg::{dense_eig_oracle, relative_residuals, EigenPairs};
use crate::operators::Problem;
use rayon::prelude::*;
use std::fmt;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Sort, then solve sequentially with warm starts.
    Scsf,
    /// Warm-started sequential solves in generation order.
    ScsfNoSort,
    /// Every problem starts from a random subspace.
    ChfsiRandom,
    /// Dense ground-truth eigensolver per problem.
    Oracle,
}

impl RunMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::Scsf => "scsf",
            RunMode::ScsfNoSort => "scsf-no-sort",
            RunMode::ChfsiRandom => "chfsi-random",
            RunMode::Oracle => "oracle",
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RunMode {
    type Err = EigenError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scsf" => Ok(RunMode::Scsf),
            "scsf-no-sort" => Ok(RunMode::ScsfNoSort),
            "chfsi-random" => Ok(RunMode::ChfsiRandom),
            "oracle" => Ok(RunMode::Oracle),
            other => Err(EigenError::InvalidParameter(format!(
                "unknown run mode {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunPlan {
    pub mode: RunMode,
    pub solver_cfg: SolverConfig,
    /// Truncation side for the sort phase.
    pub p0: usize,
    /// Contiguous chunks solved independently; each chunk restarts the
    /// warm-start chain from a random subspace.
    pub chunks: usize,
}

impl RunPlan {
    pub fn new(mode: RunMode, solver_cfg: SolverConfig) -> Self {
        Self {
            mode,
            solver_cfg,
            p0: 20,
            chunks: 1,
        }
    }
}

/// Result of one problem's solve within a run.
#[derive(Debug, Clone)]
pub enum Outcome {
    Solved(SolveRecord),
    /// Iteration cap hit; the partial record still feeds the warm-start
    /// chain and the dataset, flagged by its worst wanted residual.
    IterationCap {
        record: SolveRecord,
        worst_residual: f64,
    },
    Failed(String),
}

impl Outcome {
    pub fn record(&self) -> Option<&SolveRecord> {
        match self {
            Outcome::Solved(r) | Outcome::IterationCap { record: r, .. } => Some(r),
            Outcome::Failed(_) => None,
        }
    }

    pub fn is_failure(&self) -> bool {
        !matches!(self, Outcome::Solved(_))
    }
}

#[derive(Debug, Clone)]
pub struct ProblemOutcome {
    /// Index of the problem in the original (generation-order) list.
    pub problem_index: usize,
    pub outcome: Outcome,
}

/// Arithmetic means over all outcomes that produced a record.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Aggregates {
    pub mean_wall_seconds: f64,
    pub mean_iterations: f64,
    pub mean_matvecs: f64,
    pub mean_flops: f64,
}

pub fn aggregate(outcomes: &[ProblemOutcome]) -> Aggregates {
    let records: Vec<&SolveRecord> = outcomes.iter().filter_map(|o| o.outcome.record()).collect();
    if records.is_empty() {
        return Aggregates::default();
    }
    let n = records.len() as f64;
    Aggregates {
        mean_wall_seconds: records.iter().map(|r| r.wall_seconds).sum::<f64>() / n,
        mean_iterations: records.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
        mean_matvecs: records.iter().map(|r| r.matvecs as f64).sum::<f64>() / n,
        mean_flops: records.iter().map(|r| r.filter_flops_estimate).sum::<f64>() / n,
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub mode: RunMode,
    pub plan: RunPlan,
    /// Solve order as a permutation of generation indices.
    pub order: Vec<usize>,
    /// Outcomes in solve order.
    pub outcomes: Vec<ProblemOutcome>,
    pub sort_timings: SortTimings,
    pub aggregates: Aggregates,
    pub failures: usize,
}

/// Per-problem solver seed, independent of chunking and solve order.
fn problem_solver_seed(base: u64, problem_index: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ (problem_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn oracle_outcome(problem: &Problem, cfg: &SolverConfig) -> Outcome {
    let started = Instant::now();
    match dense_eig_oracle(&problem.op.matrix, cfg.l) {
        Ok(pairs) => {
            let residuals = relative_residuals(&problem.op.matrix, &pairs);
            let subspace = pairs.clone();
            Outcome::Solved(SolveRecord {
                pairs,
                residuals,
                iterations: 0,
                matvecs: 0,
                filter_flops_estimate: 0.0,
                wall_seconds: started.elapsed().as_secs_f64(),
                locked_history: Vec::new(),
                subspace,
            })
        }
        Err(e) => Outcome::Failed(e.to_string()),
    }
}

fn solve_chunk(
    problems: &[Problem],
    chunk: &[usize],
    plan: &RunPlan,
) -> Result<Vec<ProblemOutcome>> {
    let warm_chain = matches!(plan.mode, RunMode::Scsf | RunMode::ScsfNoSort);
    let mut out = Vec::with_capacity(chunk.len());
    let mut prev: Option<SolveRecord> = None;
    for &idx in chunk {
        let problem = &problems[idx];
        let n = problem.op.matrix.n();
        let mut cfg = plan.solver_cfg;
        cfg.seed = problem_solver_seed(plan.solver_cfg.seed, idx);

        let outcome = if plan.mode == RunMode::Oracle {
            oracle_outcome(problem, &cfg)
        } else {
            let warm = match (&prev, warm_chain) {
                (Some(r), true) => make_warm_start(r, &cfg),
                _ => random_warm_start(n, cfg.width(), cfg.seed)?,
            };
            match chfsi_solve(&problem.op.matrix, &warm, &cfg) {
                Ok(r) => Outcome::Solved(r),
                Err(SolveError::MaxIters {
                    partial,
                    worst_residual,
                }) => Outcome::IterationCap {
                    record: *partial,
                    worst_residual,
                },
                Err(SolveError::Numeric(e)) => Outcome::Failed(e.to_string()),
            }
        };
        prev = outcome.record().cloned().or(prev);
        out.push(ProblemOutcome {
            problem_index: idx,
            outcome,
        });
    }
    Ok(out)
}

/// Contiguous near-equal partition of `order` into at most `chunks` pieces.
fn partition(order: &[usize], chunks: usize) -> Vec<&[usize]> {
    let m = chunks.clamp(1, order.len());
    let base = order.len() / m;
    let rem = order.len() % m;
    let mut parts = Vec::with_capacity(m);
    let mut at = 0;
    for i in 0..m {
        let len = base + usize::from(i < rem);
        parts.push(&order[at..at + len]);
        at += len;
    }
    parts
}

/// Runs the plan over the problem set. Solve failures are recorded per
/// problem; the run always completes.
pub fn run(problems: &[Problem], plan: &RunPlan) -> Result<RunReport> {
    if problems.is_empty() {
        return Err(EigenError::InvalidParameter("empty problem list".into()));
    }
    if plan.chunks < 1 {
        return Err(EigenError::InvalidParameter("chunk count must be >= 1".into()));
    }

    let (order, sort_timings) = if plan.mode == RunMode::Scsf {
        let fields: Vec<_> = problems.iter().map(|p| p.spec.fields[0].clone()).collect();
        let (order, timings) = sort_problems(&fields, plan.p0)?;
        (order.permutation, timings)
    } else {
        ((0..problems.len()).collect(), SortTimings::default())
    };

    let parts = partition(&order, plan.chunks);
    let chunk_results: Vec<Result<Vec<ProblemOutcome>>> = parts
        .par_iter()
        .map(|chunk| solve_chunk(problems, chunk, plan))
        .collect();
    let mut outcomes = Vec::with_capacity(problems.len());
    for r in chunk_results {
        outcomes.extend(r?);
    }

    let aggregates = aggregate(&outcomes);
    let failures = outcomes.iter().filter(|o| o.outcome.is_failure()).count();
    Ok(RunReport {
        mode: plan.mode,
        plan: *plan,
        order,
        outcomes,
        sort_timings,
        aggregates,
        failures,
    })
}

/// One row of the mode-comparison table.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub mode: String,
    pub mean_wall_seconds: f64,
    pub mean_iterations: f64,
    pub mean_matvecs: f64,
    pub mean_flops: f64,
    /// Mean wall time of the first report divided by this report's.
    pub speedup_vs_first: f64,
}

/// Comparison table across reports over the same problem set and solver
/// configuration; the first report is the speedup baseline.
pub fn compare(reports: &[RunReport]) -> Result<Vec<ComparisonRow>> {
    let first = reports
        .first()
        .ok_or_else(|| EigenError::InvalidParameter("no reports to compare".into()))?;
    for r in reports {
        let (a, b) = (&first.plan.solver_cfg, &r.plan.solver_cfg);
        if r.outcomes.len() != first.outcomes.len()
            || a.l != b.l
            || a.tol != b.tol
            || a.m != b.m
            || a.extra != b.extra
        {
            return Err(EigenError::InvalidParameter(format!(
                "report for mode {} does not match the baseline problem set/config",
                r.mode
            )));
        }
    }
    Ok(reports
        .iter()
        .map(|r| ComparisonRow {
            mode: r.mode.as_str().to_string(),
            mean_wall_seconds: r.aggregates.mean_wall_seconds,
            mean_iterations: r.aggregates.mean_iterations,
            mean_matvecs: r.aggregates.mean_matvecs,
            mean_flops: r.aggregates.mean_flops,
            speedup_vs_first: if r.aggregates.mean_wall_seconds > 0.0 {
                first.aggregates.mean_wall_seconds / r.aggregates.mean_wall_seconds
            } else {
                1.0
            },
        })
        .collect())
}

/// Eigenvalues of matching problems across two reports, paired in generation
/// order. Entries missing a record on either side are skipped.
pub fn paired_values<'a>(
    a: &'a RunReport,
    b: &'a RunReport,
) -> Vec<(usize, &'a EigenPairs, &'a EigenPairs)> {
    let by_index = |rep: &'a RunReport| {
        let mut v: Vec<Option<&'a SolveRecord>> = vec![None; rep.outcomes.len()];
        for o in &rep.outcomes {
            v[o.problem_index] = o.outcome.record();
        }
        v
    };
    let ra = by_index(a);
    let rb = by_index(b);
    ra.into_iter()
        .zip(rb)
        .enumerate()
        .filter_map(|(i, (x, y))| Some((i, &x?.pairs, &y?.pairs)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{generate_problem_set, Family, Grid2D};

    fn poisson_set(count: usize, side: usize, seed: u64) -> Vec<Problem> {
        let grid = Grid2D::unit(side, side).unwrap();
        generate_problem_set(Family::Poisson, count, &grid, 16, seed).unwrap()
    }

    fn plan(mode: RunMode, l: usize, tol: f64) -> RunPlan {
        let mut p = RunPlan::new(mode, SolverConfig::new(l, tol));
        p.p0 = 16;
        p
    }

    fn assert_values_close(a: &RunReport, b: &RunReport, problems: &[Problem], factor: f64) {
        let pairs = paired_values(a, b);
        assert_eq!(pairs.len(), problems.len());
        for (i, x, y) in pairs {
            let scale = factor * problems[i].op.matrix.norm_max();
            for (va, vb) in x.values.iter().zip(&y.values) {
                assert!((va - vb).abs() <= scale, "problem {i}: {va} vs {vb}");
            }
        }
    }

    #[test]
    fn single_problem_scsf_matches_random_baseline() {
        let problems = poisson_set(1, 8, 100);
        let a = run(&problems, &plan(RunMode::Scsf, 5, 1e-9)).unwrap();
        let b = run(&problems, &plan(RunMode::ChfsiRandom, 5, 1e-9)).unwrap();
        let ra = a.outcomes[0].outcome.record().unwrap();
        let rb = b.outcomes[0].outcome.record().unwrap();
        assert_eq!(ra.pairs.values, rb.pairs.values);
        assert_eq!(ra.iterations, rb.iterations);
        assert_eq!(ra.matvecs, rb.matvecs);
    }

    #[test]
    fn identical_second_problem_locks_in_one_iteration() {
        let mut problems = poisson_set(1, 10, 200);
        problems.push(problems[0].clone());
        let report = run(&problems, &plan(RunMode::Scsf, 6, 1e-8)).unwrap();
        let chained = report.outcomes[1].outcome.record().unwrap();
        assert_eq!(chained.iterations, 1, "warm start from an identical matrix");
    }

    #[test]
    fn modes_agree_with_each_other_and_the_oracle() {
        let problems = poisson_set(4, 10, 300);
        let tol = 1e-9;
        let reports: Vec<RunReport> = [
            RunMode::Scsf,
            RunMode::ScsfNoSort,
            RunMode::ChfsiRandom,
            RunMode::Oracle,
        ]
        .iter()
        .map(|&m| run(&problems, &plan(m, 5, tol)).unwrap())
        .collect();
        for r in &reports {
            assert_eq!(r.failures, 0);
        }
        for other in &reports[1..] {
            assert_values_close(&reports[0], other, &problems, 10.0 * tol);
        }
    }

    #[test]
    fn chunked_run_matches_unchunked_values() {
        let problems = poisson_set(6, 8, 400);
        let tol = 1e-9;
        let single = run(&problems, &plan(RunMode::Scsf, 4, tol)).unwrap();
        let mut chunked_plan = plan(RunMode::Scsf, 4, tol);
        chunked_plan.chunks = 3;
        let chunked = run(&problems, &chunked_plan).unwrap();
        assert_eq!(single.order, chunked.order);
        assert_values_close(&single, &chunked, &problems, 10.0 * tol);
    }

    #[test]
    fn aggregates_are_the_means_of_the_records() {
        let problems = poisson_set(3, 8, 500);
        let report = run(&problems, &plan(RunMode::ChfsiRandom, 4, 1e-8)).unwrap();
        let recomputed = aggregate(&report.outcomes);
        assert_eq!(report.aggregates, recomputed);
        let mean_it = report
            .outcomes
            .iter()
            .map(|o| o.outcome.record().unwrap().iterations as f64)
            .sum::<f64>()
            / 3.0;
        assert!((report.aggregates.mean_iterations - mean_it).abs() < 1e-15);
    }

    #[test]
    fn runs_are_deterministic() {
        let problems = poisson_set(3, 8, 600);
        let a = run(&problems, &plan(RunMode::Scsf, 4, 1e-9)).unwrap();
        let b = run(&problems, &plan(RunMode::Scsf, 4, 1e-9)).unwrap();
        assert_eq!(a.order, b.order);
        for (x, y) in a.outcomes.iter().zip(&b.outcomes) {
            let (rx, ry) = (
                x.outcome.record().unwrap(),
                y.outcome.record().unwrap(),
            );
            assert_eq!(rx.pairs.values, ry.pairs.values);
            assert_eq!(rx.matvecs, ry.matvecs);
        }
    }

    #[test]
    fn comparison_table_speedups() {
        let problems = poisson_set(2, 8, 700);
        let a = run(&problems, &plan(RunMode::Scsf, 4, 1e-8)).unwrap();
        let rows = compare(&[a.clone()]).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].speedup_vs_first - 1.0).abs() < 1e-12);
        let b = run(&problems, &plan(RunMode::ChfsiRandom, 4, 1e-8)).unwrap();
        let rows = compare(&[a.clone(), b]).unwrap();
        assert_eq!(rows[1].mode, "chfsi-random");
        assert!(rows[1].speedup_vs_first > 0.0);
        let mismatched = run(&problems, &plan(RunMode::ChfsiRandom, 3, 1e-8)).unwrap();
        assert!(compare(&[a, mismatched]).is_err());
    }

    #[test]
    fn empty_and_invalid_plans_are_rejected() {
        assert!(run(&[], &plan(RunMode::Scsf, 2, 1e-8)).is_err());
        let problems = poisson_set(1, 8, 800);
        let mut p = plan(RunMode::Scsf, 2, 1e-8);
        p.chunks = 0;
        assert!(run(&problems, &p).is_err());
    }
}
