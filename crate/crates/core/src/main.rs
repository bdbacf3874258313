//! `eigenforge`: generate, sort, solve, benchmark, and validate operator
//! eigenvalue datasets from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 I/O failure.

use clap::{Args, Parser, Subcommand};
use eigenforge::config::RunConfig;
use eigenforge::dataset::{
    read_dataset, read_manifest, update_solve_order, validate_dataset, write_dataset,
    DatasetManifest,
};
use eigenforge::fftsort::sort_problems;
use eigenforge::linalg::ORACLE_CAP;
use eigenforge::operators::{generate_problem_set, make_problem, Grid2D, ParameterField, Problem};
use eigenforge::pipeline::{compare, run, ComparisonRow, RunMode, RunReport};
use eigenforge::EigenError;
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "eigenforge",
    version,
    about = "PDE operator eigenvalue dataset pipeline"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Knob overrides shared by all commands; flags win over `--config`, and
/// `EIGENFORGE_SEED` wins over both for the seed.
#[derive(Args, Default)]
struct Overrides {
    /// Flat key = value config file to start from.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Operator family: poisson | elliptic | helmholtz | vibration.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long = "n-problems")]
    n_problems: Option<usize>,
    /// Wanted eigenpair count.
    #[arg(long = "L", visible_alias = "l")]
    l: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Chebyshev filter degree.
    #[arg(long)]
    m: Option<usize>,
    /// Truncation side of the sort signatures.
    #[arg(long)]
    p0: Option<usize>,
    /// Subspace padding beyond L (default 20% of L).
    #[arg(long)]
    extra: Option<usize>,
    /// Run mode: scsf | scsf-no-sort | chfsi-random | oracle.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    chunks: Option<usize>,
    #[arg(long, visible_alias = "master-seed")]
    seed: Option<u64>,
    /// Coefficient field side (power of two).
    #[arg(long = "field-side")]
    field_side: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig, EigenError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::parse(&fs::read_to_string(path).map_err(|e| {
                EigenError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                }
            })?)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.family {
            cfg.family = v.parse()?;
        }
        if let Some(v) = self.nx {
            cfg.nx = v;
        }
        if let Some(v) = self.ny {
            cfg.ny = v;
        }
        if let Some(v) = self.n_problems {
            cfg.n_problems = v;
        }
        if let Some(v) = self.l {
            cfg.l = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.m {
            cfg.m = v;
        }
        if let Some(v) = self.p0 {
            cfg.p0 = v;
        }
        if let Some(v) = self.extra {
            cfg.extra = Some(v);
        }
        if let Some(v) = &self.mode {
            cfg.mode = v.parse()?;
        }
        if let Some(v) = self.chunks {
            cfg.chunks = v;
        }
        if let Some(v) = self.seed {
            cfg.master_seed = v;
        }
        if let Some(v) = self.field_side {
            cfg.field_side = v;
        }
        if let Some(v) = &self.out {
            cfg.out_dir = v.clone();
        }
        cfg.apply_env()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a problem set and write it as a dataset directory.
    Gen(Overrides),
    /// Compute and store the truncated-FFT greedy solve order of a dataset.
    Sort {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        ov: Overrides,
    },
    /// Solve a dataset and store the eigenpairs and run report.
    Solve {
        #[arg(long)]
        dataset: PathBuf,
        /// Store eigenvalues only (no eigenvector files).
        #[arg(long)]
        no_vectors: bool,
        #[command(flatten)]
        ov: Overrides,
    },
    /// Generate one set and compare chfsi-random, scsf-no-sort, and scsf.
    Bench {
        /// Repeat over this many consecutive master seeds.
        #[arg(long, default_value_t = 1)]
        repeat: usize,
        #[command(flatten)]
        ov: Overrides,
    },
    /// Recheck a stored dataset from its seeds; exit 0 iff clean.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
        /// Skip the dense oracle cross-check above this dimension.
        #[arg(long = "oracle-cap", default_value_t = ORACLE_CAP)]
        oracle_cap: usize,
    },
}

fn io_err(path: &Path, e: std::io::Error) -> EigenError {
    EigenError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn echo_config(dir: &Path, cfg: &RunConfig) -> Result<(), EigenError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join("config.txt");
    fs::write(&path, cfg.to_kv_string()).map_err(|e| io_err(&path, e))
}

fn rebuild_problems(manifest: &DatasetManifest) -> Result<Vec<Problem>, EigenError> {
    let family = manifest.family()?;
    let grid = manifest.grid()?;
    manifest
        .problems
        .iter()
        .map(|e| make_problem(family, &grid, manifest.field_side, e.seed))
        .collect()
}

fn report_json(report: &RunReport) -> serde_json::Value {
    json!({
        "mode": report.mode.as_str(),
        "solve_order": report.order,
        "failures": report.failures,
        "sort_timings": {
            "fft_seconds": report.sort_timings.fft_seconds,
            "greedy_seconds": report.sort_timings.greedy_seconds,
        },
        "aggregates": {
            "mean_wall_seconds": report.aggregates.mean_wall_seconds,
            "mean_iterations": report.aggregates.mean_iterations,
            "mean_matvecs": report.aggregates.mean_matvecs,
            "mean_flops": report.aggregates.mean_flops,
        },
        "problems": report.outcomes.iter().map(|o| {
            match o.outcome.record() {
                Some(r) => json!({
                    "index": o.problem_index,
                    "iterations": r.iterations,
                    "matvecs": r.matvecs,
                    "wall_seconds": r.wall_seconds,
                    "residual_max": r.residuals.iter().cloned().fold(0.0f64, f64::max),
                    "failed": o.outcome.is_failure(),
                }),
                None => json!({
                    "index": o.problem_index,
                    "failed": true,
                }),
            }
        }).collect::<Vec<_>>(),
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), EigenError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| EigenError::MalformedManifest(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn cmd_gen(ov: &Overrides) -> Result<ExitCode, EigenError> {
    let cfg = ov.resolve()?;
    let grid = Grid2D::unit(cfg.nx, cfg.ny)?;
    let problems = generate_problem_set(
        cfg.family,
        cfg.n_problems,
        &grid,
        cfg.field_side,
        cfg.master_seed,
    )?;
    write_dataset(&cfg.out_dir, &problems, None, false)?;
    echo_config(&cfg.out_dir, &cfg)?;
    println!(
        "generated {} {} problems, n = {} ({}x{} grid), field side {}, seed {} -> {}",
        cfg.n_problems,
        cfg.family.as_str(),
        grid.n(),
        cfg.nx,
        cfg.ny,
        cfg.field_side,
        cfg.master_seed,
        cfg.out_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_sort(dataset: &Path, ov: &Overrides) -> Result<ExitCode, EigenError> {
    let cfg = ov.resolve()?;
    let data = read_dataset(dataset)?;
    let fields: Vec<ParameterField> = data
        .manifest
        .problems
        .iter()
        .zip(&data.fields)
        .map(|(e, values)| ParameterField {
            p: data.manifest.field_side,
            values: values.clone(),
            kind: eigenforge::operators::FieldKind::Grf,
            seed: e.seed,
        })
        .collect();
    let p0 = cfg.p0.min(data.manifest.field_side);
    let (order, timings) = sort_problems(&fields, p0)?;
    update_solve_order(dataset, &order)?;
    println!("sorted {} problems with p0 = {p0}", fields.len());
    println!("{:>12} | {:>12} | {:>12}", "FFT", "Greedy", "Total");
    println!(
        "{:>11.6}s | {:>11.6}s | {:>11.6}s",
        timings.fft_seconds,
        timings.greedy_seconds,
        timings.fft_seconds + timings.greedy_seconds
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_solve(dataset: &Path, no_vectors: bool, ov: &Overrides) -> Result<ExitCode, EigenError> {
    let mut cfg = ov.resolve()?;
    let manifest = read_manifest(dataset)?;
    cfg.family = manifest.family()?;
    cfg.nx = manifest.grid.nx;
    cfg.ny = manifest.grid.ny;
    cfg.n_problems = manifest.n_problems;
    cfg.field_side = manifest.field_side;
    if ov.out.is_none() {
        cfg.out_dir = dataset.to_path_buf();
    }
    let problems = rebuild_problems(&manifest)?;
    let plan = cfg.run_plan();
    let report = run(&problems, &plan)?;
    write_dataset(&cfg.out_dir, &problems, Some(&report), !no_vectors)?;
    write_json(&cfg.out_dir.join("run_report.json"), &report_json(&report))?;
    echo_config(&cfg.out_dir, &cfg)?;
    println!(
        "solved {} problems in mode {}: mean iterations {:.2}, mean matvecs {:.0}, mean wall {:.4}s, failures {}",
        problems.len(),
        report.mode,
        report.aggregates.mean_iterations,
        report.aggregates.mean_matvecs,
        report.aggregates.mean_wall_seconds,
        report.failures
    );
    if report.failures > 0 {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn print_comparison(rows: &[ComparisonRow]) {
    println!(
        "{:>14} | {:>12} | {:>10} | {:>12} | {:>12} | {:>8}",
        "mode", "mean time", "mean iters", "mean matvecs", "mean flops", "speedup"
    );
    for r in rows {
        println!(
            "{:>14} | {:>11.6}s | {:>10.2} | {:>12.0} | {:>12.3e} | {:>8.3}",
            r.mode,
            r.mean_wall_seconds,
            r.mean_iterations,
            r.mean_matvecs,
            r.mean_flops,
            r.speedup_vs_first
        );
    }
}

fn cmd_bench(repeat: usize, ov: &Overrides) -> Result<ExitCode, EigenError> {
    let cfg = ov.resolve()?;
    if repeat < 1 {
        return Err(EigenError::InvalidParameter("--repeat must be >= 1".into()));
    }
    let modes = [RunMode::ChfsiRandom, RunMode::ScsfNoSort, RunMode::Scsf];
    let grid = Grid2D::unit(cfg.nx, cfg.ny)?;

    let mut all_rows: Vec<Vec<ComparisonRow>> = Vec::with_capacity(repeat);
    for r in 0..repeat {
        let seed = cfg.master_seed + r as u64;
        let problems =
            generate_problem_set(cfg.family, cfg.n_problems, &grid, cfg.field_side, seed)?;
        let reports: Vec<RunReport> = modes
            .iter()
            .map(|&mode| {
                let mut plan = cfg.run_plan();
                plan.mode = mode;
                plan.solver_cfg.seed = seed;
                run(&problems, &plan)
            })
            .collect::<Result<_, _>>()?;
        let rows = compare(&reports)?;
        if repeat > 1 {
            println!("seed {seed}:");
        }
        print_comparison(&rows);
        all_rows.push(rows);
    }

    if repeat > 1 {
        println!("over {repeat} seeds (mean +/- std):");
        println!(
            "{:>14} | {:>22} | {:>18} | {:>8}",
            "mode", "mean time", "mean iters", "speedup"
        );
        for (i, mode) in modes.iter().enumerate() {
            let stats = |f: &dyn Fn(&ComparisonRow) -> f64| {
                let xs: Vec<f64> = all_rows.iter().map(|rows| f(&rows[i])).collect();
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                let var =
                    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
                (mean, var.sqrt())
            };
            let (tm, ts) = stats(&|r| r.mean_wall_seconds);
            let (im, is) = stats(&|r| r.mean_iterations);
            let (sm, ss) = stats(&|r| r.speedup_vs_first);
            println!(
                "{:>14} | {:>9.6}s +/- {:>7.6} | {:>7.2} +/- {:>5.2} | {:>3.3} +/- {:.3}",
                mode.as_str(),
                tm,
                ts,
                im,
                is,
                sm,
                ss
            );
        }
    }

    let machine = json!({
        "repeats": all_rows.iter().map(|rows| {
            rows.iter().map(|r| json!({
                "mode": r.mode,
                "mean_wall_seconds": r.mean_wall_seconds,
                "mean_iterations": r.mean_iterations,
                "mean_matvecs": r.mean_matvecs,
                "mean_flops": r.mean_flops,
                "speedup_vs_first": r.speedup_vs_first,
            })).collect::<Vec<_>>()
        }).collect::<Vec<_>>(),
    });
    fs::create_dir_all(&cfg.out_dir).map_err(|e| io_err(&cfg.out_dir, e))?;
    write_json(&cfg.out_dir.join("comparison.json"), &machine)?;
    echo_config(&cfg.out_dir, &cfg)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(dataset: &Path, oracle_cap: usize) -> Result<ExitCode, EigenError> {
    let report = validate_dataset(dataset, oracle_cap)?;
    println!(
        "max residual {:.3e}, max oracle value deviation {:.3e} over {} oracle-checked problems",
        report.max_residual, report.max_value_deviation, report.oracle_checked
    );
    if report.is_clean() {
        println!("dataset clean");
        Ok(ExitCode::SUCCESS)
    } else {
        for issue in &report.issues {
            eprintln!("problem {}: {}", issue.id, issue.detail);
        }
        Ok(ExitCode::from(2))
    }
}

fn exit_code_for(e: &EigenError) -> ExitCode {
    match e {
        EigenError::InvalidParameter(_) => ExitCode::from(1),
        EigenError::Io { .. }
        | EigenError::MalformedManifest(_)
        | EigenError::TruncatedFile { .. }
        | EigenError::VersionMismatch { .. } => ExitCode::from(3),
        _ => ExitCode::from(2),
    }
}

fn dispatch(cli: &Cli) -> Result<ExitCode, EigenError> {
    match &cli.cmd {
        Cmd::Gen(ov) => cmd_gen(ov),
        Cmd::Sort { dataset, ov } => cmd_sort(dataset, ov),
        Cmd::Solve {
            dataset,
            no_vectors,
            ov,
        } => cmd_solve(dataset, *no_vectors, ov),
        Cmd::Bench { repeat, ov } => cmd_bench(*repeat, ov),
        Cmd::Validate {
            dataset,
            oracle_cap,
        } => cmd_validate(dataset, *oracle_cap),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
