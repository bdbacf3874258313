//! On-disk dataset format: a JSON manifest plus one raw array file per
//! tensor. Array files are little-endian IEEE-754 float64, row-major, no
//! header, extension `.f64`; all shapes live in the manifest.

use crate::chfsi::SolveRecord;
use crate::error::{EigenError, Result};
use crate::fftsort::SolveOrder;
use crate::linalg::{dense_eig_oracle, relative_residuals, EigenPairs, VectorBlock, ORACLE_CAP};
use crate::operators::{make_problem, Family, Grid2D, Problem};
use crate::pipeline::RunReport;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProblemEntry {
    pub id: usize,
    pub seed: u64,
    pub symmetrized: bool,
    pub asymmetry_norm: f64,
    /// Worst relative residual of the stored eigenpairs, if solved.
    pub residual_max: Option<f64>,
    pub iterations: Option<usize>,
    pub wall_seconds: Option<f64>,
    /// Flagged when the solver stopped at the iteration cap.
    pub converged: Option<bool>,
    pub field_file: String,
    pub values_file: Option<String>,
    pub vectors_file: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridMeta {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub family: String,
    pub grid: GridMeta,
    /// Side of the square coefficient-field arrays.
    pub field_side: usize,
    /// Matrix dimension `nx * ny`.
    pub matrix_dim: usize,
    pub n_problems: usize,
    /// Wanted eigenpair count of the stored solutions, if solved.
    pub l: Option<usize>,
    pub tol: Option<f64>,
    pub vectors_stored: bool,
    pub solve_order: Option<Vec<usize>>,
    pub problems: Vec<ProblemEntry>,
}

impl DatasetManifest {
    pub fn family(&self) -> Result<Family> {
        self.family.parse()
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly)
    }
}

/// Everything read back from a dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    /// Sorting coefficient field per problem, row-major `field_side^2`.
    pub fields: Vec<Vec<f64>>,
    /// Eigenvalues per problem, length L, where stored.
    pub values: Vec<Option<Vec<f64>>>,
    /// Eigenvectors per problem, `matrix_dim x L`, where stored.
    pub vectors: Vec<Option<VectorBlock>>,
}

fn io_err(path: &Path, e: std::io::Error) -> EigenError {
    EigenError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_f64(path: &Path, data: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn read_f64(path: &Path, expected_len: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let expected = (expected_len * 8) as u64;
    if bytes.len() as u64 != expected {
        return Err(EigenError::TruncatedFile {
            path: path.display().to_string(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Eigenvector block flattened to row-major `n x L`.
fn vectors_row_major(block: &VectorBlock) -> Vec<f64> {
    let (n, k) = (block.n(), block.k());
    let mut out = vec![0.0; n * k];
    for j in 0..k {
        for (i, v) in block.col(j).iter().enumerate() {
            out[i * k + j] = *v;
        }
    }
    out
}

fn vectors_from_row_major(n: usize, k: usize, data: &[f64]) -> Result<VectorBlock> {
    let mut cols = vec![0.0; n * k];
    for i in 0..n {
        for j in 0..k {
            cols[j * n + i] = data[i * k + j];
        }
    }
    VectorBlock::from_columns(n, k, cols)
}

/// Writes a problem set, optionally with the solutions of a completed run,
/// as `manifest.json` plus `.f64` array files in `dir`.
///
/// The manifest is written last, so a directory with a readable manifest is
/// complete. Identical in-memory data produces byte-identical files.
pub fn write_dataset(
    dir: &Path,
    problems: &[Problem],
    report: Option<&RunReport>,
    vectors_stored: bool,
) -> Result<DatasetManifest> {
    if problems.is_empty() {
        return Err(EigenError::InvalidParameter("empty problem list".into()));
    }
    let family = problems[0].spec.family;
    let grid = problems[0].spec.grid;
    for p in problems {
        if p.spec.family != family || p.spec.grid != grid {
            return Err(EigenError::InvalidParameter(
                "problems in one dataset must share family and grid".into(),
            ));
        }
    }
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let mut records: Vec<Option<&SolveRecord>> = vec![None; problems.len()];
    if let Some(rep) = report {
        if rep.outcomes.len() != problems.len() {
            return Err(EigenError::DimensionMismatch(format!(
                "report covers {} problems, dataset has {}",
                rep.outcomes.len(),
                problems.len()
            )));
        }
        for o in &rep.outcomes {
            records[o.problem_index] = o.outcome.record();
        }
    }

    let mut entries = Vec::with_capacity(problems.len());
    for (id, p) in problems.iter().enumerate() {
        let field_file = format!("p_{id:04}.f64");
        write_f64(&dir.join(&field_file), &p.spec.fields[0].values)?;

        let (mut values_file, mut vectors_file) = (None, None);
        let (mut residual_max, mut iterations, mut wall_seconds, mut converged) =
            (None, None, None, None);
        if let Some(rec) = records[id] {
            let vf = format!("values_{id:04}.f64");
            write_f64(&dir.join(&vf), &rec.pairs.values)?;
            values_file = Some(vf);
            if vectors_stored {
                let xf = format!("vectors_{id:04}.f64");
                write_f64(&dir.join(&xf), &vectors_row_major(&rec.pairs.vectors))?;
                vectors_file = Some(xf);
            }
            residual_max = Some(rec.residuals.iter().cloned().fold(0.0f64, f64::max));
            iterations = Some(rec.iterations);
            wall_seconds = Some(rec.wall_seconds);
            converged = Some(rec.residuals.iter().all(|r| {
                report
                    .and_then(|rep| Some(*r <= rep.plan.solver_cfg.tol))
                    .unwrap_or(true)
            }));
        }
        entries.push(ProblemEntry {
            id,
            seed: p.seed,
            symmetrized: p.op.symmetrized,
            asymmetry_norm: p.op.asymmetry_norm,
            residual_max,
            iterations,
            wall_seconds,
            converged,
            field_file,
            values_file,
            vectors_file,
        });
    }

    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        family: family.as_str().to_string(),
        grid: GridMeta {
            nx: grid.nx,
            ny: grid.ny,
            lx: grid.lx,
            ly: grid.ly,
        },
        field_side: problems[0].spec.fields[0].p,
        matrix_dim: grid.nx * grid.ny,
        n_problems: problems.len(),
        l: report.map(|r| r.plan.solver_cfg.l),
        tol: report.map(|r| r.plan.solver_cfg.tol),
        vectors_stored: vectors_stored && report.is_some(),
        solve_order: report.map(|r| r.order.clone()),
        problems: entries,
    };
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

fn write_manifest(dir: &Path, manifest: &DatasetManifest) -> Result<()> {
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| EigenError::MalformedManifest(e.to_string()))?;
    fs::write(&path, json + "\n").map_err(|e| io_err(&path, e))
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| EigenError::MalformedManifest(e.to_string()))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(EigenError::VersionMismatch {
            found: manifest.format_version,
            supported: FORMAT_VERSION,
        });
    }
    if manifest.problems.len() != manifest.n_problems {
        return Err(EigenError::MalformedManifest(format!(
            "manifest declares {} problems but lists {}",
            manifest.n_problems,
            manifest.problems.len()
        )));
    }
    manifest.family()?;
    manifest.grid()?;
    Ok(manifest)
}

/// Stores the permutation of a completed sort phase into an existing
/// manifest.
pub fn update_solve_order(dir: &Path, order: &SolveOrder) -> Result<()> {
    let mut manifest = read_manifest(dir)?;
    if order.permutation.len() != manifest.n_problems {
        return Err(EigenError::DimensionMismatch(format!(
            "order covers {} problems, dataset has {}",
            order.permutation.len(),
            manifest.n_problems
        )));
    }
    manifest.solve_order = Some(order.permutation.clone());
    write_manifest(dir, &manifest)
}

/// Reads a dataset back, checking every referenced file's byte length
/// against the shape the manifest declares.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    let p2 = manifest.field_side * manifest.field_side;
    let n = manifest.matrix_dim;
    let mut fields = Vec::with_capacity(manifest.problems.len());
    let mut values = Vec::with_capacity(manifest.problems.len());
    let mut vectors = Vec::with_capacity(manifest.problems.len());
    for entry in &manifest.problems {
        fields.push(read_f64(&dir.join(&entry.field_file), p2)?);
        let l = manifest.l.unwrap_or(0);
        values.push(match &entry.values_file {
            Some(f) => Some(read_f64(&dir.join(f), l)?),
            None => None,
        });
        vectors.push(match &entry.vectors_file {
            Some(f) => Some(vectors_from_row_major(n, l, &read_f64(&dir.join(f), n * l)?)?),
            None => None,
        });
    }
    Ok(Dataset {
        manifest,
        fields,
        values,
        vectors,
    })
}

/// One flagged problem of a validation pass.
#[derive(Debug, Clone)]
pub struct ValidationIssue {
    pub id: usize,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    /// Worst relative residual over all stored eigenpairs.
    pub max_residual: f64,
    /// Worst |stored - oracle| eigenvalue deviation, over oracle-checked
    /// problems.
    pub max_value_deviation: f64,
    pub oracle_checked: usize,
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Revalidates a stored dataset from first principles: rebuilds each matrix
/// from its seed, recomputes residuals of the stored eigenpairs, and for
/// `matrix_dim <= oracle_cap` cross-checks eigenvalues against the dense
/// oracle.
pub fn validate_dataset(dir: &Path, oracle_cap: usize) -> Result<ValidationReport> {
    let data = read_dataset(dir)?;
    let manifest = &data.manifest;
    let family = manifest.family()?;
    let grid = manifest.grid()?;
    let tol = manifest.tol.unwrap_or(1e-8);
    let value_tol_factor = f64::max(1e-8, 10.0 * tol);

    let mut report = ValidationReport::default();
    for (slot, entry) in manifest.problems.iter().enumerate() {
        let problem = make_problem(family, &grid, manifest.field_side, entry.seed)?;
        let a = &problem.op.matrix;

        let stored_field = &data.fields[slot];
        if stored_field != &problem.spec.fields[0].values {
            report.issues.push(ValidationIssue {
                id: entry.id,
                detail: "stored coefficient field differs from its seed's".into(),
            });
            continue;
        }

        let Some(vals) = &data.values[slot] else {
            continue;
        };
        if let Some(vecs) = &data.vectors[slot] {
            let residuals = relative_residuals(
                a,
                &EigenPairs {
                    values: vals.clone(),
                    vectors: vecs.clone(),
                },
            );
            let worst = residuals.iter().cloned().fold(0.0f64, f64::max);
            report.max_residual = report.max_residual.max(worst);
            if worst > tol {
                report.issues.push(ValidationIssue {
                    id: entry.id,
                    detail: format!("relative residual {worst:.3e} exceeds tol {tol:.1e}"),
                });
            }
        }
        if a.n() <= oracle_cap.min(ORACLE_CAP) {
            let oracle = dense_eig_oracle(a, vals.len())?;
            let dev = vals
                .iter()
                .zip(&oracle.values)
                .map(|(s, o)| (s - o).abs())
                .fold(0.0f64, f64::max);
            report.max_value_deviation = report.max_value_deviation.max(dev);
            report.oracle_checked += 1;
            let cap = value_tol_factor * a.norm_max();
            if dev > cap {
                report.issues.push(ValidationIssue {
                    id: entry.id,
                    detail: format!("eigenvalue deviation {dev:.3e} exceeds {cap:.3e}"),
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chfsi::SolverConfig;
    use crate::operators::generate_problem_set;
    use crate::pipeline::{run, RunMode, RunPlan};
    use tempfile::tempdir;

    fn small_run(count: usize, seed: u64) -> (Vec<Problem>, RunReport) {
        let grid = Grid2D::unit(8, 8).unwrap();
        let problems = generate_problem_set(Family::Poisson, count, &grid, 16, seed).unwrap();
        let mut plan = RunPlan::new(RunMode::Scsf, SolverConfig::new(4, 1e-10));
        plan.p0 = 16;
        let report = run(&problems, &plan).unwrap();
        (problems, report)
    }

    #[test]
    fn f64_files_are_row_major_little_endian() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.f64");
        write_f64(&path, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 32);
        for (i, want) in [1.0f64, 2.0, 3.0, 4.0].iter().enumerate() {
            assert_eq!(&bytes[i * 8..(i + 1) * 8], want.to_le_bytes());
        }
        assert_eq!(read_f64(&path, 4).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (problems, report) = small_run(3, 42);
        let dir = tempdir().unwrap();
        let written = write_dataset(dir.path(), &problems, Some(&report), true).unwrap();
        let data = read_dataset(dir.path()).unwrap();
        assert_eq!(data.manifest, written);
        for (i, p) in problems.iter().enumerate() {
            assert_eq!(data.fields[i], p.spec.fields[0].values);
        }
        for o in &report.outcomes {
            let rec = o.outcome.record().unwrap();
            let i = o.problem_index;
            assert_eq!(data.values[i].as_ref().unwrap(), &rec.pairs.values);
            assert_eq!(
                data.vectors[i].as_ref().unwrap().as_slice(),
                rec.pairs.vectors.as_slice()
            );
        }
        assert_eq!(data.manifest.solve_order.as_ref().unwrap(), &report.order);
    }

    #[test]
    fn writes_are_deterministic() {
        let (problems, report) = small_run(2, 7);
        let d1 = tempdir().unwrap();
        let d2 = tempdir().unwrap();
        write_dataset(d1.path(), &problems, Some(&report), true).unwrap();
        write_dataset(d2.path(), &problems, Some(&report), true).unwrap();
        for name in ["manifest.json", "p_0000.f64", "values_0001.f64", "vectors_0000.f64"] {
            assert_eq!(
                fs::read(d1.path().join(name)).unwrap(),
                fs::read(d2.path().join(name)).unwrap(),
                "{name}"
            );
        }
    }

    #[test]
    fn truncated_file_is_a_distinct_error_naming_it() {
        let (problems, report) = small_run(2, 9);
        let dir = tempdir().unwrap();
        write_dataset(dir.path(), &problems, Some(&report), true).unwrap();
        let victim = dir.path().join("values_0001.f64");
        let bytes = fs::read(&victim).unwrap();
        fs::write(&victim, &bytes[..bytes.len() - 8]).unwrap();
        match read_dataset(dir.path()) {
            Err(EigenError::TruncatedFile { path, .. }) => {
                assert!(path.contains("values_0001.f64"))
            }
            other => panic!("expected TruncatedFile, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_is_a_distinct_error() {
        let (problems, report) = small_run(1, 11);
        let dir = tempdir().unwrap();
        write_dataset(dir.path(), &problems, Some(&report), false).unwrap();
        let path = dir.path().join("manifest.json");
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 99");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            read_manifest(dir.path()),
            Err(EigenError::VersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn malformed_manifest_is_a_distinct_error() {
        let dir = tempdir().unwrap();
        fs::write(dir.path().join("manifest.json"), "{not json").unwrap();
        assert!(matches!(
            read_manifest(dir.path()),
            Err(EigenError::MalformedManifest(_))
        ));
    }

    #[test]
    fn validation_passes_a_fresh_dataset() {
        let (problems, report) = small_run(3, 13);
        let dir = tempdir().unwrap();
        write_dataset(dir.path(), &problems, Some(&report), true).unwrap();
        let v = validate_dataset(dir.path(), 2000).unwrap();
        assert!(v.is_clean(), "{:?}", v.issues);
        assert!(v.max_residual <= 1e-10);
        assert_eq!(v.oracle_checked, 3);
        assert!(v.max_value_deviation <= 1e-8 * problems[0].op.matrix.norm_max());
    }

    #[test]
    fn validation_flags_a_zeroed_eigenvector() {
        let (problems, report) = small_run(2, 17);
        let dir = tempdir().unwrap();
        write_dataset(dir.path(), &problems, Some(&report), true).unwrap();
        let victim = dir.path().join("vectors_0000.f64");
        let n = problems[0].op.matrix.n();
        write_f64(&victim, &vec![0.0; n * 4]).unwrap();
        let v = validate_dataset(dir.path(), 2000).unwrap();
        assert!(v.issues.iter().any(|i| i.id == 0), "{:?}", v.issues);
    }

    #[test]
    fn oracle_cap_skips_large_problems() {
        let (problems, report) = small_run(1, 19);
        let dir = tempdir().unwrap();
        write_dataset(dir.path(), &problems, Some(&report), true).unwrap();
        let v = validate_dataset(dir.path(), 10).unwrap();
        assert_eq!(v.oracle_checked, 0);
        assert!(v.is_clean());
    }

    #[test]
    fn solve_order_update_round_trips() {
        let grid = Grid2D::unit(8, 8).unwrap();
        let problems = generate_problem_set(Family::Helmholtz, 3, &grid, 16, 23).unwrap();
        let dir = tempdir().unwrap();
        let m = write_dataset(dir.path(), &problems, None, false).unwrap();
        assert!(m.solve_order.is_none());
        assert!(m.l.is_none());
        update_solve_order(
            dir.path(),
            &SolveOrder {
                permutation: vec![2, 0, 1],
            },
        )
        .unwrap();
        let m = read_manifest(dir.path()).unwrap();
        assert_eq!(m.solve_order, Some(vec![2, 0, 1]));
        let bad = SolveOrder {
            permutation: vec![0],
        };
        assert!(update_solve_order(dir.path(), &bad).is_err());
    }
}
