//! C ABI for the eigenforge pipeline: opaque handles, integer status codes,
//! and a thread-local last-error message. The header is generated by cbindgen
//! into `include/eigenforge.h` at build time.
//!
//! Ownership: every `*_new`/`*_generate`/`ef_run` output pointer is owned by
//! the caller and must be released with the matching `*_free`. All functions
//! are safe to call from multiple threads as long as each handle is used from
//! one thread at a time.

use eigenforge::chfsi::SolverConfig;
use eigenforge::operators::{generate_problem_set, Grid2D, Problem};
use eigenforge::pipeline::{run, RunMode, RunPlan, RunReport};
use eigenforge::EigenError;
use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EfStatus {
    EfOk = 0,
    EfInvalidArgument = 1,
    EfNumericalFailure = 2,
    EfIoFailure = 3,
    EfNullPointer = 4,
    EfPanic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &EigenError) -> EfStatus {
    match e {
        EigenError::InvalidParameter(_) => EfStatus::EfInvalidArgument,
        EigenError::Io { .. }
        | EigenError::MalformedManifest(_)
        | EigenError::TruncatedFile { .. }
        | EigenError::VersionMismatch { .. } => EfStatus::EfIoFailure,
        _ => EfStatus::EfNumericalFailure,
    }
}

fn fail(e: EigenError) -> EfStatus {
    let status = status_of(&e);
    set_error(e.to_string());
    status
}

fn guarded(f: impl FnOnce() -> EfStatus) -> EfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            EfStatus::EfPanic
        }
    }
}

/// An owned, immutable problem set.
pub struct EfProblemSet {
    problems: Vec<Problem>,
}

/// An owned run report over a problem set.
pub struct EfRunReport {
    report: RunReport,
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, EfStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(EfStatus::EfNullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        EfStatus::EfInvalidArgument
    })
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len` bytes). Returns the full message length in bytes,
/// excluding the NUL.
#[no_mangle]
pub unsafe extern "C" fn ef_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Generates `count` problems of `family` ("poisson", "elliptic",
/// "helmholtz", or "vibration") on an `nx` x `ny` unit-square grid with
/// coefficient fields of side `field_side`, seeded by `seed`.
#[no_mangle]
pub unsafe extern "C" fn ef_problem_set_generate(
    family: *const c_char,
    nx: usize,
    ny: usize,
    count: usize,
    field_side: usize,
    seed: u64,
    out: *mut *mut EfProblemSet,
) -> EfStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer");
            return EfStatus::EfNullPointer;
        }
        let family = match cstr(family).and_then(|s| s.parse().map_err(fail)) {
            Ok(f) => f,
            Err(s) => return s,
        };
        let grid = match Grid2D::unit(nx, ny) {
            Ok(g) => g,
            Err(e) => return fail(e),
        };
        match generate_problem_set(family, count, &grid, field_side, seed) {
            Ok(problems) => {
                *out = Box::into_raw(Box::new(EfProblemSet { problems }));
                EfStatus::EfOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of problems in the set.
#[no_mangle]
pub unsafe extern "C" fn ef_problem_set_len(set: *const EfProblemSet) -> usize {
    if set.is_null() {
        return 0;
    }
    (*set).problems.len()
}

/// Matrix dimension shared by all problems of the set.
#[no_mangle]
pub unsafe extern "C" fn ef_problem_set_dim(set: *const EfProblemSet) -> usize {
    if set.is_null() {
        return 0;
    }
    (*set)
        .problems
        .first()
        .map(|p| p.op.matrix.n())
        .unwrap_or(0)
}

#[no_mangle]
pub unsafe extern "C" fn ef_problem_set_free(set: *mut EfProblemSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Solves the set in `mode` ("scsf", "scsf-no-sort", "chfsi-random", or
/// "oracle") for `l` eigenpairs per problem at tolerance `tol`, splitting
/// the (sorted) sequence into `chunks` independent warm-start chains. `p0`
/// is the sort truncation side; pass 0 for the default.
#[no_mangle]
pub unsafe extern "C" fn ef_run(
    set: *const EfProblemSet,
    mode: *const c_char,
    l: usize,
    tol: f64,
    chunks: usize,
    p0: usize,
    seed: u64,
    out: *mut *mut EfRunReport,
) -> EfStatus {
    guarded(|| {
        if set.is_null() || out.is_null() {
            set_error("null pointer argument");
            return EfStatus::EfNullPointer;
        }
        let mode: RunMode = match cstr(mode).and_then(|s| s.parse().map_err(fail)) {
            Ok(m) => m,
            Err(s) => return s,
        };
        let mut cfg = SolverConfig::new(l, tol);
        cfg.seed = seed;
        let mut plan = RunPlan::new(mode, cfg);
        plan.chunks = chunks.max(1);
        if p0 > 0 {
            plan.p0 = p0;
        }
        match run(&(*set).problems, &plan) {
            Ok(report) => {
                *out = Box::into_raw(Box::new(EfRunReport { report }));
                EfStatus::EfOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of per-problem records in the report (equals the set size).
#[no_mangle]
pub unsafe extern "C" fn ef_report_len(report: *const EfRunReport) -> usize {
    if report.is_null() {
        return 0;
    }
    (*report).report.outcomes.len()
}

/// Count of problems that failed to converge or solve.
#[no_mangle]
pub unsafe extern "C" fn ef_report_failures(report: *const EfRunReport) -> usize {
    if report.is_null() {
        return 0;
    }
    (*report).report.failures
}

/// Mean iteration count over solved problems.
#[no_mangle]
pub unsafe extern "C" fn ef_report_mean_iterations(report: *const EfRunReport) -> f64 {
    if report.is_null() {
        return f64::NAN;
    }
    (*report).report.aggregates.mean_iterations
}

/// Mean wall-clock solve time in seconds over solved problems.
#[no_mangle]
pub unsafe extern "C" fn ef_report_mean_wall_seconds(report: *const EfRunReport) -> f64 {
    if report.is_null() {
        return f64::NAN;
    }
    (*report).report.aggregates.mean_wall_seconds
}

/// Generation-order index of the problem solved at `slot`.
#[no_mangle]
pub unsafe extern "C" fn ef_report_problem_index(
    report: *const EfRunReport,
    slot: usize,
    out: *mut usize,
) -> EfStatus {
    guarded(|| {
        if report.is_null() || out.is_null() {
            set_error("null pointer argument");
            return EfStatus::EfNullPointer;
        }
        match (&(*report).report.outcomes).get(slot) {
            Some(o) => {
                *out = o.problem_index;
                EfStatus::EfOk
            }
            None => {
                set_error(format!("slot {slot} out of range"));
                EfStatus::EfInvalidArgument
            }
        }
    })
}

/// Copies the eigenvalues of the problem solved at `slot` (ascending
/// magnitude) into `buf`; `len` must be at least L.
#[no_mangle]
pub unsafe extern "C" fn ef_report_eigenvalues(
    report: *const EfRunReport,
    slot: usize,
    buf: *mut f64,
    len: usize,
) -> EfStatus {
    guarded(|| {
        if report.is_null() || buf.is_null() {
            set_error("null pointer argument");
            return EfStatus::EfNullPointer;
        }
        let Some(outcome) = (&(*report).report.outcomes).get(slot) else {
            set_error(format!("slot {slot} out of range"));
            return EfStatus::EfInvalidArgument;
        };
        let Some(record) = outcome.outcome.record() else {
            set_error(format!("slot {slot} has no solution"));
            return EfStatus::EfNumericalFailure;
        };
        let values = &record.pairs.values;
        if len < values.len() {
            set_error(format!(
                "buffer holds {len} values, need {}",
                values.len()
            ));
            return EfStatus::EfInvalidArgument;
        }
        std::ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
        EfStatus::EfOk
    })
}

/// Iteration count of the problem solved at `slot`.
#[no_mangle]
pub unsafe extern "C" fn ef_report_iterations(
    report: *const EfRunReport,
    slot: usize,
    out: *mut usize,
) -> EfStatus {
    guarded(|| {
        if report.is_null() || out.is_null() {
            set_error("null pointer argument");
            return EfStatus::EfNullPointer;
        }
        match (&(*report).report.outcomes).get(slot).and_then(|o| o.outcome.record()) {
            Some(r) => {
                *out = r.iterations;
                EfStatus::EfOk
            }
            None => {
                set_error(format!("slot {slot} out of range or unsolved"));
                EfStatus::EfInvalidArgument
            }
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ef_report_free(report: *mut EfRunReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
