#ifndef EIGENFORGE_H
#define EIGENFORGE_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible entry point.
 */
typedef enum EfStatus {
  EfOk = 0,
  EfInvalidArgument = 1,
  EfNumericalFailure = 2,
  EfIoFailure = 3,
  EfNullPointer = 4,
  EfPanic = 5,
} EfStatus;

/**
 * An owned, immutable problem set.
 */
typedef struct EfProblemSet EfProblemSet;

/**
 * An owned run report over a problem set.
 */
typedef struct EfRunReport EfRunReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len` bytes). Returns the full message length in bytes,
 * excluding the NUL.
 */
uintptr_t ef_last_error_message(char *buf, uintptr_t len);

/**
 * Generates `count` problems of `family` ("poisson", "elliptic",
 * "helmholtz", or "vibration") on an `nx` x `ny` unit-square grid with
 * coefficient fields of side `field_side`, seeded by `seed`.
 */
enum EfStatus ef_problem_set_generate(const char *family,
                                      uintptr_t nx,
                                      uintptr_t ny,
                                      uintptr_t count,
                                      uintptr_t field_side,
                                      uint64_t seed,
                                      struct EfProblemSet **out);

/**
 * Number of problems in the set.
 */
uintptr_t ef_problem_set_len(const struct EfProblemSet *set);

/**
 * Matrix dimension shared by all problems of the set.
 */
uintptr_t ef_problem_set_dim(const struct EfProblemSet *set);

void ef_problem_set_free(struct EfProblemSet *set);

/**
 * Solves the set in `mode` ("scsf", "scsf-no-sort", "chfsi-random", or
 * "oracle") for `l` eigenpairs per problem at tolerance `tol`, splitting
 * the (sorted) sequence into `chunks` independent warm-start chains. `p0`
 * is the sort truncation side; pass 0 for the default.
 */
enum EfStatus ef_run(const struct EfProblemSet *set,
                     const char *mode,
                     uintptr_t l,
                     double tol,
                     uintptr_t chunks,
                     uintptr_t p0,
                     uint64_t seed,
                     struct EfRunReport **out);

/**
 * Number of per-problem records in the report (equals the set size).
 */
uintptr_t ef_report_len(const struct EfRunReport *report);

/**
 * Count of problems that failed to converge or solve.
 */
uintptr_t ef_report_failures(const struct EfRunReport *report);

/**
 * Mean iteration count over solved problems.
 */
double ef_report_mean_iterations(const struct EfRunReport *report);

/**
 * Mean wall-clock solve time in seconds over solved problems.
 */
double ef_report_mean_wall_seconds(const struct EfRunReport *report);

/**
 * Generation-order index of the problem solved at `slot`.
 */
enum EfStatus ef_report_problem_index(const struct EfRunReport *report,
                                      uintptr_t slot,
                                      uintptr_t *out);

/**
 * Copies the eigenvalues of the problem solved at `slot` (ascending
 * magnitude) into `buf`; `len` must be at least L.
 */
enum EfStatus ef_report_eigenvalues(const struct EfRunReport *report,
                                    uintptr_t slot,
                                    double *buf,
                                    uintptr_t len);

/**
 * Iteration count of the problem solved at `slot`.
 */
enum EfStatus ef_report_iterations(const struct EfRunReport *report,
                                   uintptr_t slot,
                                   uintptr_t *out);

void ef_report_free(struct EfRunReport *report);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* EIGENFORGE_H */
