#ifndef NCPOP_CTP_H
#define NCPOP_CTP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; the nonzero values match the command-line exit codes.
 */
typedef enum NcpopStatus {
  NCPOP_STATUS_OK = 0,
  NCPOP_STATUS_INVALID_INPUT = 1,
  NCPOP_STATUS_NUMERICAL = 2,
  NCPOP_STATUS_UNCERTIFIED = 3,
  NCPOP_STATUS_NULL_POINTER = 4,
  NCPOP_STATUS_PANIC = 5,
} NcpopStatus;

typedef enum NcpopMode {
  NCPOP_MODE_EIGENVALUE = 0,
  NCPOP_MODE_TRACE = 1,
} NcpopMode;

/**
 * Opaque problem handle.
 */
typedef struct NcpopProblem NcpopProblem;

typedef struct NcpopStats {
  size_t omega;
  size_t smax;
  size_t zeta;
  double amax;
} NcpopStats;

typedef struct NcpopSolveResult {
  double value;
  double residual;
  double dual_bound;
  size_t iterations;
  double time_secs;
  /**
   * 1 if the stopping criterion was met, 0 at the iteration limit.
   */
  int32_t converged;
} NcpopSolveResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses an instance JSON document into a new handle stored in `*out`.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum NcpopStatus ncpop_problem_from_json(const char *json, struct NcpopProblem **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `problem` must come from [`ncpop_problem_from_json`] and not be freed twice.
 */
void ncpop_problem_free(struct NcpopProblem *problem);

/**
 * Number of letters of the problem, or 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t ncpop_problem_letters(const struct NcpopProblem *problem);

/**
 * SDP sizes for relaxation order `order`.
 *
 * # Safety
 * `problem` must be a live handle and `out` a valid pointer.
 */
enum NcpopStatus ncpop_count(const struct NcpopProblem *problem,
                             size_t order,
                             enum NcpopMode mode,
                             struct NcpopStats *out);

/**
 * Certifies the constant trace property; the total trace goes to `*trace`.
 *
 * # Safety
 * `problem` must be a live handle and `trace` a valid pointer.
 */
enum NcpopStatus ncpop_certify(const struct NcpopProblem *problem,
                               size_t order,
                               enum NcpopMode mode,
                               double *trace);

/**
 * Builds, certifies and solves. Reaching the iteration limit is not an
 * error; check `converged`.
 *
 * # Safety
 * `problem` must be a live handle and `out` a valid pointer.
 */
enum NcpopStatus ncpop_solve(const struct NcpopProblem *problem,
                             size_t order,
                             enum NcpopMode mode,
                             double eps,
                             size_t max_iters,
                             uint64_t seed,
                             struct NcpopSolveResult *out);

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *ncpop_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NCPOP_CTP_H */
