#ifndef HQCP_H
#define HQCP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HqcpStatus {
  HQCP_STATUS_OK = 0,
  // The planner proved that no plan exists.
  HQCP_STATUS_PLANNING_FAILURE = 1,
  // Malformed or invalid input text.
  HQCP_STATUS_INPUT_ERROR = 2,
  HQCP_STATUS_INTERNAL_ERROR = 3,
  HQCP_STATUS_NULL_ARGUMENT = 4,
} HqcpStatus;

// The outcome of a successful planning call.
typedef struct HqcpPlanResult HqcpPlanResult;

// A parsed problem together with its domain.
typedef struct HqcpProblem HqcpProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread. Valid until the next
// call into the library on the same thread; never null.
const char *hqcp_last_error_message(void);

// Parses domain and problem text into a new problem handle.
//
// # Safety
// `domain` and `problem` must be null or NUL-terminated strings; `out`
// must be null or point to writable storage for a pointer.
enum HqcpStatus hqcp_problem_load(const char *domain,
                                  const char *problem,
                                  struct HqcpProblem **out);

// # Safety
// `problem` must be null or a handle from [`hqcp_problem_load`] not yet
// freed.
void hqcp_problem_free(struct HqcpProblem *problem);

// Plans for `problem`. Returns `Ok` with a result handle in `out`, or
// `PlanningFailure` with `out` set to null when no plan exists.
//
// # Safety
// `problem` must be a live handle and `out` writable, or null.
enum HqcpStatus hqcp_plan(const struct HqcpProblem *problem,
                          bool allow_null_branches,
                          struct HqcpPlanResult **out);

// # Safety
// `result` must be null or a handle from [`hqcp_plan`] not yet freed.
void hqcp_result_free(struct HqcpPlanResult *result);

// Worst-case plan cost, or a negative value for a null handle.
//
// # Safety
// `result` must be null or a live handle.
double hqcp_result_cost(const struct HqcpPlanResult *result);

// Instantiations made by the search.
//
// # Safety
// `result` must be null or a live handle.
uint64_t hqcp_result_nodes(const struct HqcpPlanResult *result);

// # Safety
// `result` must be null or a live handle.
uint64_t hqcp_result_backtracks(const struct HqcpPlanResult *result);

// The plan as a JSON document, or as the indented tree when `json` is
// false. Free with [`hqcp_string_free`]. Null for a null handle.
//
// # Safety
// `result` must be null or a live handle.
char *hqcp_result_plan(const struct HqcpPlanResult *result, bool json);

// Simulates the plan of `result` and writes the JSON report to `out`.
//
// # Safety
// Handles must be live and `out` writable, or null.
enum HqcpStatus hqcp_simulate(const struct HqcpProblem *problem,
                              const struct HqcpPlanResult *result,
                              uint64_t samples,
                              uint64_t seed,
                              char **out);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void hqcp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HQCP_H */
