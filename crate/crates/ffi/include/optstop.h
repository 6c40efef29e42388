#ifndef OPTSTOP_H
#define OPTSTOP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Result code of every fallible call.
 */
typedef enum OptstopStatus {
  OPTSTOP_STATUS_OK = 0,
  OPTSTOP_STATUS_NULL_POINTER = 1,
  OPTSTOP_STATUS_INVALID_UTF8 = 2,
  /*
   The problem file failed to parse or validate.
   */
  OPTSTOP_STATUS_CONFIG = 3,
  /*
   A verification hypothesis failed; the problem is not of the assumed shape.
   */
  OPTSTOP_STATUS_HYPOTHESIS = 4,
  /*
   Root finding, quadrature or the kernel inversion failed.
   */
  OPTSTOP_STATUS_NUMERICAL = 5,
  /*
   A point outside the state space.
   */
  OPTSTOP_STATUS_DOMAIN = 6,
  /*
   The output buffer is too small; the needed length was written.
   */
  OPTSTOP_STATUS_BUFFER_TOO_SMALL = 7,
  /*
   A Rust panic was caught at the boundary.
   */
  OPTSTOP_STATUS_PANIC = 8,
} OptstopStatus;

/*
 A parsed and validated problem.
 */
typedef struct OptstopProblem OptstopProblem;

/*
 A solved problem: region, value function and reward.
 */
typedef struct OptstopSolution OptstopSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Parses a problem from a NUL-terminated JSON string.

 # Safety
 `json` must be a valid C string and `out` a valid pointer.
 */
enum OptstopStatus optstop_problem_from_json(const char *json, struct OptstopProblem **out);

/*
 Releases a problem. Null is ignored.

 # Safety
 `problem` must come from [`optstop_problem_from_json`] and not be freed twice.
 */
void optstop_problem_free(struct OptstopProblem *problem);

/*
 Discount rate of the problem.

 # Safety
 Pointers must be valid.
 */
enum OptstopStatus optstop_problem_alpha(const struct OptstopProblem *problem, double *out);

/*
 Solves a problem with its own tolerances.

 # Safety
 `problem` must be a live handle and `out` a valid pointer.
 */
enum OptstopStatus optstop_solve(const struct OptstopProblem *problem,
                                 struct OptstopSolution **out);

/*
 Releases a solution. Null is ignored.

 # Safety
 `solution` must come from [`optstop_solve`] and not be freed twice.
 */
void optstop_solution_free(struct OptstopSolution *solution);

/*
 Value function `V(x)`.

 # Safety
 Pointers must be valid.
 */
enum OptstopStatus optstop_solution_value(const struct OptstopSolution *solution,
                                          double x,
                                          double *out);

/*
 Reward `g(x)`.

 # Safety
 Pointers must be valid.
 */
enum OptstopStatus optstop_solution_reward(const struct OptstopSolution *solution,
                                           double x,
                                           double *out);

/*
 Writes 1 if `x` lies in the stopping region, 0 otherwise.

 # Safety
 Pointers must be valid.
 */
enum OptstopStatus optstop_solution_in_stopping(const struct OptstopSolution *solution,
                                                double x,
                                                int32_t *out);

/*
 Finite boundary points of the stopping region, ascending.

 `len` receives the number of points. With `capacity` below that count
 nothing is copied and `BufferTooSmall` is returned; `buf` may be null
 when `capacity` is 0.

 # Safety
 `buf` must hold `capacity` doubles; other pointers must be valid.
 */
enum OptstopStatus optstop_solution_boundaries(const struct OptstopSolution *solution,
                                               double *buf,
                                               uintptr_t capacity,
                                               uintptr_t *len);

/*
 Copies the last error message of this thread as a C string.

 Returns the message length without the terminator; the copy is
 truncated to `capacity - 1` bytes. Pass a null `buf` to query the length.

 # Safety
 `buf` must hold `capacity` bytes or be null.
 */
uintptr_t optstop_last_error(char *buf, uintptr_t capacity);

/*
 Static description of a status code.
 */
const char *optstop_status_str(enum OptstopStatus status);

/*
 Library version as a static C string.
 */
const char *optstop_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPTSTOP_H */
