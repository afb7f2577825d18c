#ifndef CSAPO_H
#define CSAPO_H

/* Generated by cbindgen from the csapo-ffi sources. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call.
 */
typedef enum CsapoStatus {
  CSAPO_STATUS_OK = 0,
  CSAPO_STATUS_NULL_POINTER = 1,
  CSAPO_STATUS_INVALID_UTF8 = 2,
  CSAPO_STATUS_INVALID_ARGUMENT = 3,
  CSAPO_STATUS_INFEASIBLE = 4,
  CSAPO_STATUS_NON_CONVERGED = 5,
  CSAPO_STATUS_IO = 6,
  CSAPO_STATUS_PARSE = 7,
  CSAPO_STATUS_PANIC = 8,
} CsapoStatus;

typedef enum CsapoMode {
  /*
   One budget on the sum of both players' utilities.
   */
  CSAPO_MODE_COUPLED = 0,
  /*
   One budget per player.
   */
  CSAPO_MODE_SIDE = 1,
} CsapoMode;

/*
 Opaque handle to the metrics of a run.
 */
typedef struct CsapoEvaluation CsapoEvaluation;

/*
 Opaque game handle.
 */
typedef struct CsapoGame CsapoGame;

/*
 Opaque handle to a finished run.
 */
typedef struct CsapoRun CsapoRun;

/*
 Learner parameters; see `csapo_default_params`.
 */
typedef struct CsapoParams {
  double v;
  double eta;
  double theta;
  double delta;
} CsapoParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static nul-terminated string.
 */
const char *csapo_version(void);

/*
 Message of the last failed call on this thread, or null. Valid until the
 next call into the library from the same thread.
 */
const char *csapo_last_error(void);

/*
 Releases a string returned by the library. Null is ignored.

 # Safety
 `s` must come from this library and not have been freed.
 */
void csapo_string_free(char *s);

/*
 Theorem-default parameters for horizon `L` and `T` episodes.

 # Safety
 `out` must be null or point to writable memory for one `CsapoParams`.
 */
enum CsapoStatus csapo_default_params(size_t horizon, uint64_t episodes, struct CsapoParams *out);

/*
 Generates a random game from a JSON generator spec (null for the benchmark).

 # Safety
 `spec_json` must be null or a nul-terminated string; `out` must be writable.
 */
enum CsapoStatus csapo_game_generate(const char *spec_json, struct CsapoGame **out);

/*
 Loads a game from its JSON document.

 # Safety
 `json` must be a nul-terminated string; `out` must be writable.
 */
enum CsapoStatus csapo_game_from_json(const char *json, struct CsapoGame **out);

/*
 Serializes a game; free the result with `csapo_string_free`.

 # Safety
 `game` must be a live handle; `out` must be writable.
 */
enum CsapoStatus csapo_game_to_json(const struct CsapoGame *game, char **out);

/*
 Number of decision layers, or 0 for a null handle.

 # Safety
 `game` must be null or a live handle.
 */
size_t csapo_game_horizon(const struct CsapoGame *game);

/*
 # Safety
 `game` must be null or a handle not yet freed.
 */
void csapo_game_free(struct CsapoGame *game);

/*
 Runs the learner for `episodes` episodes. `params` may be null for the
 theorem defaults.

 # Safety
 `game` must be a live handle, `params` null or valid, `out` writable.
 */
enum CsapoStatus csapo_run(const struct CsapoGame *game,
                           uint64_t episodes,
                           uint64_t seed,
                           enum CsapoMode mode,
                           const struct CsapoParams *params,
                           struct CsapoRun **out);

/*
 Number of episodes in the run, or 0 for a null handle.

 # Safety
 `run` must be null or a live handle.
 */
size_t csapo_run_length(const struct CsapoRun *run);

/*
 Copies up to `len` multipliers per episode. In the coupled mode both
 buffers receive the shared multiplier; `lambda2` may be null.

 # Safety
 `run` must be a live handle; buffers must hold `len` doubles.
 */
enum CsapoStatus csapo_run_lambda(const struct CsapoRun *run,
                                  double *lambda1,
                                  double *lambda2,
                                  size_t len);

/*
 # Safety
 `run` must be null or a handle not yet freed.
 */
void csapo_run_free(struct CsapoRun *run);

/*
 Solves the comparator to exploitability `tol` and computes the metrics.

 # Safety
 `game` and `run` must be live handles; `out` writable.
 */
enum CsapoStatus csapo_evaluate(const struct CsapoGame *game,
                                const struct CsapoRun *run,
                                double tol,
                                struct CsapoEvaluation **out);

/*
 Copies up to `len` values of the cumulative regret.

 # Safety
 `eval` must be a live handle; `out` must hold `len` doubles.
 */
enum CsapoStatus csapo_evaluation_regret(const struct CsapoEvaluation *eval,
                                         double *out,
                                         size_t len);

/*
 Copies up to `len` values of the violation of `constraint` (0 in the
 coupled mode, 0 or 1 in the side mode).

 # Safety
 `eval` must be a live handle; `out` must hold `len` doubles.
 */
enum CsapoStatus csapo_evaluation_violation(const struct CsapoEvaluation *eval,
                                            size_t constraint,
                                            double *out,
                                            size_t len);

/*
 Summary of the evaluation as JSON; free with `csapo_string_free`.

 # Safety
 `eval` must be a live handle; `out` writable.
 */
enum CsapoStatus csapo_evaluation_summary_json(const struct CsapoEvaluation *eval, char **out);

/*
 # Safety
 `eval` must be null or a handle not yet freed.
 */
void csapo_evaluation_free(struct CsapoEvaluation *eval);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CSAPO_H */
