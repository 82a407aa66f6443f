/* C interface to the catsim catastrophe-insurance simulator. */

#ifndef CATSIM_H
#define CATSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Number of market states a q-table has rows for.
 */
#define CATSIM_STATES 8

/*
 Number of interventions, including doing nothing.
 */
#define CATSIM_ACTIONS 8

/*
 Who acts in a simulated episode.
 */
typedef enum CatsimPolicyMode {
  /*
   Market alone, no taxes or interventions.
   */
  CATSIM_POLICY_MODE_NO_GOVERNMENT = 0,
  /*
   Greedy actions from a q-table.
   */
  CATSIM_POLICY_MODE_GREEDY = 1,
  /*
   A fixed list of interventions, cycled.
   */
  CATSIM_POLICY_MODE_SEQUENCE = 2,
} CatsimPolicyMode;

/*
 Result of every fallible call. Anything but `Ok` leaves a message.
 */
typedef enum CatsimStatus {
  CATSIM_STATUS_OK = 0,
  CATSIM_STATUS_NULL_POINTER = 1,
  CATSIM_STATUS_INVALID_ARGUMENT = 2,
  CATSIM_STATUS_CONFIG = 3,
  CATSIM_STATUS_MODEL = 4,
  CATSIM_STATUS_IO = 5,
  CATSIM_STATUS_FINGERPRINT_MISMATCH = 6,
  CATSIM_STATUS_PANIC = 7,
} CatsimStatus;

/*
 Learned action values.
 */
typedef struct CatsimQTable CatsimQTable;

/*
 Scenario configuration.
 */
typedef struct CatsimScenario CatsimScenario;

/*
 One simulated episode.
 */
typedef struct CatsimTrace CatsimTrace;

/*
 Summary of one simulated step. Missing values are NaN or -1.
 */
typedef struct CatsimStep {
  size_t t;
  bool catastrophe;
  double coverage;
  double gini;
  double mean_wealth;
  size_t insured;
  size_t unserved;
  size_t active_insurers;
  /*
   Market state index, -1 without a government.
   */
  int32_t state;
  /*
   Intervention index, -1 without a government.
   */
  int32_t intervention;
  /*
   MVPF credited to this step's intervention.
   */
  double reward;
  double treasury;
  double debt;
} CatsimStep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread; empty when none.
 Valid until the next failing call on the same thread.
 */
const char *catsim_last_error_message(void);

/*
 Library version, statically allocated.
 */
const char *catsim_version(void);

/*
 # Safety
 `s` must come from this library or be null.
 */
void catsim_string_free(char *s);

/*
 Kebab-case name of an intervention, or null for a bad index.
 */
const char *catsim_intervention_name(uint32_t action);

/*
 # Safety
 `out` must be writable.
 */
enum CatsimStatus catsim_scenario_default(struct CatsimScenario **out);

/*
 Parses and validates a TOML scenario.

 # Safety
 `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum CatsimStatus catsim_scenario_from_toml(const char *toml, struct CatsimScenario **out);

/*
 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CatsimStatus catsim_scenario_load(const char *path, struct CatsimScenario **out);

/*
 Sets both the environment and the training seed.

 # Safety
 `scenario` must be a live handle or null.
 */
enum CatsimStatus catsim_scenario_set_seed(struct CatsimScenario *scenario, uint64_t seed);

/*
 Overrides the number of training episodes.

 # Safety
 `scenario` must be a live handle or null.
 */
enum CatsimStatus catsim_scenario_set_training_episodes(struct CatsimScenario *scenario,
                                                        uint64_t episodes);

/*
 Serialises the scenario; free the result with `catsim_string_free`.

 # Safety
 `scenario` must be a live handle; `out` must be writable.
 */
enum CatsimStatus catsim_scenario_to_toml(const struct CatsimScenario *scenario, char **out);

/*
 # Safety
 `scenario` must come from this library or be null.
 */
void catsim_scenario_free(struct CatsimScenario *scenario);

/*
 Simulates one episode.

 `qtable` is read in `Greedy` mode and `actions`/`n_actions` in
 `Sequence` mode; otherwise they may be null.

 # Safety
 Pointers must be live handles or valid arrays of the stated length.
 */
enum CatsimStatus catsim_run_episode(const struct CatsimScenario *scenario,
                                     uint64_t seed,
                                     enum CatsimPolicyMode mode,
                                     const struct CatsimQTable *qtable,
                                     const uint32_t *actions,
                                     size_t n_actions,
                                     struct CatsimTrace **out);

/*
 Number of recorded steps; 0 for a null handle.

 # Safety
 `trace` must be a live handle or null.
 */
size_t catsim_trace_len(const struct CatsimTrace *trace);

/*
 # Safety
 `trace` must be a live handle; `out` must be writable.
 */
enum CatsimStatus catsim_trace_step(const struct CatsimTrace *trace,
                                    size_t index,
                                    struct CatsimStep *out);

/*
 Writes the per-step trace as CSV.

 # Safety
 `trace` must be a live handle; `path` a NUL-terminated string.
 */
enum CatsimStatus catsim_trace_write_csv(const struct CatsimTrace *trace, const char *path);

/*
 # Safety
 `trace` must come from this library or be null.
 */
void catsim_trace_free(struct CatsimTrace *trace);

/*
 Trains a policy with the scenario's training settings.

 # Safety
 `scenario` must be a live handle; `out` must be writable.
 */
enum CatsimStatus catsim_train(const struct CatsimScenario *scenario, struct CatsimQTable **out);

/*
 Loads a saved table. When `scenario` is non-null the table must have
 been trained on an equivalent scenario.

 # Safety
 `path` must be a NUL-terminated string; `scenario` a live handle or null.
 */
enum CatsimStatus catsim_qtable_load(const char *path,
                                     const struct CatsimScenario *scenario,
                                     struct CatsimQTable **out);

/*
 # Safety
 Handles must be live; `path` a NUL-terminated string.
 */
enum CatsimStatus catsim_qtable_save(const struct CatsimQTable *qtable,
                                     const struct CatsimScenario *scenario,
                                     const char *path);

/*
 # Safety
 `qtable` must be a live handle; `out` must be writable.
 */
enum CatsimStatus catsim_qtable_get(const struct CatsimQTable *qtable,
                                    uint32_t state,
                                    uint32_t action,
                                    double *out);

/*
 Greedy action for a state; ties go to the lower index.

 # Safety
 `qtable` must be a live handle; `out` must be writable.
 */
enum CatsimStatus catsim_qtable_best(const struct CatsimQTable *qtable,
                                     uint32_t state,
                                     uint32_t *out);

/*
 # Safety
 `qtable` must come from this library or be null.
 */
void catsim_qtable_free(struct CatsimQTable *qtable);

/*
 Gini index of `n` non-negative wealths.

 # Safety
 `wealths` must point to `n` doubles; `out` must be writable.
 */
enum CatsimStatus catsim_gini(const double *wealths, size_t n, double *out);

/*
 Largest premium a rational buyer accepts under a Pareto utility.

 # Safety
 `out` must be writable.
 */
enum CatsimStatus catsim_pmax_rational(double wealth,
                                       double risk_perception,
                                       double perceived_loss_rate,
                                       double utility_scale,
                                       double utility_curvature,
                                       double *out);

/*
 Capital an insurer holds per policy at a solvency percentile.

 # Safety
 `out` must be writable.
 */
enum CatsimStatus catsim_reserve_per_policy(double percentile, double mean, double sd, double *out);

/*
 Loaded premium for one policy.
 */
double catsim_premium_quote(double rate, double loading, double loss_rate, double wealth);

/*
 Marginal value of public funds, `wtp / net_cost` limited to `[0, cap]`.
 */
double catsim_mvpf(double wtp, double net_cost, double cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CATSIM_H */
