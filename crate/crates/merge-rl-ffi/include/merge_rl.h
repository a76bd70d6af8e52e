#ifndef MERGE_RL_H
#define MERGE_RL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Episode outcome, mirroring the simulator's episode status.
 */
typedef enum MergeRlEpisode {
  MergeRlRunning = 0,
  MergeRlSuccess = 1,
  MergeRlCollision = 2,
  MergeRlTimeout = 3,
} MergeRlEpisode;

/**
 * Status codes returned by every fallible function.
 */
typedef enum MergeRlStatus {
  MergeRlOk = 0,
  MergeRlUsageError = 1,
  MergeRlConfigError = 2,
  MergeRlNumericError = 3,
  MergeRlIoError = 4,
  MergeRlNullPointer = 5,
} MergeRlStatus;

/**
 * Opaque simulator handle.
 */
typedef struct MergeRlEnv MergeRlEnv;

/**
 * Opaque policy handle wrapping a loaded checkpoint.
 */
typedef struct MergeRlPolicy MergeRlPolicy;

/**
 * Raw six-component observation.
 */
typedef struct MergeRlObservation {
  double v_ev;
  double p_ev;
  double v_gfv;
  double p_gfv;
  double v_gbv;
  double p_gbv;
} MergeRlObservation;

/**
 * One simulation tick's outcome.
 */
typedef struct MergeRlStepResult {
  struct MergeRlObservation observation;
  double reward_total;
  double reward_accel;
  double reward_front;
  double reward_back;
  double reward_speed;
  int terminal;
  enum MergeRlEpisode episode;
} MergeRlStepResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent error on this thread. Valid until
 * the next failing call on the same thread.
 */
const char *merge_rl_last_error_message(void);

/**
 * Create a simulator from an optional JSON config document (NULL for
 * defaults) and a seed. Returns NULL on error.
 */
struct MergeRlEnv *merge_rl_env_new(const char *config_json, uint64_t seed);

void merge_rl_env_free(struct MergeRlEnv *env);

/**
 * Current observation without advancing the simulation.
 */
enum MergeRlStatus merge_rl_env_observe(struct MergeRlEnv *env, struct MergeRlObservation *out);

/**
 * Advance one 0.1 s tick under the given ego acceleration.
 */
enum MergeRlStatus merge_rl_env_step(struct MergeRlEnv *env,
                                     double ego_accel,
                                     struct MergeRlStepResult *out);

/**
 * Load a policy from a checkpoint file. Returns NULL on error.
 */
struct MergeRlPolicy *merge_rl_policy_load(const char *path);

void merge_rl_policy_free(struct MergeRlPolicy *policy);

/**
 * Greedy acceleration for a raw observation. `merge_point_x` anchors the
 * position normalization (0 for the default geometry).
 */
enum MergeRlStatus merge_rl_policy_action(const struct MergeRlPolicy *policy,
                                          const struct MergeRlObservation *observation,
                                          double merge_point_x,
                                          double *action_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MERGE_RL_H */
