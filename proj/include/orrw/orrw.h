#ifndef ORRW_ORRW_H
#define ORRW_ORRW_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ORRW_API __declspec(dllexport)
#else
#define ORRW_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; also the CLI exit codes. */
typedef enum orrw_status {
  ORRW_OK = 0,
  ORRW_INVALID_ARGUMENT = 1,
  ORRW_CONFIG = 2,
  ORRW_GATE = 3,
  ORRW_BUDGET = 4,
  ORRW_IO = 5,
  ORRW_INTERNAL = 6
} orrw_status;

typedef struct orrw_env orrw_env;
typedef struct orrw_trajectory orrw_trajectory;

ORRW_API const char* orrw_version(void);

/* Message of the last failing call on this thread ("" if none). Valid until the next call. */
ORRW_API const char* orrw_last_error(void);

/* Frees strings returned through char** out-parameters. */
ORRW_API void orrw_string_free(char* s);

ORRW_API orrw_status orrw_env_create(int d, orrw_env** out);
ORRW_API void orrw_env_destroy(orrw_env* env);
/* Adds the edge {u, v}; u and v must be lattice neighbours with d coordinates each. */
ORRW_API orrw_status orrw_env_insert(orrw_env* env, const int32_t* u, const int32_t* v);
ORRW_API size_t orrw_env_size(const orrw_env* env);

/* Writes the 2d neighbour probabilities at u (order +e1, -e1, +e2, ...) into probs. */
ORRW_API orrw_status orrw_transition_probs(const orrw_env* env, double a, const int32_t* u,
                                           double* probs);

/* Runs `steps` steps from `start`. env0 may be NULL. envelopes != 0 selects per-vertex
   instruction stacks instead of the time-indexed stream. */
ORRW_API orrw_status orrw_simulate(int d, double a, const int32_t* start, uint64_t steps,
                                   uint64_t seed, int envelopes, const orrw_env* env0,
                                   orrw_trajectory** out);
ORRW_API void orrw_trajectory_destroy(orrw_trajectory* traj);
ORRW_API uint64_t orrw_trajectory_length(const orrw_trajectory* traj);
ORRW_API int orrw_trajectory_dim(const orrw_trajectory* traj);
/* Copies the position at time t (0..length) into coords. */
ORRW_API orrw_status orrw_trajectory_position(const orrw_trajectory* traj, uint64_t t,
                                              int32_t* coords);
ORRW_API orrw_status orrw_trajectory_write(const orrw_trajectory* traj, const char* path);
ORRW_API orrw_status orrw_trajectory_read(const char* path, orrw_trajectory** out);
ORRW_API orrw_status orrw_trajectory_to_json(const orrw_trajectory* traj, char** out);

/* Restricts a walk of `steps` steps to the box [-box_radius, box_radius]^d and rebuilds it with
   the envelope-replay strategy; *equal is set to 1 when the two coincide. */
ORRW_API orrw_status orrw_replay(int d, double a, uint64_t seed, int32_t box_radius,
                                 uint64_t steps, int* equal, uint64_t* restricted_length);

/* E[x_coord(t)^2] by exhaustive enumeration. */
ORRW_API orrw_status orrw_exact_moment(int d, double a, uint64_t t, int coordinate, double* out);

/* Probability that simple random walk from 0 leaves the Euclidean ball of radius L through the
   edge {u, v} before returning to 0. */
ORRW_API orrw_status orrw_exit_through_edge(int d, double radius, const int32_t* u,
                                            const int32_t* v, double* out);

/* Expected visits to 0 of simple random walk killed outside the Euclidean ball (d >= 3). */
ORRW_API orrw_status orrw_green_at_origin(int d, double radius, double* out);

ORRW_API uint64_t orrw_derive_replica_seed(uint64_t master, uint64_t index);

/* Runs an experiment described by a JSON config. out_dir may be NULL or "" to use the config's
   own. On ORRW_OK or ORRW_GATE, *summary (if non-NULL) receives a JSON string. */
ORRW_API orrw_status orrw_run_experiment(const char* config_json, const char* out_dir,
                                         char** summary);

#ifdef __cplusplus
}
#endif

#endif
