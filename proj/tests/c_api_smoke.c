/* Exercises the C interface from plain C. */
#include <math.h>
#include <stdio.h>
#include <string.h>

#include "orrw/orrw.h"

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                 \
    }                                                             \
  } while (0)

int main(void) {
  orrw_env* env = NULL;
  int32_t u[2] = {0, 0}, v[2] = {1, 0}, w[2] = {0, 1}, far[2] = {5, 5};
  double probs[4];
  EXPECT(orrw_env_create(2, &env) == ORRW_OK);
  EXPECT(orrw_env_insert(env, u, v) == ORRW_OK);
  EXPECT(orrw_env_insert(env, u, w) == ORRW_OK);
  EXPECT(orrw_env_insert(env, u, far) == ORRW_INVALID_ARGUMENT);
  EXPECT(strlen(orrw_last_error()) > 0);
  EXPECT(orrw_env_size(env) == 2);
  EXPECT(orrw_transition_probs(env, 0.5, u, probs) == ORRW_OK);
  EXPECT(fabs(probs[0] - 0.3) < 1e-12 && fabs(probs[1] - 0.2) < 1e-12);

  orrw_trajectory* t = NULL;
  EXPECT(orrw_simulate(2, 1.0, u, 100, 7, 0, NULL, &t) == ORRW_OK);
  EXPECT(orrw_trajectory_length(t) == 100);
  EXPECT(orrw_trajectory_dim(t) == 2);
  int32_t pos[2];
  EXPECT(orrw_trajectory_position(t, 0, pos) == ORRW_OK && pos[0] == 0 && pos[1] == 0);
  EXPECT(orrw_trajectory_position(t, 101, pos) == ORRW_INVALID_ARGUMENT);
  char* js = NULL;
  EXPECT(orrw_trajectory_to_json(t, &js) == ORRW_OK && js != NULL && js[0] == '{');
  orrw_string_free(js);

  orrw_trajectory* t2 = NULL;
  EXPECT(orrw_simulate(2, 1.0, u, 100, 7, 0, env, &t2) == ORRW_OK);
  orrw_trajectory_destroy(t2);

  const char* path = "c_api_smoke.bin";
  EXPECT(orrw_trajectory_write(t, path) == ORRW_OK);
  orrw_trajectory* back = NULL;
  EXPECT(orrw_trajectory_read(path, &back) == ORRW_OK);
  EXPECT(orrw_trajectory_length(back) == 100);
  for (uint64_t s = 0; s <= 100; ++s) {
    int32_t p1[2], p2[2];
    orrw_trajectory_position(t, s, p1);
    orrw_trajectory_position(back, s, p2);
    EXPECT(p1[0] == p2[0] && p1[1] == p2[1]);
  }
  remove(path);
  EXPECT(orrw_trajectory_read("/nonexistent/x.bin", &back) == ORRW_IO);
  orrw_trajectory_destroy(back);
  orrw_trajectory_destroy(t);
  orrw_env_destroy(env);

  int equal = 0;
  uint64_t len = 0;
  EXPECT(orrw_replay(2, 1.0, 3, 3, 200, &equal, &len) == ORRW_OK && equal == 1);

  double m = 0;
  EXPECT(orrw_exact_moment(1, 1.0, 2, 0, &m) == ORRW_OK && fabs(m - 4.0 / 3.0) < 1e-12);
  EXPECT(orrw_exact_moment(2, 1.0, 40, 0, &m) == ORRW_BUDGET);
  int32_t a1[1] = {2}, b1[1] = {3};
  EXPECT(orrw_exit_through_edge(1, 2.0, a1, b1, &m) == ORRW_OK && fabs(m - 1.0 / 6.0) < 1e-10);
  EXPECT(orrw_green_at_origin(3, 6.0, &m) == ORRW_OK && m > 1.0);
  EXPECT(orrw_green_at_origin(2, 6.0, &m) == ORRW_INVALID_ARGUMENT);
  EXPECT(orrw_derive_replica_seed(1, 2) != orrw_derive_replica_seed(1, 3));

  char* summary = NULL;
  EXPECT(orrw_run_experiment("{\"command\":\"selftest\"}", "c_api_smoke_out", &summary) == ORRW_OK);
  EXPECT(summary != NULL && strstr(summary, "selftest") != NULL);
  orrw_string_free(summary);
  EXPECT(orrw_run_experiment("{\"command\":\"selftest\",\"x\":1}", "c_api_smoke_out", NULL) == ORRW_CONFIG);
  EXPECT(orrw_run_experiment("not json", "c_api_smoke_out", NULL) == ORRW_CONFIG);
  EXPECT(strcmp(orrw_version(), "0.3.0") == 0);

  if (failures) fprintf(stderr, "%d failures\n", failures);
  return failures ? 1 : 0;
}
