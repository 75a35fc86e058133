#include "orrw/orrw.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>

#include "orrw/demon.hpp"
#include "orrw/engine.hpp"
#include "orrw/error.hpp"
#include "orrw/experiment.hpp"
#include "orrw/oracles.hpp"
#include "orrw/serialization.hpp"

struct orrw_env {
  int d;
  orrw::EdgeEnvironment env;
};

struct orrw_trajectory {
  orrw::Trajectory traj;
};

namespace {

thread_local std::string last_error;

orrw_status fail(orrw_status s, const char* what) {
  last_error = what;
  return s;
}

template <typename F>
orrw_status guarded(F&& f) {
  try {
    last_error.clear();
    f();
    return ORRW_OK;
  } catch (const orrw::Error& e) {
    return fail(static_cast<orrw_status>(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(ORRW_CONFIG, e.what());
  } catch (const std::bad_alloc&) {
    return fail(ORRW_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(ORRW_INTERNAL, e.what());
  }
}

void check_dim(int d) {
  if (d < 1 || d > orrw::kMaxDim) throw orrw::InvalidArgument("dimension out of range");
}

orrw::Point point(int d, const int32_t* c) {
  if (c == nullptr) throw orrw::InvalidArgument("null coordinate pointer");
  return orrw::Point(std::span<const std::int32_t>(c, static_cast<std::size_t>(d)));
}

template <typename T>
void need(T* p) {
  if (p == nullptr) throw orrw::InvalidArgument("null argument");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* orrw_version(void) { return orrw::kToolVersion; }

const char* orrw_last_error(void) { return last_error.c_str(); }

void orrw_string_free(char* s) { std::free(s); }

orrw_status orrw_env_create(int d, orrw_env** out) {
  return guarded([&] {
    check_dim(d);
    need(out);
    *out = new orrw_env{d, {}};
  });
}

void orrw_env_destroy(orrw_env* env) { delete env; }

orrw_status orrw_env_insert(orrw_env* env, const int32_t* u, const int32_t* v) {
  return guarded([&] {
    need(env);
    const orrw::Point x = point(env->d, u), y = point(env->d, v);
    if (!orrw::adjacent(x, y)) throw orrw::InvalidArgument("endpoints are not neighbours");
    env->env.insert(orrw::Edge(x, y));
  });
}

size_t orrw_env_size(const orrw_env* env) { return env ? env->env.size() : 0; }

orrw_status orrw_transition_probs(const orrw_env* env, double a, const int32_t* u, double* probs) {
  return guarded([&] {
    need(env);
    need(probs);
    if (!(a >= 0)) throw orrw::InvalidArgument("reinforcement must be >= 0");
    const auto p = orrw::transition_probs(env->env, a, point(env->d, u));
    std::copy(p.begin(), p.end(), probs);
  });
}

orrw_status orrw_simulate(int d, double a, const int32_t* start, uint64_t steps, uint64_t seed,
                          int envelopes, const orrw_env* env0, orrw_trajectory** out) {
  return guarded([&] {
    check_dim(d);
    need(out);
    if (env0 != nullptr && env0->d != d) throw orrw::InvalidArgument("environment dimension differs");
    const auto params = orrw::ModelParams::with_defaults(d, a);
    params.validate();
    const auto src = envelopes ? orrw::UniformSource::envelopes(seed) : orrw::UniformSource::time_stream(seed);
    auto traj = orrw::simulate(params, point(d, start), steps, src,
                               env0 ? env0->env : orrw::EdgeEnvironment{});
    *out = new orrw_trajectory{std::move(traj)};
  });
}

void orrw_trajectory_destroy(orrw_trajectory* traj) { delete traj; }

uint64_t orrw_trajectory_length(const orrw_trajectory* traj) { return traj ? traj->traj.length() : 0; }

int orrw_trajectory_dim(const orrw_trajectory* traj) { return traj ? traj->traj.params.d : 0; }

orrw_status orrw_trajectory_position(const orrw_trajectory* traj, uint64_t t, int32_t* coords) {
  return guarded([&] {
    need(traj);
    need(coords);
    if (t > traj->traj.length()) throw orrw::InvalidArgument("time beyond the trajectory");
    const auto c = traj->traj.at(t).coords();
    std::copy(c.begin(), c.end(), coords);
  });
}

orrw_status orrw_trajectory_write(const orrw_trajectory* traj, const char* path) {
  return guarded([&] {
    need(traj);
    need(path);
    orrw::write_trajectory_file(path, traj->traj);
  });
}

orrw_status orrw_trajectory_read(const char* path, orrw_trajectory** out) {
  return guarded([&] {
    need(path);
    need(out);
    *out = new orrw_trajectory{orrw::read_trajectory_file(path)};
  });
}

orrw_status orrw_trajectory_to_json(const orrw_trajectory* traj, char** out) {
  return guarded([&] {
    need(traj);
    need(out);
    *out = dup(orrw::trajectory_to_json(traj->traj).dump());
  });
}

orrw_status orrw_replay(int d, double a, uint64_t seed, int32_t box_radius, uint64_t steps, int* equal,
                        uint64_t* restricted_length) {
  return guarded([&] {
    check_dim(d);
    need(equal);
    if (box_radius < 0) throw orrw::InvalidArgument("box radius must be >= 0");
    const auto params = orrw::ModelParams::with_defaults(d, a);
    const auto res = orrw::restriction_demon_replay(seed, orrw::Box{orrw::Point::origin(d), box_radius},
                                                    steps, params);
    *equal = res.restricted.path.vertices == res.demon_walk.path.vertices ? 1 : 0;
    if (restricted_length) *restricted_length = res.restricted.length();
  });
}

orrw_status orrw_exact_moment(int d, double a, uint64_t t, int coordinate, double* out) {
  return guarded([&] {
    check_dim(d);
    need(out);
    *out = orrw::exact_moments(orrw::ModelParams::with_defaults(d, a), t, coordinate);
  });
}

orrw_status orrw_exit_through_edge(int d, double radius, const int32_t* u, const int32_t* v, double* out) {
  return guarded([&] {
    check_dim(d);
    need(out);
    const orrw::Point x = point(d, u), y = point(d, v);
    if (!orrw::adjacent(x, y)) throw orrw::InvalidArgument("endpoints are not neighbours");
    *out = orrw::exact_exit_through_edge(d, radius, orrw::Edge(x, y)).probability;
  });
}

orrw_status orrw_green_at_origin(int d, double radius, double* out) {
  return guarded([&] {
    need(out);
    *out = orrw::srw_green(d, radius).at(orrw::Point::origin(d));
  });
}

uint64_t orrw_derive_replica_seed(uint64_t master, uint64_t index) {
  return orrw::derive_replica_seed(master, index);
}

orrw_status orrw_run_experiment(const char* config_json, const char* out_dir, char** summary) {
  orrw_status gate = ORRW_OK;
  const orrw_status s = guarded([&] {
    need(config_json);
    const auto raw = nlohmann::json::parse(config_json);
    const auto outcome = orrw::run_experiment(raw, out_dir ? out_dir : "");
    if (summary) *summary = dup(outcome.summary.dump());
    if (outcome.exit_code != 0) {
      gate = ORRW_GATE;
      last_error = "gate failure: " + outcome.summary.at("gate_failures").dump();
    }
  });
  return s == ORRW_OK ? gate : s;
}

}  // extern "C"
