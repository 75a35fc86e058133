#pragma once

#include <absl/container/flat_hash_map.h>

#include <cstdint>
#include <utility>
#include <vector>

#include "orrw/lattice.hpp"
#include "orrw/random.hpp"

namespace orrw {

/// Dimension, reinforcement and the fixed exponents used by heaviness and relaxation tests.
struct ModelParams {
  int d = 2;
  double a = 0.0;
  double kappa = 3.5;
  double nu = 0.01;
  double epsilon = 1.0 / (1e4 * 2);
  double delta = 1.0 / (1e5 * 4);

  /// kappa = 3.5, nu = 0.01, epsilon = 1/(10^4 d), delta = 1/(10^5 d^2).
  static ModelParams with_defaults(int d, double a);
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// The set of reinforced edges, stored as a per-vertex bitmask of incident directions.
class EdgeEnvironment {
 public:
  bool contains(const Edge& e) const;
  bool contains(const Point& u, int dir) const { return (mask(u) >> dir) & 1U; }
  /// Returns true when the edge was not yet present.
  bool insert(const Edge& e);
  bool insert(const Point& u, int dir);
  /// Returns true when the edge was present.
  bool erase(const Point& u, int dir);
  std::uint32_t mask(const Point& u) const;

  std::size_t size() const noexcept { return edge_count_; }
  bool empty() const noexcept { return edge_count_ == 0; }
  /// Number of vertices with at least one reinforced incident edge.
  std::size_t vertex_count() const noexcept { return masks_.size(); }
  std::vector<Edge> edges() const;
  void clear() noexcept;

  EdgeEnvironment translated(const Point& offset) const;
  void merge(const EdgeEnvironment& other);

  friend bool operator==(const EdgeEnvironment& x, const EdgeEnvironment& y) {
    return x.edge_count_ == y.edge_count_ && x.masks_ == y.masks_;
  }

 private:
  friend class Walker;
  absl::flat_hash_map<Point, std::uint32_t> masks_;
  std::size_t edge_count_ = 0;
};

using VisitCounts = absl::flat_hash_map<Point, std::uint32_t>;

/// Probabilities of the 2d neighbours of u, in neighbour order, given the reinforced set.
std::vector<double> transition_probs(const EdgeEnvironment& env, double a, const Point& u);

/// Neighbour index selected by U given the reinforced-direction mask at the current vertex.
/// Same half-open rule as step(), evaluated on unnormalized weights.
int choose_direction(std::uint32_t mask, int d, double a, double uniform) noexcept;

/// The neighbour selected by U: the i with U in [p_0 + ... + p_{i-1}, p_0 + ... + p_i).
Point step(const Point& u, const std::vector<double>& probs, double uniform);

/// Incremental ORRW state. Tracks the environment and, optionally, per-vertex visit counts.
class Walker {
 public:
  Walker(double a, const Point& start, EdgeEnvironment env0 = {}, bool track_visits = false);

  void reset(const Point& start);
  void reset(const Point& start, EdgeEnvironment env0);

  /// Neighbour index chosen by U at the current position.
  int choose(double uniform) const noexcept;
  void move(int dir);
  /// One step driven by `src`; returns the direction taken.
  int advance(const UniformSource& src);

  const Point& position() const noexcept { return pos_; }
  std::uint64_t time() const noexcept { return time_; }
  const EdgeEnvironment& env() const noexcept { return env_; }
  std::uint32_t visits_here() const noexcept { return cur_visits_; }
  const VisitCounts& visits() const noexcept { return visits_; }
  double reinforcement() const noexcept { return a_; }

 private:
  void enter_current();

  double a_;
  Point pos_;
  std::uint64_t time_ = 0;
  EdgeEnvironment env_;
  std::uint32_t cur_mask_ = 0;
  bool track_visits_;
  std::uint32_t cur_visits_ = 0;
  VisitCounts visits_;
};

/// A realized walk: its positions, final environment and per-vertex visit counts.
struct Trajectory {
  ModelParams params;
  PathSeq path;
  EdgeEnvironment env;
  VisitCounts visits;
  UniformSource::Kind source = UniformSource::Kind::kTimeStream;
  std::uint64_t seed = 0;

  std::size_t length() const noexcept { return path.length(); }
  bool empty() const noexcept { return path.empty(); }
  const Point& at(std::size_t t) const { return path.vertices.at(t); }
  const Point& start() const { return path.vertices.front(); }
  const Point& end() const { return path.vertices.back(); }
};

/// Visit counts recomputed from a vertex sequence.
VisitCounts count_visits(const std::vector<Point>& vertices);

/// Trajectory whose environment and visit counts are rebuilt from `path`. For teleporters an
/// edge counts only when crossed with at least one endpoint in the box.
Trajectory make_trajectory(const ModelParams& params, PathSeq path,
                           UniformSource::Kind source = UniformSource::Kind::kTimeStream,
                           std::uint64_t seed = 0);

Trajectory simulate(const ModelParams& params, const Point& start, std::uint64_t steps,
                    const UniformSource& src, const EdgeEnvironment& env0 = {});

/// Two walks driven by the same time-indexed uniforms.
std::pair<Trajectory, Trajectory> natural_couple(const ModelParams& params, const Point& start_a,
                                                 const EdgeEnvironment& env_a,
                                                 const Point& start_b,
                                                 const EdgeEnvironment& env_b,
                                                 std::uint64_t steps, std::uint64_t seed);

/// W1 followed by W2 translated to W1's endpoint. W2 must start at the origin.
Trajectory concatenate(const Trajectory& first, const Trajectory& second);

/// W from U_1..U_{t1+t2}, and the concatenation of W1 (from U_1..U_{t1}) and
/// W2 (from U_{t1+1}..U_{t1+t2}).
std::pair<Trajectory, Trajectory> couple_concat(const ModelParams& params, std::uint64_t t1,
                                                std::uint64_t t2, std::uint64_t seed);

/// max over common times of the Euclidean distance between the two walks.
double max_separation(const Trajectory& x, const Trajectory& y);

}  // namespace orrw
