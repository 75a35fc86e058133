#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "orrw/engine.hpp"
#include "orrw/lattice.hpp"
#include "orrw/random.hpp"

namespace orrw {

/// Step to a vertex of the box. Away from the start it must neighbour the current position.
struct EnterVertex {
  Point vertex;
  friend bool operator==(const EnterVertex&, const EnterVertex&) = default;
};

/// Place the walk at `outside` and then step across the boundary edge to `inside`.
struct EnterEdge {
  Point outside;
  Point inside;
  friend bool operator==(const EnterEdge&, const EnterEdge&) = default;
};

using DemonDecision = std::variant<EnterVertex, EnterEdge>;

/// What a strategy sees when consulted. `history` is the teleporter so far (empty at the start).
struct DemonView {
  const Box& box;
  const std::vector<Point>& history;
  const EdgeEnvironment& env;
  const VisitCounts& visits;
  std::uint64_t decision_index;
};

class DemonStrategy {
 public:
  virtual ~DemonStrategy() = default;
  virtual DemonDecision decide(const DemonView& view) = 0;
  virtual std::string name() const = 0;
};

class CallbackStrategy : public DemonStrategy {
 public:
  using Fn = std::function<DemonDecision(const DemonView&)>;
  CallbackStrategy(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
  DemonDecision decide(const DemonView& view) override { return fn_(view); }
  std::string name() const override { return name_; }

 private:
  std::string name_;
  Fn fn_;
};

/// Always re-enters through one boundary edge.
class FixedEdgeStrategy : public DemonStrategy {
 public:
  explicit FixedEdgeStrategy(Edge edge) : edge_(std::move(edge)) {}
  DemonDecision decide(const DemonView& view) override;
  std::string name() const override { return "fixed-edge"; }

 private:
  Edge edge_;
};

/// Uniform boundary edge per decision; the k-th choice reads PRF(seed, k).
class UniformRandomEdgeStrategy : public DemonStrategy {
 public:
  explicit UniformRandomEdgeStrategy(std::uint64_t seed) : seed_(seed) {}
  DemonDecision decide(const DemonView& view) override;
  std::string name() const override { return "uniform-random-edge"; }

 private:
  std::uint64_t seed_;
  std::vector<Edge> edges_;
  Box cached_for_;
};

/// Steps straight back into the box from the exit position; starts at the center.
class NearestToExitStrategy : public DemonStrategy {
 public:
  DemonDecision decide(const DemonView& view) override;
  std::string name() const override { return "nearest-to-exit"; }
};

/// Re-enters through the boundary edge whose inside endpoint is L1-closest to the most visited
/// inside vertex. Ties go to the smaller vertex, then the smaller edge.
class GreedyDenseStrategy : public DemonStrategy {
 public:
  DemonDecision decide(const DemonView& view) override;
  std::string name() const override { return "greedy-dense"; }
};

std::vector<std::string> builtin_strategy_names();

/// Builds a catalog strategy. Parameters: fixed-edge {"edge": [[...], [...]]},
/// uniform-random-edge {"seed": n}; the others take none.
std::unique_ptr<DemonStrategy> make_strategy(const std::string& name, const nlohmann::json& params,
                                             const Box& box);

struct DemonProgress {
  const std::vector<Point>& positions;
  std::uint64_t inside_steps;
  std::uint64_t decisions;
};

using StopPredicate = std::function<bool(const DemonProgress&)>;

StopPredicate stop_at_length(std::uint64_t length);
StopPredicate stop_after_inside_steps(std::uint64_t steps);
/// Stops once `threshold` positions have fallen in `region`.
StopPredicate stop_at_spend(const Box& region, std::uint64_t threshold);

struct DecisionRecord {
  std::uint64_t time;
  DemonDecision decision;
};

struct DemonRun {
  Trajectory walk;  // teleporter relative to the box
  std::vector<DecisionRecord> decisions;
};

/// Runs the demon walk in `box`: ORRW steps inside driven by `src`, strategy decisions outside.
/// Illegal decisions raise InvalidArgument. `max_length` guards runaway stop predicates.
DemonRun run_demon_walk(DemonStrategy& strategy, const Box& box, const ModelParams& params,
                        const StopPredicate& stop, const UniformSource& src,
                        std::uint64_t max_length = std::uint64_t{1} << 26);

nlohmann::json decision_to_json(const DemonDecision& d);
nlohmann::json decision_log_to_json(const std::vector<DecisionRecord>& log);

struct ReplayResult {
  Trajectory restricted;
  Trajectory demon_walk;
  std::vector<DecisionRecord> decisions;
  /// Number of decisions that fell back to a fictitious value.
  std::uint64_t fictitious = 0;
};

/// Simulates W from the origin with envelopes keyed by `seed`, restricts it to `box`, and runs
/// the demon walk whose demon replays the outside envelopes. Both walks read the same inside
/// envelopes, so the two teleporters coincide.
ReplayResult restriction_demon_replay(std::uint64_t seed, const Box& box, std::uint64_t steps,
                                      const ModelParams& params);

}  // namespace orrw
