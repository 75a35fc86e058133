#include "orrw/demon.hpp"

#include <algorithm>
#include <limits>

#include "orrw/error.hpp"
#include "orrw/serialization.hpp"

namespace orrw {

namespace {

constexpr std::uint64_t kTagStrategy = 0x44454d4f4e000000ULL;

// The inside neighbour of a vertex on the outer shell of the box.
Point inside_neighbor(const Box& box, const Point& x) {
  for (int i = 0; i < 2 * x.dim(); ++i) {
    const Point y = neighbor(x, i);
    if (box.contains(y)) return y;
  }
  throw InvalidArgument("position has no neighbour inside the box");
}

EnterEdge as_decision(const Box& box, const Edge& e) {
  return box.contains(e.lo()) ? EnterEdge{e.hi(), e.lo()} : EnterEdge{e.lo(), e.hi()};
}

void check_legal(const Box& box, const DemonDecision& decision, const std::vector<Point>& history) {
  if (const auto* v = std::get_if<EnterVertex>(&decision)) {
    if (v->vertex.dim() != box.dim() || !box.contains(v->vertex)) {
      throw InvalidArgument("demon chose a vertex outside the box");
    }
    if (!history.empty() && !adjacent(history.back(), v->vertex)) {
      throw InvalidArgument("demon chose a vertex not adjacent to the current position");
    }
    return;
  }
  const auto& e = std::get<EnterEdge>(decision);
  if (e.outside.dim() != box.dim() || e.inside.dim() != box.dim() || box.contains(e.outside) ||
      !box.contains(e.inside) || !adjacent(e.outside, e.inside)) {
    throw InvalidArgument("demon chose an edge that is not a boundary edge of the box");
  }
}

class WalkBuilder {
 public:
  explicit WalkBuilder(const Box& box) : box_(box) {}

  void push(const Point& p) {
    if (!positions_.empty()) {
      const Point& prev = positions_.back();
      if ((box_.contains(prev) || box_.contains(p)) && adjacent(prev, p)) env_.insert(Edge(prev, p));
    }
    positions_.push_back(p);
    ++visits_[p];
  }

  const std::vector<Point>& positions() const { return positions_; }
  const EdgeEnvironment& env() const { return env_; }
  const VisitCounts& visits() const { return visits_; }

  Trajectory finish(const ModelParams& params, const UniformSource& src) {
    Trajectory t;
    t.params = params;
    t.path = PathSeq::teleporter(std::move(positions_), box_);
    t.env = std::move(env_);
    t.visits = std::move(visits_);
    t.source = src.kind();
    t.seed = src.seed();
    return t;
  }

 private:
  const Box& box_;
  std::vector<Point> positions_;
  EdgeEnvironment env_;
  VisitCounts visits_;
};

// The demon of the envelope construction. It drives a shadow walk X that follows the demon
// walk inside the box and reads the outside envelopes elsewhere, and reports X's next entry.
class EnvelopeReplayDemon : public DemonStrategy {
 public:
  EnvelopeReplayDemon(std::uint64_t seed, const Box& box, const ModelParams& params,
                      std::uint64_t budget)
      : src_(UniformSource::envelopes(seed)),
        box_(box),
        shadow_(params.a, Point::origin(params.d), {}, true),
        budget_(budget) {}

  DemonDecision decide(const DemonView& view) override {
    if (view.history.empty()) return first_entry();
    if (!broken_) follow(view.history);
    if (broken_) return fictitious(view.history.back());
    const Point exit = shadow_.position();
    Point prev = exit;
    std::uint64_t taken = 0;
    while (!box_.contains(shadow_.position())) {
      if (shadow_.time() >= budget_) {
        broken_ = true;
        return fictitious(exit);
      }
      prev = shadow_.position();
      shadow_.advance(src_);
      ++taken;
    }
    if (taken == 1) {
      consumed_ += 1;
      return EnterVertex{shadow_.position()};
    }
    consumed_ += 2;
    return EnterEdge{prev, shadow_.position()};
  }

  std::string name() const override { return "envelope-replay"; }
  std::uint64_t fictitious_count() const { return fictitious_; }

 private:
  DemonDecision first_entry() {
    if (box_.contains(shadow_.position())) {
      consumed_ = 1;
      return EnterVertex{shadow_.position()};
    }
    Point prev = shadow_.position();
    while (!box_.contains(shadow_.position())) {
      if (shadow_.time() >= budget_) {
        broken_ = true;
        ++fictitious_;
        return EnterVertex{box_.center};
      }
      prev = shadow_.position();
      shadow_.advance(src_);
    }
    consumed_ = 2;
    return EnterEdge{prev, shadow_.position()};
  }

  // Moves X along the part of the demon walk generated since the last decision.
  void follow(const std::vector<Point>& history) {
    for (; consumed_ < history.size(); ++consumed_) {
      const int dir = direction_to(shadow_.position(), history[consumed_]);
      if (dir < 0) {
        broken_ = true;
        return;
      }
      shadow_.move(dir);
    }
  }

  DemonDecision fictitious(const Point& here) {
    ++fictitious_;
    return EnterVertex{inside_neighbor(box_, here)};
  }

  UniformSource src_;
  Box box_;
  Walker shadow_;
  std::uint64_t budget_;
  std::size_t consumed_ = 0;
  bool broken_ = false;
  std::uint64_t fictitious_ = 0;
};

}  // namespace

DemonDecision FixedEdgeStrategy::decide(const DemonView& view) {
  return as_decision(view.box, edge_);
}

DemonDecision UniformRandomEdgeStrategy::decide(const DemonView& view) {
  if (edges_.empty() || !(cached_for_ == view.box)) {
    edges_ = boundary_edges(view.box);
    cached_for_ = view.box;
  }
  const double u = prf_uniform(seed_, view.decision_index, kTagStrategy);
  auto k = static_cast<std::size_t>(u * static_cast<double>(edges_.size()));
  k = std::min(k, edges_.size() - 1);
  return as_decision(view.box, edges_[k]);
}

DemonDecision NearestToExitStrategy::decide(const DemonView& view) {
  if (view.history.empty()) return EnterVertex{view.box.center};
  return EnterVertex{inside_neighbor(view.box, view.history.back())};
}

DemonDecision GreedyDenseStrategy::decide(const DemonView& view) {
  Point target = view.box.center;
  std::uint32_t best = 0;
  for (const auto& [v, n] : view.visits) {
    if (!view.box.contains(v)) continue;
    if (n > best || (n == best && v < target)) {
      best = n;
      target = v;
    }
  }
  const auto edges = boundary_edges(view.box);
  const Edge* pick = nullptr;
  std::int64_t pick_dist = std::numeric_limits<std::int64_t>::max();
  for (const Edge& e : edges) {
    const Point& in = view.box.contains(e.lo()) ? e.lo() : e.hi();
    const std::int64_t dist = norm_l1(in - target);
    if (dist < pick_dist) {
      pick_dist = dist;
      pick = &e;
    }
  }
  return as_decision(view.box, *pick);
}

std::vector<std::string> builtin_strategy_names() {
  return {"fixed-edge", "uniform-random-edge", "nearest-to-exit", "greedy-dense"};
}

std::unique_ptr<DemonStrategy> make_strategy(const std::string& name, const nlohmann::json& params,
                                             const Box& box) {
  if (name == "fixed-edge") {
    Edge e = boundary_edges(box).front();
    if (params.contains("edge")) {
      const auto& ends = params.at("edge");
      if (!ends.is_array() || ends.size() != 2) throw InvalidArgument("edge needs two endpoints");
      e = Edge(ends[0].get<Point>(), ends[1].get<Point>());
    }
    if (box.contains(e.lo()) == box.contains(e.hi())) {
      throw InvalidArgument("fixed edge is not a boundary edge of the box");
    }
    return std::make_unique<FixedEdgeStrategy>(e);
  }
  if (name == "uniform-random-edge") {
    return std::make_unique<UniformRandomEdgeStrategy>(params.value("seed", std::uint64_t{0}));
  }
  if (name == "nearest-to-exit") return std::make_unique<NearestToExitStrategy>();
  if (name == "greedy-dense") return std::make_unique<GreedyDenseStrategy>();
  throw InvalidArgument("unknown demon strategy '" + name + "'");
}

StopPredicate stop_at_length(std::uint64_t length) {
  return [length](const DemonProgress& p) {
    return !p.positions.empty() && p.positions.size() - 1 >= length;
  };
}

StopPredicate stop_after_inside_steps(std::uint64_t steps) {
  return [steps](const DemonProgress& p) { return p.inside_steps >= steps; };
}

StopPredicate stop_at_spend(const Box& region, std::uint64_t threshold) {
  // Positions only grow, so the running count is carried between calls.
  struct Count {
    std::size_t seen = 0;
    std::uint64_t inside = 0;
  };
  auto state = std::make_shared<Count>();
  return [region, threshold, state](const DemonProgress& p) {
    for (; state->seen < p.positions.size(); ++state->seen) {
      if (region.contains(p.positions[state->seen])) ++state->inside;
    }
    return state->inside >= threshold;
  };
}

DemonRun run_demon_walk(DemonStrategy& strategy, const Box& box, const ModelParams& params,
                        const StopPredicate& stop, const UniformSource& src,
                        std::uint64_t max_length) {
  params.validate();
  if (box.dim() != params.d) throw InvalidArgument("box dimension differs from d");
  WalkBuilder walk(box);
  DemonRun run;
  std::uint64_t inside_steps = 0;

  auto consult = [&] {
    const DemonView view{box, walk.positions(), walk.env(), walk.visits(), run.decisions.size()};
    DemonDecision decision = strategy.decide(view);
    check_legal(box, decision, walk.positions());
    const std::uint64_t time = walk.positions().empty() ? 0 : walk.positions().size() - 1;
    if (const auto* v = std::get_if<EnterVertex>(&decision)) {
      walk.push(v->vertex);
    } else {
      const auto& e = std::get<EnterEdge>(decision);
      walk.push(e.outside);
      walk.push(e.inside);
    }
    run.decisions.push_back({time, std::move(decision)});
  };

  consult();
  while (!stop(DemonProgress{walk.positions(), inside_steps, run.decisions.size()})) {
    if (walk.positions().size() > max_length) {
      throw BudgetExceeded("demon walk exceeded its length guard without meeting the stop rule");
    }
    const Point here = walk.positions().back();
    if (box.contains(here)) {
      const std::uint64_t t = walk.positions().size() - 1;
      const double u = src.for_step(t, here, walk.visits().at(here));
      walk.push(neighbor(here, choose_direction(walk.env().mask(here), params.d, params.a, u)));
      ++inside_steps;
    } else {
      consult();
    }
  }
  run.walk = walk.finish(params, src);
  return run;
}

nlohmann::json decision_to_json(const DemonDecision& d) {
  if (const auto* v = std::get_if<EnterVertex>(&d)) {
    return nlohmann::json{{"vertex", v->vertex}};
  }
  const auto& e = std::get<EnterEdge>(d);
  return nlohmann::json{{"edge", nlohmann::json::array({e.outside, e.inside})}};
}

nlohmann::json decision_log_to_json(const std::vector<DecisionRecord>& log) {
  auto out = nlohmann::json::array();
  for (const auto& rec : log) out.push_back({{"time", rec.time}, {"decision", decision_to_json(rec.decision)}});
  return out;
}

ReplayResult restriction_demon_replay(std::uint64_t seed, const Box& box, std::uint64_t steps,
                                      const ModelParams& params) {
  const auto src = UniformSource::envelopes(seed);
  const Trajectory ambient = simulate(params, Point::origin(params.d), steps, src);
  ReplayResult out;
  out.restricted = make_trajectory(params, restrict_to(ambient.path, box), src.kind(), seed);
  if (out.restricted.empty()) {
    out.demon_walk = make_trajectory(params, PathSeq::teleporter({}, box), src.kind(), seed);
    return out;
  }
  EnvelopeReplayDemon demon(seed, box, params, steps);
  DemonRun run = run_demon_walk(demon, box, params, stop_at_length(out.restricted.length()), src);
  out.demon_walk = std::move(run.walk);
  out.decisions = std::move(run.decisions);
  out.fictitious = demon.fictitious_count();
  return out;
}

}  // namespace orrw
