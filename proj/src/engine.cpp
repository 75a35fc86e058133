#include "orrw/engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "orrw/error.hpp"

namespace orrw {

ModelParams ModelParams::with_defaults(int d, double a) {
  ModelParams p;
  p.d = d;
  p.a = a;
  p.kappa = 3.5;
  p.nu = 0.01;
  p.epsilon = 1.0 / (1e4 * d);
  p.delta = 1.0 / (1e5 * d * d);
  p.validate();
  return p;
}

void ModelParams::validate() const {
  if (d < 1 || d > kMaxDim) {
    throw InvalidArgument("d must be in [1, " + std::to_string(kMaxDim) + "]");
  }
  if (!(a >= 0.0) || !std::isfinite(a)) throw InvalidArgument("reinforcement a must be >= 0");
  if (!(kappa > 0) || !(nu > 0) || !(epsilon > 0) || !(delta > 0)) {
    throw InvalidArgument("exponents kappa, nu, epsilon, delta must be positive");
  }
}

bool EdgeEnvironment::contains(const Edge& e) const {
  return contains(e.lo(), direction_to(e.lo(), e.hi()));
}

bool EdgeEnvironment::insert(const Edge& e) { return insert(e.lo(), direction_to(e.lo(), e.hi())); }

bool EdgeEnvironment::insert(const Point& u, int dir) {
  const std::uint32_t bit = 1U << dir;
  std::uint32_t& mu = masks_[u];
  if (mu & bit) return false;
  mu |= bit;
  masks_[neighbor(u, dir)] |= 1U << (dir ^ 1);
  ++edge_count_;
  return true;
}

bool EdgeEnvironment::erase(const Point& u, int dir) {
  auto it = masks_.find(u);
  const std::uint32_t bit = 1U << dir;
  if (it == masks_.end() || !(it->second & bit)) return false;
  if ((it->second &= ~bit) == 0) masks_.erase(it);
  auto jt = masks_.find(neighbor(u, dir));
  if ((jt->second &= ~(1U << (dir ^ 1))) == 0) masks_.erase(jt);
  --edge_count_;
  return true;
}

std::uint32_t EdgeEnvironment::mask(const Point& u) const {
  auto it = masks_.find(u);
  return it == masks_.end() ? 0U : it->second;
}

std::vector<Edge> EdgeEnvironment::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count_);
  for (const auto& [u, m] : masks_) {
    for (int dir = 0; dir < 2 * u.dim(); dir += 2) {
      if ((m >> dir) & 1U) out.emplace_back(u, neighbor(u, dir));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void EdgeEnvironment::clear() noexcept {
  masks_.clear();
  edge_count_ = 0;
}

EdgeEnvironment EdgeEnvironment::translated(const Point& offset) const {
  EdgeEnvironment out;
  out.masks_.reserve(masks_.size());
  for (const auto& [u, m] : masks_) out.masks_.emplace(u + offset, m);
  out.edge_count_ = edge_count_;
  return out;
}

void EdgeEnvironment::merge(const EdgeEnvironment& other) {
  for (const auto& [u, m] : other.masks_) {
    for (int dir = 0; dir < 2 * u.dim(); dir += 2) {
      if ((m >> dir) & 1U) insert(u, dir);
    }
  }
}

std::vector<double> transition_probs(const EdgeEnvironment& env, double a, const Point& u) {
  const std::uint32_t m = env.mask(u);
  const int n = 2 * u.dim();
  const double total = n + a * std::popcount(m);
  std::vector<double> probs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    probs[static_cast<std::size_t>(i)] = (1.0 + (((m >> i) & 1U) ? a : 0.0)) / total;
  }
  return probs;
}

Point step(const Point& u, const std::vector<double>& probs, double uniform) {
  if (probs.size() != static_cast<std::size_t>(2 * u.dim())) {
    throw InvalidArgument("probability vector must have 2d entries");
  }
  double cum = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (probs[i] > 0) last_positive = static_cast<int>(i);
    if (uniform < cum) return neighbor(u, static_cast<int>(i));
  }
  // Rounding left a sliver above the last cumulative sum.
  return neighbor(u, last_positive);
}

Walker::Walker(double a, const Point& start, EdgeEnvironment env0, bool track_visits)
    : a_(a), pos_(start), env_(std::move(env0)), track_visits_(track_visits) {
  enter_current();
}

void Walker::reset(const Point& start) {
  pos_ = start;
  time_ = 0;
  env_.clear();
  visits_.clear();
  enter_current();
}

void Walker::reset(const Point& start, EdgeEnvironment env0) {
  pos_ = start;
  time_ = 0;
  env_ = std::move(env0);
  visits_.clear();
  enter_current();
}

void Walker::enter_current() {
  cur_mask_ = env_.mask(pos_);
  if (track_visits_) cur_visits_ = ++visits_[pos_];
}

int choose_direction(std::uint32_t mask, int d, double a, double uniform) noexcept {
  const int n = 2 * d;
  const double total = n + a * std::popcount(mask);
  const double x = uniform * total;
  double cum = 0.0;
  for (int i = 0; i < n; ++i) {
    cum += ((mask >> i) & 1U) ? 1.0 + a : 1.0;
    if (x < cum) return i;
  }
  return n - 1;
}

int Walker::choose(double uniform) const noexcept {
  return choose_direction(cur_mask_, pos_.dim(), a_, uniform);
}

void Walker::move(int dir) {
  const Point next = neighbor(pos_, dir);
  const std::uint32_t bit = 1U << dir;
  if (cur_mask_ & bit) {
    cur_mask_ = env_.mask(next);
  } else {
    env_.masks_[pos_] |= bit;
    std::uint32_t& m = env_.masks_[next];
    m |= 1U << (dir ^ 1);
    cur_mask_ = m;
    ++env_.edge_count_;
  }
  pos_ = next;
  ++time_;
  if (track_visits_) cur_visits_ = ++visits_[pos_];
}

int Walker::advance(const UniformSource& src) {
  if (src.kind() == UniformSource::Kind::kEnvelopes && !track_visits_) {
    throw InvalidArgument("envelope-driven walks need visit tracking");
  }
  const int dir = choose(src.for_step(time_, pos_, cur_visits_));
  move(dir);
  return dir;
}

VisitCounts count_visits(const std::vector<Point>& vertices) {
  VisitCounts out;
  for (const Point& v : vertices) ++out[v];
  return out;
}

Trajectory make_trajectory(const ModelParams& params, PathSeq path, UniformSource::Kind source,
                           std::uint64_t seed) {
  Trajectory t;
  t.params = params;
  t.source = source;
  t.seed = seed;
  const bool teleporter = path.kind == PathSeq::Kind::kTeleporter;
  const auto& vs = path.vertices;
  for (std::size_t i = 0; i + 1 < vs.size(); ++i) {
    const bool counts = !teleporter || path.box.contains(vs[i]) || path.box.contains(vs[i + 1]);
    if (counts && adjacent(vs[i], vs[i + 1])) t.env.insert(Edge(vs[i], vs[i + 1]));
  }
  t.visits = count_visits(vs);
  t.path = std::move(path);
  return t;
}

Trajectory simulate(const ModelParams& params, const Point& start, std::uint64_t steps,
                    const UniformSource& src, const EdgeEnvironment& env0) {
  params.validate();
  if (start.dim() != params.d) throw InvalidArgument("start point dimension differs from d");
  Walker walker(params.a, start, env0, true);
  std::vector<Point> positions;
  positions.reserve(static_cast<std::size_t>(steps) + 1);
  positions.push_back(start);
  for (std::uint64_t t = 0; t < steps; ++t) {
    walker.advance(src);
    positions.push_back(walker.position());
  }
  Trajectory out;
  out.params = params;
  out.path = PathSeq::strict(std::move(positions));
  out.env = walker.env();
  out.visits = walker.visits();
  out.source = src.kind();
  out.seed = src.seed();
  return out;
}

std::pair<Trajectory, Trajectory> natural_couple(const ModelParams& params, const Point& start_a,
                                                 const EdgeEnvironment& env_a,
                                                 const Point& start_b,
                                                 const EdgeEnvironment& env_b,
                                                 std::uint64_t steps, std::uint64_t seed) {
  const auto src = UniformSource::time_stream(seed);
  return {simulate(params, start_a, steps, src, env_a), simulate(params, start_b, steps, src, env_b)};
}

Trajectory concatenate(const Trajectory& first, const Trajectory& second) {
  if (!(first.params == second.params)) {
    throw InvalidArgument("concatenated walks must share model parameters");
  }
  if (first.empty() || second.empty()) throw InvalidArgument("cannot concatenate empty walks");
  if (second.start() != Point::origin(second.params.d)) {
    throw InvalidArgument("second walk must start at the origin");
  }
  const Point shift = first.end();
  std::vector<Point> positions = first.path.vertices;
  positions.reserve(first.path.vertices.size() + second.length());
  for (std::size_t s = 1; s < second.path.vertices.size(); ++s) {
    positions.push_back(shift + second.path.vertices[s]);
  }
  Trajectory out;
  out.params = first.params;
  out.env = first.env;
  out.env.merge(second.env.translated(shift));
  out.visits = count_visits(positions);
  out.path = PathSeq::strict(std::move(positions));
  out.source = first.source;
  out.seed = first.seed;
  return out;
}

std::pair<Trajectory, Trajectory> couple_concat(const ModelParams& params, std::uint64_t t1,
                                                std::uint64_t t2, std::uint64_t seed) {
  const Point origin = Point::origin(params.d);
  Trajectory whole = simulate(params, origin, t1 + t2, UniformSource::time_stream(seed));
  Trajectory w1 = simulate(params, origin, t1, UniformSource::time_stream(seed));
  Trajectory w2 = simulate(params, origin, t2, UniformSource::time_stream(seed, t1));
  return {std::move(whole), concatenate(w1, w2)};
}

double max_separation(const Trajectory& x, const Trajectory& y) {
  const std::size_t n = std::min(x.path.vertices.size(), y.path.vertices.size());
  std::int64_t best = 0;
  for (std::size_t t = 0; t < n; ++t) {
    best = std::max(best, norm_l2_squared(x.path.vertices[t] - y.path.vertices[t]));
  }
  return std::sqrt(static_cast<double>(best));
}

}  // namespace orrw
