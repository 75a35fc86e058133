#include "orrw/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "orrw/error.hpp"

namespace orrw {

namespace {

// Distinct vertices in order of first visit; prefix[t] = |{W(s) : s <= t}|.
struct FirstVisits {
  std::vector<Point> order;
  std::vector<std::size_t> prefix;

  explicit FirstVisits(const std::vector<Point>& path) {
    PointSet seen;
    prefix.reserve(path.size());
    for (const Point& v : path) {
      if (seen.insert(v).second) order.push_back(v);
      prefix.push_back(order.size());
    }
  }
};

// Smallest integer r >= 1 with r >= a^{-1/3}, evaluated as a r^3 >= 1.
std::int64_t lowest_relaxation_radius(double a, std::int64_t cap) {
  if (a <= 0) return std::numeric_limits<std::int64_t>::max();
  const double lower = std::pow(a, -1.0 / 3.0);
  if (lower > static_cast<double>(cap) + 1) return cap + 1;
  auto r = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(lower)) - 1);
  while (a * static_cast<double>(r) * static_cast<double>(r) * static_cast<double>(r) < 1.0) ++r;
  return r;
}

class RelaxationTester {
 public:
  RelaxationTester(const Trajectory& traj, std::int64_t scale)
      : visits_(traj.path.vertices),
        path_(traj.path.vertices),
        scale_(scale),
        rmin_(lowest_relaxation_radius(traj.params.a, scale)) {
    if (scale < 0) throw InvalidArgument("relaxation scale must be nonnegative");
    if (!vacuous()) {
      thresholds_.resize(static_cast<std::size_t>(scale) + 1);
      for (std::int64_t r = 0; r <= scale; ++r) {
        thresholds_[static_cast<std::size_t>(r)] = std::pow(static_cast<double>(r), traj.params.kappa);
      }
      hist_.resize(static_cast<std::size_t>(scale) + 1);
    }
  }

  bool vacuous() const { return rmin_ > scale_; }

  bool relaxed(std::uint64_t t) {
    if (vacuous()) return true;
    const Point& here = path_[t];
    std::fill(hist_.begin(), hist_.end(), 0);
    const std::size_t count = visits_.prefix[t];
    for (std::size_t i = 0; i < count; ++i) {
      const std::int64_t dist = norm_linf(visits_.order[i] - here);
      if (dist <= scale_) ++hist_[static_cast<std::size_t>(dist)];
    }
    std::uint64_t cum = 0;
    for (std::int64_t r = 0; r <= scale_; ++r) {
      cum += hist_[static_cast<std::size_t>(r)];
      if (r >= rmin_ && static_cast<double>(cum) >= thresholds_[static_cast<std::size_t>(r)]) {
        return false;
      }
    }
    return true;
  }

 private:
  FirstVisits visits_;
  const std::vector<Point>& path_;
  std::int64_t scale_;
  std::int64_t rmin_;
  std::vector<double> thresholds_;
  std::vector<std::uint64_t> hist_;
};

Box origin_box(int d, std::int64_t radius) {
  return Box{Point::origin(d), static_cast<std::int32_t>(radius)};
}

// Number of integers s with t < s < t + window and s <= last, flagged in `flags`.
// prefix[k] = number of flagged times < k.
std::uint64_t window_count(const std::vector<std::uint64_t>& prefix, std::uint64_t t, double window) {
  const auto last_time = static_cast<std::uint64_t>(prefix.size() - 1);
  // Largest integer strictly below t + window.
  const double upper = static_cast<double>(t) + window;
  auto hi = static_cast<std::uint64_t>(std::ceil(upper)) - 1;
  hi = std::min(hi, last_time - 1);
  if (hi < t + 1) return 0;
  return prefix[hi + 1] - prefix[t + 1];
}

std::vector<std::uint64_t> flag_prefix(const std::vector<bool>& flags) {
  std::vector<std::uint64_t> prefix(flags.size() + 1, 0);
  for (std::size_t i = 0; i < flags.size(); ++i) prefix[i + 1] = prefix[i] + (flags[i] ? 1 : 0);
  return prefix;
}

// Last time whose relaxation window lies inside the recorded trajectory and before `cutoff`.
std::optional<std::uint64_t> last_judged_time(std::uint64_t length, double window,
                                              std::optional<std::uint64_t> cutoff) {
  const double end = static_cast<double>(cutoff ? *cutoff : length) - window;
  if (end < 0) return std::nullopt;
  return static_cast<std::uint64_t>(std::floor(end));
}

}  // namespace

std::size_t distinct_in_box(const Trajectory& traj, std::uint64_t t, const Box& box) {
  if (traj.empty()) return 0;
  if (t > traj.length()) throw InvalidArgument("time exceeds trajectory length");
  PointSet seen;
  for (std::uint64_t s = 0; s <= t; ++s) {
    const Point& v = traj.path.vertices[s];
    if (box.contains(v)) seen.insert(v);
  }
  return seen.size();
}

bool is_heavy_count(std::uint64_t count, std::int64_t radius, double kappa) {
  return static_cast<double>(count) >= std::pow(static_cast<double>(radius), kappa);
}

bool is_heavy(const Trajectory& traj, std::uint64_t t, const Box& box, double kappa) {
  if (box.radius < 1) throw InvalidArgument("heaviness is defined for radius >= 1");
  return is_heavy_count(distinct_in_box(traj, t, box), box.radius, kappa);
}

RelaxedTimeSet relaxed_times(const Trajectory& traj, std::int64_t scale,
                             std::span<const std::uint64_t> query_times) {
  RelaxedTimeSet out;
  out.scale = scale;
  out.lower_scale = traj.params.a > 0 ? std::pow(traj.params.a, -1.0 / 3.0)
                                      : std::numeric_limits<double>::infinity();
  RelaxationTester tester(traj, scale);
  for (std::uint64_t t : query_times) {
    if (t > traj.length() || traj.empty()) throw InvalidArgument("query time exceeds trajectory length");
    if (tester.relaxed(t)) out.times.push_back(t);
  }
  std::sort(out.times.begin(), out.times.end());
  out.times.erase(std::unique(out.times.begin(), out.times.end()), out.times.end());
  return out;
}

std::vector<bool> relaxed_flags(const Trajectory& traj, std::int64_t scale) {
  if (traj.empty()) return {};
  RelaxationTester tester(traj, scale);
  std::vector<bool> flags(traj.path.vertices.size());
  for (std::uint64_t t = 0; t < flags.size(); ++t) flags[t] = tester.relaxed(t);
  return flags;
}

std::uint64_t default_spend_threshold(std::int64_t radius) {
  const double rho = static_cast<double>(radius);
  const double log_factor = rho <= std::numbers::e ? 1.0 : std::pow(std::log(rho), 3);
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(rho * rho * log_factor)));
}

std::optional<std::uint64_t> tau_spend(const Trajectory& traj, const Box& box,
                                       std::uint64_t threshold) {
  if (threshold < 1) throw InvalidArgument("spend threshold must be >= 1");
  std::uint64_t inside = 0;
  for (std::uint64_t t = 0; t < traj.path.vertices.size(); ++t) {
    if (box.contains(traj.path.vertices[t]) && ++inside >= threshold) return t;
  }
  return std::nullopt;
}

std::optional<Point> find_dense_block(std::span<const Point> points, std::int64_t radius,
                                      std::size_t min_count, const Box& center_domain,
                                      const Point* anchor) {
  if (min_count == 0) {
    throw InvalidArgument("find_dense_block needs a positive count");
  }
  if (points.size() < min_count) return std::nullopt;
  const int d = center_domain.dim();
  std::vector<Point> work(points.begin(), points.end());
  Point center = center_domain.center;

  // Recursion over axes; `subset` holds the points compatible with the coordinates fixed so far.
  auto search = [&](auto&& self, int axis, std::vector<Point> subset) -> bool {
    if (axis == d) return true;
    std::sort(subset.begin(), subset.end(),
              [axis](const Point& x, const Point& y) { return x[axis] < y[axis]; });
    std::int64_t lo = std::int64_t{center_domain.center[axis]} - center_domain.radius;
    std::int64_t hi = std::int64_t{center_domain.center[axis]} + center_domain.radius;
    if (anchor != nullptr) {
      lo = std::max(lo, std::int64_t{(*anchor)[axis]} - radius);
      hi = std::min(hi, std::int64_t{(*anchor)[axis]} + radius);
    }
    // Centers with an empty window are useless; start at the first point's reach.
    lo = std::max(lo, std::int64_t{subset.front()[axis]} - radius);
    hi = std::min(hi, std::int64_t{subset.back()[axis]} + radius);
    std::size_t first = 0;
    std::size_t last = 0;  // window is subset[first, last)
    std::size_t prev_first = subset.size() + 1;
    std::size_t prev_last = subset.size() + 1;
    for (std::int64_t u = lo; u <= hi; ++u) {
      while (last < subset.size() && subset[last][axis] <= u + radius) ++last;
      while (first < last && subset[first][axis] < u - radius) ++first;
      if (last - first < min_count) continue;
      // Identical windows give identical sub-searches.
      if (first == prev_first && last == prev_last) continue;
      prev_first = first;
      prev_last = last;
      center[axis] = static_cast<std::int32_t>(u);
      std::vector<Point> next(subset.begin() + static_cast<std::ptrdiff_t>(first),
                              subset.begin() + static_cast<std::ptrdiff_t>(last));
      if (self(self, axis + 1, std::move(next))) return true;
    }
    return false;
  };
  if (search(search, 0, std::move(work))) return center;
  return std::nullopt;
}

StoppingTimeReport tau_heavy(const Trajectory& traj, std::int64_t scale, double delta, double kappa) {
  StoppingTimeReport report;
  if (traj.path.vertices.size() < 2 || scale < 1) return report;
  const int d = traj.params.d;
  const Box centers = origin_box(d, 2 * scale);
  const auto rmin = static_cast<std::int64_t>(std::ceil(std::pow(static_cast<double>(scale), delta)));

  std::vector<Point> distinct;
  PointSet seen;
  auto check = [&](const Point& v) -> std::optional<Box> {
    for (std::int64_t r = rmin; r <= scale; ++r) {
      const auto need = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(r), kappa)));
      if (distinct.size() < std::max<std::size_t>(need, 1)) break;
      std::vector<Point> near;
      for (const Point& w : distinct) {
        if (norm_linf(w - v) <= 2 * r) near.push_back(w);
      }
      if (auto c = find_dense_block(near, r, std::max<std::size_t>(need, 1), centers, &v)) {
        return Box{*c, static_cast<std::int32_t>(r)};
      }
    }
    return std::nullopt;
  };

  const auto& path = traj.path.vertices;
  seen.insert(path[0]);
  distinct.push_back(path[0]);
  for (std::uint64_t t = 1; t < path.size(); ++t) {
    const bool fresh = seen.insert(path[t]).second;
    if (fresh) distinct.push_back(path[t]);
    std::optional<Box> hit;
    if (t == 1) {
      hit = check(path[0]);
      if (!hit && fresh) hit = check(path[1]);
    } else if (fresh) {
      hit = check(path[t]);
    }
    if (hit) {
      report.tau_heavy = t;
      report.witness = *hit;
      break;
    }
  }
  return report;
}

BlockClassification classify_blocks(const Trajectory& traj, std::int64_t scale,
                                     std::int64_t radius, double epsilon) {
  if (radius < 1) throw InvalidArgument("block radius must be >= 1");
  BlockClassification out;
  const int d = traj.params.d;
  const std::int64_t spacing = 2 * radius;
  const auto kmax = static_cast<std::int64_t>(std::floor(1.5 * static_cast<double>(scale) /
                                                         static_cast<double>(spacing)));
  out.total_blocks = 1;
  for (int i = 0; i < d; ++i) out.total_blocks *= static_cast<std::uint64_t>(2 * kmax + 1);
  if (traj.empty()) return out;

  const auto& path = traj.path.vertices;
  out.tau_spend_inner = tau_spend(traj, origin_box(d, scale), default_spend_threshold(scale));

  // Grid blocks containing v: per axis k with |v_i - 2rk| <= r and |k| <= kmax.
  auto blocks_of = [&](const Point& v) {
    std::vector<Point> keys;
    std::vector<std::pair<std::int64_t, std::int64_t>> ranges(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
      const auto x = static_cast<double>(v[i]);
      auto lo = static_cast<std::int64_t>(std::ceil((x - radius) / static_cast<double>(spacing)));
      auto hi = static_cast<std::int64_t>(std::floor((x + radius) / static_cast<double>(spacing)));
      lo = std::max(lo, -kmax);
      hi = std::min(hi, kmax);
      if (lo > hi) return keys;
      ranges[static_cast<std::size_t>(i)] = {lo, hi};
    }
    Point k(d);
    for (int i = 0; i < d; ++i) k[i] = static_cast<std::int32_t>(ranges[static_cast<std::size_t>(i)].first);
    while (true) {
      keys.push_back(k);
      int i = d - 1;
      while (i >= 0 && k[i] == ranges[static_cast<std::size_t>(i)].second) {
        k[i] = static_cast<std::int32_t>(ranges[static_cast<std::size_t>(i)].first);
        --i;
      }
      if (i < 0) break;
      ++k[i];
    }
    return keys;
  };

  struct State {
    std::uint64_t inside = 0;
    std::optional<std::uint64_t> tau;
    bool bad = false;
  };
  absl::flat_hash_map<Point, State> states;
  const std::uint64_t threshold = default_spend_threshold(radius);
  std::vector<std::vector<Point>> keys_at(path.size());
  for (std::uint64_t t = 0; t < path.size(); ++t) {
    keys_at[t] = blocks_of(path[t]);
    for (const Point& key : keys_at[t]) {
      State& s = states[key];
      if (!s.tau && ++s.inside >= threshold) s.tau = t;
    }
  }

  const double window = std::pow(static_cast<double>(radius), epsilon);
  const double need = 0.9 * window + 1.0;
  const auto prefix = flag_prefix(relaxed_flags(traj, radius));
  for (std::uint64_t t = 0; t < path.size(); ++t) {
    if (keys_at[t].empty()) continue;
    const double count = static_cast<double>(window_count(prefix, t, window));
    if (count >= need) continue;
    for (const Point& key : keys_at[t]) {
      State& s = states[key];
      const auto judged = last_judged_time(traj.length(), window, s.tau);
      if (judged && t <= *judged) s.bad = true;
    }
  }

  for (const auto& [key, s] : states) {
    BlockClass bc;
    Point center(d);
    for (int i = 0; i < d; ++i) center[i] = static_cast<std::int32_t>(key[i] * spacing);
    bc.block = Box{center, static_cast<std::int32_t>(radius)};
    bc.tau_spend = s.tau;
    bc.in_a = s.tau && (!out.tau_spend_inner || *s.tau <= *out.tau_spend_inner);
    bc.bad = s.bad;
    out.visited.push_back(bc);
  }
  std::sort(out.visited.begin(), out.visited.end(),
            [](const BlockClass& x, const BlockClass& y) { return x.block.center < y.block.center; });
  return out;
}

std::optional<std::uint64_t> h2_first_violation(const Trajectory& traj, std::int64_t scale,
                                                double epsilon) {
  if (traj.empty()) return std::nullopt;
  const Box inner = origin_box(traj.params.d, scale);
  const double window = std::pow(static_cast<double>(scale), epsilon);
  const double need = 0.9 * window + 1.0;
  const auto judged =
      last_judged_time(traj.length(), window, tau_spend(traj, inner, default_spend_threshold(scale)));
  if (!judged) return std::nullopt;
  const auto prefix = flag_prefix(relaxed_flags(traj, scale));
  for (std::uint64_t t = 0; t <= *judged; ++t) {
    if (!inner.contains(traj.path.vertices[t])) continue;
    if (static_cast<double>(window_count(prefix, t, window)) < need) return t;
  }
  return std::nullopt;
}

bool h2_event_holds(const Trajectory& traj, std::int64_t scale, double epsilon) {
  return !h2_first_violation(traj, scale, epsilon).has_value();
}

std::uint64_t max_vertex_visits(const Trajectory& traj, std::uint64_t t, const Box& region) {
  if (traj.empty()) return 0;
  if (t > traj.length()) throw InvalidArgument("time exceeds trajectory length");
  absl::flat_hash_map<Point, std::uint64_t> counts;
  std::uint64_t best = 0;
  for (std::uint64_t s = 0; s <= t; ++s) {
    const Point& v = traj.path.vertices[s];
    if (region.contains(v)) best = std::max(best, ++counts[v]);
  }
  return best;
}

RangeRadius range_and_radius(const Trajectory& traj, std::uint64_t t) {
  RangeRadius out;
  if (traj.empty()) return out;
  if (t > traj.length()) throw InvalidArgument("time exceeds trajectory length");
  PointSet seen;
  std::int64_t best = 0;
  const Point& origin = traj.start();
  for (std::uint64_t s = 0; s <= t; ++s) {
    const Point& v = traj.path.vertices[s];
    seen.insert(v);
    best = std::max(best, norm_l2_squared(v - origin));
  }
  out.range = seen.size();
  out.max_displacement = std::sqrt(static_cast<double>(best));
  return out;
}

}  // namespace orrw
