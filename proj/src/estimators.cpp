#include "orrw/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "orrw/diagnostics.hpp"
#include "orrw/error.hpp"
#include "orrw/parallel.hpp"
#include "orrw/random.hpp"

namespace orrw {

namespace {

// All escape conditions at a single time t >= 1.
bool escape_ok_at(const EscapeConfig& cfg, const Box& outer, std::uint64_t t, const Point& w) {
  const std::int64_t big = 4 * cfg.scale;
  const auto r2 = static_cast<std::uint64_t>(cfg.scale * cfg.scale);
  const auto leave = static_cast<std::uint64_t>(40 * cfg.r * cfg.r);
  if (norm_linf(w) > big || cfg.avoid.contains(w)) return false;
  if (t >= r2 && norm_linf(w) > cfg.scale) return false;
  if (t >= leave && outer.contains(w)) return false;
  return true;
}

std::vector<std::uint64_t> sorted_grid(std::span<const std::uint64_t> grid) {
  std::vector<std::uint64_t> g(grid.begin(), grid.end());
  if (!std::is_sorted(g.begin(), g.end())) throw InvalidArgument("time grid must be sorted");
  return g;
}

double coord_sq(const Point& p, int coordinate) {
  const double x = p[coordinate];
  return x * x;
}

}  // namespace

void EscapeConfig::validate(int d) const {
  if (center.dim() != d) throw InvalidArgument("escape center dimension differs from d");
  if (r < 1 || scale < 1) throw InvalidArgument("escape scales r and R must be >= 1");
  for (const Point& p : avoid) {
    if (p.dim() != d) throw InvalidArgument("avoid set point dimension differs from d");
  }
}

bool escape_indicator(std::span<const Point> positions, const EscapeConfig& cfg) {
  const std::uint64_t h = cfg.horizon();
  if (positions.size() < h + 1) throw InvalidArgument("trajectory shorter than the escape horizon");
  const Box outer = cfg.outer();
  for (std::uint64_t t = 1; t <= h; ++t) {
    if (!escape_ok_at(cfg, outer, t, positions[t])) return false;
  }
  return true;
}

bool escape_indicator(const Trajectory& traj, const EscapeConfig& cfg) {
  return escape_indicator(std::span<const Point>(traj.path.vertices), cfg);
}

bool run_escape(const ModelParams& params, const Point& z, const EscapeConfig& cfg,
                std::uint64_t seed) {
  return run_escape(params, z, cfg, EdgeEnvironment{}, seed);
}

bool run_escape(const ModelParams& params, const Point& z, const EscapeConfig& cfg,
                const EdgeEnvironment& env0, std::uint64_t seed) {
  const auto src = UniformSource::time_stream(seed);
  const Box outer = cfg.outer();
  Walker w(params.a, z, env0);
  const std::uint64_t h = cfg.horizon();
  for (std::uint64_t t = 1; t <= h; ++t) {
    w.advance(src);
    if (!escape_ok_at(cfg, outer, t, w.position())) return false;
  }
  return true;
}

CapacityEstimate estimate_capacity(const EscapeConfig& cfg, const ModelParams& params,
                                   std::uint64_t n, std::uint64_t master_seed, unsigned threads) {
  params.validate();
  cfg.validate(params.d);
  if (n < 1) throw InvalidArgument("capacity needs n >= 1");
  const Box outer = cfg.outer();
  std::vector<Point> zs;
  for (const Point& z : cfg.avoid) {
    if (outer.contains(z)) zs.push_back(z);
  }
  std::sort(zs.begin(), zs.end());
  CapacityEstimate out;
  if (zs.empty()) return out;

  std::vector<std::uint64_t> point_seeds(zs.size());
  for (std::size_t k = 0; k < zs.size(); ++k) point_seeds[k] = derive_replica_seed(master_seed, k);
  const std::uint64_t jobs = n * zs.size();
  const auto hits = run_replicas<std::uint8_t>(jobs, threads, [&](std::uint64_t j) {
    const std::uint64_t k = j / n;
    const std::uint64_t i = j % n;
    return static_cast<std::uint8_t>(
        run_escape(params, zs[k], cfg, derive_replica_seed(point_seeds[k], i)) ? 1 : 0);
  });

  double var_total = 0.0;
  for (std::size_t k = 0; k < zs.size(); ++k) {
    PointEscape pe;
    pe.z = zs[k];
    pe.n = n;
    for (std::uint64_t i = 0; i < n; ++i) pe.successes += hits[k * n + i];
    pe.p = static_cast<double>(pe.successes) / static_cast<double>(n);
    pe.stderr_p = stats::binomial_stderr(pe.successes, n);
    out.total += pe.p;
    var_total += pe.stderr_p * pe.stderr_p;
    out.points.push_back(pe);
  }
  out.stderr_total = std::sqrt(var_total);
  return out;
}

EscapeComparison compare_escape(const Trajectory& walk, std::uint64_t t, const EscapeConfig& cfg,
                                const ModelParams& params, std::uint64_t n, std::uint64_t seed,
                                unsigned threads) {
  params.validate();
  if (walk.empty() || t > walk.length()) throw InvalidArgument("comparison time exceeds the walk");
  if (n < 1) throw InvalidArgument("comparison needs n >= 1");
  EscapeConfig avoid_past = cfg;
  avoid_past.avoid = PointSet(walk.path.vertices.begin(), walk.path.vertices.begin() + t + 1);
  avoid_past.validate(params.d);

  PathSeq prefix = walk.path;
  prefix.vertices.resize(t + 1);
  const EdgeEnvironment env_t = make_trajectory(params, std::move(prefix)).env;

  EscapeComparison out;
  out.t = t;
  out.z = walk.at(t);
  out.in_outer = cfg.outer().contains(out.z);
  const std::uint64_t virgin_seed = derive_replica_seed(seed, 0);
  const std::uint64_t continued_seed = derive_replica_seed(seed, 1);
  const auto hits = run_replicas<std::uint8_t>(2 * n, threads, [&](std::uint64_t j) {
    const bool escaped = j < n ? run_escape(params, out.z, avoid_past, derive_replica_seed(virgin_seed, j))
                               : run_escape(params, out.z, avoid_past, env_t,
                                            derive_replica_seed(continued_seed, j - n));
    return static_cast<std::uint8_t>(escaped ? 1 : 0);
  });
  for (PointEscape* pe : {&out.virgin, &out.continued}) {
    pe->z = out.z;
    pe->n = n;
  }
  for (std::uint64_t j = 0; j < n; ++j) {
    out.virgin.successes += hits[j];
    out.continued.successes += hits[n + j];
  }
  for (PointEscape* pe : {&out.virgin, &out.continued}) {
    pe->p = static_cast<double>(pe->successes) / static_cast<double>(n);
    pe->stderr_p = stats::binomial_stderr(pe->successes, n);
  }
  if (out.continued.successes > 0) out.ratio = out.virgin.p / out.continued.p;
  return out;
}

NowhereHeavy nowhere_heavy(const PointSet& avoid, std::int64_t scale, double delta, double kappa) {
  NowhereHeavy out;
  if (avoid.empty() || scale < 1) return out;
  const int d = avoid.begin()->dim();
  for (const Point& p : avoid) {
    if (norm_linf(p) > 4 * scale) throw InvalidArgument("set must lie in [-4R, 4R]^d");
  }
  std::vector<Point> pts(avoid.begin(), avoid.end());
  std::sort(pts.begin(), pts.end());
  const Box centers{Point::origin(d), static_cast<std::int32_t>(2 * scale)};
  const auto rmin = static_cast<std::int64_t>(std::ceil(std::pow(static_cast<double>(scale), delta)));
  for (std::int64_t r = std::max<std::int64_t>(rmin, 1); r <= scale; ++r) {
    // Heavy for a set means strictly more than r^kappa points.
    const double limit = std::pow(static_cast<double>(r), kappa);
    if (static_cast<double>(pts.size()) <= limit) break;
    const auto need = static_cast<std::size_t>(std::floor(limit)) + 1;
    if (auto c = find_dense_block(pts, r, need, centers)) {
      out.holds = false;
      out.witness = Box{*c, static_cast<std::int32_t>(r)};
      return out;
    }
  }
  return out;
}

CapVolRatio capvol_ratio(const EscapeConfig& cfg, const ModelParams& params, std::uint64_t n,
                         std::uint64_t master_seed, unsigned threads) {
  const auto nh = nowhere_heavy(cfg.avoid, cfg.scale, params.delta, params.kappa);
  if (!nh.holds) {
    const Box& w = *nh.witness;
    std::string center;
    for (int i = 0; i < w.dim(); ++i) center += (i ? "," : "") + std::to_string(w.center[i]);
    throw GateFailure("set is heavy in the block centered at (" + center + ") with radius " +
                      std::to_string(w.radius));
  }
  CapVolRatio out;
  const Box inner = cfg.inner();
  for (const Point& p : cfg.avoid) {
    if (inner.contains(p)) ++out.inner_count;
  }
  if (out.inner_count == 0) throw InvalidArgument("set has no point in the inner box");
  out.capacity = estimate_capacity(cfg, params, n, master_seed, threads);
  out.denominator = std::pow(static_cast<double>(cfg.r), -6.0 * params.nu) *
                    std::pow(static_cast<double>(out.inner_count), 1.0 - 2.0 / params.d);
  out.ratio = out.capacity.total / out.denominator;
  return out;
}

WalkSample sample_walk(const ModelParams& params, std::span<const std::uint64_t> grid,
                       std::uint64_t seed, SampleOptions opts) {
  WalkSample out;
  if (grid.empty()) return out;
  const auto src = UniformSource::time_stream(seed);
  const Point origin = Point::origin(params.d);
  Walker w(params.a, origin);
  PointSet seen;
  if (opts.range) seen.insert(origin);
  std::int64_t best = 0;
  std::uint64_t last_zero = 0;
  out.at.reserve(grid.size());
  std::size_t g = 0;
  const std::uint64_t tmax = grid.back();
  for (std::uint64_t t = 0;; ++t) {
    while (g < grid.size() && grid[g] == t) {
      out.at.push_back(w.position());
      if (opts.range) out.range.push_back(seen.size());
      if (opts.radius) out.radius.push_back(std::sqrt(static_cast<double>(best)));
      ++g;
    }
    if (t == tmax) break;
    w.advance(src);
    const Point& p = w.position();
    if (opts.range) seen.insert(p);
    if (opts.radius) best = std::max(best, norm_l2_squared(p));
    if (opts.returns && p == origin) last_zero = t + 1;
  }
  if (opts.returns) out.last_zero = last_zero;
  return out;
}

std::vector<WalkSample> sample_walks(const ModelParams& params, std::span<const std::uint64_t> grid,
                                     std::uint64_t n, std::uint64_t master_seed, unsigned threads,
                                     SampleOptions opts) {
  params.validate();
  const auto g = sorted_grid(grid);
  return run_replicas<WalkSample>(n, threads, [&](std::uint64_t i) {
    return sample_walk(params, g, derive_replica_seed(master_seed, i), opts);
  });
}

VarianceCurve variance_from_samples(std::span<const WalkSample> samples,
                                    std::span<const std::uint64_t> grid, int coordinate) {
  VarianceCurve out;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    stats::Moments m;
    for (const auto& s : samples) m.add(coord_sq(s.at[k], coordinate));
    out.entries.push_back({grid[k], m.mean(), m.stderr_mean(), m.count()});
  }
  if (!out.entries.empty() && out.entries.back().t > 0) {
    const auto& last = out.entries.back();
    const double t = static_cast<double>(last.t);
    out.sigma_hat = std::sqrt(last.v / t);
    out.sigma_stderr = out.sigma_hat > 0 ? last.stderr_v / (2.0 * out.sigma_hat * t) : 0.0;
  }
  return out;
}

VarianceCurve variance_curve(const ModelParams& params, std::span<const std::uint64_t> grid,
                             std::uint64_t n, std::uint64_t master_seed, unsigned threads,
                             int coordinate) {
  if (n < 2) throw InvalidArgument("variance needs n >= 2");
  if (coordinate < 0 || coordinate >= params.d) throw InvalidArgument("coordinate out of range");
  const auto samples = sample_walks(params, grid, n, master_seed, threads, {});
  return variance_from_samples(samples, grid, coordinate);
}

Estimate additivity_defect(const ModelParams& params, std::uint64_t s, std::uint64_t t,
                           std::uint64_t n, std::uint64_t master_seed, unsigned threads) {
  if (s > t) throw InvalidArgument("additivity defect needs s <= t");
  if (n < 2) throw InvalidArgument("additivity defect needs n >= 2");
  const std::vector<std::uint64_t> grid = s == t ? std::vector<std::uint64_t>{s, s + t}
                                                 : std::vector<std::uint64_t>{s, t, s + t};
  const auto samples = sample_walks(params, grid, n, master_seed, threads, {});
  stats::Moments m;
  for (const auto& w : samples) {
    const double vs = coord_sq(w.at[0], 0);
    const double vt = s == t ? vs : coord_sq(w.at[1], 0);
    m.add(coord_sq(w.at.back(), 0) - vs - vt);
  }
  return {std::abs(m.mean()), m.stderr_mean(), m.count()};
}

TailEstimate displacement_tail(const ModelParams& params, std::uint64_t t, double exponent,
                               std::uint64_t n, std::uint64_t master_seed, unsigned threads) {
  const std::vector<std::uint64_t> grid{t};
  TailEstimate out;
  out.threshold = std::pow(static_cast<double>(t), exponent);
  out.n = n;
  const auto samples = sample_walks(params, grid, n, master_seed, threads, {.radius = true});
  for (const auto& s : samples) {
    if (s.radius[0] >= out.threshold) ++out.hits;
  }
  out.p = n ? static_cast<double>(out.hits) / static_cast<double>(n) : 0.0;
  out.wilson = stats::wilson(out.hits, n);
  return out;
}

H1Histogram h1_histogram(const ModelParams& params, std::uint64_t t, std::uint64_t n,
                         std::uint64_t master_seed, unsigned threads) {
  const std::vector<std::uint64_t> grid{t};
  const auto samples = sample_walks(params, grid, n, master_seed, threads, {});
  std::map<Point, std::uint64_t> counts;
  for (const auto& s : samples) ++counts[s.at[0]];
  H1Histogram out;
  out.t = t;
  out.n = n;
  const double d = params.d;
  const double time_bound = std::pow(static_cast<double>(std::max<std::uint64_t>(t, 1)), -d / 2 + params.nu);
  for (const auto& [v, c] : counts) {
    SiteFrequency f;
    f.v = v;
    f.count = c;
    f.p = static_cast<double>(c) / static_cast<double>(n);
    const double norm = norm_l2(v);
    f.bound = norm > 0 ? std::min(time_bound, std::pow(norm, -d + 2 * params.nu)) : time_bound;
    f.violation = stats::wilson(c, n).lo > f.bound;
    if (f.violation) ++out.violations;
    out.sites.push_back(f);
  }
  return out;
}

GaussianFit gaussian_fit_from_samples(std::span<const WalkSample> samples, std::uint64_t t,
                                      std::size_t grid_index, int d) {
  GaussianFit out;
  if (samples.empty() || t == 0) return out;
  const double tt = static_cast<double>(t);
  stats::Moments m;
  for (const auto& s : samples) m.add(coord_sq(s.at[grid_index], 0));
  out.sigma_hat = std::sqrt(m.mean() / tt);
  out.sigma_stderr = out.sigma_hat > 0 ? m.stderr_mean() / (2.0 * out.sigma_hat * tt) : 0.0;
  std::vector<double> z;
  z.reserve(samples.size());
  const double scale = out.sigma_hat * std::sqrt(tt);
  for (const auto& s : samples) z.push_back(scale > 0 ? s.at[grid_index][0] / scale : 0.0);
  out.ks = stats::ks_normal(z);

  const auto nd = static_cast<std::size_t>(d);
  std::vector<double> mean(nd, 0.0);
  out.covariance.assign(nd * nd, 0.0);
  const double n = static_cast<double>(samples.size());
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < nd; ++i) mean[i] += s.at[grid_index][static_cast<int>(i)] / n;
  }
  for (const auto& s : samples) {
    const Point& p = s.at[grid_index];
    for (std::size_t i = 0; i < nd; ++i) {
      for (std::size_t j = 0; j < nd; ++j) {
        out.covariance[i * nd + j] += (p[static_cast<int>(i)] - mean[i]) *
                                      (p[static_cast<int>(j)] - mean[j]) / (tt * (n - 1));
      }
    }
  }
  return out;
}

GaussianFit gaussian_fit(const ModelParams& params, std::uint64_t t, std::uint64_t n,
                         std::uint64_t master_seed, unsigned threads) {
  if (n < 2) throw InvalidArgument("gaussian fit needs n >= 2");
  const std::vector<std::uint64_t> grid{t};
  const auto samples = sample_walks(params, grid, n, master_seed, threads, {});
  return gaussian_fit_from_samples(samples, t, 0, params.d);
}

std::vector<PhaseFit> phase_scan(const ModelParams& base, std::span<const double> a_grid,
                                 std::span<const std::uint64_t> grid, std::uint64_t n,
                                 std::uint64_t master_seed, unsigned threads) {
  const auto g = sorted_grid(grid);
  if (g.size() < 2 || g.front() == 0) throw InvalidArgument("phase scan needs >= 2 positive times");
  std::vector<PhaseFit> out;
  for (std::size_t k = 0; k < a_grid.size(); ++k) {
    ModelParams p = base;
    p.a = a_grid[k];
    const auto samples = sample_walks(p, g, n, derive_replica_seed(master_seed, k), threads,
                                      {.range = true, .radius = true});
    PhaseFit fit;
    fit.a = p.a;
    fit.t = g;
    std::vector<double> lt, lrange, lradius;
    for (std::size_t j = 0; j < g.size(); ++j) {
      stats::Moments range, radius;
      for (const auto& s : samples) {
        range.add(static_cast<double>(s.range[j]));
        radius.add(s.radius[j]);
      }
      fit.mean_range.push_back(range.mean());
      fit.mean_radius.push_back(radius.mean());
      lt.push_back(std::log(static_cast<double>(g[j])));
      lrange.push_back(std::log(range.mean()));
      lradius.push_back(std::log(radius.mean()));
    }
    fit.range_fit = stats::least_squares(lt, lrange);
    fit.radius_fit = stats::least_squares(lt, lradius);
    out.push_back(std::move(fit));
  }
  return out;
}

std::vector<ReturnEstimate> return_probability(const ModelParams& params,
                                               std::span<const std::uint64_t> grid,
                                               std::uint64_t horizon, std::uint64_t n,
                                               std::uint64_t master_seed, unsigned threads) {
  const auto g = sorted_grid(grid);
  if (!g.empty() && g.back() > horizon) throw InvalidArgument("return times must not exceed the horizon");
  const std::vector<std::uint64_t> walk_grid{horizon};
  const auto samples = sample_walks(params, walk_grid, n, master_seed, threads, {.returns = true});
  std::vector<ReturnEstimate> out;
  for (std::uint64_t t : g) {
    ReturnEstimate e;
    e.t = t;
    e.n = n;
    for (const auto& s : samples) {
      if (*s.last_zero >= t) ++e.hits;
    }
    e.p = n ? static_cast<double>(e.hits) / static_cast<double>(n) : 0.0;
    e.wilson = stats::wilson(e.hits, n);
    out.push_back(e);
  }
  return out;
}

}  // namespace orrw
