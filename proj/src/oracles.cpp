#include "orrw/oracles.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <absl/container/flat_hash_map.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

#include "orrw/error.hpp"

namespace orrw {

namespace {

void check_budget(int d, std::uint64_t t) {
  if (static_cast<double>(t) * std::log(2.0 * d) > std::log(kEnumerationBudget) + 1e-12) {
    throw BudgetExceeded("enumeration of (2d)^t paths exceeds the budget of 1e8");
  }
}

struct Enumerator {
  const ModelParams& params;
  std::uint64_t t_max;
  const PathVisitor& visit;
  EdgeEnvironment env;
  std::vector<Point> path;

  void run(double weight) {
    if (!visit(path, weight) || path.size() - 1 == t_max) return;
    const Point u = path.back();
    const std::uint32_t m = env.mask(u);
    const int n = 2 * params.d;
    const double total = n + params.a * std::popcount(m);
    for (int i = 0; i < n; ++i) {
      const bool reinforced = (m >> i) & 1U;
      const double p = (reinforced ? 1.0 + params.a : 1.0) / total;
      if (!reinforced) env.insert(u, i);
      path.push_back(neighbor(u, i));
      run(weight * p);
      path.pop_back();
      if (!reinforced) env.erase(u, i);
    }
  }
};

struct BallIndex {
  std::vector<Point> points;
  absl::flat_hash_map<Point, std::size_t> index;
};

BallIndex ball(int d, double radius, std::size_t max_points) {
  BallIndex b;
  const auto r = static_cast<std::int32_t>(std::floor(radius));
  const double r2 = radius * radius;
  const Box box{Point::origin(d), r};
  if (static_cast<double>(box.volume()) > 4.0 * static_cast<double>(max_points)) {
    throw BudgetExceeded("linear system would exceed the size guard");
  }
  for (const Point& p : box.vertices()) {
    if (static_cast<double>(norm_l2_squared(p)) <= r2 + 1e-9) b.points.push_back(p);
  }
  if (b.points.size() > max_points) throw BudgetExceeded("linear system would exceed the size guard");
  b.index.reserve(b.points.size());
  for (std::size_t i = 0; i < b.points.size(); ++i) b.index.emplace(b.points[i], i);
  return b;
}

// Max-norm residual of A x = b.
double residual_norm(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& b) {
  return (a * x - b).lpNorm<Eigen::Infinity>();
}

Eigen::VectorXd solve_spd(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b) {
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(1e-14);
  cg.setMaxIterations(static_cast<Eigen::Index>(20 * b.size() + 1000));
  cg.compute(a);
  Eigen::VectorXd x = cg.solve(b);
  if (cg.info() != Eigen::Success && residual_norm(a, x, b) > 1e-10) {
    throw Error(ErrorCode::kGate, "conjugate gradient did not converge");
  }
  return x;
}

constexpr std::size_t kMaxUnknowns = 150000;

}  // namespace

double ExactDistribution::total() const {
  double s = 0.0;
  for (const auto& [v, p] : support) s += p;
  return s;
}

double ExactDistribution::at(const Point& v) const {
  auto it = std::lower_bound(support.begin(), support.end(), v,
                             [](const auto& e, const Point& x) { return e.first < x; });
  return it != support.end() && it->first == v ? it->second : 0.0;
}

void enumerate_paths(const ModelParams& params, std::uint64_t t_max, const Point& start,
                     const EdgeEnvironment& env0, const PathVisitor& visit) {
  params.validate();
  if (start.dim() != params.d) throw InvalidArgument("start point dimension differs from d");
  check_budget(params.d, t_max);
  Enumerator e{params, t_max, visit, env0, {start}};
  e.path.reserve(static_cast<std::size_t>(t_max) + 1);
  e.run(1.0);
}

ExactDistribution enumerate_orrw(const ModelParams& params, std::uint64_t t_max, const Point& start,
                                 const EdgeEnvironment& env0) {
  std::map<Point, double> acc;
  enumerate_paths(params, t_max, start, env0, [&](std::span<const Point> path, double w) {
    if (path.size() - 1 == t_max) acc[path.back()] += w;
    return true;
  });
  ExactDistribution out;
  out.params = params;
  out.t = t_max;
  out.support.assign(acc.begin(), acc.end());
  return out;
}

double exact_moments(const ModelParams& params, std::uint64_t t, int coordinate) {
  if (coordinate < 0 || coordinate >= params.d) throw InvalidArgument("coordinate out of range");
  double v = 0.0;
  for (const auto& [p, w] : enumerate_orrw(params, t, Point::origin(params.d)).support) {
    v += w * static_cast<double>(p[coordinate]) * p[coordinate];
  }
  return v;
}

double exact_escape(const Point& z, const EscapeConfig& cfg, const ModelParams& params) {
  cfg.validate(params.d);
  const std::uint64_t h = cfg.horizon();
  const Box outer = cfg.outer();
  const std::int64_t big = 4 * cfg.scale;
  const auto r2 = static_cast<std::uint64_t>(cfg.scale * cfg.scale);
  const auto leave = static_cast<std::uint64_t>(40 * cfg.r * cfg.r);
  double p = 0.0;
  enumerate_paths(params, h, z, {}, [&](std::span<const Point> path, double w) {
    const std::uint64_t t = path.size() - 1;
    if (t >= 1) {
      const Point& x = path.back();
      if (norm_linf(x) > big || cfg.avoid.contains(x)) return false;
      if (t >= r2 && norm_linf(x) > cfg.scale) return false;
      if (t >= leave && outer.contains(x)) return false;
    }
    if (t == h) p += w;
    return true;
  });
  return p;
}

double exact_capacity(const EscapeConfig& cfg, const ModelParams& params) {
  std::vector<Point> zs;
  const Box outer = cfg.outer();
  for (const Point& z : cfg.avoid) {
    if (outer.contains(z)) zs.push_back(z);
  }
  std::sort(zs.begin(), zs.end());
  double total = 0.0;
  for (const Point& z : zs) total += exact_escape(z, cfg, params);
  return total;
}

double GreenTable::at(const Point& x) const {
  auto it = std::lower_bound(points.begin(), points.end(), x);
  if (it == points.end() || *it != x) return 0.0;
  return values[static_cast<std::size_t>(it - points.begin())];
}

GreenTable srw_green(int d, double radius) {
  if (d <= 2) throw InvalidArgument("Green's function diverges for d <= 2");
  if (d > kMaxDim) throw InvalidArgument("dimension too large");
  if (!(radius >= 1.0)) throw InvalidArgument("truncation radius must be >= 1");
  BallIndex b = ball(d, radius, kMaxUnknowns);
  const auto n = static_cast<Eigen::Index>(b.points.size());
  const double q = 1.0 / (2.0 * d);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(b.points.size() * static_cast<std::size_t>(2 * d + 1));
  for (std::size_t i = 0; i < b.points.size(); ++i) {
    trips.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i), 1.0);
    for (int k = 0; k < 2 * d; ++k) {
      auto it = b.index.find(neighbor(b.points[i], k));
      if (it != b.index.end()) {
        trips.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(it->second), -q);
      }
    }
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(trips.begin(), trips.end());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[static_cast<Eigen::Index>(b.index.at(Point::origin(d)))] = 1.0;
  const Eigen::VectorXd g = solve_spd(a, rhs);

  GreenTable out;
  out.d = d;
  out.radius = radius;
  out.residual = residual_norm(a, g, rhs);
  out.points = std::move(b.points);
  out.values.assign(g.data(), g.data() + g.size());
  return out;
}

ExitThroughEdge exact_exit_through_edge(int d, double radius, const Edge& edge) {
  if (d < 1 || d > kMaxDim) throw InvalidArgument("dimension out of range");
  if (!(radius >= 1.0)) throw InvalidArgument("exit radius must be >= 1");
  if (edge.lo().dim() != d) throw InvalidArgument("edge dimension differs from d");
  const double r2 = radius * radius + 1e-9;
  const bool lo_in = static_cast<double>(norm_l2_squared(edge.lo())) <= r2;
  const bool hi_in = static_cast<double>(norm_l2_squared(edge.hi())) <= r2;
  if (lo_in == hi_in) throw InvalidArgument("edge does not connect the ball to its exterior");
  const Point inner = lo_in ? edge.lo() : edge.hi();

  BallIndex b = ball(d, radius, kMaxUnknowns);
  const Point origin = Point::origin(d);
  // Unknowns: the ball without the origin, which absorbs.
  std::vector<Eigen::Index> slot(b.points.size(), -1);
  Eigen::Index n = 0;
  for (std::size_t i = 0; i < b.points.size(); ++i) {
    if (b.points[i] != origin) slot[i] = n++;
  }
  const double q = 1.0 / (2.0 * d);
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < b.points.size(); ++i) {
    if (slot[i] < 0) continue;
    trips.emplace_back(slot[i], slot[i], 1.0);
    for (int k = 0; k < 2 * d; ++k) {
      auto it = b.index.find(neighbor(b.points[i], k));
      if (it != b.index.end() && slot[it->second] >= 0) trips.emplace_back(slot[i], slot[it->second], -q);
    }
    if (b.points[i] == inner) rhs[slot[i]] = q;
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(trips.begin(), trips.end());
  const Eigen::VectorXd h = solve_spd(a, rhs);

  ExitThroughEdge out;
  out.unknowns = static_cast<std::size_t>(n);
  out.residual = residual_norm(a, h, rhs);
  // radius >= 1 keeps every neighbour of the origin inside.
  for (int k = 0; k < 2 * d; ++k) {
    out.probability += q * h[slot[b.index.at(neighbor(origin, k))]];
  }
  return out;
}

}  // namespace orrw
