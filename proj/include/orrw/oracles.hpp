#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "orrw/engine.hpp"
#include "orrw/estimators.hpp"
#include "orrw/lattice.hpp"

namespace orrw {

// Instances with (2d)^t above this are refused.
inline constexpr double kEnumerationBudget = 1e8;

struct ExactDistribution {
  ModelParams params;
  std::uint64_t t = 0;
  std::vector<std::pair<Point, double>> support;  // sorted by point
  double total() const;
  double at(const Point& v) const;
};

/// Called on every prefix of every path with its probability; returning false prunes the
/// prefix's extensions.
using PathVisitor = std::function<bool(std::span<const Point> path, double weight)>;

/// Depth-first walk over all paths of length <= t_max with their exact ORRW weights.
void enumerate_paths(const ModelParams& params, std::uint64_t t_max, const Point& start,
                     const EdgeEnvironment& env0, const PathVisitor& visit);

ExactDistribution enumerate_orrw(const ModelParams& params, std::uint64_t t_max, const Point& start,
                                 const EdgeEnvironment& env0 = {});

/// E[W(t)_coord^2] from the origin in a virgin environment.
double exact_moments(const ModelParams& params, std::uint64_t t, int coordinate = 0);

/// Exact probability of the escape event from z.
double exact_escape(const Point& z, const EscapeConfig& cfg, const ModelParams& params);

/// Sum of exact_escape over the points of A in the outer box.
double exact_capacity(const EscapeConfig& cfg, const ModelParams& params);

/// Solution of (I - P) g = e_0 on {x : |x|_2 <= radius} with g = 0 outside, P the simple
/// random walk kernel. g counts visits at all times t >= 0.
struct GreenTable {
  int d = 3;
  double radius = 0.0;
  std::vector<Point> points;  // sorted
  std::vector<double> values;
  double residual = 0.0;  // max-norm residual of the linear system

  double at(const Point& x) const;  // 0 outside the domain
};

GreenTable srw_green(int d, double radius);

struct ExitThroughEdge {
  double probability = 0.0;
  double residual = 0.0;
  std::size_t unknowns = 0;
};

/// Probability that simple random walk from 0 leaves {|x|_2 <= L} for the first time through
/// `edge` before returning to 0.
ExitThroughEdge exact_exit_through_edge(int d, double radius, const Edge& edge);

}  // namespace orrw
