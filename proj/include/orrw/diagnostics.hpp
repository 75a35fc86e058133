#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "orrw/engine.hpp"
#include "orrw/lattice.hpp"

namespace orrw {

/// Number of distinct vertices of `box` visited at times 0..t.
std::size_t distinct_in_box(const Trajectory& traj, std::uint64_t t, const Box& box);

/// count >= r^kappa.
bool is_heavy_count(std::uint64_t count, std::int64_t radius, double kappa);
bool is_heavy(const Trajectory& traj, std::uint64_t t, const Box& box, double kappa);

struct RelaxedTimeSet {
  std::vector<std::uint64_t> times;  // sorted
  std::int64_t scale = 0;            // R
  double lower_scale = 0.0;          // a^{-1/3}; +inf when a == 0
};

/// Evaluates relaxation at each query time: for every integer r in [a^{-1/3}, R] the block
/// W(t) + [-r, r]^d holds fewer than r^kappa distinct visited vertices.
RelaxedTimeSet relaxed_times(const Trajectory& traj, std::int64_t scale,
                             std::span<const std::uint64_t> query_times);
/// Relaxation flag for every time 0..length.
std::vector<bool> relaxed_flags(const Trajectory& traj, std::int64_t scale);

/// ceil(rho^2 ln^3 rho), with the log factor clamped to 1 for rho <= e.
std::uint64_t default_spend_threshold(std::int64_t radius);

/// First t with |{s <= t : W(s) in box}| >= threshold; nullopt when never reached.
std::optional<std::uint64_t> tau_spend(const Trajectory& traj, const Box& box,
                                       std::uint64_t threshold);

struct StoppingTimeReport {
  std::optional<std::uint64_t> tau_spend;
  std::optional<std::uint64_t> tau_heavy;
  std::optional<Box> witness;
};

/// First t > 0 at which some block u + [-r, r]^d with u in [-2R, 2R]^d and integer
/// r in [R^delta, R] holds at least r^kappa distinct visited vertices.
StoppingTimeReport tau_heavy(const Trajectory& traj, std::int64_t scale, double delta, double kappa);

/// Searches centers in `center_domain` (restricted to the L-inf ball of radius `radius` around
/// `anchor` when given) for a box of that radius holding at least `min_count` of `points`.
/// `points` must be distinct. Returns the first center in lexicographic order.
std::optional<Point> find_dense_block(std::span<const Point> points, std::int64_t radius,
                                      std::size_t min_count, const Box& center_domain,
                                      const Point* anchor = nullptr);

struct BlockClass {
  Box block;
  bool in_a = false;  // tau_spend(block) <= tau_spend(R)
  bool bad = false;
  std::optional<std::uint64_t> tau_spend;
};

struct BlockClassification {
  std::uint64_t total_blocks = 0;
  /// Blocks the walk visited, in lexicographic order of centers. Unlisted blocks are good
  /// and outside A.
  std::vector<BlockClass> visited;
  std::optional<std::uint64_t> tau_spend_inner;
};

/// Labels the blocks u + [-r, r]^d, u in [-(3/2)R, (3/2)R]^d on the 2r-spaced grid. A block is
/// bad if some visit time t <= tau_spend(block) has fewer than 0.9 r^eps + 1 r-locally relaxed
/// times in (t, t + r^eps). Windows running past the end of the trajectory are not judged.
BlockClassification classify_blocks(const Trajectory& traj, std::int64_t scale,
                                    std::int64_t radius, double epsilon);

/// First visit to [-R, R]^d at a time t <= tau_spend(R) - R^eps whose window (t, t + R^eps)
/// holds fewer than 0.9 R^eps + 1 R-locally relaxed times.
std::optional<std::uint64_t> h2_first_violation(const Trajectory& traj, std::int64_t scale,
                                                double epsilon);
bool h2_event_holds(const Trajectory& traj, std::int64_t scale, double epsilon);

/// Largest visit count at time t among vertices of `region`.
std::uint64_t max_vertex_visits(const Trajectory& traj, std::uint64_t t, const Box& region);

struct RangeRadius {
  std::uint64_t range = 0;
  double max_displacement = 0.0;
};

/// |{W(s) : s <= t}| and max_{s <= t} |W(s) - W(0)|_2.
RangeRadius range_and_radius(const Trajectory& traj, std::uint64_t t);

}  // namespace orrw
