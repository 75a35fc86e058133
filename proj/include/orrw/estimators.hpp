#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "orrw/engine.hpp"
#include "orrw/lattice.hpp"
#include "orrw/stats.hpp"

namespace orrw {

/// Escape from `avoid` around the box center + [-2r, 2r]^d at scale R, over times 1..2R^2.
struct EscapeConfig {
  Point center;
  std::int64_t r = 1;
  std::int64_t scale = 1;  // R
  PointSet avoid;

  Box outer() const { return Box{center, static_cast<std::int32_t>(2 * r)}; }
  Box inner() const { return Box{center, static_cast<std::int32_t>(r)}; }
  std::uint64_t horizon() const { return static_cast<std::uint64_t>(2 * scale * scale); }
  void validate(int d) const;
};

/// For t in [1, 2R^2]: W(t) in [-4R, 4R]^d minus A; W(t) in [-R, R]^d once t >= R^2; W(t) outside
/// the outer box once t >= 40 r^2. Positions must cover times 0..horizon.
bool escape_indicator(const Trajectory& traj, const EscapeConfig& cfg);
bool escape_indicator(std::span<const Point> positions, const EscapeConfig& cfg);

/// Simulates a virgin-environment walk from z and stops at the first violated condition.
bool run_escape(const ModelParams& params, const Point& z, const EscapeConfig& cfg,
                std::uint64_t seed);

/// Same, with the walk started in environment `env0` instead of a virgin one.
bool run_escape(const ModelParams& params, const Point& z, const EscapeConfig& cfg,
                const EdgeEnvironment& env0, std::uint64_t seed);

struct PointEscape {
  Point z;
  double p = 0.0;
  double stderr_p = 0.0;
  std::uint64_t successes = 0;
  std::uint64_t n = 0;
};

struct CapacityEstimate {
  std::vector<PointEscape> points;  // sorted by z
  double total = 0.0;
  double stderr_total = 0.0;
};

/// Per z in A with z in the outer box, n virgin runs from z. Replica i of point k uses
/// seed derive_replica_seed(derive_replica_seed(master, k), i).
CapacityEstimate estimate_capacity(const EscapeConfig& cfg, const ModelParams& params,
                                   std::uint64_t n, std::uint64_t master_seed, unsigned threads);

/// Escape from z = W(t) avoiding the history W[0, t], estimated twice: from a virgin walk at z,
/// and from the walk continued in its own environment at time t. The continuation is the plain
/// walk, which agrees with a demon walk whose box contains [-4R, 4R]^d up to the first failed
/// condition. `cfg.avoid` is replaced by the history.
struct EscapeComparison {
  std::uint64_t t = 0;
  Point z;
  bool in_outer = false;
  PointEscape virgin;
  PointEscape continued;
  std::optional<double> ratio;  // virgin / continued, when the continuation ever escapes
};

EscapeComparison compare_escape(const Trajectory& walk, std::uint64_t t, const EscapeConfig& cfg,
                                const ModelParams& params, std::uint64_t n, std::uint64_t seed,
                                unsigned threads);

struct NowhereHeavy {
  bool holds = true;
  std::optional<Box> witness;
};

/// |A ∩ (u + [-r, r]^d)| <= r^kappa for u in [-2R, 2R]^d and integer r in [R^delta, R].
NowhereHeavy nowhere_heavy(const PointSet& avoid, std::int64_t scale, double delta, double kappa);

struct CapVolRatio {
  double ratio = 0.0;
  double denominator = 0.0;
  std::uint64_t inner_count = 0;
  CapacityEstimate capacity;
};

/// Cap / (r^{-6 nu} |A ∩ inner|^{1 - 2/d}). Refuses sets that are not nowhere heavy.
CapVolRatio capvol_ratio(const EscapeConfig& cfg, const ModelParams& params, std::uint64_t n,
                         std::uint64_t master_seed, unsigned threads);

/// What one replica walk from the origin records at each grid time.
struct WalkSample {
  std::vector<Point> at;             // W(t)
  std::vector<std::uint64_t> range;  // |W[0, t]|, when requested
  std::vector<double> radius;        // max_{s <= t} |W(s)|_2, when requested
  std::optional<std::uint64_t> last_zero;  // last s <= max grid time with W(s) = 0
};

struct SampleOptions {
  bool range = false;
  bool radius = false;
  bool returns = false;
};

/// One walk from the origin driven by time_stream(seed), observed at the sorted grid times.
WalkSample sample_walk(const ModelParams& params, std::span<const std::uint64_t> grid,
                       std::uint64_t seed, SampleOptions opts);

std::vector<WalkSample> sample_walks(const ModelParams& params, std::span<const std::uint64_t> grid,
                                     std::uint64_t n, std::uint64_t master_seed, unsigned threads,
                                     SampleOptions opts);

struct VarianceEntry {
  std::uint64_t t = 0;
  double v = 0.0;
  double stderr_v = 0.0;
  std::uint64_t n = 0;
};

struct VarianceCurve {
  std::vector<VarianceEntry> entries;
  double sigma_hat = 0.0;
  double sigma_stderr = 0.0;
};

/// v_t = E[W(t)_coord^2]; sigma_hat = sqrt(v_T / T) at the largest grid time.
VarianceCurve variance_curve(const ModelParams& params, std::span<const std::uint64_t> grid,
                             std::uint64_t n, std::uint64_t master_seed, unsigned threads,
                             int coordinate = 0);
VarianceCurve variance_from_samples(std::span<const WalkSample> samples,
                                    std::span<const std::uint64_t> grid, int coordinate = 0);

struct Estimate {
  double value = 0.0;
  double stderr_value = 0.0;
  std::uint64_t n = 0;
};

/// |v_{s+t} - v_s - v_t| from per-replica differences on one walk.
Estimate additivity_defect(const ModelParams& params, std::uint64_t s, std::uint64_t t,
                           std::uint64_t n, std::uint64_t master_seed, unsigned threads);

struct TailEstimate {
  double threshold = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t n = 0;
  double p = 0.0;
  stats::Interval wilson{0.0, 1.0};
};

/// Fraction of walks with max_{s <= t} |W(s)|_2 >= t^exponent.
TailEstimate displacement_tail(const ModelParams& params, std::uint64_t t, double exponent,
                               std::uint64_t n, std::uint64_t master_seed, unsigned threads);

struct SiteFrequency {
  Point v;
  std::uint64_t count = 0;
  double p = 0.0;
  double bound = 0.0;  // min(T^{-d/2+nu}, |v|^{-d+2nu})
  bool violation = false;  // lower Wilson bound above `bound`
};

struct H1Histogram {
  std::uint64_t t = 0;
  std::uint64_t n = 0;
  std::vector<SiteFrequency> sites;  // sorted by v
  std::uint64_t violations = 0;
};

H1Histogram h1_histogram(const ModelParams& params, std::uint64_t t, std::uint64_t n,
                         std::uint64_t master_seed, unsigned threads);

struct GaussianFit {
  double ks = 0.0;
  double sigma_hat = 0.0;
  double sigma_stderr = 0.0;
  /// Sample covariance of W(t)/sqrt(t), row-major d x d.
  std::vector<double> covariance;
};

GaussianFit gaussian_fit(const ModelParams& params, std::uint64_t t, std::uint64_t n,
                         std::uint64_t master_seed, unsigned threads);
GaussianFit gaussian_fit_from_samples(std::span<const WalkSample> samples, std::uint64_t t,
                                      std::size_t grid_index, int d);

struct PhaseFit {
  double a = 0.0;
  std::vector<std::uint64_t> t;
  std::vector<double> mean_range;
  std::vector<double> mean_radius;
  stats::LinearFit range_fit;   // log mean range against log t
  stats::LinearFit radius_fit;  // log mean radius against log t
};

std::vector<PhaseFit> phase_scan(const ModelParams& base, std::span<const double> a_grid,
                                 std::span<const std::uint64_t> grid, std::uint64_t n,
                                 std::uint64_t master_seed, unsigned threads);

struct ReturnEstimate {
  std::uint64_t t = 0;
  std::uint64_t hits = 0;
  std::uint64_t n = 0;
  double p = 0.0;
  stats::Interval wilson{0.0, 1.0};
};

/// P(W(s) = 0 for some s in [t, horizon]) for each grid time t <= horizon.
std::vector<ReturnEstimate> return_probability(const ModelParams& params,
                                               std::span<const std::uint64_t> grid,
                                               std::uint64_t horizon, std::uint64_t n,
                                               std::uint64_t master_seed, unsigned threads);

}  // namespace orrw
