#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace orrw::stats {

/// Running mean and second central moment; merge() is the pairwise update, so any grouping of
/// the same samples in the same order gives the same result.
class Moments {
 public:
  void add(double x) noexcept;
  void merge(const Moments& other) noexcept;

  std::uint64_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  /// Unbiased sample variance; 0 for fewer than two samples.
  double variance() const noexcept;
  /// Standard error of the mean.
  double stderr_mean() const noexcept;

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct Interval {
  double lo;
  double hi;
};

/// Wilson score interval for k successes in n trials at z standard deviations.
Interval wilson(std::uint64_t k, std::uint64_t n, double z = 3.0);
/// sqrt(p(1-p)/n) at p = k/n.
double binomial_stderr(std::uint64_t k, std::uint64_t n);

double normal_cdf(double x);
/// sup |F_n - Phi| for the sample (sorted in place).
double ks_normal(std::vector<double>& sample);

struct ChiSquared {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  int pooled_cells = 0;
};

/// Pearson test of observed counts against expected probabilities. Cells with expected count
/// below `min_expected` are pooled into one.
ChiSquared chi_squared(std::span<const std::uint64_t> observed, std::span<const double> probs,
                       double min_expected = 5.0);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double rms_residual = 0.0;
};

LinearFit least_squares(std::span<const double> x, std::span<const double> y);

}  // namespace orrw::stats
