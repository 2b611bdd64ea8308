#pragma once

#include <cstddef>
#include <span>

namespace dk::stats {

double mean(std::span<const double> x);
/// Unbiased sample variance (n - 1 denominator); 0 for n < 2.
double variance(std::span<const double> x);
/// Standard error of the sample mean.
double mean_stderr(std::span<const double> x);

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

/// Sample covariance of paired samples with a delta-method standard error
/// (standard error of the mean of centred products).
Estimate covariance(std::span<const double> x, std::span<const double> y);
/// Sample variance with the same standard-error convention.
Estimate variance_estimate(std::span<const double> x);
/// Mean with its standard error.
Estimate mean_estimate(std::span<const double> x);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y = intercept + slope * x; needs at least 2 points.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Wilson score interval for k successes in n trials at normal quantile z.
Interval wilson_interval(std::size_t k, std::size_t n, double z = 1.959963984540054);

struct MannKendall {
  long long s = 0;
  /// One-sided p-value for an increasing trend in sequence order.
  double p_increasing = 1.0;
  /// One-sided p-value for a decreasing trend.
  double p_decreasing = 1.0;
  bool exact = false;
};

/// Mann-Kendall trend test. Exact permutation null for n <= 9, normal
/// approximation with continuity correction beyond.
MannKendall mann_kendall(std::span<const double> y);

}  // namespace dk::stats
