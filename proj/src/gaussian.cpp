#include "dk/gaussian.hpp"

#include <cmath>
#include <numbers>

#include "dk/error.hpp"

namespace dk {

namespace {
constexpr const char* kModule = "gaussian_toolbox";

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }
}  // namespace

void validate(const Gaussian1D& g) {
  require(std::isfinite(g.mean), kModule, "mean must be finite");
  require(finite_positive(g.variance), kModule, "variance must be positive and finite");
}

void validate(const BivariateGaussian& bg) {
  require(std::isfinite(bg.mean_q) && std::isfinite(bg.mean_p), kModule, "means must be finite");
  require(finite_positive(bg.var_q) && finite_positive(bg.var_p), kModule,
          "variances must be positive and finite");
  require(std::isfinite(bg.corr) && std::abs(bg.corr) <= 1.0, kModule, "|corr| must be <= 1");
}

double normal_pdf(double x, double mean, double var) noexcept {
  const double d = x - mean;
  const double v = std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * std::numbers::pi * var);
  return v < kPdfFlush ? 0.0 : v;
}

double gaussian_pdf(double x, const Gaussian1D& g) {
  validate(g);
  return normal_pdf(x, g.mean, g.variance);
}

KernelProduct kernel_product(const Gaussian1D& f, const Gaussian1D& g) {
  validate(f);
  validate(g);
  const double s = f.variance + g.variance;
  KernelProduct out;
  out.product.mean = (f.mean * g.variance + g.mean * f.variance) / s;
  out.product.variance = f.variance * g.variance / s;
  out.scale = normal_pdf(f.mean - g.mean, 0.0, s);
  return out;
}

double gaussian_moment(int n, const Gaussian1D& g) {
  require(n >= 0, kModule, "moment order must be non-negative");
  require(n <= 170, kModule, "moment order above 170 is not supported");
  validate(g);
  // Terms (2j-1)!! C(n,2j) var^j mean^(n-2j), built up term by term.
  double sum = 0.0;
  double binom = 1.0;   // C(n, 2j)
  double dfact = 1.0;   // (2j-1)!!
  double var_pow = 1.0;
  for (int j = 0; 2 * j <= n; ++j) {
    if (j > 0) {
      binom *= static_cast<double>(n - 2 * j + 2) * static_cast<double>(n - 2 * j + 1) /
               (static_cast<double>(2 * j - 1) * static_cast<double>(2 * j));
      dfact *= static_cast<double>(2 * j - 1);
      var_pow *= g.variance;
    }
    const double mean_pow = (n - 2 * j == 0) ? 1.0 : std::pow(g.mean, n - 2 * j);
    sum += dfact * binom * var_pow * mean_pow;
  }
  if (!std::isfinite(sum)) fail(ErrorKind::Numerical, kModule, "moment overflows double range");
  return sum;
}

Gaussian1D conditional_law(const BivariateGaussian& bg, double b) {
  validate(bg);
  if (std::abs(bg.corr) >= 1.0) fail(ErrorKind::DegenerateLaw, kModule, "|corr| = 1 has no conditional density");
  const double sq = std::sqrt(bg.var_q), sp = std::sqrt(bg.var_p);
  return {bg.mean_p + (sp / sq) * bg.corr * (b - bg.mean_q), (1.0 - bg.corr * bg.corr) * bg.var_p};
}

}  // namespace dk
