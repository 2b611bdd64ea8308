#include "dk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dk/error.hpp"

namespace dk::stats {

namespace {
constexpr const char* kModule = "stats";

long long mk_statistic(std::span<const double> y) {
  long long s = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = i + 1; j < y.size(); ++j) s += (y[j] > y[i]) - (y[j] < y[i]);
  return s;
}
}  // namespace

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double mean_stderr(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  return std::sqrt(variance(x) / static_cast<double>(x.size()));
}

Estimate mean_estimate(std::span<const double> x) { return {mean(x), mean_stderr(x)}; }

Estimate covariance(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), kModule, "covariance needs paired samples");
  const std::size_t n = x.size();
  if (n < 2) return {};
  const double mx = mean(x), my = mean(y);
  std::vector<double> prod(n);
  for (std::size_t i = 0; i < n; ++i) prod[i] = (x[i] - mx) * (y[i] - my);
  const double sum = std::accumulate(prod.begin(), prod.end(), 0.0);
  return {sum / static_cast<double>(n - 1), mean_stderr(prod)};
}

Estimate variance_estimate(std::span<const double> x) { return covariance(x, x); }

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, kModule, "linear fit needs >= 2 paired points");
  const std::size_t n = x.size();
  const double mx = mean(x), my = mean(y);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, kModule, "linear fit needs distinct abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    rss += r * r;
  }
  fit.slope_stderr = n > 2 ? std::sqrt(rss / static_cast<double>(n - 2) / sxx) : 0.0;
  fit.r_squared = syy > 0.0 ? 1.0 - rss / syy : 1.0;
  return fit;
}

Interval wilson_interval(std::size_t k, std::size_t n, double z) {
  require(n > 0 && k <= n, kModule, "wilson interval needs 0 <= k <= n, n > 0");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * nn)) / (1 + z2 / nn);
  const double half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / (1 + z2 / nn);
  return {k == 0 ? 0.0 : std::max(0.0, centre - half), k == n ? 1.0 : std::min(1.0, centre + half)};
}

MannKendall mann_kendall(std::span<const double> y) {
  MannKendall out;
  const std::size_t n = y.size();
  if (n < 2) return out;
  out.s = mk_statistic(y);
  if (n <= 9) {
    // Null: all orderings of the observed values equally likely.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<double> buf(n);
    std::size_t total = 0, ge = 0, le = 0;
    do {
      for (std::size_t i = 0; i < n; ++i) buf[i] = y[perm[i]];
      const long long s = mk_statistic(buf);
      ++total;
      ge += s >= out.s;
      le += s <= out.s;
    } while (std::next_permutation(perm.begin(), perm.end()));
    out.p_increasing = static_cast<double>(ge) / static_cast<double>(total);
    out.p_decreasing = static_cast<double>(le) / static_cast<double>(total);
    out.exact = true;
    return out;
  }
  const double nn = static_cast<double>(n);
  double var = nn * (nn - 1) * (2 * nn + 5) / 18.0;
  std::vector<double> sorted(y.begin(), y.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    var -= t * (t - 1) * (2 * t + 5) / 18.0;
    i = j;
  }
  const double sd = std::sqrt(var);
  const double s = static_cast<double>(out.s);
  const double z_inc = sd > 0 ? (s - 1.0) / sd : 0.0;
  const double z_dec = sd > 0 ? (s + 1.0) / sd : 0.0;
  out.p_increasing = 0.5 * std::erfc(z_inc / std::sqrt(2.0));
  out.p_decreasing = 0.5 * std::erfc(-z_dec / std::sqrt(2.0));
  return out;
}

}  // namespace dk::stats
