#include "dk/periodic_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "dk/error.hpp"
#include "dk/io.hpp"

namespace dk {

namespace {
constexpr const char* kModule = "periodic_kernel";
constexpr double kTailTolerance = 1e-10;

// Backward recurrence I_{k-1} = I_{k+1} + (2k/z) I_k from a start index far
// enough out that the arbitrary starting values have decayed away.
std::vector<double> miller(int j_req, double z) {
  const int start = j_req + static_cast<int>(std::ceil(10.0 * std::sqrt(z))) + 40;
  std::vector<double> v(static_cast<std::size_t>(start) + 2, 0.0);
  v[start] = 1.0;
  for (int k = start; k >= 1; --k) {
    v[k - 1] = v[k + 1] + (2.0 * k / z) * v[k];
    if (v[k - 1] > 1e250) {
      for (int i = k - 1; i <= start; ++i) v[i] *= 1e-250;
    }
  }
  // e^{-z} (I_0 + 2 sum_{k>=1} I_k) = 1; sum from the small end.
  double sum = 0.0;
  for (int k = start; k >= 1; --k) sum += v[k];
  const double norm = v[0] + 2.0 * sum;
  for (double& x : v) x /= norm;
  v.pop_back();
  return v;
}
}  // namespace

std::vector<double> bessel_i_scaled(int j_max, double z) {
  require(j_max >= 0, kModule, "Bessel order must be non-negative");
  require(std::isfinite(z) && z >= 0.0, kModule, "Bessel argument must be non-negative");
  if (z == 0.0) {
    std::vector<double> v(static_cast<std::size_t>(j_max) + 1, 0.0);
    v[0] = 1.0;
    return v;
  }
  auto v = miller(j_max, z);
  v.resize(static_cast<std::size_t>(j_max) + 1);
  return v;
}

double bessel_i(int j, double z) { return bessel_i_scaled(j, z).back(); }

VonMises::VonMises(double eps) {
  require(std::isfinite(eps) && eps > 0.0, kModule, "epsilon must be positive");
  z_ = 0.5 / (eps * eps);
  norm_ = 2.0 * std::numbers::pi * bessel_i(0, z_);
  inv_norm_ = 1.0 / norm_;
}

double VonMises::operator()(double x) const noexcept { return std::exp(z_ * (std::cos(x) - 1.0)) * inv_norm_; }

double von_mises_kernel(double x, double eps) { return VonMises(eps)(x); }

int default_j_max(double eps) { return static_cast<int>(std::ceil(3.0 / (2.0 * eps * eps))) + 64; }

KernelSpectrum kernel_eigenvalues(double eps, int j_max) {
  require(std::isfinite(eps) && eps > 0.0 && eps <= 1.0, kModule, "epsilon must lie in (0, 1]");
  if (j_max < 0) j_max = default_j_max(eps);
  const double z = 0.5 / (eps * eps);
  const auto ext = miller(j_max, z);

  KernelSpectrum s;
  s.epsilon = eps;
  s.j_max = j_max;
  s.normalizer = 2.0 * std::numbers::pi * ext[0];
  s.lambda.resize(static_cast<std::size_t>(j_max) + 1);
  s.alpha.resize(s.lambda.size());
  for (int j = 0; j <= j_max; ++j) {
    s.lambda[j] = j == 0 ? 1.0 : ext[j] / ext[0];
    s.alpha[j] = (1.0 + double(j) * j) * s.lambda[j];
  }
  double kept = 0.0, dropped = 0.0;
  for (int j = static_cast<int>(ext.size()) - 1; j > j_max; --j) dropped += 2.0 * (1.0 + double(j) * j) * ext[j] / ext[0];
  for (int j = j_max; j >= 1; --j) kept += 2.0 * s.alpha[j];
  kept += 1.0;
  s.tail = dropped / (kept + dropped);
  if (s.tail > kTailTolerance)
    fail(ErrorKind::Truncation, kModule,
         "j_max = " + std::to_string(j_max) + " drops a relative tail of " + format_double(s.tail));
  return s;
}

double eigen_sum(const KernelSpectrum& s, int n) {
  require(n >= 0 && n <= 2, kModule, "eigen_sum supports n in {0, 1, 2}");
  double sum = 0.0;
  for (int j = s.j_max; j >= 1; --j) sum += s.lambda[j] * std::pow(double(j), n);
  return 2.0 * sum + (n == 0 ? s.lambda[0] : 0.0);
}

std::complex<double> NoiseIncrement::mode(int m) const {
  if (m == 0) return {coeff(0) / std::sqrt(2.0 * std::numbers::pi), 0.0};
  const double k = 0.5 / std::sqrt(std::numbers::pi);
  return {k * coeff(m), -k * coeff(-m)};
}

double NoiseIncrement::evaluate(double x) const {
  double v = coeff(0) / std::sqrt(2.0 * std::numbers::pi);
  const double r = 1.0 / std::sqrt(std::numbers::pi);
  for (int j = 1; j <= m_trunc; ++j) v += r * (coeff(j) * std::cos(j * x) + coeff(-j) * std::sin(j * x));
  return v;
}

NoiseIncrement sample_noise_increment(const KernelSpectrum& s, int m_trunc, double dt, Xoshiro256& gen) {
  require(m_trunc >= 0 && m_trunc <= s.j_max, kModule, "noise truncation must not exceed the spectrum j_max");
  require(std::isfinite(dt) && dt >= 0.0, kModule, "dt must be non-negative");
  NoiseIncrement inc;
  inc.dt = dt;
  inc.m_trunc = m_trunc;
  inc.coeffs.resize(2 * static_cast<std::size_t>(m_trunc) + 1);
  const double sdt = std::sqrt(dt);
  for (int j = -m_trunc; j <= m_trunc; ++j) inc.coeffs[j + m_trunc] = sdt * standard_normal(gen);
  apply_sqrt_q(s, inc.coeffs, m_trunc);
  return inc;
}

void apply_sqrt_q(const KernelSpectrum& s, std::vector<double>& coeffs, int m_trunc) {
  require(coeffs.size() == 2 * static_cast<std::size_t>(m_trunc) + 1 && m_trunc <= s.j_max, kModule,
          "coefficient vector does not match the truncation");
  for (int j = -m_trunc; j <= m_trunc; ++j) coeffs[j + m_trunc] *= std::sqrt(s.lambda[std::abs(j)]);
}

void write_spectrum_csv(std::ostream& os, const KernelSpectrum& s) {
  os << "j,lambda,alpha\n";
  for (int j = 0; j <= s.j_max; ++j) os << j << ',' << format_double(s.lambda[j]) << ',' << format_double(s.alpha[j]) << '\n';
}

}  // namespace dk
