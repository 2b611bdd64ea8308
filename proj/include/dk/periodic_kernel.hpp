#pragma once

#include <complex>
#include <iosfwd>
#include <vector>

#include "dk/rng.hpp"

namespace dk {

/// Scaled modified Bessel values e^{-z} I_j(z) for j = 0..j_max, by backward
/// recurrence normalised with e^{-z}(I_0 + 2 sum_k I_k) = 1.
std::vector<double> bessel_i_scaled(int j_max, double z);

/// e^{-z} I_j(z).
double bessel_i(int j, double z);

/// Periodic kernel p(x) proportional to exp(-sin^2(x/2) / eps^2) on [0, 2pi),
/// normalised to unit mass. Its variance is close to eps^2 for small eps.
class VonMises {
 public:
  explicit VonMises(double eps);
  double operator()(double x) const noexcept;
  double concentration() const noexcept { return z_; }
  /// Normaliser Z = integral of exp(-sin^2(x/2)/eps^2) over one period.
  double normalizer() const noexcept { return norm_; }

 private:
  double z_;
  double norm_;
  double inv_norm_;
};

double von_mises_kernel(double x, double eps);

struct KernelSpectrum {
  double epsilon = 0.0;
  int j_max = 0;
  std::vector<double> lambda;  // index 0..j_max
  std::vector<double> alpha;   // (1 + j^2) lambda_j
  double normalizer = 0.0;
  /// Relative weight of the modes beyond j_max in sum_j (1 + j^2) lambda_j.
  double tail = 0.0;
};

int default_j_max(double eps);

/// Eigenvalues of convolution with the periodic kernel: lambda_j = I_j(z) / I_0(z), z = 1/(2 eps^2).
/// Pass j_max < 0 for the default. Throws Truncation when the dropped tail is too heavy.
KernelSpectrum kernel_eigenvalues(double eps, int j_max = -1);

/// sum over all integers j of lambda_j |j|^n.
double eigen_sum(const KernelSpectrum& s, int n);

/// Increment of the Q-Wiener process over dt, stored in the real L2-orthonormal
/// basis e_0 = 1/sqrt(2pi), e_j = cos(jx)/sqrt(pi), e_{-j} = sin(jx)/sqrt(pi).
struct NoiseIncrement {
  double dt = 0.0;
  int m_trunc = 0;
  std::vector<double> coeffs;  // index j + m_trunc, j = -m_trunc..m_trunc

  double coeff(int j) const { return coeffs[static_cast<std::size_t>(j + m_trunc)]; }
  /// Complex Fourier coefficient of e^{imx}, m >= 0; negative m is the conjugate.
  std::complex<double> mode(int m) const;
  double evaluate(double x) const;
};

NoiseIncrement sample_noise_increment(const KernelSpectrum& s, int m_trunc, double dt, Xoshiro256& gen);

/// Multiplies real-basis coefficients by sqrt(lambda_|j|) in place.
void apply_sqrt_q(const KernelSpectrum& s, std::vector<double>& coeffs, int m_trunc);

void write_spectrum_csv(std::ostream& os, const KernelSpectrum& s);

}  // namespace dk
