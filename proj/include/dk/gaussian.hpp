#pragma once

namespace dk {

struct Gaussian1D {
  double mean = 0.0;
  double variance = 1.0;
};

struct BivariateGaussian {
  double mean_q = 0.0;
  double mean_p = 0.0;
  double var_q = 1.0;
  double var_p = 1.0;
  double corr = 0.0;
};

void validate(const Gaussian1D& g);
void validate(const BivariateGaussian& bg);

/// Values below this are returned as exactly 0.
inline constexpr double kPdfFlush = 1e-300;

/// Unchecked density of N(mean, var) at x; var must be positive.
double normal_pdf(double x, double mean, double var) noexcept;

/// Smoothing kernel w_eps(y) = N(0, eps^2) density at y.
inline double gauss_kernel(double y, double eps) noexcept { return normal_pdf(y, 0.0, eps * eps); }

double gaussian_pdf(double x, const Gaussian1D& g);

struct KernelProduct {
  Gaussian1D product;
  double scale = 0.0;
};

/// f(x) g(x) = scale * product_pdf(x).
KernelProduct kernel_product(const Gaussian1D& f, const Gaussian1D& g);

/// E[X^n] for X ~ g. Orders above 170 are rejected.
double gaussian_moment(int n, const Gaussian1D& g);

/// Law of p given q = b. Throws DegenerateLaw when |corr| = 1.
Gaussian1D conditional_law(const BivariateGaussian& bg, double b);

}  // namespace dk
