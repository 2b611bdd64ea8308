#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner. Nothing here calls into the library under test.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace dk::oracle {

// 2 pi e^{-z} I_j(z) by quadrature of the Fourier integral on the contour
// shifted to Im x = asinh(j/z), where the integrand has no cancellation.
inline double scaled_bessel_quadrature(int j, double z) {
  using boost::math::quadrature::gauss_kronrod;
  const double c = std::asinh(j / z);
  const double ch = std::cosh(c), sh = std::sinh(c);
  auto f = [&](double t) {
    return std::exp(z * (ch * std::cos(t) - 1.0) - j * c) * std::cos(j * t - z * sh * std::sin(t));
  };
  return 2.0 * gauss_kronrod<double, 61>::integrate(f, 0.0, std::numbers::pi, 20, 1e-14);
}

using Mat2 = std::array<std::complex<double>, 4>;

// Classical RK4 on the 2x2 mode system d(r, j)/dt = (-i m j, -i m kappa r - gamma j),
// applied to both unit vectors. Returns {S_rr, S_rj, S_jr, S_jj}.
inline Mat2 rk4_exponential(int m, double t, double gamma, double kappa, int steps) {
  using cplx = std::complex<double>;
  const cplx im{0.0, double(m)};
  auto f = [&](cplx r, cplx j) { return std::pair<cplx, cplx>{-im * j, -im * kappa * r - gamma * j}; };
  Mat2 out;
  for (int col = 0; col < 2; ++col) {
    cplx r = col == 0 ? 1.0 : 0.0, j = col == 0 ? 0.0 : 1.0;
    const double h = t / steps;
    for (int n = 0; n < steps; ++n) {
      auto [a1, b1] = f(r, j);
      auto [a2, b2] = f(r + 0.5 * h * a1, j + 0.5 * h * b1);
      auto [a3, b3] = f(r + 0.5 * h * a2, j + 0.5 * h * b2);
      auto [a4, b4] = f(r + h * a3, j + h * b3);
      r += h / 6 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
      j += h / 6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
    }
    out[col] = r;
    out[col + 2] = j;
  }
  return out;
}

}  // namespace dk::oracle
