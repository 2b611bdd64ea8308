#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "dk/error.hpp"
#include "dk/gaussian.hpp"
#include "dk/rng.hpp"
#include "dk/stats.hpp"

using dk::BivariateGaussian;
using dk::Gaussian1D;

namespace {

double trapezoid(double a, double b, int n, auto f) {
  const double h = (b - a) / n;
  double s = 0.5 * (f(a) + f(b));
  for (int i = 1; i < n; ++i) s += f(a + i * h);
  return s * h;
}

double binom(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

}  // namespace

TEST_CASE("pdf peak values") {
  CHECK(dk::gaussian_pdf(0.0, {0.0, 1.0}) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
  for (auto [mu, var] : {std::pair{1.5, 0.3}, std::pair{-2.0, 7.0}}) {
    CHECK(dk::gaussian_pdf(mu, {mu, var}) ==
          doctest::Approx(1.0 / std::sqrt(2 * std::numbers::pi * var)).epsilon(1e-15));
  }
}

TEST_CASE("pdf integrates to one and is symmetric") {
  const Gaussian1D g{0.0, 4.0};
  CHECK(dk::gaussian_pdf(1.0, g) == doctest::Approx(std::exp(-1.0 / 8.0) / std::sqrt(8 * std::numbers::pi)));
  const double sd = 2.0;
  const double mass = trapezoid(-40 * sd, 40 * sd, 200000, [&](double x) { return dk::gaussian_pdf(x, g); });
  CHECK(std::abs(mass - 1.0) < 1e-8);
  const Gaussian1D h{0.7, 0.09};
  const double mass2 =
      trapezoid(0.7 - 40 * 0.3, 0.7 + 40 * 0.3, 200000, [&](double x) { return dk::gaussian_pdf(x, h); });
  CHECK(std::abs(mass2 - 1.0) < 1e-8);
  CHECK(dk::gaussian_pdf(0.25, {0.0, 0.09}) == dk::gaussian_pdf(-0.25, {0.0, 0.09}));
  CHECK(dk::gaussian_pdf(0.7 + 0.2, h) > 0.0);
}

TEST_CASE("pdf rejects non-positive variance") {
  CHECK_THROWS_AS(dk::gaussian_pdf(0.0, {0.0, 0.0}), dk::Error);
  CHECK_THROWS_AS(dk::gaussian_pdf(0.0, {0.0, -1.0}), dk::Error);
}

TEST_CASE("far tail is flushed to zero") {
  CHECK(dk::gaussian_pdf(60.0, {0.0, 1.0}) == 0.0);
}

TEST_CASE("kernel product of a kernel with itself") {
  const double eps = 0.13;
  const auto kp = dk::kernel_product({0.0, eps * eps}, {0.0, eps * eps});
  CHECK(kp.product.mean == 0.0);
  CHECK(kp.product.variance == doctest::Approx(eps * eps / 2));
  CHECK(kp.scale == doctest::Approx(1.0 / std::sqrt(4 * std::numbers::pi * eps * eps)));
}

TEST_CASE("kernel product against pointwise multiplication") {
  const Gaussian1D f{0.0, 1.0}, g{2.0, 1.0};
  const auto kp = dk::kernel_product(f, g);
  CHECK(kp.product.mean == doctest::Approx(1.0));
  CHECK(kp.product.variance == doctest::Approx(0.5));
  CHECK(kp.scale == doctest::Approx(dk::gaussian_pdf(2.0, {0.0, 2.0})));
  for (double x : {-1.0, 0.0, 0.5, 1.0, 3.0}) {
    const double direct = dk::gaussian_pdf(x, f) * dk::gaussian_pdf(x, g);
    CHECK(kp.scale * dk::gaussian_pdf(x, kp.product) == doctest::Approx(direct).epsilon(1e-13));
  }
}

TEST_CASE("two-point kernel product splits into difference and midpoint kernels") {
  const double x1 = 0.3, x2 = 0.7, q = 0.5, eps = 0.1;
  const double lhs = dk::gauss_kernel(x1 - q, eps) * dk::gauss_kernel(x2 - q, eps);
  const double rhs = dk::gauss_kernel(x1 - x2, std::sqrt(2.0) * eps) *
                     dk::gauss_kernel(q - 0.5 * (x1 + x2), eps / std::sqrt(2.0));
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
}

TEST_CASE("property: kernel product identity holds pointwise") {
  dk::Xoshiro256 gen(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const Gaussian1D f{4 * gen.uniform() - 2, 0.01 + 3 * gen.uniform()};
    const Gaussian1D g{4 * gen.uniform() - 2, 0.01 + 3 * gen.uniform()};
    const double x = 8 * gen.uniform() - 4;
    const auto kp = dk::kernel_product(f, g);
    const double direct = dk::gaussian_pdf(x, f) * dk::gaussian_pdf(x, g);
    const double via = kp.scale * dk::gaussian_pdf(x, kp.product);
    CHECK(std::abs(direct - via) <= 1e-12 * std::max(direct, 1e-30));
  }
}

TEST_CASE("low order moments") {
  CHECK(dk::gaussian_moment(0, {3.0, 2.0}) == 1.0);
  CHECK(dk::gaussian_moment(2, {1.3, 0.4}) == doctest::Approx(1.3 * 1.3 + 0.4));
  CHECK(dk::gaussian_moment(3, {0.0, 5.0}) == 0.0);
  CHECK(dk::gaussian_moment(4, {0.0, 2.0}) == doctest::Approx(3 * 4.0));
}

TEST_CASE("sixth moment against Monte Carlo") {
  const Gaussian1D g{0.5, 2.0};
  dk::Xoshiro256 gen(2024);
  const int n = 10'000'000;
  double s = 0, s2 = 0;
  const double sd = std::sqrt(g.variance);
  for (int i = 0; i < n; ++i) {
    const double x = g.mean + sd * dk::standard_normal(gen);
    const double x6 = std::pow(x, 6);
    s += x6;
    s2 += x6 * x6;
  }
  const double m = s / n;
  const double se = std::sqrt((s2 / n - m * m) / n);
  CHECK(std::abs(dk::gaussian_moment(6, g) - m) < 3 * se);
}

TEST_CASE("property: binomial shift of moments") {
  dk::Xoshiro256 gen(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = static_cast<int>(gen() % 17);
    const double mu = 4 * gen.uniform() - 2, var = 0.05 + 2 * gen.uniform();
    double shifted = 0.0;
    for (int k = 0; k <= n; ++k) shifted += binom(n, k) * std::pow(mu, n - k) * dk::gaussian_moment(k, {0.0, var});
    const double direct = dk::gaussian_moment(n, {mu, var});
    CHECK(direct == doctest::Approx(shifted).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("moment order limits") {
  CHECK_THROWS_AS(dk::gaussian_moment(171, {0.0, 1.0}), dk::Error);
  CHECK_THROWS_AS(dk::gaussian_moment(-1, {0.0, 1.0}), dk::Error);
  CHECK_NOTHROW(dk::gaussian_moment(170, {0.0, 1e-3}));
}

TEST_CASE("conditional law, trivial cases") {
  const BivariateGaussian ind{1.0, -0.5, 2.0, 3.0, 0.0};
  const auto c = dk::conditional_law(ind, 17.0);
  CHECK(c.mean == -0.5);
  CHECK(c.variance == 3.0);
  const BivariateGaussian cor{1.0, -0.5, 2.0, 3.0, 0.7};
  CHECK(dk::conditional_law(cor, 1.0).mean == -0.5);
}

TEST_CASE("conditional law against binned bivariate samples") {
  const BivariateGaussian bg{0.0, 1.0, 1.0, 1.0, 0.5};
  const auto c = dk::conditional_law(bg, 2.0);
  CHECK(c.mean == doctest::Approx(2.0));
  CHECK(c.variance == doctest::Approx(0.75));
  dk::Xoshiro256 gen(77);
  std::vector<double> ps;
  for (int i = 0; i < 1'000'000; ++i) {
    const double z1 = dk::standard_normal(gen), z2 = dk::standard_normal(gen);
    const double q = z1;
    const double p = 1.0 + 0.5 * z1 + std::sqrt(0.75) * z2;
    if (std::abs(q - 2.0) < 0.05) ps.push_back(p);
  }
  REQUIRE(ps.size() > 1000);
  const double m = dk::stats::mean(ps), v = dk::stats::variance(ps);
  CHECK(std::abs(m - c.mean) < 3 * dk::stats::mean_stderr(ps));
  CHECK(std::abs(v - c.variance) < 3 * v * std::sqrt(2.0 / ps.size()));
}

TEST_CASE("conditional law marginalises back to the p law") {
  using boost::math::quadrature::gauss_kronrod;
  const BivariateGaussian bg{0.4, -1.2, 0.8, 2.5, -0.35};
  const double sq = std::sqrt(bg.var_q);
  auto weight = [&](double b) { return dk::gaussian_pdf(b, {bg.mean_q, bg.var_q}); };
  const double lo = bg.mean_q - 40 * sq, hi = bg.mean_q + 40 * sq;
  const double m1 = gauss_kronrod<double, 61>::integrate(
      [&](double b) { return dk::conditional_law(bg, b).mean * weight(b); }, lo, hi, 15, 1e-14);
  const double m2 = gauss_kronrod<double, 61>::integrate(
      [&](double b) {
        const auto c = dk::conditional_law(bg, b);
        return (c.variance + c.mean * c.mean) * weight(b);
      },
      lo, hi, 15, 1e-14);
  CHECK(std::abs(m1 - bg.mean_p) < 1e-10);
  CHECK(std::abs(m2 - (bg.var_p + bg.mean_p * bg.mean_p)) < 1e-10);
}

TEST_CASE("conditional law rejects perfect correlation") {
  try {
    dk::conditional_law({0, 0, 1, 1, 1.0}, 0.0);
    FAIL("expected throw");
  } catch (const dk::Error& e) {
    CHECK(e.kind() == dk::ErrorKind::DegenerateLaw);
  }
}
