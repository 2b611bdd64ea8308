#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "dk/error.hpp"
#include "dk/spde.hpp"
#include "oracles.hpp"

using namespace dk;

namespace {

constexpr double kPi = std::numbers::pi;

using Mat = oracle::Mat2;

double mode_energy(const SpectralState& s, double kappa) {
  double e = 0.0;
  for (int m = 1; m <= s.m_trunc; ++m) e += kappa * std::norm(s.rho_hat[m]) + std::norm(s.j_hat[m]);
  return e;
}

SpectralState random_state(int m_trunc, std::uint64_t seed, double mean_rho = 1.0) {
  Xoshiro256 gen(seed);
  SpectralState s(m_trunc);
  s.rho_hat[0] = mean_rho;
  for (int m = 1; m <= m_trunc; ++m) {
    const double decay = 0.3 / (m * m);
    s.rho_hat[m] = {decay * standard_normal(gen), decay * standard_normal(gen)};
    s.j_hat[m] = {decay * standard_normal(gen), decay * standard_normal(gen)};
  }
  return s;
}

// Fourier coefficients of -V' for a trig potential, indices -K..K.
std::vector<cplx> force_coeffs(const PeriodicTrig& v) {
  const int k = static_cast<int>(v.a.size()) - 1;
  std::vector<cplx> f(2 * k + 1);
  for (int m = 1; m <= k; ++m) {
    const cplx c = double(m) * cplx{-0.5 * v.b[m], -0.5 * v.a[m]};
    f[k + m] = c;
    f[k - m] = std::conj(c);
  }
  return f;
}

cplx hat_at(const std::vector<cplx>& hat, int m) {
  const int mm = std::abs(m);
  if (mm >= static_cast<int>(hat.size())) return {};
  return m >= 0 ? hat[mm] : std::conj(hat[mm]);
}

// Fourier-side right-hand side of the deterministic system with trig potential.
void rhs(const SpectralState& s, const std::vector<cplx>& f, double gamma, double kappa, std::vector<cplx>& dr,
         std::vector<cplx>& dj) {
  const int k = (static_cast<int>(f.size()) - 1) / 2;
  dr.assign(s.m_trunc + 1, {});
  dj.assign(s.m_trunc + 1, {});
  for (int m = 0; m <= s.m_trunc; ++m) {
    const cplx im{0.0, double(m)};
    cplx conv{};
    for (int l = -k; l <= k; ++l) conv += f[k + l] * hat_at(s.rho_hat, m - l);
    dr[m] = -im * s.j_hat[m];
    dj[m] = -im * kappa * s.rho_hat[m] - gamma * s.j_hat[m] + conv;
  }
}

}  // namespace

TEST_CASE("mode exponential matches RK4 in all damping regimes") {
  struct Case {
    int m;
    double gamma, kappa, t;
  };
  for (const Case c : {Case{3, 1.0, 1.0, 0.7}, Case{1, 5.0, 1.0, 1.3}, Case{1, 2.0, 1.0, 0.9}, Case{2, 4.0, 1.0, 2.0},
                       Case{7, 0.3, 2.0, 0.4}, Case{1, 2.0 + 1e-9, 1.0, 1.0}}) {
    const auto exact = mode_exponential(c.m, c.t, c.gamma, c.kappa);
    const auto ref = oracle::rk4_exponential(c.m, c.t, c.gamma, c.kappa, 20000);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(exact[k] - ref[k]) < 1e-9);
  }
}

TEST_CASE("mode exponential is a semigroup") {
  for (int m : {0, 1, 4}) {
    const auto a = mode_exponential(m, 0.3, 1.0, 1.0), b = mode_exponential(m, 0.5, 1.0, 1.0);
    const auto ab = mode_exponential(m, 0.8, 1.0, 1.0);
    const Mat prod{a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
                   a[2] * b[1] + a[3] * b[3]};
    for (int k = 0; k < 4; ++k) CHECK(std::abs(prod[k] - ab[k]) < 1e-13);
  }
  const auto id = mode_exponential(5, 0.0, 1.0, 1.0);
  CHECK(std::abs(id[0] - 1.0) < 1e-15);
  CHECK(std::abs(id[1]) < 1e-15);
  CHECK_THROWS_AS(mode_exponential(1, -1.0, 1.0), Error);
}

TEST_CASE("free evolution dissipates energy and conserves mass") {
  SpectralState s = random_state(24, 11);
  double e = mode_energy(s, 1.0);
  for (int n = 0; n < 50; ++n) {
    const SpectralState next = semigroup_apply(s, 0.05, 1.0, 1.0);
    const double en = mode_energy(next, 1.0);
    CHECK(en <= e * (1 + 1e-14));
    CHECK(next.rho_hat[0] == s.rho_hat[0]);
    e = en;
    s = next;
  }
  CHECK(e < 0.5 * mode_energy(random_state(24, 11), 1.0));
}

TEST_CASE("W norm of cos(2x)") {
  SpectralState s(8);
  s.rho_hat[2] = 0.5;
  // ||cos 2x||_{H1}^2 = pi + 4 pi.
  CHECK(w_norm(s) == doctest::Approx(std::sqrt(5 * kPi)).epsilon(1e-14));
  const std::vector<double> rho = field_on_grid(s.rho_hat, 64);
  for (int k = 0; k < 64; ++k) CHECK(std::abs(rho[k] - std::cos(2 * 2 * kPi * k / 64)) < 1e-13);
  const SpectralState back = state_from_grid(rho, std::vector<double>(64, 0.0), 8);
  for (int m = 0; m <= 8; ++m) CHECK(std::abs(back.rho_hat[m] - s.rho_hat[m]) < 1e-14);
}

TEST_CASE("h_delta is C2, positive and Lipschitz") {
  for (double delta : {1e-3, 0.1, 2.0}) {
    const double s = std::sqrt(delta);
    const double lo = delta * (1 - 1e-12), hi = delta * (1 + 1e-12);
    CHECK(h_delta(lo, delta) == doctest::Approx(s).epsilon(1e-10));
    CHECK(h_delta_prime(lo, delta) == doctest::Approx(0.5 / s).epsilon(1e-10));
    CHECK(h_delta_second(lo, delta) == doctest::Approx(-0.25 / (delta * s)).epsilon(1e-10));
    CHECK(h_delta(hi, delta) == doctest::Approx(s).epsilon(1e-10));
    CHECK(h_delta(-0.3 * delta, delta) == h_delta(0.3 * delta, delta));
    CHECK(h_delta(0.0, delta) == doctest::Approx(21.0 / 32.0 * s));
    double max_slope = 0.0, min_value = 1e300;
    for (int k = -4000; k <= 4000; ++k) {
      const double z = 2.0 * delta * k / 4000.0;
      min_value = std::min(min_value, h_delta(z, delta));
      if (k < 4000) {
        const double z2 = 2.0 * delta * (k + 1) / 4000.0;
        max_slope = std::max(max_slope, std::abs(h_delta(z2, delta) - h_delta(z, delta)) / (z2 - z));
      }
      // Finite-difference consistency of the derivatives away from the seam.
      if (std::abs(std::abs(z) - delta) > 1e-3 * delta && std::abs(z) > 0) {
        const double e = 1e-6 * delta;
        CHECK(h_delta_prime(z, delta) ==
              doctest::Approx((h_delta(z + e, delta) - h_delta(z - e, delta)) / (2 * e)).epsilon(1e-6));
      }
    }
    CHECK(min_value > 0.0);
    CHECK(max_slope <= h_delta_lipschitz(delta) * (1 + 1e-9));
    CHECK(max_slope >= h_delta_lipschitz(delta) * (1 - 1e-4));
  }
  CHECK_THROWS_AS(h_delta(1.0, 0.0), Error);
}

TEST_CASE("drift of cos potential") {
  SpectralState s(6);
  s.rho_hat[0] = 1.0;
  s.rho_hat[1] = 0.25;  // rho = 1 + 0.5 cos x
  const PeriodicTrig v{{0.0, 1.0}, {0.0, 0.0}};
  // -V' rho = sin x + 0.25 sin 2x.
  const auto d = drift_apply(s, v, 32);
  CHECK(std::abs(d[0]) < 1e-15);
  CHECK(std::abs(d[1] - cplx{0.0, -0.5}) < 1e-15);
  CHECK(std::abs(d[2] - cplx{0.0, -0.125}) < 1e-15);
  for (int m = 3; m <= 6; ++m) CHECK(std::abs(d[m]) < 1e-15);
  CHECK_THROWS_AS(drift_apply(s, v, 10), Error);
}

TEST_CASE("drift matches direct convolution") {
  const PeriodicTrig v{{0.4, 0.7, -0.2, 0.1}, {0.0, 0.3, 0.5, -0.25}};
  const SpectralState s = random_state(20, 5);
  const auto f = force_coeffs(v);
  const auto d = drift_apply(s, v, smooth_size(2 * (20 + 3) + 1));
  for (int m = 0; m <= 20; ++m) {
    cplx conv{};
    for (int l = -3; l <= 3; ++l) conv += f[3 + l] * hat_at(s.rho_hat, m - l);
    // Modes above the truncation are dropped by the projection.
    CHECK(std::abs(d[m] - conv) < 1e-14);
  }
}

TEST_CASE("noise increment is the projected product h(rho) W") {
  SolverParams p;
  p.epsilon = 0.5;
  p.m_trunc = 10;
  p.big_n = 4.0;
  p.delta = 0.2;
  SpdeSolver solver(p);
  SpectralState s(10);
  s.rho_hat[0] = 1.0;
  s.rho_hat[1] = 0.2;  // rho >= 0.4 > delta; inside the blend h is only C2 and the product aliases at ~1e-8
  s.rho_hat[3] = cplx{0.0, 0.1};
  const int n = 4096;
  const auto rho = field_on_grid(s.rho_hat, n);
  const double scale = p.sigma / std::sqrt(p.big_n);
  const int jm = solver.noise_modes();
  for (int j : {-jm, -3, 0, 2, 7, jm}) {
    NoiseIncrement inc;
    inc.m_trunc = jm;
    inc.coeffs.assign(2 * jm + 1, 0.0);
    inc.coeffs[j + jm] = 1.0;
    const auto out = solver.noise_increment(s, inc);
    for (int m = 0; m <= 10; ++m) {
      cplx q{};
      for (int k = 0; k < n; ++k) {
        const double x = 2 * kPi * k / n;
        const double e = j == 0 ? 1 / std::sqrt(2 * kPi)
                                : (j > 0 ? std::cos(j * x) : std::sin(-j * x)) / std::sqrt(kPi);
        q += scale * h_delta(rho[k], p.delta) * e * std::polar(1.0, -m * x);
      }
      q /= double(n);
      CHECK_MESSAGE(std::abs(out[m] - q) < 1e-9, "j=" << j << " m=" << m);
    }
  }
}

TEST_CASE("noise increment covariance for a frozen field") {
  SolverParams p;
  p.epsilon = 0.6;
  p.m_trunc = 6;
  p.dt = 0.01;
  p.delta = 0.1;
  SpdeSolver solver(p);
  SpectralState s(6);
  s.rho_hat[0] = 1.0;
  s.rho_hat[2] = 0.2;
  const int n = 2048;
  const auto rho = field_on_grid(s.rho_hat, n);
  const int jm = solver.noise_modes();
  // Var Re N_1 = sum_j lambda_j dt (Re g_j)^2, g_j the mode-1 coefficient of sigma h(rho) e_j.
  double var = 0.0;
  for (int j = -jm; j <= jm; ++j) {
    double g = 0.0;
    for (int k = 0; k < n; ++k) {
      const double x = 2 * kPi * k / n;
      const double e = j == 0 ? 1 / std::sqrt(2 * kPi) : (j > 0 ? std::cos(j * x) : std::sin(-j * x)) / std::sqrt(kPi);
      g += p.sigma * h_delta(rho[k], p.delta) * e * std::cos(x);
    }
    g /= n;
    var += solver.params().spectrum.lambda[std::abs(j)] * p.dt * g * g;
  }
  SpdeSolver fresh(p);
  Xoshiro256 gen(99);
  const int samples = 20000;
  std::vector<double> re(samples);
  for (int i = 0; i < samples; ++i) re[i] = fresh.noise_increment(s, fresh.draw_noise(gen))[1].real();
  const auto est = stats::variance_estimate(re);
  CHECK(std::abs(est.value - var) < 4 * est.se);
  CHECK(std::abs(stats::mean(re)) < 4 * std::sqrt(var / samples));
}

TEST_CASE("constant field: noise covariance is the smoothing kernel") {
  SolverParams p;
  p.epsilon = 0.6;
  p.dt = 0.01;
  p.big_n = 3.0;
  p.m_trunc = kernel_eigenvalues(0.6).j_max;  // no projection loss
  SpdeSolver solver(p);
  const double c = 0.8;
  SpectralState s(p.m_trunc);
  s.rho_hat[0] = c;
  Xoshiro256 gen(5);
  const double xs[3] = {0.0, 0.4, 2.0};
  const int samples = 10000;
  std::vector<std::vector<double>> v(3, std::vector<double>(samples));
  for (int i = 0; i < samples; ++i) {
    const auto inc = solver.noise_increment(s, solver.draw_noise(gen));
    for (int a = 0; a < 3; ++a) {
      double f = inc[0].real();
      for (int m = 1; m <= p.m_trunc; ++m) f += 2.0 * (inc[m] * std::polar(1.0, m * xs[a])).real();
      v[a][i] = f;
    }
  }
  const double pre = p.sigma * p.sigma / p.big_n * c * p.dt;
  for (int a = 0; a < 3; ++a) {
    const auto est = stats::covariance(v[0], v[a]);
    const double expected = pre * von_mises_kernel(xs[a] - xs[0], p.epsilon);
    CHECK(std::abs(est.value - expected) < 4 * est.se);
  }
}

TEST_CASE("stochastic steps keep the mass bit-constant") {
  SolverParams p;
  p.epsilon = 0.3;
  p.m_trunc = 32;
  p.big_n = 100.0;
  p.potential = {{0.0, 0.5}, {0.0, 0.2}};
  SpdeSolver solver(p);
  SpectralState s = random_state(32, 3);
  const cplx mass = s.rho_hat[0];
  Xoshiro256 gen(1);
  for (int n = 0; n < 200; ++n) solver.step(s, gen);
  CHECK(s.rho_hat[0] == mass);
  CHECK(s.time == doctest::Approx(0.2));
}

TEST_CASE("zero noise and zero potential reduce to the semigroup") {
  SolverParams p;
  p.sigma = 0.0;
  p.m_trunc = 16;
  p.dt = 0.01;
  const SpectralState x0 = random_state(16, 8);
  const auto path = solve_deterministic(x0, 0.5, p);
  REQUIRE(path.size() == 51);
  const SpectralState ref = semigroup_apply(x0, 0.5, p.gamma, p.temperature);
  CHECK(w_norm(difference(path.back(), ref)) < 1e-13);
}

TEST_CASE("constant density is stationary") {
  SolverParams p;
  p.sigma = 0.0;
  p.m_trunc = 16;
  p.dt = 0.01;
  SpectralState x0(16);
  x0.rho_hat[0] = 0.7;
  const auto path = solve_deterministic(x0, 1.0, p, 10);
  for (const auto& z : path) {
    CHECK(z.rho_hat == x0.rho_hat);
    CHECK(z.j_hat == x0.j_hat);
  }
}

TEST_CASE("Gibbs density balances the generator") {
  // A X + drift(X) = 0 for rho = exp(-V / T), j = 0; the scheme keeps it up to O(dt).
  const PeriodicTrig v{{0.0, 0.8}, {0.0, 0.0}};
  const int n = 256;
  std::vector<double> rho(n);
  for (int k = 0; k < n; ++k) rho[k] = std::exp(-0.8 * std::cos(2 * kPi * k / n));
  const SpectralState x = state_from_grid(rho, std::vector<double>(n, 0.0), 32);
  const auto d = drift_apply(x, v, smooth_size(2 * 33 + 1));
  for (int m = 0; m <= 32; ++m) CHECK(std::abs(cplx{0.0, -double(m)} * x.rho_hat[m] + d[m]) < 1e-14);
  SolverParams p;
  p.sigma = 0.0;
  p.m_trunc = 32;
  p.potential = v;
  double err[2];
  for (int i = 0; i < 2; ++i) {
    p.dt = i == 0 ? 0.01 : 0.005;
    err[i] = w_norm(difference(solve_deterministic(x, 2.0, p, 1000).back(), x));
  }
  CHECK(err[0] / err[1] == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("W norm of the fluctuation decays along the free flow") {
  SolverParams p;
  p.sigma = 0.0;
  p.m_trunc = 24;
  p.dt = 0.01;
  const auto path = solve_deterministic(random_state(24, 12), 1.0, p);
  double prev = 1e300;
  for (auto z : path) {
    z.rho_hat[0] = 0.0;
    const double w = w_norm(z);
    CHECK(w <= prev + 1e-10);
    prev = w;
  }
}

TEST_CASE("deterministic solve converges to a pseudo-spectral RK4 reference") {
  SolverParams p;
  p.sigma = 0.0;
  p.m_trunc = 16;
  p.dt = 1e-5;
  p.potential = {{0.0, 0.1}, {0.0, 0.0}};
  const double T = 1.0;
  SpectralState x0(16);
  x0.rho_hat[0] = 1.0;
  x0.rho_hat[1] = 0.05;
  const auto f = force_coeffs(p.potential);
  SpectralState y = x0;
  const double h = 1e-4;
  std::vector<cplx> r1, j1, r2, j2, r3, j3, r4, j4;
  auto shifted = [](const SpectralState& s, const std::vector<cplx>& dr, const std::vector<cplx>& dj, double c) {
    SpectralState t = s;
    for (int m = 0; m <= s.m_trunc; ++m) {
      t.rho_hat[m] += c * dr[m];
      t.j_hat[m] += c * dj[m];
    }
    return t;
  };
  for (int n = 0; n < std::lround(T / h); ++n) {
    rhs(y, f, p.gamma, p.temperature, r1, j1);
    rhs(shifted(y, r1, j1, h / 2), f, p.gamma, p.temperature, r2, j2);
    rhs(shifted(y, r2, j2, h / 2), f, p.gamma, p.temperature, r3, j3);
    rhs(shifted(y, r3, j3, h), f, p.gamma, p.temperature, r4, j4);
    for (int m = 0; m <= y.m_trunc; ++m) {
      y.rho_hat[m] += h / 6 * (r1[m] + 2.0 * r2[m] + 2.0 * r3[m] + r4[m]);
      y.j_hat[m] += h / 6 * (j1[m] + 2.0 * j2[m] + 2.0 * j3[m] + j4[m]);
    }
  }
  const auto path = solve_deterministic(x0, T, p, 1000);
  const auto a = field_on_grid(path.back().rho_hat, 128), b = field_on_grid(y.rho_hat, 128);
  const auto ja = field_on_grid(path.back().j_hat, 128), jb = field_on_grid(y.j_hat, 128);
  double err = 0.0;
  for (int k = 0; k < 128; ++k) err = std::max({err, std::abs(a[k] - b[k]), std::abs(ja[k] - jb[k])});
  MESSAGE("exponential Euler vs RK4: " << err);
  CHECK(err < 1e-6);
}

TEST_CASE("strong convergence order with shared noise") {
  SolverParams base;
  base.epsilon = 0.5;
  base.m_trunc = 12;
  base.big_n = 50.0;
  base.delta = 0.05;
  base.potential = {{0.0, 0.5}, {0.0, 0.0}};
  const double T = 0.25;
  const int fine_steps = 512;  // reference step T / 512
  const std::vector<int> ratios{64, 16, 4};
  const int paths = 24;
  std::vector<std::vector<double>> err(ratios.size(), std::vector<double>(paths));
  const SpectralState x0 = random_state(12, 4, 1.0);
  for (int path = 0; path < paths; ++path) {
    SolverParams fine = base;
    fine.dt = T / fine_steps;
    SpdeSolver fs(fine);
    Xoshiro256 gen(derive_seed(7, path));
    std::vector<NoiseIncrement> incs;
    for (int n = 0; n < fine_steps; ++n) incs.push_back(fs.draw_noise(gen));
    std::vector<SpectralState> ref{x0};
    for (const auto& inc : incs) {
      ref.push_back(ref.back());
      fs.step(ref.back(), &inc);
    }
    for (std::size_t r = 0; r < ratios.size(); ++r) {
      SolverParams coarse = base;
      coarse.dt = T / (fine_steps / ratios[r]);
      SpdeSolver cs(coarse);
      SpectralState s = x0;
      double sup = 0.0;
      for (int n = 0; n < fine_steps / ratios[r]; ++n) {
        NoiseIncrement sum = incs[n * ratios[r]];
        sum.dt = coarse.dt;
        for (int k = 1; k < ratios[r]; ++k)
          for (std::size_t c = 0; c < sum.coeffs.size(); ++c) sum.coeffs[c] += incs[n * ratios[r] + k].coeffs[c];
        cs.step(s, &sum);
        sup = std::max(sup, w_norm(difference(s, ref[(n + 1) * ratios[r]])));
      }
      err[r][path] = sup * sup;
    }
  }
  std::vector<double> lx, ly;
  for (std::size_t r = 0; r < ratios.size(); ++r) {
    lx.push_back(std::log(double(ratios[r])));
    ly.push_back(0.5 * std::log(stats::mean(err[r])));
  }
  const auto fit = stats::linear_fit(lx, ly);
  MESSAGE("strong order " << fit.slope);
  CHECK(fit.slope >= 0.5);
}

TEST_CASE("small-noise and positivity experiments in degenerate cases") {
  SolverParams p;
  p.sigma = 0.0;
  p.m_trunc = 8;
  p.dt = 0.01;
  p.epsilon = 0.5;
  const SpectralState x0 = random_state(8, 2, 2.0);
  const auto r = small_noise_experiment(x0, p, 2.0, 0.2, 4, 1);
  CHECK(r.wide_ci);
  for (double v : r.sup_values) CHECK(v == 0.0);
  CHECK(r.noise_scale == doctest::Approx(1.0 / std::pow(0.5, 3.5)));
  const auto pos = positivity_probability(x0, p, 0.2, 10, 1);
  CHECK(pos.exceed == 0);
  CHECK(pos.wilson.lower == 0.0);
  p.delta = 10.0;
  CHECK(positivity_probability(x0, p, 0.2, 10, 1).exceed == 10);
}

TEST_CASE("doubling N halves the squared deviation") {
  SolverParams p;
  p.m_trunc = 8;
  p.dt = 0.01;
  p.epsilon = 0.5;
  SpectralState x0(8);
  x0.rho_hat[0] = 1.0;
  x0.rho_hat[1] = 0.1;
  p.big_n = 1e5;
  const auto a = small_noise_experiment(x0, p, 2.0, 0.5, 40, 17);
  p.big_n = 2e5;
  const auto b = small_noise_experiment(x0, p, 2.0, 0.5, 40, 17);
  CHECK(a.mean.value / b.mean.value == doctest::Approx(2.0).epsilon(0.05));
  CHECK_FALSE(a.wide_ci);
}

TEST_CASE("experiments are independent of the thread count") {
  SolverParams p;
  p.m_trunc = 8;
  p.dt = 0.01;
  p.epsilon = 0.5;
  p.big_n = 20.0;
  const SpectralState x0 = random_state(8, 2, 1.0);
  setenv("DK_THREADS", "1", 1);
  const auto a = small_noise_experiment(x0, p, 2.0, 0.1, 6, 3);
  setenv("DK_THREADS", "3", 1);
  const auto b = small_noise_experiment(x0, p, 2.0, 0.1, 6, 3);
  unsetenv("DK_THREADS");
  CHECK(a.sup_values == b.sup_values);
  CHECK(a.mean.value > 0.0);
}

TEST_CASE("state rows and parameter validation") {
  SpectralState s(2);
  s.rho_hat[0] = 1.0;
  std::ostringstream os;
  write_state_rows(os, s, 4);
  CHECK(os.str().substr(0, 8) == "0,0,1,0\n");
  SolverParams p;
  p.dt = 0.0;
  CHECK_THROWS_AS(SpdeSolver{p}, Error);
  p = SolverParams{};
  p.epsilon = 0.5;
  p.m_trunc = 4;
  p.grid_size = 12;
  CHECK_THROWS_AS(SpdeSolver{p}, Error);
  CHECK(smooth_size(97) == 100);
  CHECK(smooth_size(1) == 1);
}
