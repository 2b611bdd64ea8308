#include "dk/spde.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <ostream>

#include "dk/error.hpp"
#include "dk/io.hpp"
#include "dk/parallel.hpp"

namespace dk {

namespace {
constexpr const char* kModule = "spde_solver";
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// FFTW planning is not thread-safe.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

int trig_order(const PeriodicTrig& v) { return v.a.empty() ? 0 : static_cast<int>(v.a.size()) - 1; }

}  // namespace

struct SpdeSolver::Fft {
  int n;
  fftw_complex* half;
  double* real;
  fftw_plan to_real;
  fftw_plan to_half;

  explicit Fft(int size) : n(size) {
    std::lock_guard lock(plan_mutex());
    half = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    real = fftw_alloc_real(static_cast<std::size_t>(n));
    to_real = fftw_plan_dft_c2r_1d(n, half, real, FFTW_ESTIMATE);
    to_half = fftw_plan_dft_r2c_1d(n, real, half, FFTW_ESTIMATE);
  }
  ~Fft() {
    std::lock_guard lock(plan_mutex());
    fftw_destroy_plan(to_real);
    fftw_destroy_plan(to_half);
    fftw_free(half);
    fftw_free(real);
  }

  // Physical values of sum_m hat_m e^{imx} (modes 0..k-1 given, rest zero) into out.
  void synthesise(const cplx* hat, int k, std::vector<double>& out) {
    const int nh = n / 2 + 1;
    for (int m = 0; m < nh; ++m) {
      const cplx c = m < k ? hat[m] : cplx{};
      half[m][0] = c.real();
      half[m][1] = c.imag();
    }
    half[0][1] = 0.0;
    fftw_execute(to_real);
    out.assign(real, real + n);
  }

  // Fourier coefficients 0..k-1 of the physical values in `values`.
  void analyse(const std::vector<double>& values, int k, std::vector<cplx>& hat) {
    std::copy(values.begin(), values.end(), real);
    fftw_execute(to_half);
    hat.resize(static_cast<std::size_t>(k));
    const double inv = 1.0 / n;
    for (int m = 0; m < k; ++m) hat[m] = {half[m][0] * inv, half[m][1] * inv};
    hat[0] = {hat[0].real(), 0.0};
  }
};

SpectralState state_from_grid(const std::vector<double>& rho, const std::vector<double>& j, int m_trunc) {
  require(rho.size() == j.size() && rho.size() > 2 * static_cast<std::size_t>(m_trunc), kModule,
          "need matching grids with more than 2 m_trunc points");
  const std::size_t n = rho.size();
  SpectralState s(m_trunc);
  for (int m = 0; m <= m_trunc; ++m) {
    cplx r{}, c{};
    for (std::size_t k = 0; k < n; ++k) {
      const cplx e = std::polar(1.0, -kTwoPi * static_cast<double>((m * k) % n) / static_cast<double>(n));
      r += rho[k] * e;
      c += j[k] * e;
    }
    s.rho_hat[m] = r / static_cast<double>(n);
    s.j_hat[m] = c / static_cast<double>(n);
  }
  s.rho_hat[0] = s.rho_hat[0].real();
  s.j_hat[0] = s.j_hat[0].real();
  return s;
}

std::vector<double> field_on_grid(const std::vector<cplx>& hat, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    double v = hat[0].real();
    for (std::size_t m = 1; m < hat.size(); ++m) {
      const cplx e = std::polar(1.0, kTwoPi * static_cast<double>((m * k) % n) / n);
      v += 2.0 * (hat[m] * e).real();
    }
    out[k] = v;
  }
  return out;
}

double w_norm(const SpectralState& s) {
  double sum = std::norm(s.rho_hat[0]) + std::norm(s.j_hat[0]);
  for (int m = 1; m <= s.m_trunc; ++m)
    sum += 2.0 * (1.0 + double(m) * m) * (std::norm(s.rho_hat[m]) + std::norm(s.j_hat[m]));
  return std::sqrt(kTwoPi * sum);
}

SpectralState difference(const SpectralState& a, const SpectralState& b) {
  require(a.m_trunc == b.m_trunc, kModule, "states have different truncations");
  SpectralState d(a.m_trunc);
  d.time = a.time;
  for (int m = 0; m <= a.m_trunc; ++m) {
    d.rho_hat[m] = a.rho_hat[m] - b.rho_hat[m];
    d.j_hat[m] = a.j_hat[m] - b.j_hat[m];
  }
  return d;
}

std::array<cplx, 4> mode_exponential(int m, double t, double gamma, double kappa) {
  require(t >= 0.0, kModule, "semigroup time must be non-negative");
  require(gamma > 0.0 && kappa >= 0.0, kModule, "semigroup needs gamma > 0, kappa >= 0");
  if (m == 0) return {1.0, 0.0, 0.0, std::exp(-gamma * t)};
  const double mm = static_cast<double>(m);
  const double disc = gamma * gamma - 4.0 * kappa * mm * mm;
  const double w2 = 0.25 * disc;
  const double e = std::exp(-0.5 * gamma * t);
  double c, s;  // e^{-gamma t/2} times cosh(wt) and sinh(wt)/w (or their trigonometric forms)
  if (std::abs(disc) < 1e-8) {
    double term_c = 1.0, term_s = t, sum_c = 0.0, sum_s = 0.0;
    for (int k = 0; k < 30; ++k) {
      sum_c += term_c;
      sum_s += term_s;
      term_c *= w2 * t * t / ((2.0 * k + 1) * (2.0 * k + 2));
      term_s *= w2 * t * t / ((2.0 * k + 2) * (2.0 * k + 3));
    }
    c = e * sum_c;
    s = e * sum_s;
  } else if (w2 > 0.0) {
    const double w = std::sqrt(w2);
    if (w * t < 1.0) {
      c = e * std::cosh(w * t);
      s = e * std::sinh(w * t) / w;
    } else {
      const double ep = std::exp((-0.5 * gamma + w) * t), em = std::exp((-0.5 * gamma - w) * t);
      c = 0.5 * (ep + em);
      s = 0.5 * (ep - em) / w;
    }
  } else {
    const double nu = std::sqrt(-w2);
    c = e * std::cos(nu * t);
    s = e * std::sin(nu * t) / nu;
  }
  const cplx im{0.0, mm};
  return {c + 0.5 * gamma * s, -im * s, -im * kappa * s, c - 0.5 * gamma * s};
}

SpectralState semigroup_apply(const SpectralState& s, double t, double gamma, double kappa) {
  SpectralState out = s;
  out.time = s.time + t;
  out.j_hat[0] = s.j_hat[0] * std::exp(-gamma * t);
  for (int m = 1; m <= s.m_trunc; ++m) {
    const auto e = mode_exponential(m, t, gamma, kappa);
    out.rho_hat[m] = e[0] * s.rho_hat[m] + e[1] * s.j_hat[m];
    out.j_hat[m] = e[2] * s.rho_hat[m] + e[3] * s.j_hat[m];
  }
  return out;
}

double h_delta(double z, double delta) {
  require(delta > 0.0, kModule, "delta must be positive");
  const double a = std::abs(z);
  if (a >= delta) return std::sqrt(a);
  const double s = std::sqrt(delta);
  const double z2 = z * z / (delta * delta);
  // a + b z^2 + c z^4 with value, slope and curvature matched at delta.
  return s * (21.0 / 32.0 + z2 * (7.0 / 16.0 - 3.0 / 32.0 * z2));
}

double h_delta_prime(double z, double delta) {
  require(delta > 0.0, kModule, "delta must be positive");
  const double a = std::abs(z);
  if (a >= delta) return (z > 0 ? 0.5 : -0.5) / std::sqrt(a);
  const double s = std::sqrt(delta);
  const double u = z / delta;
  return s / delta * (7.0 / 8.0 * u - 3.0 / 8.0 * u * u * u);
}

double h_delta_second(double z, double delta) {
  require(delta > 0.0, kModule, "delta must be positive");
  const double a = std::abs(z);
  if (a >= delta) return -0.25 / (a * std::sqrt(a));
  const double s = std::sqrt(delta);
  const double u = z / delta;
  return s / (delta * delta) * (7.0 / 8.0 - 9.0 / 8.0 * u * u);
}

double h_delta_lipschitz(double delta) { return h_delta_prime(delta * std::sqrt(7.0 / 9.0), delta); }

double noise_scale(double eps, double big_n) { return 1.0 / (std::sqrt(big_n) * std::pow(eps, 3.5)); }

int smooth_size(int n) {
  for (int k = std::max(n, 1);; ++k) {
    int r = k;
    for (int f : {2, 3, 5})
      while (r % f == 0) r /= f;
    if (r == 1) return k;
  }
}

void validate(SolverParams& p) {
  require(std::isfinite(p.gamma) && p.gamma > 0.0, kModule, "gamma must be positive");
  require(std::isfinite(p.sigma) && p.sigma >= 0.0, kModule, "sigma must be non-negative");
  require(std::isfinite(p.big_n) && p.big_n >= 1.0, kModule, "N must be at least 1");
  require(std::isfinite(p.epsilon) && p.epsilon > 0.0 && p.epsilon <= 1.0, kModule, "epsilon must lie in (0, 1]");
  require(std::isfinite(p.delta) && p.delta > 0.0, kModule, "delta must be positive");
  require(std::isfinite(p.dt) && p.dt > 0.0, kModule, "dt must be positive");
  require(p.m_trunc >= 1, kModule, "m_trunc must be at least 1");
  require(std::isfinite(p.temperature) && p.temperature > 0.0, kModule, "temperature must be positive");
  validate(Potential{p.potential});
  if (p.spectrum.lambda.empty() || p.spectrum.epsilon != p.epsilon) p.spectrum = kernel_eigenvalues(p.epsilon);
}

SpdeSolver::SpdeSolver(SolverParams params) : p_(std::move(params)) {
  validate(p_);
  noise_modes_ = p_.noise_modes < 0 ? p_.spectrum.j_max : p_.noise_modes;
  require(noise_modes_ <= p_.spectrum.j_max, kModule, "noise modes exceed the spectrum");
  const int mv = trig_order(p_.potential);
  const int needed = 2 * (p_.m_trunc + std::max(noise_modes_, mv)) + 1;
  if (p_.grid_size > 0) {
    if (p_.grid_size < needed)
      fail(ErrorKind::Configuration, kModule,
           "grid of " + std::to_string(p_.grid_size) + " points aliases; need at least " + std::to_string(needed));
    g_ = p_.grid_size;
  } else {
    g_ = smooth_size(needed);
  }
  prop_.resize(static_cast<std::size_t>(p_.m_trunc) + 1);
  for (int m = 0; m <= p_.m_trunc; ++m) prop_[m] = mode_exponential(m, p_.dt, p_.gamma, p_.temperature);
  has_drift_ = !is_zero(Potential{p_.potential});
  force_.resize(static_cast<std::size_t>(g_));
  for (int k = 0; k < g_; ++k) force_[k] = -potential_derivative(Potential{p_.potential}, kTwoPi * k / g_);
  fft_ = std::make_unique<Fft>(g_);
}

SpdeSolver::~SpdeSolver() = default;

std::vector<cplx> SpdeSolver::drift_increment(const SpectralState& s) {
  require(s.m_trunc == p_.m_trunc, kModule, "state truncation does not match the solver");
  std::vector<double> rho;
  fft_->synthesise(s.rho_hat.data(), s.m_trunc + 1, rho);
  for (int k = 0; k < g_; ++k) rho[k] *= force_[k] * p_.dt;
  std::vector<cplx> out;
  fft_->analyse(rho, s.m_trunc + 1, out);
  return out;
}

NoiseIncrement SpdeSolver::draw_noise(Xoshiro256& gen) const {
  return sample_noise_increment(p_.spectrum, noise_modes_, p_.dt, gen);
}

std::vector<cplx> SpdeSolver::noise_increment(const SpectralState& s, const NoiseIncrement& inc) {
  require(s.m_trunc == p_.m_trunc, kModule, "state truncation does not match the solver");
  require(inc.m_trunc <= noise_modes_, kModule, "noise increment has more modes than the grid resolves");
  std::vector<double> rho, w;
  fft_->synthesise(s.rho_hat.data(), s.m_trunc + 1, rho);
  std::vector<cplx> modes(static_cast<std::size_t>(inc.m_trunc) + 1);
  for (int m = 0; m <= inc.m_trunc; ++m) modes[m] = inc.mode(m);
  fft_->synthesise(modes.data(), inc.m_trunc + 1, w);
  const double scale = p_.sigma / std::sqrt(p_.big_n);
  for (int k = 0; k < g_; ++k) rho[k] = scale * h_delta(rho[k], p_.delta) * w[k];
  std::vector<cplx> out;
  fft_->analyse(rho, s.m_trunc + 1, out);
  return out;
}

void SpdeSolver::step(SpectralState& s, const NoiseIncrement* inc) {
  if (has_drift_) {
    const auto d = drift_increment(s);
    for (int m = 0; m <= s.m_trunc; ++m) s.j_hat[m] += d[m];
  }
  if (inc && p_.sigma > 0.0) {
    const auto n = noise_increment(s, *inc);
    for (int m = 0; m <= s.m_trunc; ++m) s.j_hat[m] += n[m];
  }
  // Mode 0: rho_0 is conserved exactly, j_0 decays.
  s.j_hat[0] *= prop_[0][3];
  for (int m = 1; m <= s.m_trunc; ++m) {
    const auto& e = prop_[m];
    const cplx r = s.rho_hat[m], j = s.j_hat[m];
    s.rho_hat[m] = e[0] * r + e[1] * j;
    s.j_hat[m] = e[2] * r + e[3] * j;
  }
  s.time += p_.dt;
}

void SpdeSolver::step(SpectralState& s, Xoshiro256& gen) {
  if (p_.sigma > 0.0) {
    const auto inc = draw_noise(gen);
    step(s, &inc);
  } else {
    step(s, nullptr);
  }
}

double SpdeSolver::min_density(const SpectralState& s) {
  std::vector<double> rho;
  fft_->synthesise(s.rho_hat.data(), s.m_trunc + 1, rho);
  return *std::min_element(rho.begin(), rho.end());
}

std::vector<cplx> drift_apply(const SpectralState& s, const PeriodicTrig& v, int grid_size) {
  SolverParams p;
  p.potential = v;
  p.m_trunc = s.m_trunc;
  p.dt = 1.0;
  p.epsilon = 1.0;
  p.noise_modes = 0;
  p.grid_size = grid_size;
  const int needed = 2 * (s.m_trunc + trig_order(v)) + 1;
  if (grid_size < needed)
    fail(ErrorKind::Configuration, kModule,
         "grid of " + std::to_string(grid_size) + " points aliases; need at least " + std::to_string(needed));
  SpdeSolver solver(p);
  return solver.drift_increment(s);
}

std::vector<cplx> noise_apply(const SpectralState& s, const SolverParams& params, const NoiseIncrement& inc) {
  SpdeSolver solver(params);
  return solver.noise_increment(s, inc);
}

SpectralState step_mild(const SpectralState& s, const SolverParams& params, Xoshiro256& gen) {
  SpdeSolver solver(params);
  SpectralState out = s;
  solver.step(out, gen);
  return out;
}

std::vector<SpectralState> solve_deterministic(const SpectralState& x0, double T, const SolverParams& params,
                                               int record_every) {
  require(T >= 0.0, kModule, "horizon must be non-negative");
  require(record_every >= 1, kModule, "record_every must be positive");
  SpdeSolver solver(params);
  const long steps = std::lround(T / solver.params().dt);
  std::vector<SpectralState> out{x0};
  SpectralState s = x0;
  for (long n = 1; n <= steps; ++n) {
    solver.step_deterministic(s);
    if (n % record_every == 0 || n == steps) out.push_back(s);
  }
  return out;
}

SmallNoiseResult small_noise_experiment(const SpectralState& x0, const SolverParams& params, double q, double T,
                                        std::size_t n_paths, std::uint64_t seed) {
  require(q >= 2.0, kModule, "moment order q must be at least 2");
  require(n_paths >= 2, kModule, "need at least 2 paths");
  const auto z = solve_deterministic(x0, T, params, 1);
  SmallNoiseResult r;
  r.q = q;
  r.n_paths = n_paths;
  r.wide_ci = n_paths < 30;
  r.noise_scale = noise_scale(params.epsilon, params.big_n);
  r.sup_values.assign(n_paths, 0.0);
  parallel_for(n_paths, [&](std::size_t path) {
    SpdeSolver solver(params);
    Xoshiro256 gen(derive_seed(seed, path));
    SpectralState s = x0;
    double sup = 0.0;
    for (std::size_t n = 1; n < z.size(); ++n) {
      solver.step(s, gen);
      sup = std::max(sup, w_norm(difference(s, z[n])));
    }
    r.sup_values[path] = std::pow(sup, q);
  });
  r.mean = stats::mean_estimate(r.sup_values);
  return r;
}

PositivityResult positivity_probability(const SpectralState& x0, const SolverParams& params, double T,
                                        std::size_t n_paths, std::uint64_t seed) {
  require(n_paths >= 1, kModule, "need at least 1 path");
  std::vector<char> hit(n_paths, 0);
  parallel_for(n_paths, [&](std::size_t path) {
    SpdeSolver solver(params);
    const long steps = std::lround(T / solver.params().dt);
    Xoshiro256 gen(derive_seed(seed, path));
    SpectralState s = x0;
    const double delta = solver.params().delta;
    if (solver.min_density(s) < delta) {
      hit[path] = 1;
      return;
    }
    for (long n = 1; n <= steps; ++n) {
      solver.step(s, gen);
      if (solver.min_density(s) < delta) {
        hit[path] = 1;
        return;
      }
    }
  });
  PositivityResult r;
  r.n_paths = n_paths;
  r.exceed = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
  r.fraction = static_cast<double>(r.exceed) / static_cast<double>(n_paths);
  r.wilson = stats::wilson_interval(r.exceed, n_paths);
  return r;
}

void write_state_rows(std::ostream& os, const SpectralState& s, int n) {
  const auto rho = field_on_grid(s.rho_hat, n);
  const auto j = field_on_grid(s.j_hat, n);
  const std::string t = format_double(s.time);
  for (int k = 0; k < n; ++k)
    os << t << ',' << format_double(kTwoPi * k / n) << ',' << format_double(rho[k]) << ',' << format_double(j[k]) << '\n';
}

}  // namespace dk
