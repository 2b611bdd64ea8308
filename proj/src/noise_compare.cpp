#include "dk/noise_compare.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "dk/error.hpp"
#include "dk/fields.hpp"
#include "dk/io.hpp"
#include "dk/parallel.hpp"
#include "dk/rng.hpp"

namespace dk {

namespace {
constexpr const char* kModule = "noise_compare";
constexpr double kCutoff = 8.0;  // kernel support in units of eps

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

// Draws (q, p) from the configured initial law.
void init_particle(const CompareConfig& c, Xoshiro256& gen, double& q, double& p) {
  const double z1 = standard_normal(gen), z2 = standard_normal(gen);
  q = c.position_law.mean + std::sqrt(c.position_law.variance) * z1;
  p = c.momentum_law.mean +
      std::sqrt(c.momentum_law.variance) * (c.corr * z1 + std::sqrt(1.0 - c.corr * c.corr) * z2);
}

// Single-particle stepping: exact OU transitions for V = 0, Euler-Maruyama otherwise.
class Mover {
 public:
  Mover(const CompareConfig& c, double dt)
      : params_(c.langevin), exact_(is_zero(c.langevin.potential)), dt_(dt), sqrt_dt_(std::sqrt(dt)) {
    if (exact_) tr_ = ou_transition(params_.gamma, params_.sigma, dt);
  }

  // One step; writes the Brownian increment to *db when db is non-null.
  void step(double& q, double& p, Xoshiro256& gen, double* db) const {
    if (exact_) {
      ou_update(tr_, q, p, gen, db);
      return;
    }
    const double b = sqrt_dt_ * standard_normal(gen);
    em_update(q, p, b, dt_, params_.gamma, params_.sigma, potential_derivative(params_.potential, q));
    if (db) *db = b;
  }

 private:
  LangevinParams params_;
  bool exact_;
  double dt_, sqrt_dt_;
  OuTransition tr_;
};

// Advances a particle over a time gap: one exact jump for OU, EM sub-steps otherwise.
struct GapMover {
  Mover mover;
  int substeps;
};

std::vector<GapMover> gap_movers(const CompareConfig& c, const std::vector<double>& times) {
  std::vector<GapMover> out;
  const bool exact = is_zero(c.langevin.potential);
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double gap = times[k] - times[k - 1];
    const int n = exact ? 1 : std::max(1, static_cast<int>(std::lround(gap * c.steps_per_unit)));
    out.push_back({Mover(c, gap / n), n});
  }
  return out;
}

// w_eps(x_a - q) for all points. Narrow equispaced point sets use a lattice
// recursion (two exps) and also give the half-lattice row w_{eps/sqrt2}(mid_m - q),
// mid_m = x_0 + m h / 2, from which every pair product follows:
// w_eps(x_a - q) w_eps(x_b - q) = w_{sqrt2 eps}(x_a - x_b) w_{eps/sqrt2}(mid_{a+b} - q).
class KernelRow {
 public:
  KernelRow(const std::vector<double>& x, double eps) : x_(x), eps_(eps) {
    norm_ = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * eps);
    inv2v_ = 0.5 / (eps * eps);
    const std::size_t n = x.size();
    if (n >= 3) {
      const double h = (x.back() - x.front()) / static_cast<double>(n - 1);
      bool equi = h != 0.0 && std::abs(x.back() - x.front()) <= 6.0 * eps;
      for (std::size_t a = 0; equi && a < n; ++a)
        equi = std::abs(x[a] - (x.front() + h * static_cast<double>(a))) <= 1e-12 * (1.0 + std::abs(x[a]));
      if (equi) {
        h_ = h;
        lattice_.resize(n);
        for (std::size_t a = 0; a < n; ++a) lattice_[a] = std::exp(-inv2v_ * h * h * double(a) * double(a));
        half_.resize(2 * n - 1);
        for (std::size_t m = 0; m < half_.size(); ++m)
          half_[m] = std::sqrt(2.0) * norm_ * std::exp(-0.5 * inv2v_ * h * h * double(m) * double(m));
      }
    }
  }

  bool lattice() const { return !lattice_.empty(); }
  std::size_t mids() const { return half_.size(); }

  void operator()(double q, double* w, double* mid = nullptr) const {
    const std::size_t n = x_.size();
    if (!lattice_.empty()) {
      const double u = x_.front() - q;
      const double g = std::exp(-inv2v_ * u * u);
      const double r = std::exp(-2.0 * inv2v_ * h_ * u);
      const double base = norm_ * g;
      double rp = 1.0;
      for (std::size_t a = 0; a < n; ++a) {
        w[a] = base * rp * lattice_[a];
        rp *= r;
      }
      if (mid) {
        const double g2 = g * g;
        rp = 1.0;
        for (std::size_t m = 0; m < half_.size(); ++m) {
          mid[m] = g2 * rp * half_[m];
          rp *= r;
        }
      }
      return;
    }
    for (std::size_t a = 0; a < n; ++a) {
      const double u = x_[a] - q;
      w[a] = std::abs(u) > kCutoff * eps_ ? 0.0 : norm_ * std::exp(-inv2v_ * u * u);
    }
  }

 private:
  std::vector<double> x_;
  double eps_, norm_, inv2v_, h_ = 0.0;
  std::vector<double> lattice_, half_;
};

// White-noise cells for Y around the evaluation points; K[a][c] = w_eps(x_a - y_c) dx.
struct NoiseCells {
  double dx = 0.0;
  std::size_t n = 0;
  std::vector<double> k;

  NoiseCells(const std::vector<double>& x, double eps, double lo, double hi, double width) {
    dx = width > 0.0 ? width : eps / 8.0;
    n = static_cast<std::size_t>(std::ceil((hi - lo) / dx));
    k.resize(x.size() * n);
    for (std::size_t a = 0; a < x.size(); ++a)
      for (std::size_t c = 0; c < n; ++c) k[a * n + c] = gauss_kernel(x[a] - (lo + (c + 0.5) * dx), eps) * dx;
  }

  // Left-point Ito sum of scale * sqrt(rho(k, a)) (w_eps * dxi_k)(x_a), added into y.
  template <class Rho>
  void ito_sum(Xoshiro256& gen, std::size_t steps, double dt, double scale, std::size_t np, Rho&& rho,
               double* y) const {
    std::vector<double> xi(n);
    const double cell_sd = std::sqrt(dt / dx);
    for (std::size_t s = 0; s < steps; ++s) {
      for (auto& v : xi) v = cell_sd * standard_normal(gen);
      for (std::size_t a = 0; a < np; ++a) {
        const double* ka = &k[a * n];
        double conv = 0.0;
        for (std::size_t c = 0; c < n; ++c) conv += ka[c] * xi[c];
        y[a] += scale * std::sqrt(rho(s, a)) * conv;
      }
    }
  }
};

std::vector<double> column(const std::vector<double>& m, std::size_t stride, std::size_t k, std::size_t rows) {
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = m[r * stride + k];
  return out;
}

// Mean of per-path values v with its standard error.
stats::Estimate paired(const std::vector<double>& v, double value) { return {value, stats::mean_stderr(v)}; }

}  // namespace

void validate(const CompareConfig& c) {
  require(std::isfinite(c.epsilon) && c.epsilon > 0.0, kModule, "epsilon must be positive");
  require(std::isfinite(c.theta) && c.theta > 0.0, kModule, "theta must be positive");
  validate(c.langevin);
  require(std::isfinite(c.position_law.mean) && finite_nonneg(c.position_law.variance), kModule,
          "position law needs finite mean and non-negative variance");
  require(std::isfinite(c.momentum_law.mean) && finite_nonneg(c.momentum_law.variance), kModule,
          "momentum law needs finite mean and non-negative variance");
  require(std::isfinite(c.corr) && std::abs(c.corr) <= 1.0, kModule, "|corr| must be <= 1");
  require(c.steps_per_unit >= 1, kModule, "steps_per_unit must be positive");
  require(finite_nonneg(c.cell_width), kModule, "cell_width must be non-negative");
  if (!std::holds_alternative<ZeroPotential>(c.langevin.potential))
    require(!std::holds_alternative<PeriodicTrig>(c.langevin.potential), kModule,
            "noise comparison runs on the line; periodic potentials are not supported");
}

std::size_t particle_count(const CompareConfig& c) {
  if (c.big_n > 0) return c.big_n;
  const double n = std::round(std::pow(c.epsilon, -c.theta));
  require(n >= 1.0 && n < 1e9, kModule, "eps^-theta gives an unusable particle count");
  return static_cast<std::size_t>(n);
}

std::size_t JointSamples::pair_index(int a, int b) const {
  if (a > b) std::swap(a, b);
  const std::size_t p = x.size();
  return static_cast<std::size_t>(a) * (2 * p - a + 1) / 2 + static_cast<std::size_t>(b - a);
}

JointSamples simulate_joint(const CompareConfig& c, const std::vector<double>& x, double t, std::size_t n_paths) {
  validate(c);
  require(!x.empty(), kModule, "need at least one evaluation point");
  for (double v : x) require(std::isfinite(v), kModule, "evaluation points must be finite");
  require(std::isfinite(t) && t >= 0.0, kModule, "time must be non-negative");
  require(n_paths >= 2, kModule, "need at least 2 paths");

  JointSamples s;
  s.x = x;
  s.t = t;
  s.n_paths = n_paths;
  s.big_n = particle_count(c);
  s.steps = static_cast<std::size_t>(std::lround(t * c.steps_per_unit));
  if (t > 0.0) s.steps = std::max<std::size_t>(s.steps, 1);
  s.dt = s.steps ? t / static_cast<double>(s.steps) : 0.0;
  const double sigma = c.langevin.sigma;
  const double nn = static_cast<double>(s.big_n);
  s.prefactor = sigma * sigma / nn;

  const std::size_t np = x.size();
  for (std::size_t a = 0; a < np; ++a)
    for (std::size_t b = a; b < np; ++b) s.pairs.emplace_back(int(a), int(b));
  const std::size_t npairs = s.pairs.size();

  const double eps = c.epsilon;
  const double lo = *std::min_element(x.begin(), x.end()) - kCutoff * eps;
  const double hi = *std::max_element(x.begin(), x.end()) + kCutoff * eps;

  const NoiseCells cells(x, eps, lo, hi, c.cell_width);
  s.c_grid.assign(npairs, 0.0);
  for (std::size_t k = 0; k < npairs; ++k) {
    const auto [a, b] = s.pairs[k];
    double sum = 0.0;
    for (std::size_t j = 0; j < cells.n; ++j) sum += cells.k[a * cells.n + j] * cells.k[b * cells.n + j];
    s.c_grid[k] = sum / cells.dx;
  }

  s.z.assign(n_paths * np, 0.0);
  s.y.assign(n_paths * np, 0.0);
  s.gz.assign(n_paths * npairs, 0.0);
  s.fy.assign(n_paths * npairs, 0.0);
  const Mover mover(c, s.dt > 0.0 ? s.dt : 1.0);
  const KernelRow row(x, eps);
  const double w0 = gauss_kernel(0.0, std::sqrt(2.0) * eps);  // w_eps^2 = w_{sqrt2 eps}(0) w_{eps/sqrt2}
  const std::size_t steps = s.steps;

  // Per step and pair, sum_i w_a w_b; on a lattice it is rebuilt from midpoint sums.
  const bool lattice = row.lattice();
  const std::size_t nacc = lattice ? row.mids() : npairs;
  std::vector<double> pair_w(npairs);
  for (std::size_t k = 0; k < npairs; ++k)
    pair_w[k] = gauss_kernel(x[s.pairs[k].first] - x[s.pairs[k].second], std::sqrt(2.0) * eps);

  parallel_for(n_paths, [&](std::size_t path) {
    std::vector<double> acc(steps * nacc, 0.0);
    std::vector<double> zacc(np, 0.0), w(np), mid(nacc);
    for (std::size_t i = 0; i < s.big_n; ++i) {
      Xoshiro256 gen(derive_seed(c.seed, path, i));
      double q, p;
      init_particle(c, gen, q, p);
      for (std::size_t k = 0; k < steps; ++k) {
        if (q > lo && q < hi) {
          double* ak = &acc[k * nacc];
          if (lattice) {
            row(q, w.data(), mid.data());
            for (std::size_t m = 0; m < nacc; ++m) ak[m] += mid[m];
          } else {
            row(q, w.data());
            for (std::size_t a = 0; a < np; ++a) {
              const double wa = w[a];
              for (std::size_t b = a; b < np; ++b) *ak++ += wa * w[b];
            }
          }
          double db;
          mover.step(q, p, gen, &db);
          for (std::size_t a = 0; a < np; ++a) zacc[a] += w[a] * db;
        } else {
          mover.step(q, p, gen, nullptr);
        }
      }
    }
    if (lattice) {
      std::vector<double> pairs(steps * npairs);
      for (std::size_t k = 0; k < steps; ++k)
        for (std::size_t j = 0; j < npairs; ++j)
          pairs[k * npairs + j] = pair_w[j] * acc[k * nacc + s.pairs[j].first + s.pairs[j].second];
      acc.swap(pairs);
    }
    for (std::size_t a = 0; a < np; ++a) s.z[path * np + a] = sigma / nn * zacc[a];

    // Y: left-point Ito sum against independent grid white noise.
    std::vector<double> rho(steps * np);
    double* gz = &s.gz[path * npairs];
    double* fy = &s.fy[path * npairs];
    for (std::size_t k = 0; k < steps; ++k) {
      const double* ak = &acc[k * npairs];
      double* rk = &rho[k * np];
      for (std::size_t a = 0; a < np; ++a) rk[a] = ak[s.pair_index(int(a), int(a))] / (nn * w0);
      for (std::size_t j = 0; j < npairs; ++j) {
        gz[j] += ak[j] / nn * s.dt;
        fy[j] += std::sqrt(rk[s.pairs[j].first] * rk[s.pairs[j].second]) * s.dt;
      }
    }
    Xoshiro256 gy(derive_seed(c.seed, path, 0, 1));
    cells.ito_sum(gy, steps, s.dt, sigma / std::sqrt(nn), np,
                  [&](std::size_t k, std::size_t a) { return rho[k * np + a]; }, &s.y[path * np]);
  });
  return s;
}

std::vector<double> PathSamples::column(int a) const { return dk::column(values, x.size(), a, n_paths); }

PathSamples simulate_Z(const CompareConfig& c, const std::vector<double>& x, double t, std::size_t n_paths) {
  auto s = simulate_joint(c, x, t, n_paths);
  return {s.x, s.n_paths, std::move(s.z)};
}

PathSamples simulate_Y(const CompareConfig& c, const std::vector<double>& x, double t, std::size_t n_paths) {
  auto s = simulate_joint(c, x, t, n_paths);
  return {s.x, s.n_paths, std::move(s.y)};
}

PathSamples simulate_Y_frozen(const CompareConfig& c, const std::vector<double>& x, double t, std::size_t n_paths,
                              double rho) {
  validate(c);
  require(!x.empty(), kModule, "need at least one evaluation point");
  require(std::isfinite(rho) && rho >= 0.0, kModule, "frozen density must be non-negative");
  require(std::isfinite(t) && t >= 0.0, kModule, "time must be non-negative");
  const double eps = c.epsilon;
  const double lo = *std::min_element(x.begin(), x.end()) - kCutoff * eps;
  const double hi = *std::max_element(x.begin(), x.end()) + kCutoff * eps;
  const NoiseCells cells(x, eps, lo, hi, c.cell_width);
  std::size_t steps = static_cast<std::size_t>(std::lround(t * c.steps_per_unit));
  if (t > 0.0) steps = std::max<std::size_t>(steps, 1);
  const double dt = steps ? t / static_cast<double>(steps) : 0.0;
  const double scale = c.langevin.sigma / std::sqrt(static_cast<double>(particle_count(c)));
  PathSamples out{x, n_paths, std::vector<double>(n_paths * x.size(), 0.0)};
  parallel_for(n_paths, [&](std::size_t path) {
    Xoshiro256 gy(derive_seed(c.seed, path, 0, 1));
    cells.ito_sum(gy, steps, dt, scale, x.size(), [&](std::size_t, std::size_t) { return rho; },
                  &out.values[path * x.size()]);
  });
  return out;
}

stats::Estimate cov_Z_formula(const CompareConfig& c, double x1, double x2, double t, std::size_t n_paths) {
  const auto s = simulate_joint(c, {x1, x2}, t, n_paths);
  const auto g = column(s.gz, s.pairs.size(), s.pair_index(0, 1), n_paths);
  const auto e = stats::mean_estimate(g);
  return {s.prefactor * e.value, s.prefactor * e.se};
}

CovarianceReport covariance_report(const JointSamples& s, const CompareConfig& c, double fit_radius) {
  const double eps = c.epsilon;
  CovarianceReport r;
  r.epsilon = eps;
  r.theta = c.theta;
  r.big_n = s.big_n;
  r.t = s.t;
  r.n_paths = s.n_paths;
  r.steps = s.steps;
  r.fit_radius = fit_radius < 0.0 ? 3.0 * eps : fit_radius;
  r.wide_ci = s.n_paths < 100;
  const std::size_t np = s.points(), npairs = s.pairs.size(), n = s.n_paths;
  std::vector<std::vector<double>> zc(np), yc(np);
  for (std::size_t a = 0; a < np; ++a) {
    zc[a] = column(s.z, np, a, n);
    yc[a] = column(s.y, np, a, n);
  }
  std::vector<double> v(n);
  double log_diff = 0.0, log_abs = 0.0;
  std::size_t n_fit = 0;
  for (std::size_t k = 0; k < npairs; ++k) {
    const auto [a, b] = s.pairs[k];
    PairEstimate e;
    e.x1 = s.x[a];
    e.x2 = s.x[b];
    const double d = std::abs(e.x1 - e.x2);
    e.degenerate = a == b || d == 0.0;
    e.fitted = !e.degenerate && d <= r.fit_radius * (1.0 + 1e-9);
    e.cov_z = stats::covariance(zc[a], zc[b]);
    e.cov_y = stats::covariance(yc[a], yc[b]);
    const auto gz = column(s.gz, npairs, k, n);
    const auto fy = column(s.fy, npairs, k, n);
    const auto mg = stats::mean_estimate(gz), mf = stats::mean_estimate(fy);
    e.cov_z_formula = {s.prefactor * mg.value, s.prefactor * mg.se};
    e.cov_y_formula = {s.prefactor * s.c_grid[k] * mf.value, s.prefactor * s.c_grid[k] * mf.se};
    const double mza = stats::mean(zc[a]), mzb = stats::mean(zc[b]);
    const double mya = stats::mean(yc[a]), myb = stats::mean(yc[b]);
    for (std::size_t i = 0; i < n; ++i)
      v[i] = (zc[a][i] - mza) * (zc[b][i] - mzb) - (yc[a][i] - mya) * (yc[b][i] - myb);
    e.diff_empirical = paired(v, e.cov_z.value - e.cov_y.value);
    for (std::size_t i = 0; i < n; ++i) v[i] = s.prefactor * (gz[i] - s.c_grid[k] * fy[i]);
    e.diff_conditional = paired(v, stats::mean(v));
    for (std::size_t i = 0; i < n; ++i) v[i] = (zc[a][i] - mza) * (zc[b][i] - mzb) - s.prefactor * gz[i];
    e.identity_gap = paired(v, e.cov_z.value - e.cov_z_formula.value);
    const double w = gauss_kernel(d, std::sqrt(2.0) * eps);
    e.bound_abs = s.prefactor * w;
    e.bound_diff = e.bound_abs * d * d;
    e.ratio_abs = e.bound_abs > 0.0 ? std::abs(e.cov_z.value) / e.bound_abs : 0.0;
    e.ratio_diff = e.bound_diff > 0.0 ? std::abs(e.diff_conditional.value) / e.bound_diff : 0.0;
    if (e.fitted) {
      r.c_diff_envelope = std::max(r.c_diff_envelope, e.ratio_diff);
      r.c_abs_envelope = std::max(r.c_abs_envelope, e.ratio_abs);
      log_diff += std::log(std::max(e.ratio_diff, 1e-300));
      log_abs += std::log(std::max(e.ratio_abs, 1e-300));
      ++n_fit;
    }
    if (e.degenerate && std::abs(e.diff_empirical.value) > 3.0 * e.diff_empirical.se) r.degenerate_ok = false;
    r.pairs.push_back(e);
  }
  if (n_fit > 0) {
    r.c_diff_lsq = std::exp(log_diff / double(n_fit));
    r.c_abs_lsq = std::exp(log_abs / double(n_fit));
  }
  for (auto& e : r.pairs) {
    if (!e.fitted) continue;
    e.noise_dominated = e.diff_conditional.se > 0.5 * r.c_diff_envelope * e.bound_diff;
    r.n_noise_dominated += e.noise_dominated;
  }
  return r;
}

CovarianceReport covariance_report(const CompareConfig& c, const std::vector<double>& x, double t, std::size_t n_paths,
                                 double fit_radius) {
  require(c.theta >= 3.5, kModule, "covariance bounds need theta >= 7/2");
  return covariance_report(simulate_joint(c, x, t, n_paths), c, fit_radius);
}

ScalingReport variance_scaling(const CompareConfig& base, const std::vector<double>& epsilons, double theta, double x,
                               double t, std::size_t n_paths) {
  require(epsilons.size() >= 3, kModule, "variance scaling needs at least 3 epsilons");
  ScalingReport r;
  r.theta = theta;
  r.x = x;
  r.t = t;
  r.n_paths = n_paths;
  r.epsilons = epsilons;
  std::vector<double> le, lz, ly;
  for (double eps : epsilons) {
    CompareConfig c = base;
    c.epsilon = eps;
    c.theta = theta;
    c.big_n = 0;
    const auto s = simulate_joint(c, {x}, t, n_paths);
    r.big_n.push_back(s.big_n);
    r.var_z.push_back(stats::variance_estimate(s.z));
    r.var_y.push_back(stats::variance_estimate(s.y));
    if (!(r.var_z.back().value > 0.0 && r.var_y.back().value > 0.0))
      fail(ErrorKind::DegenerateLaw, kModule, "a variance vanishes; log-log regression rejected");
    le.push_back(std::log(eps));
    lz.push_back(std::log(r.var_z.back().value));
    ly.push_back(std::log(r.var_y.back().value));
  }
  r.fit_z = stats::linear_fit(le, lz);
  r.fit_y = stats::linear_fit(le, ly);
  return r;
}

TightnessReport tightness_lattice(const CompareConfig& c, const std::vector<double>& s_values,
                                  const std::vector<double>& gaps, std::size_t n_paths) {
  validate(c);
  require(!s_values.empty() && !gaps.empty(), kModule, "tightness lattice needs times and gaps");
  require(n_paths >= 2, kModule, "need at least 2 paths");
  std::vector<double> times{0.0};
  for (double s : s_values) {
    require(std::isfinite(s) && s >= 0.0, kModule, "start times must be non-negative");
    for (double g : gaps) {
      require(std::isfinite(g) && g >= 0.0, kModule, "gaps must be non-negative");
      times.push_back(s);
      times.push_back(s + g);
    }
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  auto time_index = [&](double v) {
    return static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), v) - times.begin());
  };

  TightnessReport r;
  r.epsilon = c.epsilon;
  r.big_n = particle_count(c);
  r.n_paths = n_paths;
  const std::size_t n = r.big_n, nt = times.size();
  const double nn = static_cast<double>(n);
  const double eps = c.epsilon;
  const auto movers = gap_movers(c, times);
  std::vector<std::pair<std::size_t, std::size_t>> lattice;
  for (double s : s_values)
    for (double g : gaps) lattice.emplace_back(time_index(s), time_index(s + g));
  const std::size_t nl = lattice.size();
  std::vector<double> total(n_paths * nl), i1(n_paths * nl);

  parallel_for(n_paths, [&](std::size_t path) {
    std::vector<double> q(nt * n);
    for (std::size_t i = 0; i < n; ++i) {
      Xoshiro256 gen(derive_seed(c.seed, path, i));
      double qi, pi;
      init_particle(c, gen, qi, pi);
      q[i] = qi;
      for (std::size_t k = 1; k < nt; ++k) {
        for (int m = 0; m < movers[k - 1].substeps; ++m) movers[k - 1].mover.step(qi, pi, gen, nullptr);
        q[k * n + i] = qi;
      }
    }
    const auto [mn, mx] = std::minmax_element(q.begin(), q.end());
    const double a = *mn - kCutoff * eps, b = *mx + kCutoff * eps;
    const int nodes = static_cast<int>(std::ceil((b - a) / (eps / 8.0))) + 1;
    const Grid1D grid = line_grid(a, b, nodes);
    std::vector<std::vector<double>> rho(nt);
    std::vector<char> needed(nt, 0);
    for (const auto& [i0, i1x] : lattice) needed[i0] = needed[i1x] = 1;
    for (std::size_t k = 0; k < nt; ++k)
      if (needed[k])
        rho[k] = kernel_sum(std::span<const double>(&q[k * n], n), {}, grid, eps, KernelFamily::GaussLine, 0);
    const double c1 = 1.0 / (std::sqrt(std::numbers::pi) * eps);
    std::vector<double> diff(static_cast<std::size_t>(nodes));
    for (std::size_t l = 0; l < nl; ++l) {
      const auto [ks, kt] = lattice[l];
      for (int j = 0; j < nodes; ++j) diff[j] = std::pow(rho[kt][j] - rho[ks][j], 2);
      total[path * nl + l] = integrate(grid, diff);
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double dq = q[kt * n + i] - q[ks * n + i];
        sum += c1 * -std::expm1(-dq * dq / (4.0 * eps * eps));
      }
      i1[path * nl + l] = sum / (nn * nn);
    }
  });

  r.max_ratio = 0.0;
  r.min_ratio = HUGE_VAL;
  std::size_t l = 0;
  for (double s : s_values)
    for (double g : gaps) {
      TightnessEstimate e;
      e.s = s;
      e.t = s + g;
      const auto tot = column(total, nl, l, n_paths), one = column(i1, nl, l, n_paths);
      e.total = stats::mean_estimate(tot);
      e.i1 = stats::mean_estimate(one);
      std::vector<double> rest(n_paths);
      const double scale = n > 1 ? 1.0 / (1.0 - 1.0 / nn) : 0.0;
      for (std::size_t i = 0; i < n_paths; ++i) rest[i] = scale * (tot[i] - one[i]);
      e.cross = stats::mean_estimate(rest);
      if (g > 0.0) {
        e.ratio = e.total.value / (g * g);
        r.max_ratio = std::max(r.max_ratio, e.ratio);
        r.min_ratio = std::min(r.min_ratio, e.ratio);
      }
      r.entries.push_back(e);
      ++l;
    }
  if (r.min_ratio == HUGE_VAL) r.min_ratio = 0.0;
  return r;
}

TightnessEstimate tightness_statistic(const CompareConfig& c, double s, double t, std::size_t n_paths) {
  require(t >= s, kModule, "need t >= s");
  return tightness_lattice(c, {s}, {t - s}, n_paths).entries.front();
}

InverseMomentResult inverse_density_moment(const CompareConfig& c, double x, double t, std::size_t n_paths) {
  validate(c);
  require(std::isfinite(x), kModule, "evaluation point must be finite");
  require(std::isfinite(t) && t >= 0.0, kModule, "time must be non-negative");
  require(n_paths >= 2, kModule, "need at least 2 paths");
  const std::size_t n = particle_count(c);
  const auto movers = gap_movers(c, {0.0, t});
  std::vector<double> rho(n_paths);
  parallel_for(n_paths, [&](std::size_t path) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      Xoshiro256 gen(derive_seed(c.seed, path, i));
      double q, p;
      init_particle(c, gen, q, p);
      if (t > 0.0)
        for (int m = 0; m < movers[0].substeps; ++m) movers[0].mover.step(q, p, gen, nullptr);
      sum += gauss_kernel(x - q, c.epsilon);
    }
    rho[path] = sum / static_cast<double>(n);
  });
  InverseMomentResult r;
  r.x = x;
  r.t = t;
  r.n_paths = n_paths;
  std::vector<double> v;
  v.reserve(n_paths);
  for (double p : rho) {
    if (p > 0.0)
      v.push_back(1.0 / (p * p));
    else
      ++r.excluded;
  }
  require(v.size() >= 2, kModule, "fewer than 2 paths with positive density");
  r.value = stats::mean_estimate(v);
  return r;
}

void write_pairs_csv(std::ostream& os, const CovarianceReport& r) {
  os << "x1,x2,cov_z,cov_z_se,cov_y,cov_y_se,cov_z_formula,cov_z_formula_se,diff,diff_se,bound_diff,bound_abs,"
        "ratio_diff,ratio_abs,fitted,noise_dominated\n";
  for (const auto& e : r.pairs) {
    os << format_double(e.x1) << ',' << format_double(e.x2) << ',' << format_double(e.cov_z.value) << ','
       << format_double(e.cov_z.se) << ',' << format_double(e.cov_y.value) << ',' << format_double(e.cov_y.se) << ','
       << format_double(e.cov_z_formula.value) << ',' << format_double(e.cov_z_formula.se) << ','
       << format_double(e.diff_conditional.value) << ',' << format_double(e.diff_conditional.se) << ','
       << format_double(e.bound_diff) << ',' << format_double(e.bound_abs) << ',' << format_double(e.ratio_diff)
       << ',' << format_double(e.ratio_abs) << ',' << (e.fitted ? 1 : 0) << ',' << (e.noise_dominated ? 1 : 0)
       << '\n';
  }
}

}  // namespace dk
