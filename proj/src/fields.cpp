#include "dk/fields.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "dk/error.hpp"
#include "dk/io.hpp"
#include "dk/parallel.hpp"
#include "dk/periodic_kernel.hpp"

namespace dk {

namespace {
constexpr const char* kModule = "fields";
constexpr std::size_t kChunk = 4096;
constexpr double kCutoff = 8.0;

// Adds weight * w^{(order)}(x_k - q) to acc for nodes within the cutoff, walking
// outwards from the nearest node with the Gaussian lattice recursion
// g_{k+1} = g_k r_k, r_{k+1} = r_k c.
void scatter_gauss(double q, double weight, const Grid1D& grid, double eps, int order, double* acc) {
  const int n = grid.n_cells;
  const double dx = grid.dx();
  const double inv2 = 1.0 / (2.0 * eps * eps);
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * eps);
  const double c = std::exp(-dx * dx / (eps * eps));
  const long reach = static_cast<long>(std::ceil(kCutoff * eps / dx));
  const long k0 = std::lround((q - grid.x_min) / dx);
  const double d0 = grid.x_min + k0 * dx - q;
  const double g0 = norm * std::exp(-d0 * d0 * inv2);
  auto add = [&](long k, double d, double g) {
    long idx = k;
    if (grid.periodic) {
      idx %= n;
      if (idx < 0) idx += n;
    } else if (idx < 0 || idx >= n) {
      return;
    }
    double v = g;
    if (order == 1) v *= -d / (eps * eps);
    else if (order == 2) v *= (d * d / (eps * eps) - 1.0) / (eps * eps);
    acc[idx] += weight * v;
  };
  add(k0, d0, g0);
  for (int dir = -1; dir <= 1; dir += 2) {
    const double step = dir * dx;
    double g = g0;
    double r = std::exp(-(2.0 * d0 * step + dx * dx) * inv2);
    for (long s = 1; s <= reach; ++s) {
      g *= r;
      r *= c;
      add(k0 + dir * s, d0 + s * step, g);
    }
  }
}

void scatter_von_mises(double q, double weight, const Grid1D& grid, const VonMises& p, double eps, int order,
                       double* acc) {
  const int n = grid.n_cells;
  const double dx = grid.dx();
  const double kappa = 1.0 / (eps * eps);
  // Same tail mass as the Gaussian cutoff: kappa (1 - cos d) = kCutoff^2 / 2.
  const double t = 0.5 * kCutoff * kCutoff * eps * eps;
  const long reach = t >= 2.0 ? -1 : static_cast<long>(std::ceil(std::acos(1.0 - t) / dx));
  auto add = [&](long idx) {
    const double d = grid.x_min + idx * dx - q;
    double v = p(d);
    if (order == 1) v *= -kappa * std::sin(d);
    else if (order == 2) {
      const double s = std::sin(d);
      v *= kappa * kappa * s * s - kappa * std::cos(d);
    }
    acc[idx] += weight * v;
  };
  if (reach < 0 || 2 * reach + 1 >= n) {
    for (long k = 0; k < n; ++k) add(k);
    return;
  }
  const long k0 = std::lround((q - grid.x_min) / dx);
  for (long s = -reach; s <= reach; ++s) {
    long idx = (k0 + s) % n;
    if (idx < 0) idx += n;
    add(idx);
  }
}

SmoothedField make_field(const ParticleEnsemble& e, const Grid1D& grid, double eps, KernelFamily kernel,
                         FieldKind kind) {
  SmoothedField f;
  f.grid = grid;
  f.epsilon = eps;
  f.kind = kind;
  f.kernel = kernel;
  if (kind == FieldKind::Density) {
    f.values = kernel_sum(e.positions, {}, grid, eps, kernel, 0);
  } else if (kind == FieldKind::Momentum) {
    f.values = kernel_sum(e.positions, e.momenta, grid, eps, kernel, 0);
  } else {
    std::vector<double> p2(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) p2[i] = e.momenta[i] * e.momenta[i];
    f.values = kernel_sum(e.positions, p2, grid, eps, kernel, 1);
  }
  return f;
}
}  // namespace

const char* to_string(FieldKind k) {
  switch (k) {
    case FieldKind::Density: return "density";
    case FieldKind::Momentum: return "momentum";
    case FieldKind::J2: return "j2";
  }
  return "?";
}

const char* to_string(KernelFamily k) { return k == KernelFamily::GaussLine ? "gauss-line" : "von-mises-torus"; }

void validate(const Grid1D& g) {
  require(std::isfinite(g.x_min) && std::isfinite(g.x_max) && g.x_max > g.x_min, kModule,
          "grid needs x_max > x_min");
  require(g.n_cells >= 2, kModule, "grid needs at least 2 nodes");
  if (g.periodic)
    require(std::abs(g.length() - 2.0 * std::numbers::pi) < 1e-12, kModule, "periodic grids must span 2*pi");
}

Grid1D torus_grid(int n_cells) { return {0.0, 2.0 * std::numbers::pi, n_cells, true}; }
Grid1D line_grid(double x_min, double x_max, int n_cells) { return {x_min, x_max, n_cells, false}; }

std::vector<double> kernel_sum(std::span<const double> q, std::span<const double> weights, const Grid1D& grid,
                               double eps, KernelFamily kernel, int order) {
  validate(grid);
  require(std::isfinite(eps) && eps > 0.0, kModule, "epsilon must be positive");
  require(order >= 0 && order <= 2, kModule, "kernel derivative order must be 0, 1 or 2");
  require(weights.empty() || weights.size() == q.size(), kModule, "weights must match the particle count");
  require(!q.empty(), kModule, "no particles");
  if (kernel == KernelFamily::VonMisesTorus)
    require(grid.periodic, kModule, "the periodic kernel needs a periodic grid");
  const std::size_t n = static_cast<std::size_t>(grid.n_cells);
  const std::size_t chunks = (q.size() + kChunk - 1) / kChunk;
  std::vector<double> partial(chunks * n, 0.0);
  const VonMises vm(eps / std::sqrt(2.0));
  parallel_for(chunks, [&](std::size_t c) {
    double* acc = partial.data() + c * n;
    const std::size_t end = std::min(q.size(), (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      const double w = weights.empty() ? 1.0 : weights[i];
      if (kernel == KernelFamily::GaussLine) scatter_gauss(q[i], w, grid, eps, order, acc);
      else scatter_von_mises(q[i], w, grid, vm, eps, order, acc);
    }
  });
  std::vector<double> out(n, 0.0);
  for (std::size_t c = 0; c < chunks; ++c)
    for (std::size_t k = 0; k < n; ++k) out[k] += partial[c * n + k];
  const double inv_n = 1.0 / static_cast<double>(q.size());
  for (double& v : out) v *= inv_n;
  return out;
}

SmoothedField smoothed_density(const ParticleEnsemble& e, const Grid1D& grid, double eps, KernelFamily kernel) {
  return make_field(e, grid, eps, kernel, FieldKind::Density);
}

SmoothedField smoothed_momentum(const ParticleEnsemble& e, const Grid1D& grid, double eps, KernelFamily kernel) {
  return make_field(e, grid, eps, kernel, FieldKind::Momentum);
}

SmoothedField smoothed_j2(const ParticleEnsemble& e, const Grid1D& grid, double eps, KernelFamily kernel) {
  return make_field(e, grid, eps, kernel, FieldKind::J2);
}

double expected_kernel_moments(double x, const BivariateGaussian& law, double eps, int b, int a) {
  validate(law);
  require(std::isfinite(eps) && eps > 0.0, kModule, "epsilon must be positive");
  if (a < 0 || a > 2 || b < 0 || b > 2)
    fail(ErrorKind::Unsupported, kModule, "expected kernel moments support momentum power and derivative order up to 2");
  // E[q^n w(x - q)] = G(x; mu_q, s2) m(n, m*(x), v*); x-derivatives follow from
  // G' = -(x - mu) G / s2 and dm*/dx = beta.
  const double s2 = eps * eps + law.var_q;
  const double beta = law.var_q / s2;
  const double ms = law.mean_q + beta * (x - law.mean_q);
  const double vs = eps * eps * law.var_q / s2;
  const double u = x - law.mean_q;
  const double g = normal_pdf(x, law.mean_q, s2);
  const double g1 = -u / s2 * g;
  const double g2 = (u * u / (s2 * s2) - 1.0 / s2) * g;
  const double poly[3] = {1.0, ms, ms * ms + vs};
  const double dpoly[3] = {0.0, 1.0, 2.0 * ms};
  const double ddpoly[3] = {0.0, 0.0, 2.0};
  double f[3];
  for (int n = 0; n < 3; ++n) {
    if (b == 0) f[n] = g * poly[n];
    else if (b == 1) f[n] = g1 * poly[n] + g * dpoly[n] * beta;
    else f[n] = g2 * poly[n] + 2.0 * g1 * dpoly[n] * beta + g * ddpoly[n] * beta * beta;
  }
  // E[p^a | q] as a polynomial in q.
  const double a1 = std::sqrt(law.var_p / law.var_q) * law.corr;
  const double a0 = law.mean_p - a1 * law.mean_q;
  const double vc = (1.0 - law.corr * law.corr) * law.var_p;
  if (a == 0) return f[0];
  if (a == 1) return a0 * f[0] + a1 * f[1];
  return (a0 * a0 + vc) * f[0] + 2.0 * a0 * a1 * f[1] + a1 * a1 * f[2];
}

double integrate(const Grid1D& grid, std::span<const double> values) {
  require(values.size() == static_cast<std::size_t>(grid.n_cells), kModule, "values do not match the grid");
  double s = 0.0;
  for (double v : values) s += v;
  if (!grid.periodic) s -= 0.5 * (values.front() + values.back());
  return s * grid.dx();
}

double field_norm(const SmoothedField& f, Norm which) {
  const auto& v = f.values;
  const std::size_t n = v.size();
  std::vector<double> w(n);
  if (which == Norm::L4) {
    for (std::size_t k = 0; k < n; ++k) w[k] = v[k] * v[k] * v[k] * v[k];
    return std::pow(integrate(f.grid, w), 0.25);
  }
  for (std::size_t k = 0; k < n; ++k) w[k] = v[k] * v[k];
  const double l2sq = integrate(f.grid, w);
  if (which == Norm::L2) return std::sqrt(l2sq);
  require(n >= 4, kModule, "H1 norm needs at least 4 nodes");
  const double h = f.grid.dx();
  for (std::size_t k = 0; k < n; ++k) {
    double d;
    if (f.grid.periodic) d = (v[(k + 1) % n] - v[(k + n - 1) % n]) / (2.0 * h);
    else if (k == 0) d = (v[1] - v[0]) / h;
    else if (k == n - 1) d = (v[n - 1] - v[n - 2]) / h;
    else d = (v[k + 1] - v[k - 1]) / (2.0 * h);
    w[k] = d * d;
  }
  return std::sqrt(l2sq + integrate(f.grid, w));
}

void write_field_csv(std::ostream& os, const SmoothedField& f) {
  os << "x,value\n";
  for (int k = 0; k < f.grid.n_cells; ++k) os << format_double(f.grid.x(k)) << ',' << format_double(f.values[k]) << '\n';
}

}  // namespace dk
