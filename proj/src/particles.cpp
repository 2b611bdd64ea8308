#include "dk/particles.hpp"

#include <cmath>
#include <ostream>

#include "dk/error.hpp"
#include "dk/io.hpp"
#include "dk/parallel.hpp"

namespace dk {

namespace {
constexpr const char* kModule = "particles";

// (1 - e^{-h}) / h without cancellation.
double e1(double h) { return h == 0.0 ? 1.0 : -std::expm1(-h) / h; }

// Var_q / (sigma^2 dt^3) and Cov_qB / (sigma dt^2) as functions of h = gamma dt.
// Closed forms cancel badly for small h, so a Taylor series is used below 0.5.
double g_qq(double h) {
  if (h >= 0.5) return (h + 2.0 * std::expm1(-h) - 0.5 * std::expm1(-2.0 * h)) / (h * h * h);
  double sum = 0.0, hp = 1.0, fact = 6.0, two = 4.0;  // n = 3: h^0, 3!, 2^{n-1}
  for (int n = 3; n < 40; ++n) {
    const double term = ((n % 2 == 0) ? -1.0 : 1.0) * (two - 2.0) / fact * hp;
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    hp *= h;
    fact *= n + 1;
    two *= 2.0;
  }
  return sum;
}

double g_qb(double h) {
  if (h >= 0.5) return (h + std::expm1(-h)) / (h * h);
  double sum = 0.0, hp = 1.0, fact = 2.0;
  for (int n = 2; n < 40; ++n) {
    const double term = ((n % 2 == 0) ? 1.0 : -1.0) * hp / fact;
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    hp *= h;
    fact *= n + 1;
  }
  return sum;
}

double safe_sqrt(double v) { return v > 0.0 ? std::sqrt(v) : 0.0; }

struct ForceVisitor {
  double q;
  double operator()(const ZeroPotential&) const { return 0.0; }
  double operator()(const EvenPolynomial& v) const {
    double d = 0.0, q2 = q * q;
    for (std::size_t k = v.coeffs.size(); k-- > 1;) d = d * q2 + 2.0 * static_cast<double>(k) * v.coeffs[k];
    return d * q;
  }
  double operator()(const PeriodicTrig& v) const {
    double d = 0.0;
    for (std::size_t m = 1; m < v.a.size(); ++m) {
      const double mm = static_cast<double>(m);
      d += mm * (-v.a[m] * std::sin(mm * q) + v.b[m] * std::cos(mm * q));
    }
    return d;
  }
};

struct ValueVisitor {
  double q;
  double operator()(const ZeroPotential&) const { return 0.0; }
  double operator()(const EvenPolynomial& v) const {
    double s = 0.0, q2 = q * q;
    for (std::size_t k = v.coeffs.size(); k-- > 0;) s = s * q2 + v.coeffs[k];
    return s;
  }
  double operator()(const PeriodicTrig& v) const {
    double s = 0.0;
    for (std::size_t m = 0; m < v.a.size(); ++m) {
      const double mm = static_cast<double>(m);
      s += v.a[m] * std::cos(mm * q) + v.b[m] * std::sin(mm * q);
    }
    return s;
  }
};

}  // namespace

void validate(const Potential& v) {
  if (const auto* poly = std::get_if<EvenPolynomial>(&v)) {
    require(poly->coeffs.size() >= 2, kModule, "even polynomial needs a q^2 term or higher");
    require(poly->coeffs.back() > 0.0, kModule, "even polynomial leading coefficient must be positive");
    for (double c : poly->coeffs) require(std::isfinite(c), kModule, "polynomial coefficients must be finite");
  } else if (const auto* trig = std::get_if<PeriodicTrig>(&v)) {
    require(trig->a.size() == trig->b.size(), kModule, "trig potential needs equal-length a and b");
    for (std::size_t m = 0; m < trig->a.size(); ++m)
      require(std::isfinite(trig->a[m]) && std::isfinite(trig->b[m]), kModule, "trig coefficients must be finite");
  }
}

double potential_value(const Potential& v, double q) { return std::visit(ValueVisitor{q}, v); }
double potential_derivative(const Potential& v, double q) { return std::visit(ForceVisitor{q}, v); }

bool is_zero(const Potential& v) {
  if (std::holds_alternative<ZeroPotential>(v)) return true;
  if (const auto* trig = std::get_if<PeriodicTrig>(&v)) {
    for (std::size_t m = 1; m < trig->a.size(); ++m)
      if (trig->a[m] != 0.0 || trig->b[m] != 0.0) return false;
    return true;
  }
  return false;
}

void validate(const LangevinParams& params) {
  require(std::isfinite(params.gamma) && params.gamma > 0.0, kModule, "gamma must be positive");
  require(std::isfinite(params.sigma) && params.sigma >= 0.0, kModule, "sigma must be non-negative");
  validate(params.potential);
}

ParticleEnsemble init_ensemble(std::size_t n, const Gaussian1D& position_law, const Gaussian1D& momentum_law,
                               double corr, std::uint64_t seed) {
  require(n > 0, kModule, "ensemble needs at least one particle");
  validate(position_law);
  validate(momentum_law);
  require(std::isfinite(corr) && std::abs(corr) <= 1.0, kModule, "|corr| must be <= 1");
  ParticleEnsemble e;
  e.positions.resize(n);
  e.momenta.resize(n);
  e.streams.resize(n);
  const double sq = std::sqrt(position_law.variance), sp = std::sqrt(momentum_law.variance);
  const double rest = std::sqrt(1.0 - corr * corr);
  parallel_for(n, [&](std::size_t i) {
    Xoshiro256 gen(derive_seed(seed, i));
    const double z1 = standard_normal(gen), z2 = standard_normal(gen);
    e.positions[i] = position_law.mean + sq * z1;
    e.momenta[i] = momentum_law.mean + sp * (corr * z1 + rest * z2);
    e.streams[i] = gen;
  });
  return e;
}

OuTransition ou_transition(double gamma, double sigma, double dt) {
  require(gamma > 0.0 && sigma >= 0.0, kModule, "OU transition needs gamma > 0, sigma >= 0");
  require(dt >= 0.0 && std::isfinite(dt), kModule, "time step must be non-negative");
  OuTransition tr;
  tr.dt = dt;
  const double h = gamma * dt;
  const double e1h = e1(h);
  tr.decay = std::exp(-h);
  tr.q_gain = dt * e1h;
  tr.var_b = dt;
  tr.var_p = sigma * sigma * dt * e1(2.0 * h);
  tr.cov_qp = 0.5 * sigma * sigma * dt * dt * e1h * e1h;
  tr.cov_pb = sigma * dt * e1h;
  tr.var_q = sigma * sigma * dt * dt * dt * g_qq(h);
  tr.cov_qb = sigma * dt * dt * g_qb(h);

  tr.l11 = safe_sqrt(tr.var_p);
  if (tr.l11 > 0.0) {
    tr.l21 = tr.cov_qp / tr.l11;
    tr.l31 = tr.cov_pb / tr.l11;
  }
  tr.l22 = safe_sqrt(tr.var_q - tr.l21 * tr.l21);
  if (tr.l22 > 0.0) tr.l32 = (tr.cov_qb - tr.l21 * tr.l31) / tr.l22;
  tr.l33 = safe_sqrt(tr.var_b - tr.l31 * tr.l31 - tr.l32 * tr.l32);
  return tr;
}

void ou_exact_step(ParticleEnsemble& e, const LangevinParams& params, double dt) {
  if (!std::holds_alternative<ZeroPotential>(params.potential))
    fail(ErrorKind::WrongIntegrator, kModule, "exact OU step requires the zero potential");
  require(dt > 0.0, kModule, "time step must be positive");
  const OuTransition tr = ou_transition(params.gamma, params.sigma, dt);
  const bool rec = e.record_increments;
  if (rec) e.increments.resize(e.size());
  parallel_for(e.size(), [&](std::size_t i) {
    ou_update(tr, e.positions[i], e.momenta[i], e.streams[i], rec ? &e.increments[i] : nullptr);
  });
  e.time += dt;
  ++e.step;
}

void em_step(ParticleEnsemble& e, const LangevinParams& params, double dt) {
  require(dt > 0.0 && std::isfinite(dt), kModule, "time step must be positive");
  const bool rec = e.record_increments;
  if (rec) e.increments.resize(e.size());
  const double sdt = std::sqrt(dt);
  const bool free = std::holds_alternative<ZeroPotential>(params.potential);
  parallel_for(e.size(), [&](std::size_t i) {
    const double db = sdt * standard_normal(e.streams[i]);
    const double force = free ? 0.0 : potential_derivative(params.potential, e.positions[i]);
    em_update(e.positions[i], e.momenta[i], db, dt, params.gamma, params.sigma, force);
    if (rec) e.increments[i] = db;
  });
  e.time += dt;
  ++e.step;
}

BivariateGaussian ou_moments(double t, const LangevinParams& params, const BivariateGaussian& init) {
  if (!std::holds_alternative<ZeroPotential>(params.potential))
    fail(ErrorKind::Unsupported, kModule, "closed-form moments exist only for the zero potential");
  validate(init);
  require(t >= 0.0, kModule, "time must be non-negative");
  if (t == 0.0) return init;
  const OuTransition tr = ou_transition(params.gamma, params.sigma, t);
  const double a = tr.q_gain, d = tr.decay;
  const double c0 = init.corr * std::sqrt(init.var_q * init.var_p);
  BivariateGaussian out;
  out.mean_q = init.mean_q + a * init.mean_p;
  out.mean_p = d * init.mean_p;
  out.var_q = init.var_q + 2.0 * a * c0 + a * a * init.var_p + tr.var_q;
  out.var_p = d * d * init.var_p + tr.var_p;
  const double cov = d * c0 + a * d * init.var_p + tr.cov_qp;
  out.corr = cov / std::sqrt(out.var_q * out.var_p);
  return out;
}

void write_trajectory_header(std::ostream& os) { os << "step,time,particle,q,p\n"; }

void append_trajectory_rows(std::ostream& os, const ParticleEnsemble& e) {
  const std::string t = format_double(e.time);
  for (std::size_t i = 0; i < e.size(); ++i)
    os << e.step << ',' << t << ',' << i << ',' << format_double(e.positions[i]) << ','
       << format_double(e.momenta[i]) << '\n';
}

}  // namespace dk
