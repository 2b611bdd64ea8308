#pragma once

#include <cstdint>
#include <iosfwd>
#include <variant>
#include <vector>

#include "dk/gaussian.hpp"
#include "dk/rng.hpp"

namespace dk {

struct ZeroPotential {};

/// V(q) = sum_k coeffs[k] q^(2k); the last coefficient must be positive.
struct EvenPolynomial {
  std::vector<double> coeffs;
};

/// V(x) = sum_m a[m] cos(mx) + b[m] sin(mx), m = 0..a.size()-1.
struct PeriodicTrig {
  std::vector<double> a;
  std::vector<double> b;
};

using Potential = std::variant<ZeroPotential, EvenPolynomial, PeriodicTrig>;

void validate(const Potential& v);
double potential_value(const Potential& v, double q);
double potential_derivative(const Potential& v, double q);
bool is_zero(const Potential& v);

struct LangevinParams {
  double gamma = 1.0;
  double sigma = 1.4142135623730951;
  Potential potential = ZeroPotential{};
};

void validate(const LangevinParams& params);

struct ParticleEnsemble {
  std::vector<double> positions;
  std::vector<double> momenta;
  double time = 0.0;
  std::uint64_t step = 0;
  /// One generator per particle; stepping never shares streams.
  std::vector<Xoshiro256> streams;
  bool record_increments = false;
  /// Brownian increments of the most recent step (filled when recording).
  std::vector<double> increments;

  std::size_t size() const noexcept { return positions.size(); }
};

ParticleEnsemble init_ensemble(std::size_t n, const Gaussian1D& position_law, const Gaussian1D& momentum_law,
                               double corr, std::uint64_t seed);

/// Exact Gaussian transition of dq = p dt, dp = -gamma p dt + sigma dB over one step.
/// The noise triple (xi_p, xi_q, dB) is drawn through a lower-triangular factor
/// of its joint covariance in that order.
struct OuTransition {
  double dt = 0.0;
  double decay = 1.0;   // e^{-gamma dt}
  double q_gain = 0.0;  // (1 - e^{-gamma dt}) / gamma
  double var_q = 0.0, var_p = 0.0, var_b = 0.0;
  double cov_qp = 0.0, cov_qb = 0.0, cov_pb = 0.0;
  double l11 = 0.0, l21 = 0.0, l22 = 0.0, l31 = 0.0, l32 = 0.0, l33 = 0.0;
};

OuTransition ou_transition(double gamma, double sigma, double dt);

/// Advance one particle by an exact OU step. Draws 3 normals when dB is wanted, 2 otherwise.
inline void ou_update(const OuTransition& tr, double& q, double& p, Xoshiro256& gen, double* db) {
  const double z1 = standard_normal(gen);
  const double z2 = standard_normal(gen);
  const double xi_p = tr.l11 * z1;
  const double xi_q = tr.l21 * z1 + tr.l22 * z2;
  q += tr.q_gain * p + xi_q;
  p = tr.decay * p + xi_p;
  if (db) *db = tr.l31 * z1 + tr.l32 * z2 + tr.l33 * standard_normal(gen);
}

/// Euler-Maruyama update of one particle given its Brownian increment.
inline void em_update(double& q, double& p, double db, double dt, double gamma, double sigma,
                      double force) noexcept {
  const double p_old = p;
  p = p_old + (-gamma * p_old - force) * dt + sigma * db;
  q += p_old * dt;
}

void ou_exact_step(ParticleEnsemble& e, const LangevinParams& params, double dt);
void em_step(ParticleEnsemble& e, const LangevinParams& params, double dt);

/// Law of (q(t), p(t)) for the OU system started from `init`.
BivariateGaussian ou_moments(double t, const LangevinParams& params, const BivariateGaussian& init);

void write_trajectory_header(std::ostream& os);
void append_trajectory_rows(std::ostream& os, const ParticleEnsemble& e);

}  // namespace dk
