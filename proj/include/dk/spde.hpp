#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "dk/particles.hpp"
#include "dk/periodic_kernel.hpp"
#include "dk/rng.hpp"
#include "dk/stats.hpp"

namespace dk {

using cplx = std::complex<double>;

/// Fourier coefficients of (rho, j) for modes 0..m_trunc; mode -m is the
/// conjugate of mode m, so real-valuedness holds by construction.
struct SpectralState {
  int m_trunc = 0;
  std::vector<cplx> rho_hat;
  std::vector<cplx> j_hat;
  double time = 0.0;

  SpectralState() = default;
  explicit SpectralState(int m) : m_trunc(m), rho_hat(m + 1), j_hat(m + 1) {}
};

/// State whose physical fields are the given node values on n equispaced points of [0, 2pi).
SpectralState state_from_grid(const std::vector<double>& rho, const std::vector<double>& j, int m_trunc);
/// Physical values at n equispaced points of [0, 2pi).
std::vector<double> field_on_grid(const std::vector<cplx>& hat, int n);

/// sqrt(2pi sum_m (1 + m^2)(|rho_m|^2 + |j_m|^2)).
double w_norm(const SpectralState& s);
SpectralState difference(const SpectralState& a, const SpectralState& b);

/// exp(tA_m) for A_m = [[0, -im], [-i m kappa, -gamma]] as {S_rr, S_rj, S_jr, S_jj}.
std::array<cplx, 4> mode_exponential(int m, double t, double gamma, double kappa = 1.0);
SpectralState semigroup_apply(const SpectralState& s, double t, double gamma, double kappa = 1.0);

/// C^2 regularisation of sqrt|z|: an even quartic on (-delta, delta), sqrt|z| outside.
double h_delta(double z, double delta);
double h_delta_prime(double z, double delta);
double h_delta_second(double z, double delta);
/// sup |h_delta'|, attained inside the blend at |z| = delta sqrt(7/9).
double h_delta_lipschitz(double delta);

struct SolverParams {
  double gamma = 1.0;
  double sigma = 1.4142135623730951;
  double big_n = 1.0;
  double epsilon = 0.25;
  double delta = 0.1;
  PeriodicTrig potential{};
  double dt = 1e-3;
  int m_trunc = 128;
  /// Noise modes kept before projection; negative means spectrum.j_max.
  int noise_modes = -1;
  /// Physical grid size; 0 picks the smallest smooth size that avoids aliasing.
  int grid_size = 0;
  /// k_B T_e in the wave operator; sigma^2 / (2 gamma) in the fluctuation-dissipation setting.
  double temperature = 1.0;
  KernelSpectrum spectrum;  // built from epsilon when empty
};

void validate(SolverParams& p);
/// M(eps, N) = N^{-1/2} eps^{-7/2}.
double noise_scale(double eps, double big_n);

/// Pseudo-spectral exponential-Euler stepper. Not thread-safe; use one per thread.
class SpdeSolver {
 public:
  explicit SpdeSolver(SolverParams params);
  ~SpdeSolver();
  SpdeSolver(const SpdeSolver&) = delete;
  SpdeSolver& operator=(const SpdeSolver&) = delete;

  const SolverParams& params() const { return p_; }
  int grid_size() const { return g_; }
  int noise_modes() const { return noise_modes_; }

  /// Increment of the j-component from the potential drift over one step (dt included).
  std::vector<cplx> drift_increment(const SpectralState& s);
  /// Increment of the j-component from the noise increment.
  std::vector<cplx> noise_increment(const SpectralState& s, const NoiseIncrement& inc);
  NoiseIncrement draw_noise(Xoshiro256& gen) const;

  /// One exponential-Euler step with the given noise (nullptr: deterministic).
  void step(SpectralState& s, const NoiseIncrement* inc);
  void step(SpectralState& s, Xoshiro256& gen);
  void step_deterministic(SpectralState& s) { step(s, nullptr); }

  /// Minimum of rho over the physical grid.
  double min_density(const SpectralState& s);

 private:
  struct Fft;
  SolverParams p_;
  int g_ = 0;
  int noise_modes_ = 0;
  bool has_drift_ = false;
  std::vector<std::array<cplx, 4>> prop_;
  std::vector<double> force_;  // -V'(x_k)
  std::unique_ptr<Fft> fft_;
};

/// Smallest 2^a 3^b 5^c at least n.
int smooth_size(int n);

std::vector<cplx> drift_apply(const SpectralState& s, const PeriodicTrig& v, int grid_size);
std::vector<cplx> noise_apply(const SpectralState& s, const SolverParams& params, const NoiseIncrement& inc);
SpectralState step_mild(const SpectralState& s, const SolverParams& params, Xoshiro256& gen);

/// States after every `record_every` steps, starting with x0.
std::vector<SpectralState> solve_deterministic(const SpectralState& x0, double T, const SolverParams& params,
                                               int record_every = 1);

struct SmallNoiseResult {
  double q = 2.0;
  std::size_t n_paths = 0;
  std::vector<double> sup_values;  // sup_t ||X - Z||_W^q per path
  stats::Estimate mean;
  double noise_scale = 0.0;  // M(eps, N)
  bool wide_ci = false;
};

SmallNoiseResult small_noise_experiment(const SpectralState& x0, const SolverParams& params, double q, double T,
                                        std::size_t n_paths, std::uint64_t seed);

struct PositivityResult {
  std::size_t n_paths = 0;
  std::size_t exceed = 0;
  double fraction = 0.0;
  stats::Interval wilson;
};

PositivityResult positivity_probability(const SpectralState& x0, const SolverParams& params, double T,
                                        std::size_t n_paths, std::uint64_t seed);

/// Rows time,x,rho,j for one state on n physical points.
void write_state_rows(std::ostream& os, const SpectralState& s, int n);

}  // namespace dk
