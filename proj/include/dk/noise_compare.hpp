#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "dk/gaussian.hpp"
#include "dk/particles.hpp"
#include "dk/stats.hpp"

namespace dk {

/// Particle system on the line driving the noise comparison.
struct CompareConfig {
  double epsilon = 0.1;
  double theta = 3.5;
  /// 0 means round(epsilon^-theta).
  std::size_t big_n = 0;
  LangevinParams langevin;
  Gaussian1D position_law{3.141592653589793, 1.5848931924611136};  // N(pi, 10^0.2)
  Gaussian1D momentum_law{0.0, 1.0};
  double corr = 0.0;
  /// Ito sub-steps per unit time.
  int steps_per_unit = 256;
  /// White-noise cell width for Y; 0 means epsilon / 8.
  double cell_width = 0.0;
  std::uint64_t seed = 1;
};

void validate(const CompareConfig& c);
std::size_t particle_count(const CompareConfig& c);

/// Joint per-path output of one Z/Y simulation at a fixed set of points.
/// Pair (a, b) with a <= b is stored at index pair_index(a, b).
struct JointSamples {
  std::vector<double> x;
  double t = 0.0;
  double dt = 0.0;
  std::size_t steps = 0;
  std::size_t big_n = 0;
  std::size_t n_paths = 0;
  double prefactor = 0.0;  // sigma^2 / N
  std::vector<std::pair<int, int>> pairs;
  std::vector<double> z;   // [path * points + a]
  std::vector<double> y;
  /// Per path: int (1/N) sum_i w(x_a - q_i) w(x_b - q_i) du = w_{sqrt2 eps}(d) int rho_{eps/sqrt2}(mid) du.
  std::vector<double> gz;  // [path * pairs + k]
  /// Per path: int sqrt(rho_{eps/sqrt2}(x_a) rho_{eps/sqrt2}(x_b)) du.
  std::vector<double> fy;
  /// Grid value of int w(x_a - y) w(x_b - y) dy used by Y.
  std::vector<double> c_grid;

  std::size_t points() const { return x.size(); }
  std::size_t pair_index(int a, int b) const;
  double z_at(std::size_t path, int a) const { return z[path * x.size() + a]; }
  double y_at(std::size_t path, int a) const { return y[path * x.size() + a]; }
};

/// Simulates particles, the particle noise Z and the replacement noise Y together.
/// Z and Y use independent randomness; both see the same particle paths.
JointSamples simulate_joint(const CompareConfig& c, const std::vector<double>& x, double t, std::size_t n_paths);

/// Per-path samples of one field, path-major.
struct PathSamples {
  std::vector<double> x;
  std::size_t n_paths = 0;
  std::vector<double> values;
  double at(std::size_t path, int a) const { return values[path * x.size() + a]; }
  std::vector<double> column(int a) const;
};

PathSamples simulate_Z(const CompareConfig& c, const std::vector<double>& x, double t, std::size_t n_paths);
PathSamples simulate_Y(const CompareConfig& c, const std::vector<double>& x, double t, std::size_t n_paths);

/// Y driven by a frozen density rho(x, s) = rho instead of the particle field.
PathSamples simulate_Y_frozen(const CompareConfig& c, const std::vector<double>& x, double t, std::size_t n_paths,
                              double rho);

/// (sigma^2/N) w_{sqrt2 eps}(x1 - x2) int E[rho_{eps/sqrt2}((x1 + x2)/2, u)] du by Monte Carlo.
stats::Estimate cov_Z_formula(const CompareConfig& c, double x1, double x2, double t, std::size_t n_paths);

struct PairEstimate {
  double x1 = 0.0, x2 = 0.0;
  stats::Estimate cov_z;          // empirical
  stats::Estimate cov_y;          // empirical
  stats::Estimate cov_z_formula;  // conditional expectation given the particle paths
  stats::Estimate cov_y_formula;
  stats::Estimate diff_empirical;    // cov_z - cov_y, paired standard error
  stats::Estimate diff_conditional;  // cov_z_formula - cov_y_formula, paired
  stats::Estimate identity_gap;      // cov_z - cov_z_formula, paired
  double bound_diff = 0.0;  // sigma^2/N w_{sqrt2 eps}(d) d^2
  double bound_abs = 0.0;   // sigma^2/N w_{sqrt2 eps}(d)
  double ratio_diff = 0.0;  // |diff_conditional| / bound_diff
  double ratio_abs = 0.0;   // |cov_z| / bound_abs
  bool degenerate = false;  // x1 == x2
  bool fitted = false;      // 0 < d <= fit radius
  bool noise_dominated = false;
};

struct CovarianceReport {
  double epsilon = 0.0;
  double theta = 0.0;
  std::size_t big_n = 0;
  double t = 0.0;
  std::size_t n_paths = 0;
  std::size_t steps = 0;
  double fit_radius = 0.0;
  std::vector<PairEstimate> pairs;
  /// Smallest constant that makes each bound hold on every fitted pair.
  double c_diff_envelope = 0.0;
  double c_abs_envelope = 0.0;
  /// exp(mean log ratio) over fitted pairs.
  double c_diff_lsq = 0.0;
  double c_abs_lsq = 0.0;
  std::size_t n_noise_dominated = 0;
  /// |cov_z - cov_y| <= 3 se on every coincident pair.
  bool degenerate_ok = true;
  bool wide_ci = false;
};

/// All pairs a <= b of the given points. Pairs with 0 < |x1 - x2| <= fit_radius
/// (default 3 eps) enter the fitted constants.
CovarianceReport covariance_report(const CompareConfig& c, const std::vector<double>& x, double t, std::size_t n_paths,
                                 double fit_radius = -1.0);
CovarianceReport covariance_report(const JointSamples& s, const CompareConfig& c, double fit_radius = -1.0);

struct ScalingReport {
  double theta = 0.0;
  double x = 0.0;
  double t = 0.0;
  std::size_t n_paths = 0;
  std::vector<double> epsilons;
  std::vector<std::size_t> big_n;
  std::vector<stats::Estimate> var_z;
  std::vector<stats::Estimate> var_y;
  stats::LinearFit fit_z;  // log Var vs log eps
  stats::LinearFit fit_y;
};

/// Var[Z_N(x, t)] and Var[Y_N(x, t)] with N = round(eps^-theta), regressed on eps in log-log.
ScalingReport variance_scaling(const CompareConfig& base, const std::vector<double>& epsilons, double theta, double x,
                               double t, std::size_t n_paths);

struct TightnessEstimate {
  double s = 0.0;
  double t = 0.0;
  stats::Estimate total;  // E ||rho(t) - rho(s)||^2_{L2}
  stats::Estimate i1;     // (1/N) E ||w(. - q(t)) - w(. - q(s))||^2, per-particle closed form
  stats::Estimate cross;  // (total - i1) / (1 - 1/N)
  double ratio = 0.0;     // total / (t - s)^2
};

struct TightnessReport {
  double epsilon = 0.0;
  std::size_t big_n = 0;
  std::size_t n_paths = 0;
  std::vector<TightnessEstimate> entries;
  double max_ratio = 0.0;
  double min_ratio = 0.0;
};

/// E||rho_eps(t) - rho_eps(s)||^2 on the line for each (s, s + gap), sharing particle paths.
TightnessReport tightness_lattice(const CompareConfig& c, const std::vector<double>& s_values,
                                  const std::vector<double>& gaps, std::size_t n_paths);
TightnessEstimate tightness_statistic(const CompareConfig& c, double s, double t, std::size_t n_paths);

struct InverseMomentResult {
  double x = 0.0;
  double t = 0.0;
  std::size_t n_paths = 0;
  std::size_t excluded = 0;  // paths with rho = 0 exactly (underflow)
  stats::Estimate value;     // E[rho_eps(x, t)^-2]
};

InverseMomentResult inverse_density_moment(const CompareConfig& c, double x, double t, std::size_t n_paths);

/// Rows x1,x2,cov_z,cov_z_se,cov_y,cov_y_se,cov_z_formula,...,ratio_diff,ratio_abs,fitted,noise_dominated.
void write_pairs_csv(std::ostream& os, const CovarianceReport& r);

}  // namespace dk
