#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dk/fields.hpp"
#include "dk/gaussian.hpp"
#include "dk/particles.hpp"
#include "json.hpp"

namespace dk::app {

/// Rejected configuration; the message already carries file and line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kExperiments[] = {"particles",      "fields",          "covariance", "variance-scaling",
                                               "tightness",      "inverse-moment",  "kernel-spectrum",
                                               "spde",           "small-noise",     "positivity"};

struct InitialProfile {
  double mean = 1.0;
  double amplitude = 0.0;
  int mode = 1;
  double j_amplitude = 0.0;
};

/// Fully resolved experiment description. Lists (theta, epsilon, seed) are
/// sweep axes; every other field is a scalar with its default filled in.
struct ExperimentConfig {
  std::string experiment;
  std::vector<double> theta{3.5};
  /// Empty means derive from big_n and theta: eps = N^(-1/theta).
  std::vector<double> epsilon;
  /// Empty means N = round(eps^-theta).
  std::optional<std::uint64_t> big_n;
  double gamma = 1.0;
  double sigma = 1.4142135623730951;
  double delta = 0.1;
  double temperature = 1.0;
  Potential potential = ZeroPotential{};
  Grid1D grid{0.0, 6.283185307179586, 513, false};
  double dt = 1e-3;
  double T = 1.0;
  std::uint64_t n_paths = 1;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "out";
  /// Covariance points; empty means pi + k eps / 2 for k = -3..3.
  std::vector<double> points;
  double x = 3.141592653589793;
  std::optional<double> fit_radius;
  std::vector<double> s_values{0.0};
  std::vector<double> gaps{0.05, 0.1, 0.2, 0.5, 1.0};
  double q = 2.0;
  int m_trunc = 128;
  int noise_modes = -1;
  int steps_per_unit = 256;
  double cell_width = 0.0;
  /// Recording stride in steps; 0 means about 100 snapshots.
  std::uint64_t record_every = 0;
  InitialProfile rho0;
  Gaussian1D position_law{3.141592653589793, 1.5848931924611136};
  Gaussian1D momentum_law{0.0, 1.0};
  double corr = 0.0;
  double nu = 0.05;
};

/// The schema shipped with the tool.
const nlohmann::json& experiment_schema();
const std::string& experiment_schema_text();

/// Parses and validates a config document. `source` names the file in messages.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "config");
ExperimentConfig load_config(const std::string& path);

/// Canonical form with every default spelled out; sweep axes stay lists.
nlohmann::json to_json(const ExperimentConfig& c);
/// SHA-256 of the canonical form.
std::string config_hash(const ExperimentConfig& c);

/// Particle count for one (theta, eps) point.
std::uint64_t resolve_big_n(const ExperimentConfig& c, double theta, double eps);
/// Epsilon axis, derived from big_n when no epsilon was given.
std::vector<double> resolve_epsilons(const ExperimentConfig& c, double theta);

}  // namespace dk::app
