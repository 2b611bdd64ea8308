#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dk/app/config.hpp"
#include "json.hpp"

namespace dk::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitCheck = 4;

const char* tool_version();
/// Version of every library module, recorded in artifact metadata.
const nlohmann::json& module_versions();

/// One (theta, epsilon, seed) evaluation inside a run.
struct PointSpec {
  std::size_t index = 0;
  double theta = 0.0;
  double epsilon = 0.0;
  std::uint64_t big_n = 0;
  std::uint64_t seed = 0;
};

/// Writes files under one directory and remembers them for the manifest.
/// CSV files get a "<name>.meta.json" sidecar.
class Artifacts {
 public:
  Artifacts(std::filesystem::path dir, nlohmann::json meta);

  void write_csv(const std::string& name, const std::string& body, const nlohmann::json& extra = nlohmann::json::object());
  void write_json(const std::string& name, const nlohmann::json& value);
  /// manifest.json listing every file written so far with its SHA-256.
  void write_manifest(nlohmann::json header);

  const std::filesystem::path& dir() const { return dir_; }
  const std::vector<std::string>& files() const { return files_; }

 private:
  void write_file(const std::string& name, const std::string& bytes);
  std::filesystem::path dir_;
  nlohmann::json meta_;
  std::vector<std::string> files_;
};

/// Computes one point, writing its per-point files. Returns the point record
/// {index, theta, epsilon, big_n, seed, metrics, files}.
nlohmann::json evaluate_point(const ExperimentConfig& c, const PointSpec& p, Artifacts& out);

/// Cross-point result (fits, envelopes) and the pass/fail check of an experiment.
struct Summary {
  nlohmann::json result;
  nlohmann::json check;  // {passed, criterion, ...}
};
Summary summarize(const ExperimentConfig& c, const nlohmann::json& points);

struct RunOptions {
  bool check = false;
  /// Overrides the config's output_dir when non-empty.
  std::string output_dir;
};

/// Runs every theta x epsilon point of a single-seed config into one directory.
/// Returns the exit code; diagnostics go to `log`.
int run(const ExperimentConfig& c, const RunOptions& opt, std::ostream& log);
/// Cartesian sweep over theta x epsilon x seed, one cell_NNN directory per cell,
/// plus aggregate.json built from all cell points.
int sweep(const ExperimentConfig& c, const RunOptions& opt, std::ostream& log);

/// Maps a library failure to an exit code and a message naming its module.
int classify_error(const std::exception& e, std::string& message);

}  // namespace dk::app
