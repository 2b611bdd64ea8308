#include "dk/app/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "dk/app/hash.hpp"
#include "dk/error.hpp"

namespace dk::app {

namespace fs = std::filesystem;
using nlohmann::json;

const char* tool_version() { return DK_VERSION; }

const json& module_versions() {
  static const json v = {{"gaussian_toolbox", "1.0"}, {"particles", "1.0"},   {"fields", "1.0"},
                         {"periodic_kernel", "1.0"},  {"noise_compare", "1.0"}, {"spde_solver", "1.0"},
                         {"cli", DK_VERSION}};
  return v;
}

Artifacts::Artifacts(fs::path dir, json meta) : dir_(std::move(dir)), meta_(std::move(meta)) {
  fs::create_directories(dir_);
}

void Artifacts::write_file(const std::string& name, const std::string& bytes) {
  // Names are generated internally; refuse anything that could leave dir_.
  if (name.empty() || name.find('/') != std::string::npos || name.find("..") != std::string::npos)
    throw std::runtime_error("refusing to write artifact named '" + name + "'");
  std::ofstream os(dir_ / name, std::ios::binary | std::ios::trunc);
  os << bytes;
  if (!os) throw std::runtime_error("cannot write " + (dir_ / name).string());
  files_.push_back(name);
}

void Artifacts::write_csv(const std::string& name, const std::string& body, const json& extra) {
  write_file(name, body);
  json meta = meta_;
  meta["file"] = name;
  for (const auto& [k, v] : extra.items()) meta[k] = v;
  write_file(name + ".meta.json", meta.dump(2) + "\n");
}

void Artifacts::write_json(const std::string& name, const json& value) { write_file(name, value.dump(2) + "\n"); }

void Artifacts::write_manifest(json header) {
  std::vector<std::string> names = files_;
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  json list = json::array();
  for (const auto& n : names) {
    const fs::path p = dir_ / n;
    list.push_back({{"path", n}, {"bytes", fs::file_size(p)}, {"sha256", sha256_file(p.string())}});
  }
  header["files"] = list;
  std::ofstream os(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
  os << header.dump(2) << "\n";
  if (!os) throw std::runtime_error("cannot write manifest in " + dir_.string());
}

int classify_error(const std::exception& e, std::string& message) {
  if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) {
    message = std::string("config error: ") + ce->what();
    return kExitConfig;
  }
  if (const auto* de = dynamic_cast<const dk::Error*>(&e)) {
    switch (de->kind()) {
      case ErrorKind::InvalidParameter:
      case ErrorKind::Configuration:
      case ErrorKind::Unsupported:
      case ErrorKind::WrongIntegrator:
        message = std::string("config error: ") + de->what();
        return kExitConfig;
      default:
        message = std::string("numerical error: ") + de->what();
        return kExitNumerical;
    }
  }
  message = std::string("error: ") + e.what();
  return 1;
}

namespace {

struct CellOutcome {
  int code = kExitOk;
  std::string error;
  json points = json::array();
  Summary summary;
};

// Stored configs leave out output_dir so artifacts do not depend on where they were written.
json portable_config(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("output_dir");
  return j;
}

std::string fmt(double v) { return json(v).dump(); }

json base_meta(const ExperimentConfig& c, const std::string& hash) {
  return {{"experiment", c.experiment},
          {"config_hash", hash},
          {"seed", c.seeds.size() == 1 ? json(c.seeds[0]) : json(c.seeds)},
          {"dk_version", tool_version()},
          {"module_versions", module_versions()}};
}

// All theta x epsilon points of a single-seed config, written into `dir`.
CellOutcome run_into(const ExperimentConfig& c, const fs::path& dir, std::ostream& log) {
  CellOutcome r;
  const std::string hash = config_hash(c);
  json meta = base_meta(c, hash);
  Artifacts out(dir, meta);
  out.write_json("config.json", portable_config(c));
  try {
    std::vector<PointSpec> specs;
    for (double theta : c.theta)
      for (double eps : resolve_epsilons(c, theta))
        specs.push_back({specs.size(), theta, eps, resolve_big_n(c, theta, eps), c.seeds.at(0)});
    for (const auto& p : specs) {
      log << "dk: [" << c.experiment << "] point " << p.index + 1 << '/' << specs.size() << " theta=" << fmt(p.theta)
          << " eps=" << fmt(p.epsilon) << " N=" << p.big_n << " seed=" << p.seed << std::endl;
      r.points.push_back(evaluate_point(c, p, out));
    }
    r.summary = summarize(c, r.points);
  } catch (const std::exception& e) {
    r.code = classify_error(e, r.error);
  }
  json summary = meta;
  summary["points"] = r.points;
  if (r.code == kExitOk) {
    summary["result"] = r.summary.result;
    summary["check"] = r.summary.check;
  } else {
    summary["error"] = {{"exit_code", r.code}, {"message", r.error}};
  }
  out.write_json("summary.json", summary);
  out.write_manifest(meta);
  return r;
}

int finish(const Summary& s, const RunOptions& opt, std::ostream& log) {
  const bool passed = s.check.value("passed", false);
  log << "dk: check " << (passed ? "passed" : "FAILED") << ": " << s.check.value("criterion", "") << std::endl;
  return opt.check && !passed ? kExitCheck : kExitOk;
}

}  // namespace

int run(const ExperimentConfig& c0, const RunOptions& opt, std::ostream& log) {
  if (c0.seeds.size() != 1) {
    log << "dk: config error: a seed list is a sweep axis; use `dk sweep`" << std::endl;
    return kExitConfig;
  }
  ExperimentConfig c = c0;
  if (!opt.output_dir.empty()) c.output_dir = opt.output_dir;
  CellOutcome r;
  try {
    r = run_into(c, c.output_dir, log);
  } catch (const std::exception& e) {
    std::string msg;
    const int code = classify_error(e, msg);
    log << "dk: " << msg << std::endl;
    return code;
  }
  if (r.code != kExitOk) {
    log << "dk: " << r.error << std::endl;
    return r.code;
  }
  return finish(r.summary, opt, log);
}

int sweep(const ExperimentConfig& c0, const RunOptions& opt, std::ostream& log) {
  ExperimentConfig c = c0;
  if (!opt.output_dir.empty()) c.output_dir = opt.output_dir;
  try {
    const fs::path root = c.output_dir;
    const std::string hash = config_hash(c);
    json meta = base_meta(c, hash);
    Artifacts out(root, meta);
    out.write_json("config.json", portable_config(c));

    json cells = json::array();
    json points = json::array();
    int first_failure = kExitOk;
    std::size_t index = 0;
    for (double theta : c.theta)
      for (double eps : resolve_epsilons(c, theta))
        for (std::uint64_t seed : c.seeds) {
          ExperimentConfig cell = c;
          cell.theta = {theta};
          if (!cell.epsilon.empty()) cell.epsilon = {eps};
          cell.seeds = {seed};
          char name[32];
          std::snprintf(name, sizeof name, "cell_%03zu", index++);
          cell.output_dir = (root / name).string();
          const CellOutcome r = run_into(cell, cell.output_dir, log);
          json entry = {{"dir", name}, {"theta", theta}, {"epsilon", eps}, {"seed", seed},
                        {"status", r.code == kExitOk ? "ok" : "failed"}, {"exit_code", r.code},
                        {"manifest_sha256", sha256_file((fs::path(cell.output_dir) / "manifest.json").string())}};
          if (r.code != kExitOk) {
            entry["error"] = r.error;
            log << "dk: " << name << ": " << r.error << std::endl;
            if (first_failure == kExitOk) first_failure = r.code;
          }
          cells.push_back(entry);
          for (auto p : r.points) {
            p["cell"] = name;
            points.push_back(std::move(p));
          }
        }

    json agg = meta;
    agg["cells"] = cells;
    agg["points"] = points;
    Summary s;
    if (!points.empty()) s = summarize(c, points);
    agg["result"] = s.result;
    agg["check"] = s.check;
    agg["failed_cells"] = std::count_if(cells.begin(), cells.end(), [](const json& e) { return e["status"] != "ok"; });
    out.write_json("aggregate.json", agg);
    out.write_manifest(meta);
    if (first_failure != kExitOk) {
      log << "dk: sweep finished with failed cells" << std::endl;
      return first_failure;
    }
    return finish(s, opt, log);
  } catch (const std::exception& e) {
    std::string msg;
    const int code = classify_error(e, msg);
    log << "dk: " << msg << std::endl;
    return code;
  }
}

}  // namespace dk::app
