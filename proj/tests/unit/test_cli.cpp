#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "doctest.h"
#include "dk/app/config.hpp"
#include "dk/app/hash.hpp"
#include "dk/app/runner.hpp"
#include "dk/app/schema_check.hpp"
#include "dk/periodic_kernel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dk::app;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dk_test_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

// Runs quietly and returns the exit code.
int run_quiet(const ExperimentConfig& c, bool check = false) {
  std::ostringstream log;
  return run(c, {check, ""}, log);
}

}  // namespace

TEST_CASE("sha256 matches the FIPS 180-2 test vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("line map locates keys, nested members and array items") {
  const std::string text = "{\n  \"a\": 1,\n  \"b\": {\n    \"c\": [\n      10,\n      \"x/y\"\n    ]\n  }\n}\n";
  const LineMap m(text);
  CHECK(m.line_of("") == 1);
  CHECK(m.line_of("/a") == 2);
  CHECK(m.line_of("/b") == 3);
  CHECK(m.line_of("/b/c") == 4);
  CHECK(m.line_of("/b/c/0") == 5);
  CHECK(m.line_of("/b/c/1") == 6);
  CHECK(m.line_of("/b/missing") == 3);
  CHECK(escape_pointer_token("a/b~c") == "a~1b~0c");
}

TEST_CASE("schema keywords") {
  const json schema = json::parse(R"({
    "type": "object", "required": ["n"], "additionalProperties": false,
    "properties": {
      "n": {"type": "integer", "minimum": 1, "maximum": 5},
      "x": {"type": "number", "exclusiveMinimum": 0},
      "s": {"type": "string", "minLength": 2},
      "e": {"enum": ["a", "b"]},
      "l": {"type": "array", "minItems": 1, "maxItems": 2, "items": {"type": "number"}},
      "o": {"oneOf": [{"type": "number"}, {"const": "auto"}]},
      "any": {"anyOf": [{"type": "integer"}, {"type": "string"}]},
      "r": {"$ref": "#/$defs/pos"}
    },
    "$defs": {"pos": {"type": "number", "minimum": 0}}
  })");
  auto issues = [&](const char* doc) { return check_schema(json::parse(doc), schema); };
  CHECK(issues(R"({"n": 3})").empty());
  CHECK(issues(R"({"n": 3.0})").empty());  // integral floats are integers
  CHECK(issues(R"({"n": 3.5})").size() == 1);
  CHECK(issues(R"({})").size() == 1);
  CHECK(issues(R"({"n": 0})").size() == 1);
  CHECK(issues(R"({"n": 6})").size() == 1);
  CHECK(issues(R"({"n": 1, "x": 0})").size() == 1);
  CHECK(issues(R"({"n": 1, "s": "a"})").size() == 1);
  CHECK(issues(R"({"n": 1, "e": "c"})").size() == 1);
  CHECK(issues(R"({"n": 1, "l": []})").size() == 1);
  CHECK(issues(R"({"n": 1, "l": [1, 2, 3]})").size() == 1);
  CHECK(issues(R"({"n": 1, "l": [1, "q"]})").front().pointer == "/l/1");
  CHECK(issues(R"({"n": 1, "o": "auto"})").empty());
  CHECK(issues(R"({"n": 1, "o": "manual"})").size() == 1);
  CHECK(issues(R"({"n": 1, "any": 2.5})").size() == 1);
  CHECK(issues(R"({"n": 1, "r": -1})").size() == 1);
  CHECK(issues(R"({"n": 1, "zzz": 1})").front().message.find("unknown property") != std::string::npos);
}

TEST_CASE("embedded schema is the shipped file and accepts a full canonical config") {
  CHECK(experiment_schema().at("properties").contains("experiment"));
  ExperimentConfig c;
  c.experiment = "covariance";
  json canon = to_json(c);
  CHECK(check_schema(canon, experiment_schema()).empty());
}

TEST_CASE("config errors carry file and line") {
  const std::string text = "{\n  \"experiment\": \"spde\",\n  \"epsilon\": [],\n  \"gamma\": -2\n}";
  const std::string msg = config_error(text);
  CHECK(msg.find("cfg.json:3: /epsilon: list must not be empty") != std::string::npos);
  CHECK(msg.find("cfg.json:4: /gamma") != std::string::npos);

  CHECK(config_error("{\"experiment\": \"nope\"}").find("is not one of") != std::string::npos);
  CHECK(config_error("{\"theta\": 2}").find("missing required property \"experiment\"") != std::string::npos);
  CHECK(config_error("{\"experiment\": \"spde\",}").find("line 1") != std::string::npos);
  CHECK(config_error("{\"experiment\": \"spde\", \"big_n\": \"auto\"}").find("/big_n") != std::string::npos);
  CHECK(config_error("{\"experiment\": \"spde\",\n\"potential\": {\"kind\": \"periodic-trig\"}}")
            .find("cfg.json:2: /potential: missing required property \"a\"") != std::string::npos);
  CHECK(config_error("{\"experiment\": \"fields\",\n\"grid\": {\"x_min\": 3, \"x_max\": 1}}").find("cfg.json:2: /grid") !=
        std::string::npos);
}

TEST_CASE("defaults and the from-scaling particle count") {
  auto c = parse_config(R"({"experiment": "covariance", "epsilon": [0.2, 0.1]})");
  CHECK(c.n_paths == 1000);
  CHECK_FALSE(c.big_n.has_value());
  CHECK(resolve_big_n(c, 3.5, 0.1) == 3162);  // round(10^3.5)
  CHECK(resolve_big_n(c, 3.5, 0.2) == 280);
  CHECK(c.seeds == std::vector<std::uint64_t>{1});

  // Fixed N and a theta list: epsilon follows from N eps^theta = 1.
  auto f = parse_config(R"({"experiment": "fields", "big_n": 1000, "theta": [1.5, 2.5, 3.5]})");
  CHECK(f.epsilon.empty());
  CHECK(resolve_epsilons(f, 1.5).front() == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(resolve_big_n(f, 1.5, 0.01) == 1000);

  auto s = parse_config(R"({"experiment": "spde"})");
  CHECK(s.grid.periodic);
  CHECK(s.dt == 1e-3);

  auto t = parse_config(R"({"experiment": "spde", "potential": {"kind": "periodic-trig", "a": [0, 0.05]}})");
  const auto& trig = std::get<dk::PeriodicTrig>(t.potential);
  CHECK(trig.b == std::vector<double>{0.0, 0.0});
}

TEST_CASE("config hash ignores output_dir and tracks everything else") {
  auto a = parse_config(R"({"experiment": "spde", "output_dir": "x"})");
  auto b = parse_config(R"({"experiment": "spde", "output_dir": "y"})");
  auto d = parse_config(R"({"experiment": "spde", "seed": 2})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(d));
  CHECK(config_hash(a).size() == 64);
}

TEST_CASE("kernel-spectrum run writes lambda_0 = 1 with metadata and a hashed manifest") {
  const fs::path dir = scratch("ks");
  auto c = parse_config(R"({"experiment": "kernel-spectrum", "epsilon": 0.2})");
  c.output_dir = dir.string();
  REQUIRE(run_quiet(c, true) == kExitOk);

  std::istringstream csv(slurp(dir / "spectrum_00.csv"));
  std::string header, first;
  std::getline(csv, header);
  std::getline(csv, first);
  CHECK(header == "j,lambda,alpha");
  CHECK(first == "0,1,1");

  const json meta = json::parse(slurp(dir / "spectrum_00.csv.meta.json"));
  CHECK(meta["seed"] == 1);
  CHECK(meta["config_hash"] == config_hash(c));
  CHECK(meta["module_versions"].contains("periodic_kernel"));
  CHECK(meta["epsilon"] == 0.2);

  const json manifest = json::parse(slurp(dir / "manifest.json"));
  std::size_t listed = 0;
  for (const auto& f : manifest["files"]) {
    CHECK(f["sha256"] == sha256_file((dir / f["path"].get<std::string>()).string()));
    ++listed;
  }
  // config, summary, csv and its sidecar; the manifest does not list itself
  CHECK(listed == 4);
  const json summary = json::parse(slurp(dir / "summary.json"));
  CHECK(summary["check"]["passed"] == true);
  CHECK(summary["points"][0]["metrics"]["trace_rel_err"].get<double>() < 1e-12);
}

TEST_CASE("spde with sigma = 0, V = 0 and constant data stays constant") {
  const fs::path dir = scratch("flat");
  auto c = parse_config(R"({"experiment": "spde", "sigma": 0, "T": 0.2, "m_trunc": 16, "rho0": {"mean": 1}})");
  c.output_dir = dir.string();
  c.grid.n_cells = 32;
  REQUIRE(run_quiet(c, true) == kExitOk);
  std::istringstream csv(slurp(dir / "spde_00.csv"));
  std::string line;
  std::getline(csv, line);
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    const auto d = line.find(',', b + 1);
    CHECK(std::stod(line.substr(b + 1, d - b - 1)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(std::stod(line.substr(d + 1))) < 1e-12);
    ++rows;
  }
  CHECK(rows == 101 * 32);  // T/dt = 200 steps recorded every 2
  const json s = json::parse(slurp(dir / "summary.json"));
  CHECK(s["points"][0]["metrics"]["max_w_deviation"].get<double>() < 1e-12);
}

TEST_CASE("same config and seed give byte-identical artifacts") {
  auto c = parse_config(R"({"experiment": "particles", "big_n": 200, "T": 0.5, "dt": 0.05})");
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  c.output_dir = a.string();
  REQUIRE(run_quiet(c) == kExitOk);
  c.output_dir = b.string();
  REQUIRE(run_quiet(c) == kExitOk);
  for (const auto& e : fs::directory_iterator(a)) CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
}

TEST_CASE("particles run matches the exact OU law") {
  auto c = parse_config(R"({"experiment": "particles", "big_n": 4000, "T": 1, "dt": 0.1})");
  c.output_dir = scratch("ou").string();
  CHECK(run_quiet(c, true) == kExitOk);
}

TEST_CASE("sweep over 2 seeds x 2 epsilons gives 4 cells and one aggregate") {
  const fs::path dir = scratch("sweep");
  auto c = parse_config(
      R"({"experiment": "variance-scaling", "epsilon": [0.4, 0.3], "seed": [3, 4], "n_paths": 40, "steps_per_unit": 16})");
  c.output_dir = dir.string();
  std::ostringstream log;
  REQUIRE(sweep(c, {}, log) == kExitOk);
  std::size_t manifests = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && fs::exists(e.path() / "manifest.json")) ++manifests;
  CHECK(manifests == 4);
  const json agg = json::parse(slurp(dir / "aggregate.json"));
  CHECK(agg["cells"].size() == 4);
  CHECK(agg["points"].size() == 4);
  CHECK(agg["failed_cells"] == 0);
  CHECK(agg["result"].size() == 2);  // one fit per seed

  // A single run over the same epsilon list reproduces the per-seed fit exactly.
  auto r = c;
  r.seeds = {3};
  r.output_dir = scratch("sweep_run").string();
  REQUIRE(run_quiet(r) == kExitOk);
  const json s = json::parse(slurp(fs::path(r.output_dir) / "summary.json"));
  CHECK(s["result"][0]["fit_z"] == agg["result"][0]["fit_z"]);
  CHECK(s["result"][0]["fit_y"] == agg["result"][0]["fit_y"]);
}

TEST_CASE("sweep records failed cells and exits non-zero") {
  const fs::path dir = scratch("sweep_fail");
  // sigma = 0 makes every variance vanish.
  auto c = parse_config(R"({"experiment": "variance-scaling", "sigma": 0, "epsilon": [0.4], "seed": [1, 2],
                            "n_paths": 10, "steps_per_unit": 8})");
  c.output_dir = dir.string();
  std::ostringstream log;
  CHECK(sweep(c, {}, log) == kExitNumerical);
  const json agg = json::parse(slurp(dir / "aggregate.json"));
  CHECK(agg["failed_cells"] == 2);
  CHECK(agg["cells"][0]["error"].get<std::string>().find("noise_compare") != std::string::npos);
}

TEST_CASE("exit codes") {
  SUBCASE("seed list on run is a config error") {
    auto c = parse_config(R"({"experiment": "kernel-spectrum", "seed": [1, 2]})");
    c.output_dir = scratch("seedlist").string();
    CHECK(run_quiet(c) == kExitConfig);
  }
  SUBCASE("module parameter rejection is a config error naming the module") {
    auto c = parse_config(R"({"experiment": "covariance", "theta": 3, "epsilon": 0.4, "n_paths": 4})");
    c.output_dir = scratch("theta3").string();
    std::ostringstream log;
    CHECK(run(c, {}, log) == kExitConfig);
    CHECK(log.str().find("noise_compare") != std::string::npos);
  }
  SUBCASE("divergence is a numerical error naming the module") {
    auto c = parse_config(R"({"experiment": "spde", "sigma": 0, "dt": 0.1, "T": 50, "m_trunc": 16,
                              "potential": {"kind": "periodic-trig", "a": [0, 1e8]}, "rho0": {"amplitude": 0.1}})");
    c.output_dir = scratch("diverge").string();
    std::ostringstream log;
    CHECK(run(c, {}, log) == kExitNumerical);
    CHECK(log.str().find("spde_solver") != std::string::npos);
  }
  SUBCASE("failed threshold only matters with --check") {
    auto c = parse_config(R"({"experiment": "positivity", "epsilon": 0.25, "theta": 8, "n_paths": 10, "T": 0.02,
                              "m_trunc": 16, "nu": 0.001})");
    c.output_dir = scratch("pos").string();
    CHECK(run_quiet(c, false) == kExitOk);
    CHECK(run_quiet(c, true) == kExitCheck);
  }
}

TEST_CASE("fields: roughness falls with theta at fixed N") {
  auto c = parse_config(R"({"experiment": "fields", "big_n": 1000, "theta": [1.5, 2.5, 3.5], "seed": 7})");
  c.output_dir = scratch("fig").string();
  CHECK(run_quiet(c, true) == kExitOk);
  const json s = json::parse(slurp(fs::path(c.output_dir) / "summary.json"));
  CHECK(s["result"][0]["decreasing"] == true);
  // The grid [0, 2pi] cuts the tails of the smoothed law N(pi, 10^0.2 + eps^2);
  // 4 binomial standard errors at N = 1000 is about 0.015.
  for (const auto& p : s["points"]) {
    const double eps = p["epsilon"].get<double>();
    const double sd = std::sqrt(c.position_law.variance + eps * eps);
    const double inside = std::erf(M_PI / (sd * std::sqrt(2.0)));
    CHECK(std::abs(p["metrics"]["mass"].get<double>() - inside) < 0.015);
  }
}
