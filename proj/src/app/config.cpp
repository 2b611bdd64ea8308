#include "dk/app/config.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dk/app/hash.hpp"
#include "dk/app/schema_check.hpp"
#include "dk_schema_text.hpp"

namespace dk::app {

using nlohmann::json;

const std::string& experiment_schema_text() {
  static const std::string text = generated::kExperimentSchema;
  return text;
}

const json& experiment_schema() {
  static const json schema = json::parse(experiment_schema_text());
  return schema;
}

namespace {

struct Defaults {
  std::uint64_t n_paths;
  double dt;
  double T;
  bool torus;
};

Defaults defaults_for(const std::string& e) {
  if (e == "particles") return {1, 1e-2, 1.0, false};
  if (e == "fields") return {1, 1e-2, 0.0, false};
  if (e == "covariance" || e == "variance-scaling" || e == "inverse-moment") return {1000, 1e-3, 1.0, false};
  if (e == "tightness") return {200, 1e-3, 1.0, false};
  if (e == "small-noise") return {200, 1e-3, 1.0, true};
  if (e == "positivity") return {500, 1e-3, 1.0, true};
  if (e == "spde") return {1, 1e-3, 1.0, true};
  return {1, 1e-3, 1.0, false};
}

std::vector<double> number_or_list(const json& v) {
  if (v.is_array()) return v.get<std::vector<double>>();
  return {v.get<double>()};
}

Gaussian1D gaussian_from(const json& v) { return {v.at("mean").get<double>(), v.at("variance").get<double>()}; }

json gaussian_to(const Gaussian1D& g) { return {{"mean", g.mean}, {"variance", g.variance}}; }

// Semantic checks the schema cannot express, reported at the offending line.
void semantic_checks(const json& doc, const ExperimentConfig& c, const LineMap& lines, const std::string& source) {
  auto fail_at = [&](const std::string& ptr, const std::string& msg) {
    std::ostringstream os;
    os << source << ':' << lines.line_of(ptr) << ": " << ptr << ": " << msg;
    throw ConfigError(os.str());
  };
  if (c.grid.x_max <= c.grid.x_min) fail_at("/grid", "x_max must exceed x_min");
  if (doc.contains("potential")) {
    try {
      dk::validate(c.potential);
    } catch (const std::exception& e) {
      fail_at("/potential", e.what());
    }
  }
  for (const char* key : {"position_law", "momentum_law"}) {
    if (doc.contains(key) && doc.at(key).at("variance").get<double>() == 0.0 && c.corr != 0.0)
      fail_at(std::string("/") + key, "zero variance requires corr = 0");
  }
  if (c.big_n && !c.epsilon.empty() && c.theta.size() > 1)
    fail_at("/theta", "a theta list with fixed big_n and epsilon changes nothing; drop one of them");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann messages carry "line L, column C".
    throw ConfigError(source + ": invalid JSON: " + e.what());
  }
  const LineMap lines(text);
  const auto issues = check_schema(doc, experiment_schema(), lines);
  if (!issues.empty()) {
    std::ostringstream os;
    for (std::size_t k = 0; k < issues.size(); ++k) {
      if (k) os << '\n';
      os << source << ':' << issues[k].line << ": " << issues[k].pointer << ": " << issues[k].message;
    }
    throw ConfigError(os.str());
  }

  ExperimentConfig c;
  c.experiment = doc.at("experiment").get<std::string>();
  const Defaults d = defaults_for(c.experiment);
  c.n_paths = d.n_paths;
  c.dt = d.dt;
  c.T = d.T;
  if (d.torus) c.grid = Grid1D{0.0, 6.283185307179586, 256, true};

  if (doc.contains("theta")) c.theta = number_or_list(doc["theta"]);
  if (doc.contains("epsilon")) c.epsilon = number_or_list(doc["epsilon"]);
  if (doc.contains("big_n") && doc["big_n"].is_number()) c.big_n = doc["big_n"].get<std::uint64_t>();
  if (c.epsilon.empty() && !c.big_n) c.epsilon = {0.1};
  auto get = [&](const char* key, auto& field) {
    if (doc.contains(key)) field = doc[key].get<std::decay_t<decltype(field)>>();
  };
  get("gamma", c.gamma);
  get("sigma", c.sigma);
  get("delta", c.delta);
  get("temperature", c.temperature);
  if (doc.contains("potential")) {
    const json& p = doc["potential"];
    const std::string kind = p.at("kind").get<std::string>();
    if (kind == "zero") c.potential = ZeroPotential{};
    else if (kind == "even-polynomial") c.potential = EvenPolynomial{p.at("coeffs").get<std::vector<double>>()};
    else {
      PeriodicTrig trig{p.at("a").get<std::vector<double>>(), p.value("b", std::vector<double>{})};
      if (!p.contains("b")) trig.b.assign(trig.a.size(), 0.0);
      c.potential = trig;
    }
  }
  if (doc.contains("grid")) {
    const json& g = doc["grid"];
    if (g.contains("kind")) {
      const bool torus = g["kind"] == "torus";
      if (torus != c.grid.periodic) c.grid = torus ? Grid1D{0.0, 6.283185307179586, 256, true} : ExperimentConfig{}.grid;
    }
    if (g.contains("x_min")) c.grid.x_min = g["x_min"].get<double>();
    if (g.contains("x_max")) c.grid.x_max = g["x_max"].get<double>();
    if (g.contains("n_cells")) c.grid.n_cells = g["n_cells"].get<int>();
  }
  get("dt", c.dt);
  get("T", c.T);
  get("n_paths", c.n_paths);
  if (doc.contains("seed")) {
    const json& s = doc["seed"];
    c.seeds = s.is_array() ? s.get<std::vector<std::uint64_t>>() : std::vector<std::uint64_t>{s.get<std::uint64_t>()};
  }
  get("output_dir", c.output_dir);
  get("points", c.points);
  get("x", c.x);
  if (doc.contains("fit_radius")) c.fit_radius = doc["fit_radius"].get<double>();
  get("s_values", c.s_values);
  get("gaps", c.gaps);
  get("q", c.q);
  get("m_trunc", c.m_trunc);
  get("noise_modes", c.noise_modes);
  get("steps_per_unit", c.steps_per_unit);
  get("cell_width", c.cell_width);
  get("record_every", c.record_every);
  if (doc.contains("rho0")) {
    const json& r = doc["rho0"];
    c.rho0.mean = r.value("mean", c.rho0.mean);
    c.rho0.amplitude = r.value("amplitude", c.rho0.amplitude);
    c.rho0.mode = r.value("mode", c.rho0.mode);
    c.rho0.j_amplitude = r.value("j_amplitude", c.rho0.j_amplitude);
  }
  if (doc.contains("position_law")) c.position_law = gaussian_from(doc["position_law"]);
  if (doc.contains("momentum_law")) c.momentum_law = gaussian_from(doc["momentum_law"]);
  get("corr", c.corr);
  get("nu", c.nu);
  semantic_checks(doc, c, lines, source);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open config file");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text, path);
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  j["theta"] = c.theta;
  if (!c.epsilon.empty()) j["epsilon"] = c.epsilon;
  j["big_n"] = c.big_n ? json(*c.big_n) : json("from-scaling");
  j["gamma"] = c.gamma;
  j["sigma"] = c.sigma;
  j["delta"] = c.delta;
  j["temperature"] = c.temperature;
  std::visit(
      [&](const auto& v) {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, ZeroPotential>) j["potential"] = {{"kind", "zero"}};
        else if constexpr (std::is_same_v<V, EvenPolynomial>)
          j["potential"] = {{"kind", "even-polynomial"}, {"coeffs", v.coeffs}};
        else j["potential"] = {{"kind", "periodic-trig"}, {"a", v.a}, {"b", v.b}};
      },
      c.potential);
  j["grid"] = {{"kind", c.grid.periodic ? "torus" : "line"},
               {"x_min", c.grid.x_min},
               {"x_max", c.grid.x_max},
               {"n_cells", c.grid.n_cells}};
  j["dt"] = c.dt;
  j["T"] = c.T;
  j["n_paths"] = c.n_paths;
  j["seed"] = c.seeds;
  j["output_dir"] = c.output_dir;
  if (!c.points.empty()) j["points"] = c.points;
  j["x"] = c.x;
  if (c.fit_radius) j["fit_radius"] = *c.fit_radius;
  j["s_values"] = c.s_values;
  j["gaps"] = c.gaps;
  j["q"] = c.q;
  j["m_trunc"] = c.m_trunc;
  if (c.noise_modes >= 0) j["noise_modes"] = c.noise_modes;
  j["steps_per_unit"] = c.steps_per_unit;
  if (c.cell_width > 0.0) j["cell_width"] = c.cell_width;
  if (c.record_every > 0) j["record_every"] = c.record_every;
  j["rho0"] = {{"mean", c.rho0.mean}, {"amplitude", c.rho0.amplitude}, {"mode", c.rho0.mode},
               {"j_amplitude", c.rho0.j_amplitude}};
  j["position_law"] = gaussian_to(c.position_law);
  j["momentum_law"] = gaussian_to(c.momentum_law);
  j["corr"] = c.corr;
  j["nu"] = c.nu;
  return j;
}

std::string config_hash(const ExperimentConfig& c) {
  json j = to_json(c);
  // Where artifacts land does not change what they contain.
  j.erase("output_dir");
  return sha256_hex(j.dump());
}

std::uint64_t resolve_big_n(const ExperimentConfig& c, double theta, double eps) {
  if (c.big_n) return *c.big_n;
  const double n = std::round(std::pow(eps, -theta));
  if (!(n >= 1.0 && n < 1e12)) throw ConfigError("big_n = eps^-theta = " + std::to_string(n) + " is out of range");
  return static_cast<std::uint64_t>(n);
}

std::vector<double> resolve_epsilons(const ExperimentConfig& c, double theta) {
  if (!c.epsilon.empty()) return c.epsilon;
  return {std::pow(static_cast<double>(*c.big_n), -1.0 / theta)};
}

}  // namespace dk::app
