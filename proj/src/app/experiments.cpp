// Per-experiment evaluation and cross-point summaries behind `dk run`.

#include <algorithm>
#include <cmath>
#include <map>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <tuple>

#include "dk/app/runner.hpp"
#include "dk/error.hpp"
#include "dk/fields.hpp"
#include "dk/io.hpp"
#include "dk/noise_compare.hpp"
#include "dk/particles.hpp"
#include "dk/periodic_kernel.hpp"
#include "dk/spde.hpp"
#include "dk/stats.hpp"

namespace dk::app {

using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string stem(const char* base, const PointSpec& p) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%02zu.csv", p.index);
  return std::string(base) + buf;
}

json estimate(const stats::Estimate& e) { return {{"value", e.value}, {"se", e.se}}; }

json fit_json(const stats::LinearFit& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"slope_stderr", f.slope_stderr}, {"r_squared", f.r_squared}};
}

json point_meta(const PointSpec& p) {
  return {{"theta", p.theta}, {"epsilon", p.epsilon}, {"big_n", p.big_n}, {"seed", p.seed}};
}

CompareConfig compare_config(const ExperimentConfig& c, const PointSpec& p) {
  CompareConfig cc;
  cc.epsilon = p.epsilon;
  cc.theta = p.theta;
  cc.big_n = p.big_n;
  cc.langevin = {c.gamma, c.sigma, c.potential};
  cc.position_law = c.position_law;
  cc.momentum_law = c.momentum_law;
  cc.corr = c.corr;
  cc.steps_per_unit = c.steps_per_unit;
  cc.cell_width = c.cell_width;
  cc.seed = p.seed;
  return cc;
}

SolverParams solver_params(const ExperimentConfig& c, const PointSpec& p) {
  SolverParams sp;
  sp.gamma = c.gamma;
  sp.sigma = c.sigma;
  sp.big_n = static_cast<double>(p.big_n);
  sp.epsilon = p.epsilon;
  sp.delta = c.delta;
  if (const auto* trig = std::get_if<PeriodicTrig>(&c.potential)) sp.potential = *trig;
  else if (!std::holds_alternative<ZeroPotential>(c.potential))
    throw ConfigError("experiment " + c.experiment + " lives on the torus and needs a zero or periodic-trig potential");
  sp.dt = c.dt;
  sp.m_trunc = c.m_trunc;
  sp.noise_modes = c.noise_modes;
  sp.temperature = c.temperature;
  return sp;
}

SpectralState initial_state(const ExperimentConfig& c) {
  if (c.rho0.mode > c.m_trunc) throw ConfigError("rho0.mode exceeds m_trunc");
  const int n = 2 * c.m_trunc + 2;
  std::vector<double> rho(n), j(n);
  for (int k = 0; k < n; ++k) {
    const double x = kTwoPi * k / n;
    rho[k] = c.rho0.mean + c.rho0.amplitude * std::cos(c.rho0.mode * x);
    j[k] = c.rho0.j_amplitude * std::sin(c.rho0.mode * x);
  }
  return state_from_grid(rho, j, c.m_trunc);
}

std::uint64_t step_count(double T, double dt) {
  const double n = std::round(T / dt);
  if (!(n >= 0.0 && n < 1e10)) throw ConfigError("T / dt gives an unusable step count");
  return static_cast<std::uint64_t>(n);
}

ParticleEnsemble evolve_ensemble(const ExperimentConfig& c, const PointSpec& p, std::ostringstream* rows) {
  LangevinParams lp{c.gamma, c.sigma, c.potential};
  validate(lp);
  auto e = init_ensemble(p.big_n, c.position_law, c.momentum_law, c.corr, p.seed);
  const std::uint64_t steps = step_count(c.T, c.dt);
  const std::uint64_t every = c.record_every ? c.record_every : std::max<std::uint64_t>(1, steps / 10);
  if (rows) {
    write_trajectory_header(*rows);
    append_trajectory_rows(*rows, e);
  }
  const bool exact = is_zero(c.potential);
  for (std::uint64_t k = 1; k <= steps; ++k) {
    if (exact) ou_exact_step(e, lp, c.dt);
    else em_step(e, lp, c.dt);
    if (rows && (k % every == 0 || k == steps)) append_trajectory_rows(*rows, e);
  }
  return e;
}

json eval_particles(const ExperimentConfig& c, const PointSpec& p, Artifacts& out, json& files) {
  std::ostringstream rows;
  const auto e = evolve_ensemble(c, p, &rows);
  const std::string name = stem("trajectory", p);
  out.write_csv(name, rows.str(), point_meta(p));
  files.push_back(name);
  json m{{"time", e.time},
         {"mean_q", estimate(stats::mean_estimate(e.positions))},
         {"mean_p", estimate(stats::mean_estimate(e.momenta))},
         {"var_q", stats::variance(e.positions)},
         {"var_p", stats::variance(e.momenta)}};
  if (is_zero(c.potential)) {
    const BivariateGaussian init{c.position_law.mean, c.momentum_law.mean, c.position_law.variance,
                                 c.momentum_law.variance, c.corr};
    const auto law = ou_moments(e.time, {c.gamma, c.sigma, c.potential}, init);
    m["oracle"] = {{"mean_q", law.mean_q}, {"mean_p", law.mean_p}, {"var_q", law.var_q}, {"var_p", law.var_p}};
    const double n = static_cast<double>(e.size());
    // z-scores of the sample means against the exact law
    m["z_mean_q"] = (m["mean_q"]["value"].get<double>() - law.mean_q) / std::sqrt(law.var_q / n);
    m["z_mean_p"] = (m["mean_p"]["value"].get<double>() - law.mean_p) / std::sqrt(law.var_p / n);
  }
  return m;
}

json eval_fields(const ExperimentConfig& c, const PointSpec& p, Artifacts& out, json& files) {
  const auto e = evolve_ensemble(c, p, nullptr);
  const KernelFamily kernel = KernelFamily::GaussLine;
  const auto rho = smoothed_density(e, c.grid, p.epsilon, kernel);
  const auto mom = smoothed_momentum(e, c.grid, p.epsilon, kernel);
  for (const auto& [base, f] : {std::pair{"density", &rho}, std::pair{"momentum", &mom}}) {
    std::ostringstream os;
    write_field_csv(os, *f);
    const std::string name = stem(base, p);
    out.write_csv(name, os.str(), point_meta(p));
    files.push_back(name);
  }
  auto d1 = kernel_sum(e.positions, {}, c.grid, p.epsilon, kernel, 1);
  for (double& v : d1) v *= v;
  return {{"mass", integrate(c.grid, rho.values)},
          {"l2", field_norm(rho, Norm::L2)},
          {"roughness", std::sqrt(integrate(c.grid, d1))},
          {"momentum_l2", field_norm(mom, Norm::L2)}};
}

json eval_kernel_spectrum(const ExperimentConfig&, const PointSpec& p, Artifacts& out, json& files) {
  const auto s = kernel_eigenvalues(p.epsilon);
  std::ostringstream os;
  write_spectrum_csv(os, s);
  const std::string name = stem("spectrum", p);
  out.write_csv(name, os.str(), point_meta(p));
  files.push_back(name);
  const double trace = eigen_sum(s, 0);
  const double oracle = kTwoPi * von_mises_kernel(0.0, p.epsilon);
  json env = json::array();
  for (int n = 0; n <= 2; ++n) env.push_back(eigen_sum(s, n) * std::pow(p.epsilon, 2 * n + 3));
  return {{"lambda0", s.lambda[0]},  {"j_max", s.j_max},
          {"trace", trace},          {"trace_oracle", oracle},
          {"trace_rel_err", std::abs(trace - oracle) / oracle},
          {"tail", s.tail},          {"envelope", env}};
}

json eval_spde(const ExperimentConfig& c, const PointSpec& p, Artifacts& out, json& files) {
  SpdeSolver solver(solver_params(c, p));
  SpectralState s = initial_state(c);
  const SpectralState x0 = s;
  const std::uint64_t steps = step_count(c.T, c.dt);
  const std::uint64_t every = c.record_every ? c.record_every : std::max<std::uint64_t>(1, steps / 100);
  const bool noisy = c.sigma > 0.0;
  Xoshiro256 gen(derive_seed(p.seed, 0));
  std::ostringstream os;
  os << "time,x,rho,j\n";
  write_state_rows(os, s, c.grid.n_cells);
  double min_rho = solver.min_density(s);
  double max_dev = 0.0;
  bool mass_equal = true;
  for (std::uint64_t k = 1; k <= steps; ++k) {
    if (noisy) solver.step(s, gen);
    else solver.step_deterministic(s);
    mass_equal = mass_equal && s.rho_hat[0] == x0.rho_hat[0];
    if (k % every == 0 || k == steps) {
      write_state_rows(os, s, c.grid.n_cells);
      min_rho = std::min(min_rho, solver.min_density(s));
      const double dev = w_norm(difference(s, x0));
      max_dev = std::max(max_dev, dev);
      if (!std::isfinite(dev))
        throw dk::Error(ErrorKind::Numerical, "spde_solver", "state diverged before step " + std::to_string(k));
    }
  }
  const std::string name = stem("spde", p);
  out.write_csv(name, os.str(), point_meta(p));
  files.push_back(name);
  return {{"steps", steps},
          {"grid_size", solver.grid_size()},
          {"mass_initial", x0.rho_hat[0].real()},
          {"mass_final", s.rho_hat[0].real()},
          {"mass_bit_equal", mass_equal},
          {"min_density", min_rho},
          {"max_w_deviation", max_dev}};
}

json eval_small_noise(const ExperimentConfig& c, const PointSpec& p, Artifacts& out, json& files) {
  const auto r = small_noise_experiment(initial_state(c), solver_params(c, p), c.q, c.T, c.n_paths, p.seed);
  std::ostringstream os;
  os << "path,sup\n";
  for (std::size_t k = 0; k < r.sup_values.size(); ++k) os << k << ',' << format_double(r.sup_values[k]) << '\n';
  const std::string name = stem("small_noise", p);
  out.write_csv(name, os.str(), point_meta(p));
  files.push_back(name);
  return {{"q", r.q},
          {"mean", estimate(r.mean)},
          {"noise_scale", r.noise_scale},
          {"noise_scale_sq", r.noise_scale * r.noise_scale},
          {"wide_ci", r.wide_ci}};
}

json eval_positivity(const ExperimentConfig& c, const PointSpec& p, Artifacts&, json&) {
  const auto r = positivity_probability(initial_state(c), solver_params(c, p), c.T, c.n_paths, p.seed);
  return {{"n_paths", r.n_paths},
          {"exceed", r.exceed},
          {"fraction", r.fraction},
          {"wilson_lower", r.wilson.lower},
          {"wilson_upper", r.wilson.upper}};
}

json eval_covariance(const ExperimentConfig& c, const PointSpec& p, Artifacts& out, json& files) {
  std::vector<double> pts = c.points;
  if (pts.empty())
    for (int k = -3; k <= 3; ++k) pts.push_back(std::numbers::pi + k * p.epsilon / 2.0);
  const auto r = covariance_report(compare_config(c, p), pts, c.T, c.n_paths, c.fit_radius.value_or(-1.0));
  std::ostringstream os;
  write_pairs_csv(os, r);
  const std::string name = stem("pairs", p);
  out.write_csv(name, os.str(), point_meta(p));
  files.push_back(name);
  std::size_t fitted = 0;
  for (const auto& e : r.pairs) fitted += e.fitted;
  return {{"steps", r.steps},
          {"fit_radius", r.fit_radius},
          {"n_pairs", r.pairs.size()},
          {"n_fitted", fitted},
          {"c_diff_envelope", r.c_diff_envelope},
          {"c_abs_envelope", r.c_abs_envelope},
          {"c_diff_lsq", r.c_diff_lsq},
          {"c_abs_lsq", r.c_abs_lsq},
          {"n_noise_dominated", r.n_noise_dominated},
          {"degenerate_ok", r.degenerate_ok},
          {"wide_ci", r.wide_ci}};
}

json eval_variance(const ExperimentConfig& c, const PointSpec& p, Artifacts& out, json& files) {
  const auto s = simulate_joint(compare_config(c, p), {c.x}, c.T, c.n_paths);
  std::ostringstream os;
  os << "path,z,y\n";
  for (std::size_t k = 0; k < s.n_paths; ++k)
    os << k << ',' << format_double(s.z_at(k, 0)) << ',' << format_double(s.y_at(k, 0)) << '\n';
  const std::string name = stem("samples", p);
  out.write_csv(name, os.str(), point_meta(p));
  files.push_back(name);
  const auto vz = stats::variance_estimate(s.z);
  const auto vy = stats::variance_estimate(s.y);
  if (!(vz.value > 0.0 && vy.value > 0.0))
    throw dk::Error(ErrorKind::DegenerateLaw, "noise_compare", "a variance vanishes; log-log regression rejected");
  return {{"x", c.x}, {"var_z", estimate(vz)}, {"var_y", estimate(vy)}};
}

json eval_tightness(const ExperimentConfig& c, const PointSpec& p, Artifacts& out, json& files) {
  const auto r = tightness_lattice(compare_config(c, p), c.s_values, c.gaps, c.n_paths);
  std::ostringstream os;
  os << "s,t,total,total_se,i1,i1_se,cross,cross_se,ratio\n";
  json entries = json::array();
  for (const auto& e : r.entries) {
    os << format_double(e.s) << ',' << format_double(e.t) << ',' << format_double(e.total.value) << ','
       << format_double(e.total.se) << ',' << format_double(e.i1.value) << ',' << format_double(e.i1.se) << ','
       << format_double(e.cross.value) << ',' << format_double(e.cross.se) << ',' << format_double(e.ratio) << '\n';
    entries.push_back({{"s", e.s}, {"t", e.t}, {"ratio", e.ratio}});
  }
  const std::string name = stem("tightness", p);
  out.write_csv(name, os.str(), point_meta(p));
  files.push_back(name);
  return {{"entries", entries}, {"max_ratio", r.max_ratio}, {"min_ratio", r.min_ratio}};
}

json eval_inverse(const ExperimentConfig& c, const PointSpec& p, Artifacts&, json&) {
  const auto r = inverse_density_moment(compare_config(c, p), c.x, c.T, c.n_paths);
  return {{"x", r.x}, {"value", estimate(r.value)}, {"excluded", r.excluded}};
}

// ---- summaries ----

using Group = std::vector<const json*>;

// Points sharing (seed, theta) in epsilon order as given.
std::map<std::pair<std::uint64_t, double>, Group> by_seed_theta(const json& points) {
  std::map<std::pair<std::uint64_t, double>, Group> g;
  for (const auto& p : points) g[{p["seed"].get<std::uint64_t>(), p["theta"].get<double>()}].push_back(&p);
  return g;
}

json group_key(std::uint64_t seed, double theta) { return {{"seed", seed}, {"theta", theta}}; }

double metric(const json& p, const char* key) {
  const json& m = p["metrics"][key];
  return m.is_object() ? m["value"].get<double>() : m.get<double>();
}

json loglog(const Group& g, const char* xkey, const char* ykey, bool x_is_eps) {
  std::vector<double> lx, ly;
  for (const json* p : g) {
    const double x = x_is_eps ? (*p)["epsilon"].get<double>() : metric(*p, xkey);
    const double y = metric(*p, ykey);
    if (!(x > 0.0 && y > 0.0)) return nullptr;
    lx.push_back(std::log(x));
    ly.push_back(std::log(y));
  }
  if (lx.size() < 2) return nullptr;
  return fit_json(stats::linear_fit(lx, ly));
}

Summary sum_scaling(const json& points) {
  Summary s;
  s.result = json::array();
  bool pass = !points.empty();
  for (const auto& [key, g] : by_seed_theta(points)) {
    json r = group_key(key.first, key.second);
    json eps = json::array(), vz = json::array(), vy = json::array(), n = json::array();
    for (const json* p : g) {
      eps.push_back((*p)["epsilon"]);
      n.push_back((*p)["big_n"]);
      vz.push_back((*p)["metrics"]["var_z"]);
      vy.push_back((*p)["metrics"]["var_y"]);
    }
    r["epsilons"] = eps;
    r["big_n"] = n;
    r["var_z"] = vz;
    r["var_y"] = vy;
    r["expected_slope"] = key.second - 1.0;
    r["fit_z"] = loglog(g, nullptr, "var_z", true);
    r["fit_y"] = loglog(g, nullptr, "var_y", true);
    bool ok = g.size() >= 3 && !r["fit_z"].is_null() && !r["fit_y"].is_null();
    if (ok)
      for (const char* f : {"fit_z", "fit_y"})
        ok = ok && std::abs(r[f]["slope"].get<double>() - (key.second - 1.0)) <= 0.4;
    r["passed"] = ok;
    pass = pass && ok;
    s.result.push_back(r);
  }
  s.check = {{"passed", pass}, {"criterion", "|slope - (theta - 1)| <= 0.4 for Var Z and Var Y over >= 3 epsilons"}};
  return s;
}

Summary sum_small_noise(const json& points) {
  Summary s;
  s.result = json::array();
  bool pass = !points.empty();
  for (const auto& [key, g] : by_seed_theta(points)) {
    json r = group_key(key.first, key.second);
    r["fit"] = loglog(g, "noise_scale_sq", "mean", false);
    const bool ok = g.size() >= 3 && !r["fit"].is_null() && std::abs(r["fit"]["slope"].get<double>() - 1.0) <= 0.3;
    r["n_points"] = g.size();
    r["passed"] = ok;
    pass = pass && ok;
    s.result.push_back(r);
  }
  s.check = {{"passed", pass}, {"criterion", "slope of E sup ||X - Z||^q vs M^2 within 1 +- 0.3 over >= 3 points"}};
  return s;
}

Summary sum_covariance(const json& points) {
  Summary s;
  double dmin = INFINITY, dmax = 0.0, amin = INFINITY, amax = 0.0;
  bool degenerate = true;
  for (const auto& p : points) {
    const json& m = p["metrics"];
    dmin = std::min(dmin, m["c_diff_envelope"].get<double>());
    dmax = std::max(dmax, m["c_diff_envelope"].get<double>());
    amin = std::min(amin, m["c_abs_envelope"].get<double>());
    amax = std::max(amax, m["c_abs_envelope"].get<double>());
    degenerate = degenerate && m["degenerate_ok"].get<bool>();
  }
  const double rd = dmin > 0.0 ? dmax / dmin : INFINITY;
  const double ra = amin > 0.0 ? amax / amin : INFINITY;
  s.result = {{"c_diff", dmax}, {"c_abs", amax}, {"c_diff_stability", rd}, {"c_abs_stability", ra},
              {"degenerate_ok", degenerate}};
  s.check = {{"passed", !points.empty() && degenerate && rd < 3.0 && ra < 3.0},
             {"criterion", "coincident pairs agree and each fitted constant varies by less than 3x across points"}};
  return s;
}

Summary sum_tightness(const json& points) {
  Summary s;
  double lo = INFINITY, hi = 0.0;
  std::size_t used = 0;
  for (const auto& p : points)
    for (const auto& e : p["metrics"]["entries"]) {
      const double gap = e["t"].get<double>() - e["s"].get<double>();
      if (gap < 0.05 - 1e-12 || gap > 1.0 + 1e-12) continue;
      lo = std::min(lo, e["ratio"].get<double>());
      hi = std::max(hi, e["ratio"].get<double>());
      ++used;
    }
  const double spread = used && lo > 0.0 ? hi / lo : INFINITY;
  s.result = {{"max_ratio", hi}, {"min_ratio", used ? lo : 0.0}, {"spread", spread}, {"entries", used}};
  s.check = {{"passed", used > 0 && spread < 10.0},
             {"criterion", "max/min of E||rho(t) - rho(s)||^2 / (t - s)^2 over gaps in [0.05, 1] below 10"}};
  return s;
}

Summary sum_inverse(const json& points) {
  Summary s;
  s.result = json::array();
  bool pass = !points.empty();
  for (const auto& [key, g0] : by_seed_theta(points)) {
    Group g = g0;
    std::stable_sort(g.begin(), g.end(),
                     [](const json* a, const json* b) { return (*a)["epsilon"].get<double>() > (*b)["epsilon"].get<double>(); });
    std::vector<double> v;
    json eps = json::array();
    for (const json* p : g) {
      v.push_back(metric(*p, "value"));
      eps.push_back((*p)["epsilon"]);
    }
    const auto mk = stats::mann_kendall(v);
    json r = group_key(key.first, key.second);
    r["epsilons_decreasing"] = eps;
    r["values"] = v;
    r["mann_kendall"] = {{"s", mk.s}, {"p_increasing", mk.p_increasing}, {"exact", mk.exact}};
    r["passed"] = mk.p_increasing >= 0.05;
    pass = pass && mk.p_increasing >= 0.05;
    s.result.push_back(r);
  }
  s.check = {{"passed", pass}, {"criterion", "no increasing trend as epsilon shrinks (Mann-Kendall, 5%)"}};
  return s;
}

Summary sum_fields(const json& points) {
  // Roughness ordered by theta within each (seed, N).
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::vector<std::pair<double, double>>> g;
  for (const auto& p : points)
    g[{p["seed"].get<std::uint64_t>(), p["big_n"].get<std::uint64_t>()}].push_back(
        {p["theta"].get<double>(), metric(p, "roughness")});
  Summary s;
  s.result = json::array();
  bool pass = !points.empty();
  for (auto& [key, v] : g) {
    std::stable_sort(v.begin(), v.end());
    bool dec = true;
    for (std::size_t k = 1; k < v.size(); ++k) dec = dec && v[k].second < v[k - 1].second;
    json thetas = json::array(), rough = json::array();
    for (const auto& [t, r] : v) {
      thetas.push_back(t);
      rough.push_back(r);
    }
    s.result.push_back({{"seed", key.first}, {"big_n", key.second}, {"theta", thetas}, {"roughness", rough},
                        {"decreasing", dec}});
    pass = pass && dec;
  }
  s.check = {{"passed", pass}, {"criterion", "||rho'||_L2 strictly decreasing in theta at fixed N"}};
  return s;
}

Summary sum_particles(const json& points) {
  Summary s;
  bool pass = !points.empty();
  double worst = 0.0;
  for (const auto& p : points) {
    const json& m = p["metrics"];
    if (!m.contains("z_mean_q")) continue;
    worst = std::max({worst, std::abs(m["z_mean_q"].get<double>()), std::abs(m["z_mean_p"].get<double>())});
  }
  pass = pass && worst < 5.0;
  s.result = {{"max_abs_z", worst}};
  s.check = {{"passed", pass}, {"criterion", "ensemble means within 5 standard errors of the exact law (zero potential)"}};
  return s;
}

Summary sum_kernel(const json& points) {
  Summary s;
  bool pass = !points.empty();
  double worst = 0.0;
  for (const auto& p : points) {
    pass = pass && p["metrics"]["lambda0"].get<double>() == 1.0;
    worst = std::max(worst, p["metrics"]["trace_rel_err"].get<double>());
  }
  pass = pass && worst <= 1e-8;
  s.result = {{"max_trace_rel_err", worst}};
  s.check = {{"passed", pass}, {"criterion", "lambda_0 == 1 and trace identity within 1e-8"}};
  return s;
}

Summary sum_spde(const json& points) {
  Summary s;
  bool pass = !points.empty();
  double dev = 0.0;
  for (const auto& p : points) {
    pass = pass && p["metrics"]["mass_bit_equal"].get<bool>();
    dev = std::max(dev, p["metrics"]["max_w_deviation"].get<double>());
  }
  s.result = {{"max_w_deviation", dev}};
  s.check = {{"passed", pass}, {"criterion", "mass mode bit-constant along every trajectory"}};
  return s;
}

Summary sum_positivity(const ExperimentConfig& c, const json& points) {
  Summary s;
  bool pass = !points.empty();
  double worst = 0.0, worst_upper = 0.0;
  for (const auto& p : points) {
    const double f = p["metrics"]["fraction"].get<double>();
    const double u = p["metrics"]["wilson_upper"].get<double>();
    worst = std::max(worst, f);
    worst_upper = std::max(worst_upper, u);
    pass = pass && f < c.nu && u < 2.0 * c.nu;
  }
  s.result = {{"nu", c.nu}, {"max_fraction", worst}, {"max_wilson_upper", worst_upper}};
  s.check = {{"passed", pass}, {"criterion", "exceedance fraction below nu and Wilson upper bound below 2 nu"}};
  return s;
}

}  // namespace

json evaluate_point(const ExperimentConfig& c, const PointSpec& p, Artifacts& out) {
  json files = json::array();
  json m;
  const std::string& e = c.experiment;
  if (e == "particles") m = eval_particles(c, p, out, files);
  else if (e == "fields") m = eval_fields(c, p, out, files);
  else if (e == "kernel-spectrum") m = eval_kernel_spectrum(c, p, out, files);
  else if (e == "spde") m = eval_spde(c, p, out, files);
  else if (e == "small-noise") m = eval_small_noise(c, p, out, files);
  else if (e == "positivity") m = eval_positivity(c, p, out, files);
  else if (e == "covariance") m = eval_covariance(c, p, out, files);
  else if (e == "variance-scaling") m = eval_variance(c, p, out, files);
  else if (e == "tightness") m = eval_tightness(c, p, out, files);
  else if (e == "inverse-moment") m = eval_inverse(c, p, out, files);
  else throw ConfigError("unknown experiment " + e);
  return {{"index", p.index}, {"theta", p.theta},   {"epsilon", p.epsilon}, {"big_n", p.big_n},
          {"seed", p.seed},   {"metrics", m},       {"files", files}};
}

Summary summarize(const ExperimentConfig& c, const json& points) {
  const std::string& e = c.experiment;
  if (e == "particles") return sum_particles(points);
  if (e == "fields") return sum_fields(points);
  if (e == "kernel-spectrum") return sum_kernel(points);
  if (e == "spde") return sum_spde(points);
  if (e == "small-noise") return sum_small_noise(points);
  if (e == "positivity") return sum_positivity(c, points);
  if (e == "covariance") return sum_covariance(points);
  if (e == "variance-scaling") return sum_scaling(points);
  if (e == "tightness") return sum_tightness(points);
  return sum_inverse(points);
}

}  // namespace dk::app
