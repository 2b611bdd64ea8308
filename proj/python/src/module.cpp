#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dk/app/config.hpp"
#include "dk/app/runner.hpp"
#include "dk/error.hpp"
#include "dk/fields.hpp"
#include "dk/noise_compare.hpp"
#include "dk/particles.hpp"
#include "dk/periodic_kernel.hpp"
#include "dk/spde.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const std::vector<double>& v) { return Array(static_cast<py::ssize_t>(v.size()), v.data()); }

std::vector<double> to_vector(const Array& a) { return {a.data(), a.data() + a.size()}; }

py::dict estimate(const dk::stats::Estimate& e) { return py::dict("value"_a = e.value, "se"_a = e.se); }

dk::Potential potential_from(const py::object& spec) {
  if (spec.is_none()) return dk::ZeroPotential{};
  const auto d = spec.cast<py::dict>();
  const auto kind = d["kind"].cast<std::string>();
  if (kind == "zero") return dk::ZeroPotential{};
  if (kind == "even-polynomial") return dk::EvenPolynomial{d["coeffs"].cast<std::vector<double>>()};
  if (kind == "periodic-trig") {
    dk::PeriodicTrig t{d["a"].cast<std::vector<double>>(), {}};
    t.b = d.contains("b") ? d["b"].cast<std::vector<double>>() : std::vector<double>(t.a.size(), 0.0);
    return t;
  }
  throw py::value_error("unknown potential kind '" + kind + "'");
}

dk::CompareConfig compare_config(double epsilon, double theta, std::size_t big_n, double gamma, double sigma,
                                 const py::object& potential, std::pair<double, double> position_law,
                                 std::pair<double, double> momentum_law, double corr, int steps_per_unit,
                                 std::uint64_t seed) {
  dk::CompareConfig c;
  c.epsilon = epsilon;
  c.theta = theta;
  c.big_n = big_n;
  c.langevin = {gamma, sigma, potential_from(potential)};
  c.position_law = {position_law.first, position_law.second};
  c.momentum_law = {momentum_law.first, momentum_law.second};
  c.corr = corr;
  c.steps_per_unit = steps_per_unit;
  c.seed = seed;
  return c;
}

#define DK_COMPARE_ARGS                                                                                        \
  py::arg("epsilon") = 0.1, py::arg("theta") = 3.5, py::arg("big_n") = 0, py::arg("gamma") = 1.0,              \
      py::arg("sigma") = 1.4142135623730951, py::arg("potential") = py::none(),                                \
      py::arg("position_law") = std::pair{3.141592653589793, 1.5848931924611136},                              \
      py::arg("momentum_law") = std::pair{0.0, 1.0}, py::arg("corr") = 0.0, py::arg("steps_per_unit") = 256,   \
      py::arg("seed") = 1

dk::SolverParams solver_params(double epsilon, double big_n, double gamma, double sigma, double delta,
                               const py::object& potential, double dt, int m_trunc, double temperature) {
  dk::SolverParams p;
  p.epsilon = epsilon;
  p.big_n = big_n;
  p.gamma = gamma;
  p.sigma = sigma;
  p.delta = delta;
  const auto v = potential_from(potential);
  if (const auto* t = std::get_if<dk::PeriodicTrig>(&v)) p.potential = *t;
  else if (!std::holds_alternative<dk::ZeroPotential>(v)) throw py::value_error("the SPDE needs a periodic-trig potential");
  p.dt = dt;
  p.m_trunc = m_trunc;
  p.temperature = temperature;
  return p;
}

#define DK_SOLVER_ARGS                                                                                      \
  py::arg("epsilon") = 0.25, py::arg("big_n") = 1.0, py::arg("gamma") = 1.0,                                \
      py::arg("sigma") = 1.4142135623730951, py::arg("delta") = 0.1, py::arg("potential") = py::none(),     \
      py::arg("dt") = 1e-3, py::arg("m_trunc") = 128, py::arg("temperature") = 1.0

dk::SpectralState state_from(const Array& rho, const Array& j, int m_trunc) {
  if (rho.size() != j.size()) throw py::value_error("rho and j need the same length");
  return dk::state_from_grid(to_vector(rho), to_vector(j), m_trunc);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Regularised Dean-Kawasaki numerics";

  auto base = py::register_exception<dk::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<dk::app::ConfigError>(m, "ConfigError", PyExc_ValueError);

  // ---- gaussian / kernels ----
  m.def("gauss_kernel", py::vectorize(dk::gauss_kernel), "y"_a, "eps"_a);
  m.def("von_mises_kernel", py::vectorize(dk::von_mises_kernel), "x"_a, "eps"_a);
  m.def("bessel_i_scaled", [](int j_max, double z) { return to_array(dk::bessel_i_scaled(j_max, z)); }, "j_max"_a,
        "z"_a, "e^{-z} I_j(z) for j = 0..j_max");
  m.def(
      "kernel_eigenvalues",
      [](double eps, int j_max) {
        const auto s = dk::kernel_eigenvalues(eps, j_max);
        return py::dict("epsilon"_a = s.epsilon, "j_max"_a = s.j_max, "lambda"_a = to_array(s.lambda),
                        "alpha"_a = to_array(s.alpha), "normalizer"_a = s.normalizer, "tail"_a = s.tail);
      },
      "eps"_a, "j_max"_a = -1);
  m.def(
      "eigen_sum", [](double eps, int n) { return dk::eigen_sum(dk::kernel_eigenvalues(eps), n); }, "eps"_a, "n"_a);

  // ---- particles / fields ----
  m.def(
      "ou_moments",
      [](double t, double gamma, double sigma, std::pair<double, double> position_law,
         std::pair<double, double> momentum_law, double corr) {
        const auto g = dk::ou_moments(t, {gamma, sigma, dk::ZeroPotential{}},
                                      {position_law.first, momentum_law.first, position_law.second,
                                       momentum_law.second, corr});
        return py::dict("mean_q"_a = g.mean_q, "mean_p"_a = g.mean_p, "var_q"_a = g.var_q, "var_p"_a = g.var_p,
                        "corr"_a = g.corr);
      },
      "t"_a, "gamma"_a = 1.0, "sigma"_a = 1.4142135623730951, "position_law"_a = std::pair{0.0, 1.0},
      "momentum_law"_a = std::pair{0.0, 1.0}, "corr"_a = 0.0);
  m.def(
      "simulate_particles",
      [](std::size_t n, double T, double dt, double gamma, double sigma, const py::object& potential,
         std::pair<double, double> position_law, std::pair<double, double> momentum_law, double corr,
         std::uint64_t seed) {
        dk::LangevinParams lp{gamma, sigma, potential_from(potential)};
        auto e = dk::init_ensemble(n, {position_law.first, position_law.second},
                                   {momentum_law.first, momentum_law.second}, corr, seed);
        const auto steps = static_cast<long>(std::llround(T / dt));
        {
          py::gil_scoped_release release;
          for (long k = 0; k < steps; ++k) {
            if (dk::is_zero(lp.potential)) dk::ou_exact_step(e, lp, dt);
            else dk::em_step(e, lp, dt);
          }
        }
        return py::make_tuple(to_array(e.positions), to_array(e.momenta));
      },
      "n"_a, "T"_a = 1.0, "dt"_a = 1e-2, "gamma"_a = 1.0, "sigma"_a = 1.4142135623730951, "potential"_a = py::none(),
      "position_law"_a = std::pair{3.141592653589793, 1.5848931924611136}, "momentum_law"_a = std::pair{0.0, 1.0},
      "corr"_a = 0.0, "seed"_a = 1, "Positions and momenta after time T (exact OU steps when V = 0).");
  m.def(
      "smoothed_density",
      [](const Array& q, double eps, double x_min, double x_max, int n_cells, bool periodic, int order) {
        dk::Grid1D g = periodic ? dk::Grid1D{x_min, x_max, n_cells, true} : dk::line_grid(x_min, x_max, n_cells);
        dk::validate(g);
        const auto v = dk::kernel_sum(to_vector(q), {}, g, eps, dk::KernelFamily::GaussLine, order);
        std::vector<double> x(n_cells);
        for (int k = 0; k < n_cells; ++k) x[k] = g.x(k);
        return py::make_tuple(to_array(x), to_array(v));
      },
      "q"_a, "eps"_a, "x_min"_a = 0.0, "x_max"_a = 6.283185307179586, "n_cells"_a = 513, "periodic"_a = false,
      "order"_a = 0, "Grid and (1/N) sum_i w_eps^(order)(x - q_i).");

  // ---- noise comparison ----
  m.def(
      "covariance_report",
      [](const std::vector<double>& x, double t, std::size_t n_paths, double epsilon, double theta, std::size_t big_n,
         double gamma, double sigma, const py::object& potential, std::pair<double, double> pl,
         std::pair<double, double> ml, double corr, int spu, std::uint64_t seed) {
        const auto c = compare_config(epsilon, theta, big_n, gamma, sigma, potential, pl, ml, corr, spu, seed);
        dk::CovarianceReport r;
        {
          py::gil_scoped_release release;
          r = dk::covariance_report(c, x, t, n_paths);
        }
        py::list pairs;
        for (const auto& p : r.pairs)
          pairs.append(py::dict("x1"_a = p.x1, "x2"_a = p.x2, "cov_z"_a = estimate(p.cov_z), "cov_y"_a = estimate(p.cov_y),
                                "cov_z_formula"_a = estimate(p.cov_z_formula),
                                "diff_conditional"_a = estimate(p.diff_conditional),
                                "identity_gap"_a = estimate(p.identity_gap), "bound_diff"_a = p.bound_diff,
                                "bound_abs"_a = p.bound_abs, "fitted"_a = p.fitted, "degenerate"_a = p.degenerate));
        return py::dict("big_n"_a = r.big_n, "pairs"_a = pairs, "c_diff_envelope"_a = r.c_diff_envelope,
                        "c_abs_envelope"_a = r.c_abs_envelope, "degenerate_ok"_a = r.degenerate_ok);
      },
      "x"_a, "t"_a = 1.0, "n_paths"_a = 1000, DK_COMPARE_ARGS);
  m.def(
      "variance_scaling",
      [](const std::vector<double>& epsilons, double x, double t, std::size_t n_paths, double epsilon, double theta,
         std::size_t big_n, double gamma, double sigma, const py::object& potential, std::pair<double, double> pl,
         std::pair<double, double> ml, double corr, int spu, std::uint64_t seed) {
        const auto c = compare_config(epsilon, theta, big_n, gamma, sigma, potential, pl, ml, corr, spu, seed);
        dk::ScalingReport r;
        {
          py::gil_scoped_release release;
          r = dk::variance_scaling(c, epsilons, theta, x, t, n_paths);
        }
        std::vector<double> vz, vy;
        for (const auto& e : r.var_z) vz.push_back(e.value);
        for (const auto& e : r.var_y) vy.push_back(e.value);
        return py::dict("epsilons"_a = r.epsilons, "big_n"_a = r.big_n, "var_z"_a = vz, "var_y"_a = vy,
                        "slope_z"_a = r.fit_z.slope, "slope_y"_a = r.fit_y.slope);
      },
      "epsilons"_a, "x"_a = 3.141592653589793, "t"_a = 1.0, "n_paths"_a = 1000, DK_COMPARE_ARGS);
  m.def(
      "inverse_density_moment",
      [](double x, double t, std::size_t n_paths, double epsilon, double theta, std::size_t big_n, double gamma,
         double sigma, const py::object& potential, std::pair<double, double> pl, std::pair<double, double> ml,
         double corr, int spu, std::uint64_t seed) {
        const auto c = compare_config(epsilon, theta, big_n, gamma, sigma, potential, pl, ml, corr, spu, seed);
        const auto r = dk::inverse_density_moment(c, x, t, n_paths);
        return py::dict("value"_a = estimate(r.value), "excluded"_a = r.excluded);
      },
      "x"_a = 3.141592653589793, "t"_a = 1.0, "n_paths"_a = 1000, DK_COMPARE_ARGS);

  // ---- SPDE ----
  m.def("h_delta", py::vectorize(dk::h_delta), "z"_a, "delta"_a);
  m.def("h_delta_prime", py::vectorize(dk::h_delta_prime), "z"_a, "delta"_a);
  m.def("h_delta_lipschitz", &dk::h_delta_lipschitz, "delta"_a);
  m.def("noise_scale", &dk::noise_scale, "eps"_a, "big_n"_a);
  m.def(
      "mode_exponential",
      [](int mode, double t, double gamma, double kappa) {
        const auto e = dk::mode_exponential(mode, t, gamma, kappa);
        py::array_t<std::complex<double>> out({2, 2});
        auto v = out.mutable_unchecked<2>();
        v(0, 0) = e[0];
        v(0, 1) = e[1];
        v(1, 0) = e[2];
        v(1, 1) = e[3];
        return out;
      },
      "m"_a, "t"_a, "gamma"_a, "kappa"_a = 1.0);

  py::class_<dk::SpdeSolver>(m, "SpdeSolver")
      .def(py::init([](double epsilon, double big_n, double gamma, double sigma, double delta, const py::object& potential,
                       double dt, int m_trunc, double temperature) {
             return std::make_unique<dk::SpdeSolver>(
                 solver_params(epsilon, big_n, gamma, sigma, delta, potential, dt, m_trunc, temperature));
           }),
           DK_SOLVER_ARGS)
      .def_property_readonly("grid_size", &dk::SpdeSolver::grid_size)
      .def(
          "evolve",
          [](dk::SpdeSolver& s, const Array& rho, const Array& j, double T, std::uint64_t seed, int n_out) {
            const int m_trunc = s.params().m_trunc;
            auto st = state_from(rho, j, m_trunc);
            const auto steps = static_cast<long>(std::llround(T / s.params().dt));
            const bool noisy = s.params().sigma > 0.0;
            dk::Xoshiro256 gen(dk::derive_seed(seed, 0));
            {
              py::gil_scoped_release release;
              for (long k = 0; k < steps; ++k) {
                if (noisy) s.step(st, gen);
                else s.step_deterministic(st);
              }
            }
            const int n = n_out > 0 ? n_out : static_cast<int>(rho.size());
            return py::dict("time"_a = st.time, "rho"_a = to_array(dk::field_on_grid(st.rho_hat, n)),
                            "j"_a = to_array(dk::field_on_grid(st.j_hat, n)), "mass"_a = st.rho_hat[0].real());
          },
          "rho"_a, "j"_a, "T"_a, "seed"_a = 1, "n_out"_a = 0,
          "Evolve grid data on [0, 2pi) to time T; returns fields on n_out points.");
  m.def(
      "small_noise_experiment",
      [](const Array& rho, const Array& j, double q, double T, std::size_t n_paths, std::uint64_t seed, double epsilon,
         double big_n, double gamma, double sigma, double delta, const py::object& potential, double dt, int m_trunc,
         double temperature) {
        const auto p = solver_params(epsilon, big_n, gamma, sigma, delta, potential, dt, m_trunc, temperature);
        const auto x0 = state_from(rho, j, m_trunc);
        dk::SmallNoiseResult r;
        {
          py::gil_scoped_release release;
          r = dk::small_noise_experiment(x0, p, q, T, n_paths, seed);
        }
        return py::dict("mean"_a = estimate(r.mean), "noise_scale"_a = r.noise_scale, "sup_values"_a = to_array(r.sup_values));
      },
      "rho"_a, "j"_a, "q"_a = 2.0, "T"_a = 1.0, "n_paths"_a = 100, "seed"_a = 1, DK_SOLVER_ARGS);
  m.def(
      "positivity_probability",
      [](const Array& rho, const Array& j, double T, std::size_t n_paths, std::uint64_t seed, double epsilon,
         double big_n, double gamma, double sigma, double delta, const py::object& potential, double dt, int m_trunc,
         double temperature) {
        const auto p = solver_params(epsilon, big_n, gamma, sigma, delta, potential, dt, m_trunc, temperature);
        const auto x0 = state_from(rho, j, m_trunc);
        dk::PositivityResult r;
        {
          py::gil_scoped_release release;
          r = dk::positivity_probability(x0, p, T, n_paths, seed);
        }
        return py::dict("exceed"_a = r.exceed, "fraction"_a = r.fraction, "wilson_lower"_a = r.wilson.lower,
                        "wilson_upper"_a = r.wilson.upper);
      },
      "rho"_a, "j"_a, "T"_a = 1.0, "n_paths"_a = 100, "seed"_a = 1, DK_SOLVER_ARGS);

  // ---- runner ----
  m.def("schema", [] { return dk::app::experiment_schema_text(); });
  m.def("version", [] { return std::string(dk::app::tool_version()); });
  m.def(
      "validate_config",
      [](const std::string& text) { return dk::app::to_json(dk::app::parse_config(text, "config")).dump(); },
      "text"_a, "Canonical JSON of a config; raises ConfigError with line-precise messages.");
  m.def(
      "run_config",
      [](const std::string& text, const std::string& output_dir, bool check, bool sweep) {
        auto c = dk::app::parse_config(text, "config");
        dk::app::RunOptions opt{check, output_dir};
        std::ostringstream log;
        int code;
        {
          py::gil_scoped_release release;
          code = sweep ? dk::app::sweep(c, opt, log) : dk::app::run(c, opt, log);
        }
        return py::make_tuple(code, log.str());
      },
      "text"_a, "output_dir"_a = "", "check"_a = false, "sweep"_a = false,
      "Run a config like `dk run`/`dk sweep`; returns (exit_code, log).");
  (void)base;
}
