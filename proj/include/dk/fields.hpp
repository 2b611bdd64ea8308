#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "dk/gaussian.hpp"
#include "dk/particles.hpp"

namespace dk {

/// Node-centred grid. Periodic grids have n_cells nodes at x_min + k L / n_cells;
/// line grids have n_cells nodes including both end points.
struct Grid1D {
  double x_min = 0.0;
  double x_max = 6.283185307179586;
  int n_cells = 256;
  bool periodic = true;

  double length() const noexcept { return x_max - x_min; }
  double dx() const noexcept { return periodic ? length() / n_cells : length() / (n_cells - 1); }
  double x(int k) const noexcept { return x_min + k * dx(); }
};

void validate(const Grid1D& g);
Grid1D torus_grid(int n_cells);
Grid1D line_grid(double x_min, double x_max, int n_cells);

enum class FieldKind { Density, Momentum, J2 };
enum class KernelFamily { GaussLine, VonMisesTorus };

const char* to_string(FieldKind k);
const char* to_string(KernelFamily k);

struct SmoothedField {
  Grid1D grid;
  std::vector<double> values;
  double epsilon = 0.0;
  FieldKind kind = FieldKind::Density;
  KernelFamily kernel = KernelFamily::GaussLine;
};

/// (1/N) sum_i weight_i K^{(order)}_eps(x_k - q_i) on the grid nodes, with K the
/// Gaussian of variance eps^2 (wrapped onto periodic grids) or the periodic
/// kernel exp((cos d - 1)/eps^2) / Z. An empty weight span means unit weights.
std::vector<double> kernel_sum(std::span<const double> q, std::span<const double> weights, const Grid1D& grid,
                               double eps, KernelFamily kernel, int order);

SmoothedField smoothed_density(const ParticleEnsemble& e, const Grid1D& grid, double eps, KernelFamily kernel);
SmoothedField smoothed_momentum(const ParticleEnsemble& e, const Grid1D& grid, double eps, KernelFamily kernel);
SmoothedField smoothed_j2(const ParticleEnsemble& e, const Grid1D& grid, double eps, KernelFamily kernel);

/// E[p^a w_eps^{(b)}(x - q)] for (q, p) ~ law, a, b in {0, 1, 2}.
double expected_kernel_moments(double x, const BivariateGaussian& law, double eps, int derivative_order,
                               int momentum_power);

enum class Norm { L2, L4, H1 };

/// Trapezoid integral of the node values (periodic grids wrap).
double integrate(const Grid1D& grid, std::span<const double> values);
double field_norm(const SmoothedField& f, Norm which);

void write_field_csv(std::ostream& os, const SmoothedField& f);

}  // namespace dk
