#pragma once

#include <vector>

#include "annealab/grid.hpp"
#include "annealab/random.hpp"

namespace annealab {

// Gibbs measure exp(-f/tau) on a 1-D grid. Weights are shifted by min f so
// the largest weight is 1 at any temperature.
struct GibbsMeasure1D {
  GridField grid;
  double tau = 1.0;
  double min_value = 0.0;
  double log_z = 0.0;          // ln of the trapezoid integral of exp(-f/tau)
  std::vector<double> cdf;     // cumulative cell masses, piecewise-constant density

  static GibbsMeasure1D build(const GridField& g, double tau);

  // Z_tau itself; may overflow or underflow for extreme min_value / tau.
  double z_tau() const;

  // Inverse CDF of the piecewise-constant density.
  double sample(double u_cell, double u_within) const;
  double sample(CounterStream& rng) const;
};

}  // namespace annealab
