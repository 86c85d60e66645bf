#include "annealab/gibbs.hpp"

#include <algorithm>
#include <cmath>

#include "annealab/error.hpp"

namespace annealab {

GibbsMeasure1D GibbsMeasure1D::build(const GridField& g, double tau) {
  if (g.dim() != 1) fail(ErrorKind::kUnsupported, "Gibbs sampling is implemented for 1-D grids only");
  require(tau > 0.0 && std::isfinite(tau), "temperature must be positive");
  GibbsMeasure1D m;
  m.grid = g;
  m.tau = tau;
  m.min_value = *std::min_element(g.values.begin(), g.values.end());

  const std::size_t n = g.size();
  m.cdf.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += std::exp(-(g.values[i] - m.min_value) / tau);
    m.cdf[i] = total;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    fail(ErrorKind::kInvalidInput, "Gibbs weights underflow; use a larger temperature");
  }
  for (auto& c : m.cdf) c /= total;
  m.cdf.back() = 1.0;

  const double first = std::exp(-(g.values.front() - m.min_value) / tau);
  const double last = std::exp(-(g.values.back() - m.min_value) / tau);
  const double trapezoid = g.cell_size[0] * (total - 0.5 * (first + last));
  m.log_z = std::log(trapezoid) - m.min_value / tau;
  return m;
}

double GibbsMeasure1D::z_tau() const { return std::exp(log_z); }

double GibbsMeasure1D::sample(double u_cell, double u_within) const {
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), u_cell);
  const auto cell = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
      it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
  return grid.bounds.lo[0] + (static_cast<double>(cell) + u_within) * grid.cell_size[0];
}

double GibbsMeasure1D::sample(CounterStream& rng) const {
  const double u1 = rng.next_uniform();
  const double u2 = rng.next_uniform();
  return sample(u1, u2);
}

}  // namespace annealab
