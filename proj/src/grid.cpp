#include "annealab/grid.hpp"

#include <cmath>

#include "annealab/error.hpp"

namespace annealab {

std::vector<std::size_t> GridField::unravel(std::size_t flat) const {
  std::vector<std::size_t> index(dim());
  for (std::size_t a = dim(); a-- > 0;) {
    index[a] = flat % shape[a];
    flat /= shape[a];
  }
  return index;
}

std::size_t GridField::ravel(std::span<const std::size_t> index) const {
  std::size_t flat = 0;
  for (std::size_t a = 0; a < dim(); ++a) flat = flat * shape[a] + index[a];
  return flat;
}

Point GridField::center(std::size_t flat) const {
  Point x(dim());
  for (std::size_t a = dim(); a-- > 0;) {
    const std::size_t coord = flat % shape[a];
    flat /= shape[a];
    x[a] = bounds.lo[a] + (static_cast<double>(coord) + 0.5) * cell_size[a];
  }
  return x;
}

GridField discretize(const Landscape& land, std::span<const std::size_t> shape,
                     double cell_budget) {
  require(shape.size() == land.dim(), "grid shape must have one entry per dimension");
  double total = 1.0;
  for (std::size_t n : shape) {
    require(n >= 3, "grid needs at least 3 cells per axis");
    total *= static_cast<double>(n);
  }
  if (total > cell_budget) {
    fail(ErrorKind::kResource, "grid of " + std::to_string(total) + " cells exceeds budget");
  }

  GridField g;
  g.bounds = land.domain();
  g.shape.assign(shape.begin(), shape.end());
  for (std::size_t a = 0; a < shape.size(); ++a) {
    g.cell_size.push_back((g.bounds.hi[a] - g.bounds.lo[a]) / static_cast<double>(shape[a]));
  }
  g.values.resize(static_cast<std::size_t>(total));
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    const double v = land.value(g.center(i));
    if (!std::isfinite(v)) fail(ErrorKind::kInvalidInput, "landscape is non-finite on the grid");
    g.values[i] = v;
  }
  return g;
}

GridField discretize(const Landscape& land, std::size_t cells_per_axis, double cell_budget) {
  const std::vector<std::size_t> shape(land.dim(), cells_per_axis);
  return discretize(land, shape, cell_budget);
}

}  // namespace annealab
