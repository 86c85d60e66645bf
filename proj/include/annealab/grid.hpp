#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "annealab/landscape.hpp"

namespace annealab {

// Values of f at cell centers of a rectangular grid, row-major (last axis
// fastest).
struct GridField {
  Box bounds;
  std::vector<std::size_t> shape;
  std::vector<double> cell_size;
  std::vector<double> values;

  std::size_t dim() const noexcept { return shape.size(); }
  std::size_t size() const noexcept { return values.size(); }

  std::vector<std::size_t> unravel(std::size_t flat) const;
  std::size_t ravel(std::span<const std::size_t> index) const;
  Point center(std::size_t flat) const;

  // Axis neighbors (2d-neighborhood, no diagonals), in a fixed order.
  template <typename Fn>
  void for_each_neighbor(std::size_t flat, Fn&& fn) const {
    std::size_t stride = 1;
    for (std::size_t a = dim(); a-- > 0;) {
      const std::size_t coord = (flat / stride) % shape[a];
      if (coord > 0) fn(flat - stride);
      if (coord + 1 < shape[a]) fn(flat + stride);
      stride *= shape[a];
    }
  }
};

inline constexpr double kDefaultCellBudget = 1e8;

GridField discretize(const Landscape& land, std::span<const std::size_t> shape,
                     double cell_budget = kDefaultCellBudget);

// Same number of cells on every axis.
GridField discretize(const Landscape& land, std::size_t cells_per_axis,
                     double cell_budget = kDefaultCellBudget);

}  // namespace annealab
