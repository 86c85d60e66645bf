#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "annealab/grid.hpp"

namespace annealab {

// Disjoint-set forest with path halving and union by size.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n);

  std::size_t find(std::size_t x) noexcept;
  // Returns the new root.
  std::size_t unite(std::size_t a, std::size_t b) noexcept;

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

struct GridMinimum {
  std::size_t cell = 0;
  Point x;
  double value = 0.0;
};

struct MinimaSearch {
  std::vector<GridMinimum> minima;  // ascending by value, ties by cell index
  std::vector<std::string> warnings;
};

// Cells strictly below every axis neighbor. Cells that tie with a neighbor
// while lying at or below all of them are plateau cells: excluded, warned.
MinimaSearch find_local_minima(const GridField& g);

// All-pairs saddle heights from one ascending union-find sweep. Entry (i, j)
// is the value of the first inserted cell that joins the components of
// minima[i] and minima[j].
struct SaddleTable {
  std::size_t n = 0;
  std::vector<double> heights;       // n x n, row-major
  std::vector<std::size_t> cells;    // communicating cell per pair

  double height(std::size_t i, std::size_t j) const { return heights[i * n + j]; }
  std::size_t cell(std::size_t i, std::size_t j) const { return cells[i * n + j]; }
};

SaddleTable compute_saddle_table(const GridField& g, const std::vector<GridMinimum>& minima);

// Single-pair query; i == j returns f(m_i).
double saddle_height(const GridField& g, const std::vector<GridMinimum>& minima,
                     std::size_t i, std::size_t j);

struct DepthReport {
  std::vector<GridMinimum> minima;
  SaddleTable saddles;
  std::vector<Point> saddle_points;  // n x n grid points s_ij
  double critical_depth = 0.0;
  std::size_t dominating_index = 0;
  std::vector<std::string> warnings;
};

inline constexpr double kDepthTieTolerance = 1e-9;

// Critical depth max_{i != 0} (saddle(m_i, m_0) - f(m_i)); 0 for one minimum.
// Raises degenerate-input when the grid has no strict local minimum.
DepthReport critical_depth(const GridField& g);

}  // namespace annealab
