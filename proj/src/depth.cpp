#include "annealab/depth.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "annealab/error.hpp"

namespace annealab {

UnionFind::UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
  std::iota(parent_.begin(), parent_.end(), std::size_t{0});
}

std::size_t UnionFind::find(std::size_t x) noexcept {
  while (parent_[x] != x) {
    parent_[x] = parent_[parent_[x]];
    x = parent_[x];
  }
  return x;
}

std::size_t UnionFind::unite(std::size_t a, std::size_t b) noexcept {
  a = find(a);
  b = find(b);
  if (a == b) return a;
  if (size_[a] < size_[b]) std::swap(a, b);
  parent_[b] = a;
  size_[a] += size_[b];
  return a;
}

MinimaSearch find_local_minima(const GridField& g) {
  MinimaSearch out;
  std::size_t plateau_cells = 0;
  for (std::size_t c = 0; c < g.size(); ++c) {
    const double v = g.values[c];
    bool strict = true, weak = true;
    g.for_each_neighbor(c, [&](std::size_t n) {
      if (g.values[n] <= v) strict = false;
      if (g.values[n] < v) weak = false;
    });
    if (strict) {
      out.minima.push_back({c, g.center(c), v});
    } else if (weak) {
      ++plateau_cells;
    }
  }
  if (plateau_cells > 0) {
    out.warnings.push_back("plateau: " + std::to_string(plateau_cells) +
                           " cell(s) tie with a neighbor and were excluded from minima");
  }
  std::sort(out.minima.begin(), out.minima.end(), [](const auto& a, const auto& b) {
    return a.value != b.value ? a.value < b.value : a.cell < b.cell;
  });
  return out;
}

SaddleTable compute_saddle_table(const GridField& g, const std::vector<GridMinimum>& minima) {
  const std::size_t n = minima.size();
  SaddleTable table;
  table.n = n;
  table.heights.assign(n * n, 0.0);
  table.cells.assign(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    table.heights[i * n + i] = minima[i].value;
    table.cells[i * n + i] = minima[i].cell;
  }
  if (n <= 1) return table;

  std::vector<std::size_t> order(g.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return g.values[a] != g.values[b] ? g.values[a] < g.values[b] : a < b;
  });

  // Minima labels carried by each component root.
  std::vector<std::vector<std::size_t>> labels(g.size());
  for (std::size_t i = 0; i < n; ++i) labels[minima[i].cell].push_back(i);

  UnionFind uf(g.size());
  std::vector<char> active(g.size(), 0);
  std::size_t labelled_components = n;
  for (std::size_t c : order) {
    active[c] = 1;
    g.for_each_neighbor(c, [&](std::size_t nb) {
      if (!active[nb]) return;
      const std::size_t ra = uf.find(c), rb = uf.find(nb);
      if (ra == rb) return;
      if (!labels[ra].empty() && !labels[rb].empty()) {
        for (std::size_t i : labels[ra]) {
          for (std::size_t j : labels[rb]) {
            table.heights[i * n + j] = table.heights[j * n + i] = g.values[c];
            table.cells[i * n + j] = table.cells[j * n + i] = c;
          }
        }
        --labelled_components;
      }
      const std::size_t root = uf.unite(ra, rb);
      const std::size_t other = root == ra ? rb : ra;
      auto& dst = labels[root];
      auto& src = labels[other];
      dst.insert(dst.end(), src.begin(), src.end());
      src.clear();
      src.shrink_to_fit();
    });
    if (labelled_components == 1) break;
  }
  return table;
}

double saddle_height(const GridField& g, const std::vector<GridMinimum>& minima,
                     std::size_t i, std::size_t j) {
  require(i < minima.size() && j < minima.size(), "minimum index out of range");
  if (i == j) return minima[i].value;
  return compute_saddle_table(g, minima).height(i, j);
}

namespace {

// Number of negative Hessian eigenvalues from grid central differences, or -1
// when the cell touches the boundary.
int grid_morse_index(const GridField& g, std::size_t cell) {
  const std::size_t d = g.dim();
  const auto idx = g.unravel(cell);
  for (std::size_t a = 0; a < d; ++a) {
    if (idx[a] == 0 || idx[a] + 1 >= g.shape[a]) return -1;
  }
  auto at = [&](std::vector<std::size_t> k) { return g.values[g.ravel(k)]; };
  Eigen::MatrixXd h(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  const double f0 = g.values[cell];
  for (std::size_t a = 0; a < d; ++a) {
    auto p = idx, m = idx;
    ++p[a];
    --m[a];
    h(a, a) = (at(p) - 2.0 * f0 + at(m)) / (g.cell_size[a] * g.cell_size[a]);
    for (std::size_t b = a + 1; b < d; ++b) {
      auto pp = idx, pm = idx, mp = idx, mm = idx;
      ++pp[a], ++pp[b];
      ++pm[a], --pm[b];
      --mp[a], ++mp[b];
      --mm[a], --mm[b];
      const double v =
          (at(pp) - at(pm) - at(mp) + at(mm)) / (4.0 * g.cell_size[a] * g.cell_size[b]);
      h(a, b) = h(b, a) = v;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h, Eigen::EigenvaluesOnly);
  int negatives = 0;
  for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k) {
    if (solver.eigenvalues()[k] < 0.0) ++negatives;
  }
  return negatives;
}

}  // namespace

DepthReport critical_depth(const GridField& g) {
  MinimaSearch search = find_local_minima(g);
  if (search.minima.empty()) {
    fail(ErrorKind::kDegenerateInput, "no strict local minimum on the grid (all-plateau field)");
  }
  DepthReport report;
  report.warnings = std::move(search.warnings);
  report.minima = std::move(search.minima);
  report.saddles = compute_saddle_table(g, report.minima);

  const std::size_t n = report.minima.size();
  report.saddle_points.reserve(n * n);
  for (std::size_t k = 0; k < n * n; ++k) report.saddle_points.push_back(g.center(report.saddles.cells[k]));

  if (n > 1 && report.minima[1].value - report.minima[0].value <= kDepthTieTolerance) {
    report.warnings.push_back("global minimum is not unique: two lowest minima tie");
  }

  std::vector<double> barriers;
  for (std::size_t i = 1; i < n; ++i) {
    const double barrier = report.saddles.height(i, 0) - report.minima[i].value;
    barriers.push_back(barrier);
    if (barrier > report.critical_depth || report.dominating_index == 0) {
      report.critical_depth = barrier;
      report.dominating_index = i;
    }
  }
  if (barriers.size() > 1) {
    std::sort(barriers.begin(), barriers.end(), std::greater<>());
    if (barriers[0] - barriers[1] <= kDepthTieTolerance) {
      report.warnings.push_back("dominating barrier is not unique");
    }
  }

  if (g.dim() <= 2) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const int index = grid_morse_index(g, report.saddles.cell(i, j));
        if (index != 1) {
          std::ostringstream os;
          os << "saddle between minima " << i << " and " << j;
          if (index < 0) {
            os << " lies on the grid boundary";
          } else {
            os << " has Morse index " << index << " (expected 1)";
          }
          report.warnings.push_back(os.str());
        }
      }
    }
  }
  return report;
}

}  // namespace annealab
