#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "annealab/depth.hpp"
#include "annealab/error.hpp"
#include "annealab/random.hpp"

namespace annealab {
namespace {

// Double well (a = 0.2) values relative to the global minimum, from an
// mpmath critical-point solve.
constexpr double kSaddleHeight = 1.2074467158313683;
constexpr double kShallowMin = 0.39987458720309894;
constexpr double kCriticalDepth = 0.807572128628269;
constexpr double kTripleWellDepth = 0.93097828333333288;

GridField random_field(std::vector<std::size_t> shape, std::uint64_t seed, int levels) {
  GridField g;
  std::size_t total = 1;
  for (std::size_t n : shape) {
    g.bounds.lo.push_back(0.0);
    g.bounds.hi.push_back(static_cast<double>(n));
    g.cell_size.push_back(1.0);
    total *= n;
  }
  g.shape = std::move(shape);
  CounterStream rng(seed, 0);
  for (std::size_t i = 0; i < total; ++i) {
    // Coarse levels plus a unique tiny offset keep ties rare but values distinct.
    const double level = std::floor(rng.next_uniform() * levels);
    g.values.push_back(level + 1e-6 * rng.next_uniform());
  }
  return g;
}

bool connected_below(const GridField& g, std::size_t from, std::size_t to, double t) {
  if (g.values[from] > t || g.values[to] > t) return false;
  std::vector<char> seen(g.size(), 0);
  std::queue<std::size_t> q;
  q.push(from);
  seen[from] = 1;
  while (!q.empty()) {
    const std::size_t c = q.front();
    q.pop();
    if (c == to) return true;
    g.for_each_neighbor(c, [&](std::size_t n) {
      if (!seen[n] && g.values[n] <= t) {
        seen[n] = 1;
        q.push(n);
      }
    });
  }
  return false;
}

// Smallest grid value t for which {f <= t} connects the two cells.
double brute_force_saddle(const GridField& g, std::size_t a, std::size_t b) {
  std::vector<double> levels = g.values;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  std::size_t lo = 0, hi = levels.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (connected_below(g, a, b, levels[mid])) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return levels[lo];
}

TEST(Discretize, QuadraticThreeCells) {
  const GridField g = discretize(quadratic(1, 1.0), 3);
  ASSERT_EQ(g.size(), 3u);
  EXPECT_NEAR(g.center(0)[0], -2.0 / 3.0, 1e-15);
  EXPECT_EQ(g.center(1)[0], 0.0);
  EXPECT_NEAR(g.center(2)[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(g.values[0], 2.0 / 9.0, 1e-15);
  EXPECT_EQ(g.values[1], 0.0);
  EXPECT_NEAR(g.values[2], 2.0 / 9.0, 1e-15);
}

TEST(Discretize, DoubleWellGridMinimum) {
  const GridField g = discretize(double_well(0.2), 4096);
  EXPECT_NEAR(*std::min_element(g.values.begin(), g.values.end()), -0.202440434344822, 1e-6);
}

TEST(Discretize, Preconditions) {
  const std::vector<std::size_t> bad{2};
  EXPECT_THROW(discretize(double_well(0.2), bad), Error);
  try {
    discretize(quadratic(3), 1000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kResource);
  }
}

TEST(Discretize, RowMajorIndexing) {
  const std::vector<std::size_t> shape{3, 4};
  const GridField g = discretize(double_well_2d(0.2), shape);
  const std::vector<std::size_t> idx{2, 1};
  EXPECT_EQ(g.ravel(idx), 9u);
  EXPECT_EQ(g.unravel(9), idx);
  std::vector<std::size_t> nbrs;
  g.for_each_neighbor(0, [&](std::size_t n) { nbrs.push_back(n); });
  std::sort(nbrs.begin(), nbrs.end());
  EXPECT_EQ(nbrs, (std::vector<std::size_t>{1, 4}));
}

TEST(LocalMinima, Quadratic) {
  const auto search = find_local_minima(discretize(quadratic(1), 101));
  ASSERT_EQ(search.minima.size(), 1u);
  EXPECT_EQ(search.minima[0].cell, 50u);
}

TEST(LocalMinima, DoubleWell) {
  const auto search = find_local_minima(discretize(double_well(0.2), 4096));
  ASSERT_EQ(search.minima.size(), 2u);
  EXPECT_NEAR(search.minima[0].x[0], -1.0241203002150503, 1e-3);
  EXPECT_NEAR(search.minima[1].x[0], 0.9739943532312778, 1e-3);
}

TEST(LocalMinima, TripleWell) {
  const auto search = find_local_minima(discretize(triple_well(), 4096));
  ASSERT_EQ(search.minima.size(), 3u);
  EXPECT_NEAR(search.minima[0].x[0], 1.6, 2e-3);
  EXPECT_NEAR(search.minima[1].x[0], -1.5, 2e-3);
  EXPECT_NEAR(search.minima[2].x[0], 0.0, 2e-3);
}

TEST(LocalMinima, PlateauExcludedWithWarning) {
  GridField g = random_field({7}, 1, 1);
  g.values = {3, 1, 1, 2, 0.5, 2, 3};
  const auto search = find_local_minima(g);
  ASSERT_EQ(search.minima.size(), 1u);
  EXPECT_EQ(search.minima[0].cell, 4u);
  EXPECT_FALSE(search.warnings.empty());
}

TEST(CriticalDepth, AllPlateauIsDegenerate) {
  GridField g = random_field({5, 5}, 1, 1);
  std::fill(g.values.begin(), g.values.end(), 1.0);
  try {
    critical_depth(g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerateInput);
  }
}

TEST(SaddleHeight, DiagonalIsMinimumValue) {
  const GridField g = discretize(normalize(triple_well(), 2048), 2048);
  const auto minima = find_local_minima(g).minima;
  for (std::size_t i = 0; i < minima.size(); ++i) {
    EXPECT_EQ(saddle_height(g, minima, i, i), minima[i].value);
  }
}

TEST(SaddleHeight, DoubleWellBarrier) {
  const std::size_t cells = 4096;
  const Landscape land = normalize(double_well(0.2), cells);
  const GridField g = discretize(land, cells);
  const auto minima = find_local_minima(g).minima;
  const double h = saddle_height(g, minima, 0, 1);
  const double max_slope = 4.0 * 8.0 + 4.0 * 2.0 + 0.2;
  EXPECT_NEAR(h, kSaddleHeight, 2.0 * g.cell_size[0] * max_slope);
  EXPECT_NEAR(h, kSaddleHeight, 1e-5);
  const DepthReport rep = critical_depth(g);
  EXPECT_NEAR(rep.saddle_points[1][0], 0.050125946983772554, 2.0 * g.cell_size[0]);
}

TEST(SaddleHeight, TwoDimensionalMatchesSlice) {
  const Landscape land = normalize(double_well_2d(0.2), 801);
  const GridField g = discretize(land, 801);
  const DepthReport rep = critical_depth(g);
  ASSERT_EQ(rep.minima.size(), 2u);
  EXPECT_NEAR(rep.saddles.height(0, 1), kSaddleHeight, 2e-4);
  EXPECT_NEAR(rep.critical_depth, kCriticalDepth, 2e-4);
}

TEST(CriticalDepth, Quadratic) {
  const DepthReport rep = critical_depth(discretize(quadratic(2), 101));
  EXPECT_EQ(rep.minima.size(), 1u);
  EXPECT_EQ(rep.critical_depth, 0.0);
}

TEST(CriticalDepth, DoubleWellOracle) {
  const std::size_t cells = std::size_t{1} << 14;
  const DepthReport rep = critical_depth(discretize(normalize(double_well(0.2), cells), cells));
  ASSERT_EQ(rep.minima.size(), 2u);
  EXPECT_NEAR(rep.critical_depth, kCriticalDepth, 1e-3);
  EXPECT_NEAR(rep.critical_depth, kSaddleHeight - kShallowMin, 1e-6);
  EXPECT_EQ(rep.dominating_index, 1u);
  EXPECT_TRUE(rep.warnings.empty());
}

TEST(CriticalDepth, TripleWellOracle) {
  const std::size_t cells = std::size_t{1} << 14;
  const DepthReport rep = critical_depth(discretize(normalize(triple_well(), cells), cells));
  ASSERT_EQ(rep.minima.size(), 3u);
  EXPECT_NEAR(rep.critical_depth, kTripleWellDepth, 1e-3);
  EXPECT_EQ(rep.dominating_index, 1u);
}

TEST(CriticalDepth, SymmetricWellWarnsAboutTie) {
  const DepthReport rep = critical_depth(discretize(double_well(0.0), 4096));
  EXPECT_FALSE(rep.warnings.empty());
}

TEST(CriticalDepth, ResolutionConvergence) {
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 8; k <= 14; ++k) {
    const std::size_t cells = std::size_t{1} << k;
    const double e = critical_depth(discretize(normalize(double_well(0.2), cells), cells)).critical_depth;
    const double err = std::abs(e - kCriticalDepth);
    EXPECT_LE(err, prev) << "k=" << k;
    prev = err;
  }
  EXPECT_LE(prev, 1e-3);
}

TEST(CriticalDepth, MirroredGridGivesSameDepth) {
  const GridField g = discretize(triple_well(), 3001);
  GridField mirrored = g;
  std::reverse(mirrored.values.begin(), mirrored.values.end());
  EXPECT_EQ(critical_depth(g).critical_depth, critical_depth(mirrored).critical_depth);
}

void check_table_invariants(const GridField& g) {
  const DepthReport rep = critical_depth(g);
  const auto& s = rep.saddles;
  const std::size_t n = rep.minima.size();
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_EQ(s.height(i, i), rep.minima[i].value);
    for (std::size_t j = 0; j < n; ++j) {
      EXPECT_EQ(s.height(i, j), s.height(j, i));
      EXPECT_GE(s.height(i, j), std::max(rep.minima[i].value, rep.minima[j].value));
      for (std::size_t k = 0; k < n; ++k) {
        EXPECT_LE(s.height(i, k), std::max(s.height(i, j), s.height(j, k)));
      }
    }
  }
  double e_star = 0.0;
  for (std::size_t i = 1; i < n; ++i) e_star = std::max(e_star, s.height(i, 0) - rep.minima[i].value);
  EXPECT_EQ(rep.critical_depth, e_star);
}

TEST(CriticalDepth, UltrametricOnCatalog) {
  check_table_invariants(discretize(double_well(0.2), 2048));
  check_table_invariants(discretize(triple_well(), 2048));
  check_table_invariants(discretize(quadratic(2), 65));
  check_table_invariants(discretize(double_well_2d(0.3), 129));
}

TEST(CriticalDepth, UltrametricOnRandomFields) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    check_table_invariants(random_field({20, 20}, seed, 50));
  }
}

void check_brute_force(const GridField& g) {
  const auto minima = find_local_minima(g).minima;
  const SaddleTable table = compute_saddle_table(g, minima);
  // Every pair touching the first few minima, which covers the global one.
  const std::size_t rows = std::min<std::size_t>(minima.size(), 4);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = i + 1; j < minima.size() && j < i + 80; ++j) {
      const double oracle = brute_force_saddle(g, minima[i].cell, minima[j].cell);
      ASSERT_EQ(table.height(i, j), oracle) << "pair " << i << "," << j;
      ASSERT_EQ(saddle_height(g, minima, i, j), oracle);
      ASSERT_EQ(g.values[table.cell(i, j)], oracle);
    }
  }
}

TEST(BruteForce, RandomOneDimensional) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) check_brute_force(random_field({500}, seed, 30));
}

TEST(BruteForce, RandomTwoDimensional) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) check_brute_force(random_field({30, 40}, seed, 20));
  check_brute_force(random_field({100, 100}, 99, 200));
}

TEST(BruteForce, RandomThreeDimensional) {
  check_brute_force(random_field({12, 12, 12}, 4, 30));
}

TEST(BruteForce, CatalogGrids) {
  check_brute_force(discretize(triple_well(), 9999));
  check_brute_force(discretize(double_well_2d(0.2), 99));
}

TEST(UnionFind, Basics) {
  UnionFind uf(6);
  EXPECT_NE(uf.find(0), uf.find(1));
  uf.unite(0, 1);
  uf.unite(2, 3);
  EXPECT_EQ(uf.find(0), uf.find(1));
  EXPECT_NE(uf.find(1), uf.find(2));
  uf.unite(1, 3);
  EXPECT_EQ(uf.find(0), uf.find(2));
  EXPECT_NE(uf.find(4), uf.find(5));
}

}  // namespace
}  // namespace annealab
