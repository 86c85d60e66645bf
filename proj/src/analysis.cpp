#include "annealab/analysis.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "annealab/depth.hpp"
#include "annealab/error.hpp"

namespace annealab {

// Tail estimation -------------------------------------------------------------

std::pair<double, double> wilson_interval(std::uint64_t successes, std::uint64_t trials,
                                          double ci_level) {
  require(trials >= 1, "Wilson interval needs at least one trial");
  require(successes <= trials, "successes exceed trials");
  require(ci_level > 0.0 && ci_level < 1.0, "confidence level must lie in (0, 1)");
  const double z = boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * ci_level);
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2n = z * z / n;
  const double center = (p + 0.5 * z2n) / (1.0 + z2n);
  const double half = z * std::sqrt(p * (1.0 - p) / n + 0.25 * z2n / n) / (1.0 + z2n);
  double lo = std::max(0.0, center - half);
  double hi = std::min(1.0, center + half);
  if (successes == 0) lo = 0.0;
  if (successes == trials) hi = 1.0;
  return {std::min(lo, p), std::max(hi, p)};
}

TailCurve estimate_tail(const CheckpointGrid& grid, std::span<const double> f_values,
                        double delta, double ci_level) {
  const std::size_t m = grid.size();
  require(m > 0, "checkpoint grid is empty");
  require(grid.theta_cum.size() == m && grid.tau.size() == m, "checkpoint grid columns differ in length");
  require(f_values.size() % m == 0 && !f_values.empty(),
          "per-chain values do not match the checkpoint grid");
  require(delta > 0.0, "delta must be positive");
  const std::size_t n = f_values.size() / m;

  TailCurve curve;
  curve.delta = delta;
  for (std::size_t j = 0; j < m; ++j) {
    if (j > 0) require(grid.k[j] > grid.k[j - 1], "checkpoints must be strictly increasing");
    std::uint64_t exceed = 0;
    for (std::size_t c = 0; c < n; ++c) {
      const double v = f_values[c * m + j];
      if (!(v <= delta)) ++exceed;
    }
    TailRow row{grid.k[j], grid.theta_cum[j], grid.tau[j], n, exceed,
                static_cast<double>(exceed) / static_cast<double>(n), 0.0, 0.0};
    std::tie(row.ci_lo, row.ci_hi) = wilson_interval(exceed, n, ci_level);
    curve.rows.push_back(row);
  }
  return curve;
}

TailCurve estimate_tail(std::span<const Trajectory> trajectories, double delta, double ci_level) {
  require(!trajectories.empty(), "need at least one chain");
  CheckpointGrid grid;
  for (const auto& p : trajectories.front().checkpoints) {
    grid.k.push_back(p.k);
    grid.theta_cum.push_back(p.theta);
    grid.tau.push_back(p.tau);
  }
  std::vector<double> values;
  values.reserve(grid.size() * trajectories.size());
  for (const auto& t : trajectories) {
    require(t.checkpoints.size() == grid.size(), "chains have mismatched checkpoint grids");
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const auto& p = t.checkpoints[j];
      require(p.k == grid.k[j] && p.theta == grid.theta_cum[j] && p.tau == grid.tau[j],
              "chains have mismatched checkpoint grids");
      values.push_back(p.f_value);
    }
  }
  return estimate_tail(grid, values, delta, ci_level);
}

// Decay fits ------------------------------------------------------------------

LinearFit least_squares(std::span<const double> xs, std::span<const double> ys) {
  require(xs.size() == ys.size() && xs.size() >= 2, "least squares needs >= 2 paired points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  require(sxx > 0.0, "least squares needs distinct abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  return fit;
}

double default_burn_in_theta(const CoolingSchedule& cs) {
  return std::max(0.0, 100.0 - cs.t_offset);
}

std::vector<TailRow> usable_rows(const TailCurve& curve, const FitOptions& options) {
  std::vector<TailRow> rows;
  for (const auto& r : curve.rows) {
    if (r.theta_cum >= options.burn_in_theta && r.n_exceed >= options.min_exceed && r.p_hat > 0.0) {
      rows.push_back(r);
    }
  }
  return rows;
}

FitResult fit_decay(const TailCurve& curve, const FitOptions& options) {
  const auto rows = usable_rows(curve, options);
  if (rows.size() < 3) {
    fail(ErrorKind::kInsufficientData,
         "decay fit needs >= 3 usable rows after burn-in, found " + std::to_string(rows.size()));
  }
  std::vector<double> xs, ys;
  for (const auto& r : rows) {
    xs.push_back(std::log(r.theta_cum));
    ys.push_back(std::log(r.p_hat));
  }
  const LinearFit lf = least_squares(xs, ys);
  return {lf.slope, lf.intercept, lf.r_squared, rows.size(), rows.front().k};
}

FitResult fit_decay(const TailCurve& curve, double burn_in_theta) {
  return fit_decay(curve, FitOptions{burn_in_theta, 5});
}

BoundCheck theoretical_bound_check(const TailCurve& curve, double rate, double epsilon,
                                   const FitOptions& options) {
  require(rate >= 0.0 && epsilon > 0.0, "rate must be nonnegative and epsilon positive");
  require(!curve.rows.empty(), "tail curve is empty");
  const auto rows = usable_rows(curve, options);
  BoundCheck out;
  out.n_usable = rows.size();
  if (rows.size() < 2) return out;

  const double exponent = rate - epsilon;
  for (const auto& r : rows) {
    out.fitted_c = std::max(out.fitted_c, r.ci_hi * std::pow(r.theta_cum, exponent));
  }
  const std::size_t half = rows.size() / 2;
  for (std::size_t i = 0; i < half; ++i) {
    out.first_half_c =
        std::max(out.first_half_c, rows[i].ci_hi * std::pow(rows[i].theta_cum, exponent));
  }
  for (std::size_t i = half; i < rows.size(); ++i) {
    ++out.n_checked;
    if (rows[i].ci_lo > out.first_half_c * std::pow(rows[i].theta_cum, -exponent)) {
      ++out.n_violations;
    }
  }
  out.holds = out.n_violations == 0;
  return out;
}

// Gibbs quadrature -------------------------------------------------------------

namespace {

double grid_min(const GridField& g) { return *std::min_element(g.values.begin(), g.values.end()); }

// Trapezoid node weight: product over axes of 1/2 at the end nodes.
double node_weight(const GridField& g, std::size_t flat) {
  double w = 1.0;
  for (std::size_t a = g.dim(); a-- > 0;) {
    const std::size_t c = flat % g.shape[a];
    flat /= g.shape[a];
    if (c == 0 || c + 1 == g.shape[a]) w *= 0.5;
  }
  return w;
}

double cell_volume(const GridField& g) {
  double v = 1.0;
  for (double h : g.cell_size) v *= h;
  return v;
}

}  // namespace

double log_partition_function(const GridField& g, double tau) {
  require(tau > 0.0 && std::isfinite(tau), "temperature must be positive");
  const double fmin = grid_min(g);
  double sum = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    sum += node_weight(g, i) * std::exp(-(g.values[i] - fmin) / tau);
  }
  return std::log(sum * cell_volume(g)) - fmin / tau;
}

double gibbs_tail_quadrature(const GridField& g, double tau, double delta) {
  require(tau > 0.0 && std::isfinite(tau), "temperature must be positive");
  require(std::isfinite(delta), "delta must be finite");
  const double fmin = grid_min(g);
  if (delta < fmin) return 1.0;
  auto weight = [&](double f) { return std::exp(-(f - fmin) / tau); };

  double total = 0.0, tail = 0.0;
  if (g.dim() == 1) {
    const auto& v = g.values;
    const double w_level = weight(delta);
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      const double wl = weight(v[i]), wr = weight(v[i + 1]);
      total += 0.5 * (wl + wr);
      const bool left_above = v[i] > delta, right_above = v[i + 1] > delta;
      if (left_above && right_above) {
        tail += 0.5 * (wl + wr);
      } else if (left_above != right_above) {
        const double t = (delta - v[i]) / (v[i + 1] - v[i]);
        tail += left_above ? 0.5 * t * (wl + w_level) : 0.5 * (1.0 - t) * (w_level + wr);
      }
    }
  } else {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double w = node_weight(g, i) * weight(g.values[i]);
      total += w;
      if (g.values[i] > delta) tail += w;
    }
  }
  return std::clamp(tail / total, 0.0, 1.0);
}

LaplaceFit laplace_check(const GridField& g, std::span<const double> taus) {
  require(taus.size() >= 2, "laplace check needs at least two temperatures");
  LaplaceFit out;
  std::vector<double> log_tau;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (i > 0) require(taus[i] < taus[i - 1], "temperatures must be strictly decreasing");
    out.taus.push_back(taus[i]);
    out.log_z.push_back(log_partition_function(g, taus[i]));
    log_tau.push_back(std::log(taus[i]));
  }
  out.fit = least_squares(log_tau, out.log_z);
  out.expected_slope = 0.5 * static_cast<double>(g.dim());
  out.relative_error = std::abs(out.fit.slope - out.expected_slope) / out.expected_slope;
  out.within_tolerance = out.relative_error <= kLaplaceTolerance;
  return out;
}

// Spectral gap ----------------------------------------------------------------

namespace {

struct BirthDeathRates {
  std::vector<double> up;    // i -> i+1, i = 0..n-2
  std::vector<double> down;  // i+1 -> i, i = 0..n-2
};

BirthDeathRates generator_rates(const Landscape& land, double tau, std::size_t n_cells) {
  if (land.dim() != 1) fail(ErrorKind::kUnsupported, "spectral gap is implemented for 1-D landscapes only");
  require(tau > 0.0 && std::isfinite(tau), "temperature must be positive");
  require(n_cells >= 128, "spectral discretization needs at least 128 cells");
  const double lo = land.domain().lo[0];
  const double h = (land.domain().hi[0] - lo) / static_cast<double>(n_cells);
  const double scale = tau / (h * h);
  std::vector<double> f(n_cells);
  for (std::size_t i = 0; i < n_cells; ++i) {
    const double x = lo + (static_cast<double>(i) + 0.5) * h;
    f[i] = land.value(std::span<const double>(&x, 1));
  }
  BirthDeathRates r;
  r.up.resize(n_cells - 1);
  r.down.resize(n_cells - 1);
  for (std::size_t i = 0; i + 1 < n_cells; ++i) {
    const double xm = lo + static_cast<double>(i + 1) * h;
    const double fm = land.value(std::span<const double>(&xm, 1));
    r.up[i] = scale * std::exp(-(fm - f[i]) / tau);
    r.down[i] = scale * std::exp(-(fm - f[i + 1]) / tau);
  }
  return r;
}

// Negative-eigenvalue count of a zero-diagonal tridiagonal minus sigma I,
// given squared off-diagonals. Zero pivots are nudged to -tiny.
std::size_t zero_diagonal_count(const std::vector<double>& off2, double sigma) {
  constexpr double tiny = std::numeric_limits<double>::min();
  std::size_t count = 0;
  double q = -sigma;
  if (q < 0.0) ++count;
  for (double e2 : off2) {
    if (q == 0.0) q = -tiny;
    q = -sigma - e2 / q;
    if (q < 0.0) ++count;
  }
  return count;
}

}  // namespace

SymmetricTridiagonal generator_matrix_1d(const Landscape& land, double tau, std::size_t n_cells) {
  const auto r = generator_rates(land, tau, n_cells);
  SymmetricTridiagonal t;
  t.diag.assign(n_cells, 0.0);
  t.off.assign(n_cells - 1, 0.0);
  for (std::size_t i = 0; i + 1 < n_cells; ++i) {
    t.diag[i] += r.up[i];
    t.diag[i + 1] += r.down[i];
    t.off[i] = -std::sqrt(r.up[i] * r.down[i]);
  }
  return t;
}

std::size_t sturm_count(const SymmetricTridiagonal& t, double sigma) {
  constexpr double tiny = std::numeric_limits<double>::min();
  std::size_t count = 0;
  double q = t.diag[0] - sigma;
  if (q < 0.0) ++count;
  for (std::size_t i = 1; i < t.diag.size(); ++i) {
    if (q == 0.0) q = -tiny;
    q = t.diag[i] - sigma - t.off[i - 1] * t.off[i - 1] / q;
    if (q < 0.0) ++count;
  }
  return count;
}

double spectral_gap_1d(const Landscape& land, double tau, std::size_t n_cells) {
  // -L = C^T C with C bidiagonal (entries sqrt of the rates). Singular values
  // of a bidiagonal are determined to high relative accuracy by its entries,
  // and bisection on the zero-diagonal Golub-Kahan form preserves that, so
  // gaps of order exp(-E*/tau) are resolved even when far below |L|.
  const auto r = generator_rates(land, tau, n_cells);
  std::vector<double> off2;
  off2.reserve(2 * (n_cells - 1));
  double gersh = 0.0;
  for (std::size_t i = 0; i + 1 < n_cells; ++i) {
    off2.push_back(r.up[i]);
    off2.push_back(r.down[i]);
  }
  for (std::size_t i = 0; i < off2.size(); ++i) {
    const double left = i > 0 ? std::sqrt(off2[i - 1]) : 0.0;
    gersh = std::max(gersh, left + std::sqrt(off2[i]));
  }
  // Eigenvalues below sigma for 0 < sigma < sigma_1: the n-1 negatives and 0.
  const std::size_t below_first = n_cells;
  double hi = 2.0 * gersh;
  double lo = hi * 1e-60;
  if (zero_diagonal_count(off2, lo) != below_first) {
    fail(ErrorKind::kDegenerateInput, "spectral gap below the resolvable range");
  }
  while (hi / lo - 1.0 > 1e-12) {
    const double mid = std::sqrt(lo * hi);
    if (zero_diagonal_count(off2, mid) > below_first) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  const double sigma = std::sqrt(lo * hi);
  return sigma * sigma;
}

SpectralReport eyring_kramers_fit(const Landscape& land, std::span<const double> taus,
                                  std::size_t n_cells) {
  require(taus.size() >= 2, "Eyring-Kramers fit needs at least two temperatures");
  SpectralReport rep;
  std::vector<double> inv_tau, neg_log_gap;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    require(taus[i] >= 0.03 && taus[i] <= 0.3, "temperatures must lie in [0.03, 0.3]");
    if (i > 0) require(taus[i] < taus[i - 1], "temperatures must be strictly decreasing");
    const double gap = spectral_gap_1d(land, taus[i], n_cells);
    rep.taus.push_back(taus[i]);
    rep.gaps.push_back(gap);
    inv_tau.push_back(1.0 / taus[i]);
    neg_log_gap.push_back(-std::log(gap));
  }
  const LinearFit fit = least_squares(inv_tau, neg_log_gap);
  rep.fitted_barrier = fit.slope;
  rep.fit_intercept = fit.intercept;
  rep.fit_r_squared = fit.r_squared;

  const Landscape normalized = normalize(land, n_cells);
  rep.critical_depth = critical_depth(discretize(normalized, n_cells)).critical_depth;
  if (fit.r_squared < 0.9) {
    std::ostringstream os;
    os << "degenerate fit: r^2 = " << fit.r_squared;
    rep.notes.push_back(os.str());
  }
  return rep;
}

}  // namespace annealab
