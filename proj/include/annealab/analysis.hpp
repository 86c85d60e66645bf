#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "annealab/dynamics.hpp"
#include "annealab/gibbs.hpp"
#include "annealab/grid.hpp"
#include "annealab/landscape.hpp"
#include "annealab/schedule.hpp"

namespace annealab {

// Tail estimation -------------------------------------------------------------

struct TailRow {
  std::uint64_t k = 0;
  double theta_cum = 0.0;
  double tau = 0.0;
  std::uint64_t n_chains = 0;
  std::uint64_t n_exceed = 0;
  double p_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct TailCurve {
  double delta = 0.0;
  std::vector<TailRow> rows;
};

// Shared checkpoint schedule for a batch of chains.
struct CheckpointGrid {
  std::vector<std::uint64_t> k;
  std::vector<double> theta_cum;
  std::vector<double> tau;

  std::size_t size() const noexcept { return k.size(); }
  bool operator==(const CheckpointGrid&) const = default;
};

std::pair<double, double> wilson_interval(std::uint64_t successes, std::uint64_t trials,
                                          double ci_level);

// f_values is chain-major: f_values[c * grid.size() + j] is chain c at
// checkpoint j. Non-finite values count as exceedances.
TailCurve estimate_tail(const CheckpointGrid& grid, std::span<const double> f_values,
                        double delta, double ci_level = 0.95);

// Trajectories must share one checkpoint grid (same k, theta and tau).
TailCurve estimate_tail(std::span<const Trajectory> trajectories, double delta,
                        double ci_level = 0.95);

// Decay fits ------------------------------------------------------------------

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

LinearFit least_squares(std::span<const double> xs, std::span<const double> ys);

struct FitOptions {
  double burn_in_theta = 0.0;
  std::uint64_t min_exceed = 5;
};

// Burn-in where tau(Theta) first drops to E / ln(100).
double default_burn_in_theta(const CoolingSchedule& cs);

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t n_points = 0;
  std::uint64_t burn_in_k = 0;
};

// Rows with theta_cum >= burn-in and n_exceed >= min_exceed.
std::vector<TailRow> usable_rows(const TailCurve& curve, const FitOptions& options);

// OLS of ln p_hat on ln theta_cum over usable rows; needs at least 3.
FitResult fit_decay(const TailCurve& curve, const FitOptions& options);
FitResult fit_decay(const TailCurve& curve, double burn_in_theta);

struct BoundCheck {
  bool holds = false;
  double fitted_c = 0.0;            // max over usable rows of ci_hi Theta^{rate - eps}
  double first_half_c = 0.0;        // constant used for the check
  std::size_t n_usable = 0;
  std::size_t n_checked = 0;
  std::size_t n_violations = 0;
};

// Fixes C from the first half of usable rows, then requires every later row
// to satisfy ci_lo <= C Theta^{-(rate - eps)}.
BoundCheck theoretical_bound_check(const TailCurve& curve, double rate, double epsilon,
                                   const FitOptions& options = {});

// Gibbs quadrature -------------------------------------------------------------

// nu_tau(f > delta) by the trapezoid rule on the grid nodes. In 1-D the level
// crossing inside an interval is located by linear interpolation.
double gibbs_tail_quadrature(const GridField& g, double tau, double delta);

// ln of the trapezoid integral of exp(-f/tau) over the grid.
double log_partition_function(const GridField& g, double tau);

struct LaplaceFit {
  std::vector<double> taus;
  std::vector<double> log_z;
  LinearFit fit;               // ln Z against ln tau
  double expected_slope = 0.0; // d / 2
  double relative_error = 0.0;
  bool within_tolerance = false;
};

inline constexpr double kLaplaceTolerance = 0.05;

LaplaceFit laplace_check(const GridField& g, std::span<const double> taus);

// Spectral gap ----------------------------------------------------------------

struct SymmetricTridiagonal {
  std::vector<double> diag;
  std::vector<double> off;
};

// Symmetrized negative generator -L of L g = -f' g' + tau g'' with zero-flux
// boundaries on n_cells cell centers of the domain.
SymmetricTridiagonal generator_matrix_1d(const Landscape& land, double tau, std::size_t n_cells);

// Number of eigenvalues strictly below sigma.
std::size_t sturm_count(const SymmetricTridiagonal& t, double sigma);

// Smallest nonzero eigenvalue of -L, to relative tolerance 1e-8 or better.
double spectral_gap_1d(const Landscape& land, double tau, std::size_t n_cells);

struct SpectralReport {
  std::vector<double> taus;
  std::vector<double> gaps;
  double fitted_barrier = 0.0;   // slope of -ln gap against 1/tau
  double fit_intercept = 0.0;
  double fit_r_squared = 0.0;
  double critical_depth = 0.0;   // watershed value on the same grid
  std::vector<std::string> notes;
};

SpectralReport eyring_kramers_fit(const Landscape& land, std::span<const double> taus,
                                  std::size_t n_cells);

}  // namespace annealab
