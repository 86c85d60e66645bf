#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "annealab/gibbs.hpp"
#include "annealab/landscape.hpp"
#include "annealab/random.hpp"
#include "annealab/schedule.hpp"

namespace annealab {

struct PointMass {
  Point x;
  bool operator==(const PointMass&) const = default;
};

// N(mean, stddev^2 I).
struct Gaussian {
  Point mean;
  double stddev = 1.0;
  bool operator==(const Gaussian&) const = default;
};

using InitialDistribution = std::variant<PointMass, Gaussian>;

std::size_t dimension_of(const InitialDistribution& mu0);

struct ChainState {
  Point x;
  std::uint64_t k = 0;
  CompensatedSum theta_acc;  // Theta_k
  CounterStream rng;

  double theta_cum() const noexcept { return theta_acc.value(); }
  std::uint64_t chain_id() const noexcept { return rng.stream_id(); }
};

// Draws x_0 from mu0 with stream (seed, chain_id) at position 0.
ChainState init_chain(const InitialDistribution& mu0, std::uint64_t seed, std::uint64_t chain_id);

// Chains further than this from the origin are treated as diverged.
double divergence_radius(const Landscape& land);

// x <- x - grad f(x) eta + sqrt(2 tau eta) z. Raises a divergence error when
// the result is non-finite or beyond divergence_radius; x is left untouched
// in that case.
void langevin_update(const Landscape& land, std::span<double> x, double eta, double tau,
                     std::span<const double> noise, std::span<double> scratch, std::uint64_t k);

// One discrete SA step: eta = eta_{k+1}, tau = tau(Theta_k) at the pre-step
// cumulative time.
ChainState sa_step(ChainState s, const Landscape& land, const StepSchedule& ss,
                   const CoolingSchedule& cs);
void sa_step_inplace(ChainState& s, const Landscape& land, const StepSchedule& ss,
                     const CoolingSchedule& cs);

// Constant-temperature step (unadjusted Langevin). tau = 0 is gradient descent.
ChainState ula_step(ChainState s, const Landscape& land, double eta, double tau);
void ula_step_inplace(ChainState& s, const Landscape& land, double eta, double tau);

// Per-iteration eta_k, tau(Theta_{k-1}) and Theta_k for k = 1..K, computed
// exactly as sa_step computes them. Shared read-only across chains.
class ScheduleTable {
 public:
  ScheduleTable(const StepSchedule& ss, const CoolingSchedule& cs, std::uint64_t max_k);

  std::uint64_t max_k() const noexcept { return eta_.size() - 1; }
  double eta(std::uint64_t k) const noexcept { return eta_[k]; }
  double tau(std::uint64_t k) const noexcept { return tau_[k]; }
  double noise_scale(std::uint64_t k) const noexcept { return noise_scale_[k]; }
  const CompensatedSum& theta_acc(std::uint64_t k) const noexcept { return theta_[k]; }
  double theta_cum(std::uint64_t k) const noexcept { return theta_[k].value(); }

 private:
  std::vector<double> eta_, tau_, noise_scale_;
  std::vector<CompensatedSum> theta_;
};

// Advances s with sa_step semantics until s.k == k_end, reading the schedule
// from the table. Bit-identical to repeated sa_step_inplace.
void advance_chain(ChainState& s, const Landscape& land, const ScheduleTable& table,
                   std::uint64_t k_end);

struct TrajectoryPoint {
  std::uint64_t k = 0;
  double theta = 0.0;
  double tau = 0.0;
  Point x;
  double f_value = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryPoint> checkpoints;
};

struct EulerOptions {
  std::uint64_t chain_id = 0;
  // Record every this many steps; 0 records only the start and the end.
  std::uint64_t record_every = 0;
};

// Constant-dt Euler-Maruyama surrogate of the continuous SA diffusion with
// tau evaluated at elapsed time. The step count is round(T / dt).
Trajectory fine_euler_reference(const Landscape& land, const CoolingSchedule& cs, double dt,
                                double horizon, const InitialDistribution& mu0,
                                std::uint64_t seed, const EulerOptions& options = {});

// One inverse-CDF draw from the grid Gibbs measure at temperature tau.
double gibbs_sample_1d(const GridField& g, double tau, CounterStream& rng);

}  // namespace annealab
