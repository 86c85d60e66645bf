#include "annealab/dynamics.hpp"

#include <cmath>
#include <sstream>

#include "annealab/error.hpp"

namespace annealab {

std::size_t dimension_of(const InitialDistribution& mu0) {
  return std::visit([](const auto& d) -> std::size_t {
    using T = std::decay_t<decltype(d)>;
    if constexpr (std::is_same_v<T, PointMass>) {
      return d.x.size();
    } else {
      return d.mean.size();
    }
  }, mu0);
}

ChainState init_chain(const InitialDistribution& mu0, std::uint64_t seed, std::uint64_t chain_id) {
  ChainState s;
  s.rng = CounterStream(seed, chain_id, 0);
  if (const auto* pm = std::get_if<PointMass>(&mu0)) {
    require(!pm->x.empty(), "point mass needs a location");
    s.x = pm->x;
  } else {
    const auto& g = std::get<Gaussian>(mu0);
    require(!g.mean.empty(), "gaussian needs a mean");
    require(g.stddev > 0.0 && std::isfinite(g.stddev), "gaussian stddev must be positive");
    s.x = g.mean;
    for (auto& v : s.x) v += g.stddev * s.rng.next_normal();
  }
  return s;
}

double divergence_radius(const Landscape& land) { return 1e3 * land.domain().diameter(); }

namespace {

[[noreturn]] void diverged(std::uint64_t k, std::span<const double> x) {
  std::ostringstream os;
  os << "chain diverged at k=" << k << ", x=(";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << "); step size too large for the gradient's Lipschitz constant";
  throw Error(ErrorKind::kDivergence, os.str());
}

// scratch holds the gradient on entry to the update loop.
inline void update_with_scale(const Landscape& land, std::span<double> x, double eta,
                              double noise_scale, std::span<const double> noise,
                              std::span<double> scratch, std::uint64_t k, double radius2) {
  land.gradient(x, scratch);
  double norm2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    scratch[i] = x[i] - scratch[i] * eta + noise_scale * noise[i];
    norm2 += scratch[i] * scratch[i];
  }
  if (!(norm2 <= radius2)) diverged(k, scratch);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = scratch[i];
}

}  // namespace

void langevin_update(const Landscape& land, std::span<double> x, double eta, double tau,
                     std::span<const double> noise, std::span<double> scratch, std::uint64_t k) {
  require(x.size() == land.dim() && noise.size() == x.size() && scratch.size() == x.size(),
          "langevin_update buffers must match the landscape dimension");
  require(eta > 0.0 && tau >= 0.0, "step size must be positive and temperature nonnegative");
  const double r = divergence_radius(land);
  update_with_scale(land, x, eta, std::sqrt(2.0 * tau * eta), noise, scratch, k, r * r);
}

void sa_step_inplace(ChainState& s, const Landscape& land, const StepSchedule& ss,
                     const CoolingSchedule& cs) {
  const double eta = ss.step_size(s.k + 1);
  const double tau = cs.temperature(s.theta_cum());
  ula_step_inplace(s, land, eta, tau);
}

ChainState sa_step(ChainState s, const Landscape& land, const StepSchedule& ss,
                   const CoolingSchedule& cs) {
  sa_step_inplace(s, land, ss, cs);
  return s;
}

void ula_step_inplace(ChainState& s, const Landscape& land, double eta, double tau) {
  const std::size_t d = s.x.size();
  require(d == land.dim(), "chain dimension does not match landscape");
  Point noise(d), scratch(d);
  for (auto& z : noise) z = s.rng.next_normal();
  langevin_update(land, s.x, eta, tau, noise, scratch, s.k + 1);
  s.k += 1;
  s.theta_acc.add(eta);
}

ChainState ula_step(ChainState s, const Landscape& land, double eta, double tau) {
  ula_step_inplace(s, land, eta, tau);
  return s;
}

ScheduleTable::ScheduleTable(const StepSchedule& ss, const CoolingSchedule& cs, std::uint64_t max_k)
    : eta_(max_k + 1, 0.0), tau_(max_k + 1, 0.0), noise_scale_(max_k + 1, 0.0), theta_(max_k + 1) {
  CompensatedSum acc;
  for (std::uint64_t k = 1; k <= max_k; ++k) {
    eta_[k] = ss.step_size(k);
    tau_[k] = cs.temperature(acc.value());
    noise_scale_[k] = std::sqrt(2.0 * tau_[k] * eta_[k]);
    acc.add(eta_[k]);
    theta_[k] = acc;
  }
}

void advance_chain(ChainState& s, const Landscape& land, const ScheduleTable& table,
                   std::uint64_t k_end) {
  require(k_end <= table.max_k(), "schedule table is shorter than the requested horizon");
  require(s.x.size() == land.dim(), "chain dimension does not match landscape");
  const double r = divergence_radius(land);
  const double radius2 = r * r;
  const std::size_t d = s.x.size();
  Point noise(d), scratch(d);
  for (std::uint64_t k = s.k + 1; k <= k_end; ++k) {
    for (auto& z : noise) z = s.rng.next_normal();
    update_with_scale(land, s.x, table.eta(k), table.noise_scale(k), noise, scratch, k, radius2);
    s.k = k;
  }
  if (s.k > 0) s.theta_acc = table.theta_acc(s.k);
}

Trajectory fine_euler_reference(const Landscape& land, const CoolingSchedule& cs, double dt,
                                double horizon, const InitialDistribution& mu0,
                                std::uint64_t seed, const EulerOptions& options) {
  require(dt > 0.0 && std::isfinite(dt), "dt must be positive");
  require(horizon >= dt, "horizon T must be at least dt");
  const auto steps = static_cast<std::uint64_t>(std::llround(horizon / dt));
  ChainState s = init_chain(mu0, seed, options.chain_id);
  require(s.x.size() == land.dim(), "initial distribution dimension does not match landscape");

  Trajectory traj;
  auto record = [&](std::uint64_t k) {
    const double t = static_cast<double>(k) * dt;
    traj.checkpoints.push_back({k, t, cs.temperature(t), s.x, land.value(s.x)});
  };
  record(0);
  const double r = divergence_radius(land);
  Point noise(s.x.size()), scratch(s.x.size());
  for (std::uint64_t k = 1; k <= steps; ++k) {
    const double tau = cs.temperature(static_cast<double>(k - 1) * dt);
    for (auto& z : noise) z = s.rng.next_normal();
    update_with_scale(land, s.x, dt, std::sqrt(2.0 * tau * dt), noise, scratch, k, r * r);
    s.k = k;
    if (k == steps || (options.record_every > 0 && k % options.record_every == 0)) record(k);
  }
  return traj;
}

double gibbs_sample_1d(const GridField& g, double tau, CounterStream& rng) {
  return GibbsMeasure1D::build(g, tau).sample(rng);
}

}  // namespace annealab
