#include "annealab/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "annealab/error.hpp"

namespace annealab {

void CompensatedSum::add(double x) noexcept {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    compensation_ += (sum_ - t) + x;
  } else {
    compensation_ += (x - t) + sum_;
  }
  sum_ = t;
}

CoolingSchedule::CoolingSchedule(double energy_in, double t_offset_in)
    : energy(energy_in), t_offset(t_offset_in) {
  require(std::isfinite(energy) && energy > 0.0, "cooling energy E must be positive");
  require(std::isfinite(t_offset) && t_offset >= std::numbers::e,
          "cooling t_offset must be >= e");
}

double CoolingSchedule::temperature(double t) const {
  require(t >= 0.0, "temperature time must be nonnegative");
  return energy / std::log(t + t_offset);
}

StepSchedule::StepSchedule(double eta0_in, double theta_in) : eta0(eta0_in), theta(theta_in) {
  require(std::isfinite(eta0) && eta0 > 0.0, "eta0 must be positive");
  require(theta > 0.0 && theta <= 1.0, "theta must lie in (0, 1]");
}

double StepSchedule::step_size(std::uint64_t k) const {
  require(k >= 1, "step sizes are indexed from k = 1");
  return eta0 * std::pow(static_cast<double>(k), -theta);
}

double StepSchedule::cumulative(std::uint64_t k) const {
  CompensatedSum sum;
  for (std::uint64_t j = 1; j <= k; ++j) sum.add(step_size(j));
  return sum.value();
}

double temperature(const CoolingSchedule& cs, double t) { return cs.temperature(t); }
double step_size(const StepSchedule& ss, std::uint64_t k) { return ss.step_size(k); }
double cumulative(const StepSchedule& ss, std::uint64_t k) { return ss.cumulative(k); }

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kValid: return "valid";
    case Verdict::kInvalid: return "invalid";
    case Verdict::kInconclusive: return "inconclusive";
  }
  return "inconclusive";
}

namespace {

ScheduleCheckReport run_validation(const StepSchedule& ss, double r, std::uint64_t horizon) {
  require(horizon >= 1000, "validation horizon must be >= 1e3");
  ScheduleCheckReport rep;
  rep.depth_ratio = r;
  rep.horizon = horizon;
  const double th = ss.theta;
  rep.theta_in_valid_range = th > 0.5 && th <= 1.0;

  // Power law: Theta_k ~ k^{1-theta} (ln k at theta = 1); eta_{k+1} Theta_k ~
  // k^{1 - 2 theta}; the technical sum grows like k^{(1-theta)(1-r)} against
  // ln Theta_k ~ ln k ((ln k)^{1-r} against ln ln k at theta = 1).
  rep.cond_theta_diverges = th <= 1.0;
  rep.cond_product_vanishes = th > 0.5;
  rep.cond_technical = th <= 1.0;

  std::vector<std::uint64_t> samples;
  for (std::uint64_t k = 10; k <= horizon && k <= 1'000'000; k *= 10) samples.push_back(k);

  CompensatedSum theta_sum, technical_sum;
  std::size_t next = 0;
  for (std::uint64_t j = 1; next < samples.size(); ++j) {
    theta_sum.add(ss.step_size(j));
    const double big_theta = theta_sum.value();
    technical_sum.add(ss.step_size(j + 1) * std::pow(big_theta, -r));
    if (j == samples[next]) {
      rep.numeric_trends.push_back({j, big_theta, ss.step_size(j + 1) * big_theta,
                                    std::log(big_theta) / technical_sum.value()});
      ++next;
    }
  }

  const auto& t = rep.numeric_trends;
  const std::size_t n = t.size();
  const double last_inc = t[n - 1].theta_cum - t[n - 2].theta_cum;
  const double prev_inc = n >= 3 ? t[n - 2].theta_cum - t[n - 3].theta_cum : last_inc;
  rep.numeric_theta_diverges = last_inc > 0.0 && last_inc >= 0.95 * prev_inc;
  rep.numeric_product_vanishes = t[n - 1].step_times_cumulative < t[n - 2].step_times_cumulative;
  rep.numeric_technical = t[n - 1].technical_ratio > 0.0 &&
                          t[n - 1].technical_ratio < t[n - 2].technical_ratio;

  if (!rep.numeric_technical && rep.cond_technical) {
    rep.notes.push_back(
        "technical ratio not yet decreasing at the horizon; certified analytically for power-law steps");
  }
  const bool agree = rep.numeric_theta_diverges == rep.cond_theta_diverges &&
                     rep.numeric_product_vanishes == rep.cond_product_vanishes;
  if (!agree) {
    rep.verdict = Verdict::kInconclusive;
    rep.notes.push_back("analytic and numeric trends disagree");
  } else if (rep.cond_theta_diverges && rep.cond_product_vanishes && rep.cond_technical) {
    rep.verdict = Verdict::kValid;
  } else {
    rep.verdict = Verdict::kInvalid;
  }
  return rep;
}

}  // namespace

ScheduleCheckReport validate(const StepSchedule& ss, double depth_ratio, std::uint64_t horizon) {
  require(depth_ratio > 0.0 && depth_ratio < 1.0,
          "depth ratio E*/E must lie in (0, 1); E <= E* is outside the convergence regime");
  return run_validation(ss, depth_ratio, horizon);
}

ScheduleCheckReport validate_allowing_zero_depth(const StepSchedule& ss, double depth_ratio,
                                                 std::uint64_t horizon) {
  require(depth_ratio >= 0.0 && depth_ratio < 1.0, "depth ratio E*/E must lie in [0, 1)");
  return run_validation(ss, depth_ratio, horizon);
}

double rate_exponent(double energy, double e_star, double delta) {
  require(e_star >= 0.0, "critical depth must be nonnegative");
  require(energy > e_star, "rate exponent needs E > E* (E <= E* is the trapped regime)");
  require(delta > 0.0, "delta must be positive");
  return std::min(delta / energy, 0.5 * (1.0 - e_star / energy));
}

}  // namespace annealab
