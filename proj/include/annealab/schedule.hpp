#pragma once

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace annealab {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + compensation_; }

  bool operator==(const CompensatedSum&) const = default;

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

// tau(t) = E / ln(t + t_offset).
struct CoolingSchedule {
  double energy = 1.0;
  double t_offset = std::numbers::e;

  CoolingSchedule() = default;
  CoolingSchedule(double energy, double t_offset = std::numbers::e);

  double temperature(double t) const;

  bool operator==(const CoolingSchedule&) const = default;
};

// eta_k = eta0 * k^-theta for k >= 1.
struct StepSchedule {
  double eta0 = 1.0;
  double theta = 1.0;

  StepSchedule() = default;
  StepSchedule(double eta0, double theta);

  double step_size(std::uint64_t k) const;
  // Theta_k = sum_{j=1..k} eta_j, compensated; Theta_0 = 0.
  double cumulative(std::uint64_t k) const;

  bool operator==(const StepSchedule&) const = default;
};

double temperature(const CoolingSchedule& cs, double t);
double step_size(const StepSchedule& ss, std::uint64_t k);
double cumulative(const StepSchedule& ss, std::uint64_t k);

enum class Verdict { kValid, kInvalid, kInconclusive };
std::string_view to_string(Verdict v);

struct TrendSample {
  std::uint64_t k = 0;
  double theta_cum = 0.0;             // Theta_k
  double step_times_cumulative = 0.0; // eta_{k+1} Theta_k
  double technical_ratio = 0.0;       // ln Theta_k / sum_{j<=k} eta_{j+1} Theta_j^{-r}
};

struct ScheduleCheckReport {
  double depth_ratio = 0.0;
  std::uint64_t horizon = 0;
  bool theta_in_valid_range = false;
  // Analytic verdicts for the power-law family.
  bool cond_theta_diverges = false;
  bool cond_product_vanishes = false;
  bool cond_technical = false;
  // Trend readings from the samples.
  bool numeric_theta_diverges = false;
  bool numeric_product_vanishes = false;
  bool numeric_technical = false;
  std::vector<TrendSample> numeric_trends;
  Verdict verdict = Verdict::kInconclusive;
  std::vector<std::string> notes;
};

// Checks Theta_k -> inf, eta_{k+1} Theta_k -> 0 and the technical condition
// ln Theta_k / sum eta_{j+1} Theta_j^{-r} -> 0 with r = E*/E in (0, 1).
ScheduleCheckReport validate(const StepSchedule& ss, double depth_ratio, std::uint64_t horizon);

// Same as validate but accepts depth_ratio = 0 (single-well landscapes).
ScheduleCheckReport validate_allowing_zero_depth(const StepSchedule& ss, double depth_ratio,
                                                 std::uint64_t horizon);

// min(delta / E, (1 - E*/E) / 2); requires E > E* >= 0 and delta > 0.
double rate_exponent(double energy, double e_star, double delta);

}  // namespace annealab
