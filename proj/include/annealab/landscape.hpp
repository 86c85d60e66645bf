#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace annealab {

using Point = std::vector<double>;

// Axis-aligned box [lo_i, hi_i]^d.
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  Box() = default;
  Box(std::vector<double> lo, std::vector<double> hi);
  static Box cube(std::size_t dim, double half_width);

  std::size_t dim() const noexcept { return lo.size(); }
  bool contains(std::span<const double> x) const noexcept;
  double diameter() const noexcept;

  bool operator==(const Box&) const = default;
};

// Smooth objective with an exact gradient. Implementations must be
// thread-safe for concurrent const calls.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::size_t dim() const noexcept = 0;
  virtual double value(std::span<const double> x) const noexcept = 0;
  virtual void gradient(std::span<const double> x,
                        std::span<double> out) const noexcept = 0;
};

struct LandscapeInfo {
  std::vector<Point> known_minima;
  std::optional<double> analytic_depth;
  std::optional<double> analytic_lipschitz;
};

// Immutable objective + domain box + metadata. Copies share the objective.
class Landscape {
 public:
  using ValueFn = std::function<double(std::span<const double>)>;
  using GradFn = std::function<void(std::span<const double>, std::span<double>)>;

  Landscape(std::string name, std::shared_ptr<const Objective> objective,
            Box domain, LandscapeInfo info = {});

  static Landscape from_functions(std::string name, std::size_t dim,
                                  ValueFn value, GradFn gradient, Box domain,
                                  LandscapeInfo info = {});

  const std::string& name() const noexcept { return name_; }
  std::size_t dim() const noexcept { return objective_->dim(); }
  const Box& domain() const noexcept { return domain_; }
  const LandscapeInfo& info() const noexcept { return info_; }

  // Constant subtracted from the raw objective (set by normalize).
  double offset() const noexcept { return offset_; }

  // Checked entry points: non-finite or wrong-sized x is an invalid-input error.
  double eval(std::span<const double> x) const;
  void grad(std::span<const double> x, std::span<double> out) const;
  Point grad(std::span<const double> x) const;

  // Unchecked versions for inner loops.
  double value(std::span<const double> x) const noexcept {
    return objective_->value(x) - offset_;
  }
  void gradient(std::span<const double> x, std::span<double> out) const noexcept {
    objective_->gradient(x, out);
  }

  Landscape with_offset(double offset) const;

 private:
  std::string name_;
  std::shared_ptr<const Objective> objective_;
  Box domain_;
  LandscapeInfo info_;
  double offset_ = 0.0;
};

// Returns the landscape shifted by its grid-estimated minimum over the box,
// using `resolution` cell centers per axis.
Landscape normalize(const Landscape& land, std::size_t resolution);

// Catalog ----------------------------------------------------------------

using ParamMap = std::map<std::string, double>;

// f(x) = |x|^2 / 2 on [-half_width, half_width]^dim.
Landscape quadratic(std::size_t dim, double half_width = 10.0);

// f(x) = (x^2 - 1)^2 + a x on [-half_width, half_width], a in [0, 0.5].
Landscape double_well(double a, double half_width = 2.0);

// Degree-6 polynomial, f' = scale * (x+1.5)(x+0.75)x(x-0.8)(x-1.6), on
// [-2.1, 2.1]. Minima at -1.5, 0, 1.6 (global) with distinct depths.
Landscape triple_well(double scale = 2.0);

// f(x, y) = (x^2 - 1)^2 + a x + y^2 / 2 on [-2, 2] x [-2.5, 2.5].
Landscape double_well_2d(double a);

std::vector<std::string> catalog_ids();

// Looks up a catalog landscape by id; unknown ids or parameters raise an
// invalid-input error listing the catalog.
Landscape make_catalog_landscape(std::string_view id, const ParamMap& params);

// Assumption checks ---------------------------------------------------------

struct AssumptionReport {
  double growth_ratio_min = 0.0;
  bool growth_ok = false;
  double hessian_min_eigenvalue = 0.0;
  bool hessian_lower_bound_ok = false;
  double lipschitz_estimate = 0.0;
  std::vector<std::string> notes;
};

struct GrowthCheckOptions {
  // Ratios at or below this margin are flagged as failing the growth condition.
  double margin = 0.1;
  std::uint64_t seed = 0;
  std::size_t hessian_samples = 256;
  std::size_t lipschitz_samples = 256;
};

// Samples (|grad f|^2 - lap f) / |x|^2 on the sphere of the given radius
// (Laplacian by central differences) and a Hessian eigenvalue lower bound
// over the box.
AssumptionReport check_growth_assumption(const Landscape& land, double radius,
                                         std::size_t samples,
                                         const GrowthCheckOptions& options = {});

// max |grad f(x) - grad f(y)| / |x - y| over all pairs of `samples` uniform
// points in the box. A lower bound on the Lipschitz constant of grad f.
double estimate_lipschitz(const Landscape& land, std::size_t samples,
                          std::uint64_t rng_seed);

// Central second differences, step 1e-4 scaled by coordinate magnitude.
double finite_difference_laplacian(const Landscape& land,
                                   std::span<const double> x);

// Symmetrized finite-difference Hessian from analytic gradients, row-major.
std::vector<double> finite_difference_hessian(const Landscape& land,
                                              std::span<const double> x);

}  // namespace annealab
