#include "annealab/landscape.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "annealab/error.hpp"
#include "annealab/random.hpp"

namespace annealab {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid-input";
    case ErrorKind::kDomainExceeded: return "domain-exceeded";
    case ErrorKind::kResource: return "resource";
    case ErrorKind::kDegenerateInput: return "degenerate-input";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kInsufficientData: return "insufficient-data";
    case ErrorKind::kUnsupported: return "unsupported";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

// Box ----------------------------------------------------------------------

Box::Box(std::vector<double> lo_in, std::vector<double> hi_in)
    : lo(std::move(lo_in)), hi(std::move(hi_in)) {
  require(!lo.empty() && lo.size() == hi.size(), "box bounds must have equal nonzero size");
  for (std::size_t i = 0; i < lo.size(); ++i) {
    require(std::isfinite(lo[i]) && std::isfinite(hi[i]) && lo[i] < hi[i],
            "box must satisfy lo < hi on every axis");
  }
}

Box Box::cube(std::size_t dim, double half_width) {
  return Box(std::vector<double>(dim, -half_width), std::vector<double>(dim, half_width));
}

bool Box::contains(std::span<const double> x) const noexcept {
  if (x.size() != dim()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= lo[i] && x[i] <= hi[i])) return false;
  }
  return true;
}

double Box::diameter() const noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < dim(); ++i) s += (hi[i] - lo[i]) * (hi[i] - lo[i]);
  return std::sqrt(s);
}

// Landscape ------------------------------------------------------------------

namespace {

class FunctionObjective final : public Objective {
 public:
  FunctionObjective(std::size_t dim, Landscape::ValueFn value, Landscape::GradFn grad)
      : dim_(dim), value_(std::move(value)), grad_(std::move(grad)) {}

  std::size_t dim() const noexcept override { return dim_; }
  double value(std::span<const double> x) const noexcept override { return value_(x); }
  void gradient(std::span<const double> x, std::span<double> out) const noexcept override {
    grad_(x, out);
  }

 private:
  std::size_t dim_;
  Landscape::ValueFn value_;
  Landscape::GradFn grad_;
};

void check_point(const Landscape& land, std::span<const double> x) {
  require(x.size() == land.dim(), "point dimension does not match landscape");
  for (double v : x) require(std::isfinite(v), "point has non-finite coordinates");
}

}  // namespace

Landscape::Landscape(std::string name, std::shared_ptr<const Objective> objective,
                     Box domain, LandscapeInfo info)
    : name_(std::move(name)),
      objective_(std::move(objective)),
      domain_(std::move(domain)),
      info_(std::move(info)) {
  require(objective_ != nullptr, "landscape needs an objective");
  require(objective_->dim() > 0, "landscape dimension must be positive");
  require(domain_.dim() == objective_->dim(), "domain box dimension mismatch");
}

Landscape Landscape::from_functions(std::string name, std::size_t dim, ValueFn value,
                                    GradFn gradient, Box domain, LandscapeInfo info) {
  return Landscape(std::move(name),
                   std::make_shared<FunctionObjective>(dim, std::move(value), std::move(gradient)),
                   std::move(domain), std::move(info));
}

double Landscape::eval(std::span<const double> x) const {
  check_point(*this, x);
  return value(x);
}

void Landscape::grad(std::span<const double> x, std::span<double> out) const {
  check_point(*this, x);
  require(out.size() == dim(), "gradient output has wrong size");
  gradient(x, out);
}

Point Landscape::grad(std::span<const double> x) const {
  Point g(dim());
  grad(x, g);
  return g;
}

Landscape Landscape::with_offset(double offset) const {
  Landscape copy = *this;
  copy.offset_ = offset;
  return copy;
}

Landscape normalize(const Landscape& land, std::size_t resolution) {
  require(resolution >= 2, "normalize needs at least 2 cells per axis");
  const std::size_t d = land.dim();
  double total = 1.0;
  for (std::size_t i = 0; i < d; ++i) total *= static_cast<double>(resolution);
  if (total > 1e8) fail(ErrorKind::kResource, "normalize grid exceeds the 1e8 cell budget");

  const Box& box = land.domain();
  std::vector<std::size_t> idx(d, 0);
  Point x(d);
  double best = std::numeric_limits<double>::infinity();
  const auto cells = static_cast<std::size_t>(total);
  for (std::size_t flat = 0; flat < cells; ++flat) {
    for (std::size_t a = 0; a < d; ++a) {
      const double h = (box.hi[a] - box.lo[a]) / static_cast<double>(resolution);
      x[a] = box.lo[a] + (static_cast<double>(idx[a]) + 0.5) * h;
    }
    best = std::min(best, land.value(x));
    for (std::size_t a = d; a-- > 0;) {
      if (++idx[a] < resolution) break;
      idx[a] = 0;
    }
  }
  return land.with_offset(land.offset() + best);
}

// Catalog ----------------------------------------------------------------------

namespace {

class QuadraticObjective final : public Objective {
 public:
  explicit QuadraticObjective(std::size_t dim) : dim_(dim) {}
  std::size_t dim() const noexcept override { return dim_; }
  double value(std::span<const double> x) const noexcept override {
    double s = 0.0;
    for (double v : x) s += v * v;
    return 0.5 * s;
  }
  void gradient(std::span<const double> x, std::span<double> out) const noexcept override {
    std::copy(x.begin(), x.end(), out.begin());
  }

 private:
  std::size_t dim_;
};

class DoubleWellObjective final : public Objective {
 public:
  explicit DoubleWellObjective(double a) : a_(a) {}
  std::size_t dim() const noexcept override { return 1; }
  double value(std::span<const double> x) const noexcept override {
    const double q = x[0] * x[0] - 1.0;
    return q * q + a_ * x[0];
  }
  void gradient(std::span<const double> x, std::span<double> out) const noexcept override {
    out[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0) + a_;
  }

 private:
  double a_;
};

class DoubleWell2dObjective final : public Objective {
 public:
  explicit DoubleWell2dObjective(double a) : a_(a) {}
  std::size_t dim() const noexcept override { return 2; }
  double value(std::span<const double> x) const noexcept override {
    const double q = x[0] * x[0] - 1.0;
    return q * q + a_ * x[0] + 0.5 * x[1] * x[1];
  }
  void gradient(std::span<const double> x, std::span<double> out) const noexcept override {
    out[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0) + a_;
    out[1] = x[1];
  }

 private:
  double a_;
};

// 1-D polynomial given by ascending coefficients.
class PolynomialObjective final : public Objective {
 public:
  explicit PolynomialObjective(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
    for (std::size_t i = 1; i < coeffs_.size(); ++i) {
      deriv_.push_back(static_cast<double>(i) * coeffs_[i]);
    }
  }
  std::size_t dim() const noexcept override { return 1; }
  double value(std::span<const double> x) const noexcept override { return horner(coeffs_, x[0]); }
  void gradient(std::span<const double> x, std::span<double> out) const noexcept override {
    out[0] = horner(deriv_, x[0]);
  }

 private:
  static double horner(const std::vector<double>& c, double x) noexcept {
    double acc = 0.0;
    for (std::size_t i = c.size(); i-- > 0;) acc = acc * x + c[i];
    return acc;
  }

  std::vector<double> coeffs_;
  std::vector<double> deriv_;
};

// Ascending coefficients of scale * integral_0^x prod (t - r_i) dt.
std::vector<double> integrate_from_roots(const std::vector<double>& roots, double scale) {
  std::vector<double> p{1.0};
  for (double r : roots) {
    std::vector<double> next(p.size() + 1, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      next[i + 1] += p[i];
      next[i] -= r * p[i];
    }
    p = std::move(next);
  }
  std::vector<double> out(p.size() + 1, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    out[i + 1] = scale * p[i] / static_cast<double>(i + 1);
  }
  return out;
}

double param_or(const ParamMap& params, const std::string& key, double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

std::string catalog_listing() {
  std::ostringstream os;
  const auto ids = catalog_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) os << (i ? ", " : "") << ids[i];
  return os.str();
}

void check_known_params(std::string_view id, const ParamMap& params,
                        std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : params) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    require(ok, "unknown parameter '" + key + "' for landscape " + std::string(id));
    require(std::isfinite(value), "parameter '" + key + "' must be finite");
  }
}

}  // namespace

Landscape quadratic(std::size_t dim, double half_width) {
  require(dim >= 1, "quadratic dimension must be >= 1");
  require(half_width > 0.0, "half_width must be positive");
  LandscapeInfo info;
  info.known_minima = {Point(dim, 0.0)};
  info.analytic_depth = 0.0;
  info.analytic_lipschitz = 1.0;
  return Landscape("quadratic", std::make_shared<QuadraticObjective>(dim),
                   Box::cube(dim, half_width), info);
}

Landscape double_well(double a, double half_width) {
  require(a >= 0.0 && a <= 0.5, "double_well tilt a must lie in [0, 0.5]");
  require(half_width >= 1.5, "double_well half_width must be >= 1.5");
  LandscapeInfo info;
  info.analytic_lipschitz = 12.0 * half_width * half_width - 4.0;
  return Landscape("double_well", std::make_shared<DoubleWellObjective>(a),
                   Box::cube(1, half_width), info);
}

Landscape triple_well(double scale) {
  require(scale > 0.0, "triple_well scale must be positive");
  LandscapeInfo info;
  info.known_minima = {{1.6}, {-1.5}, {0.0}};
  return Landscape("triple_well",
                   std::make_shared<PolynomialObjective>(
                       integrate_from_roots({-1.5, -0.75, 0.0, 0.8, 1.6}, scale)),
                   Box({-2.1}, {2.1}), info);
}

Landscape double_well_2d(double a) {
  require(a >= 0.0 && a <= 0.5, "double_well_2d tilt a must lie in [0, 0.5]");
  return Landscape("double_well_2d", std::make_shared<DoubleWell2dObjective>(a),
                   Box({-2.0, -2.5}, {2.0, 2.5}));
}

std::vector<std::string> catalog_ids() {
  return {"quadratic", "double_well", "triple_well", "double_well_2d"};
}

Landscape make_catalog_landscape(std::string_view id, const ParamMap& params) {
  if (id == "quadratic") {
    check_known_params(id, params, {"dim", "half_width"});
    const double dim = param_or(params, "dim", 1.0);
    require(dim >= 1.0 && dim == std::floor(dim), "quadratic dim must be a positive integer");
    return quadratic(static_cast<std::size_t>(dim), param_or(params, "half_width", 10.0));
  }
  if (id == "double_well") {
    check_known_params(id, params, {"a", "half_width"});
    return double_well(param_or(params, "a", 0.2), param_or(params, "half_width", 2.0));
  }
  if (id == "triple_well") {
    check_known_params(id, params, {"scale"});
    return triple_well(param_or(params, "scale", 2.0));
  }
  if (id == "double_well_2d") {
    check_known_params(id, params, {"a"});
    return double_well_2d(param_or(params, "a", 0.2));
  }
  fail(ErrorKind::kInvalidInput,
       "unknown landscape '" + std::string(id) + "'; catalog: " + catalog_listing());
}

// Assumption checks -----------------------------------------------------------

double finite_difference_laplacian(const Landscape& land, std::span<const double> x) {
  Point y(x.begin(), x.end());
  const double f0 = land.value(y);
  double lap = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double h = 1e-4 * std::max(1.0, std::abs(x[i]));
    y[i] = x[i] + h;
    const double fp = land.value(y);
    y[i] = x[i] - h;
    const double fm = land.value(y);
    y[i] = x[i];
    lap += (fp - 2.0 * f0 + fm) / (h * h);
  }
  return lap;
}

std::vector<double> finite_difference_hessian(const Landscape& land,
                                              std::span<const double> x) {
  const std::size_t d = land.dim();
  std::vector<double> hess(d * d, 0.0);
  Point y(x.begin(), x.end()), gp(d), gm(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[j]));
    y[j] = x[j] + h;
    land.gradient(y, gp);
    y[j] = x[j] - h;
    land.gradient(y, gm);
    y[j] = x[j];
    for (std::size_t i = 0; i < d; ++i) hess[i * d + j] = (gp[i] - gm[i]) / (2.0 * h);
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const double s = 0.5 * (hess[i * d + j] + hess[j * d + i]);
      hess[i * d + j] = hess[j * d + i] = s;
    }
  }
  return hess;
}

namespace {

Point uniform_in_box(const Box& box, CounterStream& rng) {
  Point x(box.dim());
  for (std::size_t a = 0; a < box.dim(); ++a) {
    x[a] = box.lo[a] + (box.hi[a] - box.lo[a]) * rng.next_uniform();
  }
  return x;
}

double min_eigenvalue(const std::vector<double>& sym, std::size_t d) {
  Eigen::Map<const Eigen::MatrixXd> m(sym.data(), static_cast<Eigen::Index>(d),
                                      static_cast<Eigen::Index>(d));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

}  // namespace

AssumptionReport check_growth_assumption(const Landscape& land, double radius,
                                         std::size_t samples,
                                         const GrowthCheckOptions& options) {
  require(radius > 0.0 && std::isfinite(radius), "radius must be positive");
  require(samples >= 1, "samples must be >= 1");
  const std::size_t d = land.dim();
  const Box& box = land.domain();

  CounterStream rng(options.seed, 0x67726f77ULL);
  AssumptionReport report;
  report.growth_ratio_min = std::numeric_limits<double>::infinity();
  Point x(d), g(d);
  for (std::size_t s = 0; s < samples; ++s) {
    if (d == 1) {
      x[0] = (s % 2 == 0) ? radius : -radius;
    } else {
      double norm = 0.0;
      for (auto& v : x) {
        v = rng.next_normal();
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (auto& v : x) v *= radius / norm;
    }
    if (!box.contains(x)) {
      fail(ErrorKind::kDomainExceeded, "growth-check sphere of radius " +
                                           std::to_string(radius) + " leaves the domain box");
    }
    land.gradient(x, g);
    double g2 = 0.0;
    for (double v : g) g2 += v * v;
    const double ratio = (g2 - finite_difference_laplacian(land, x)) / (radius * radius);
    report.growth_ratio_min = std::min(report.growth_ratio_min, ratio);
  }
  report.growth_ok = report.growth_ratio_min > options.margin;
  if (!report.growth_ok) {
    std::ostringstream os;
    os << "growth ratio min " << report.growth_ratio_min << " at radius " << radius
       << " does not exceed margin " << options.margin
       << "; quadratic growth at infinity not supported";
    report.notes.push_back(os.str());
  }

  report.hessian_min_eigenvalue = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < options.hessian_samples; ++s) {
    const Point y = uniform_in_box(box, rng);
    report.hessian_min_eigenvalue =
        std::min(report.hessian_min_eigenvalue, min_eigenvalue(finite_difference_hessian(land, y), d));
  }
  report.hessian_lower_bound_ok = std::isfinite(report.hessian_min_eigenvalue);
  if (!report.hessian_lower_bound_ok) report.notes.push_back("Hessian lower bound is not finite");

  report.lipschitz_estimate = estimate_lipschitz(land, options.lipschitz_samples, options.seed);
  return report;
}

double estimate_lipschitz(const Landscape& land, std::size_t samples, std::uint64_t rng_seed) {
  require(samples >= 2, "estimate_lipschitz needs at least 2 samples");
  const std::size_t d = land.dim();
  CounterStream rng(rng_seed, 0x6c697073ULL);
  std::vector<Point> xs, gs;
  xs.reserve(samples);
  gs.reserve(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    xs.push_back(uniform_in_box(land.domain(), rng));
    gs.emplace_back(d);
    land.gradient(xs.back(), gs.back());
  }
  double best = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    for (std::size_t j = i + 1; j < samples; ++j) {
      double dx = 0.0, dg = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        dx += (xs[i][a] - xs[j][a]) * (xs[i][a] - xs[j][a]);
        dg += (gs[i][a] - gs[j][a]) * (gs[i][a] - gs[j][a]);
      }
      if (dx == 0.0) continue;
      best = std::max(best, std::sqrt(dg / dx));
    }
  }
  return best;
}

}  // namespace annealab
