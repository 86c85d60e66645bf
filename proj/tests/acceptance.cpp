#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "annealab/analysis.hpp"
#include "annealab/depth.hpp"
#include "annealab/dynamics.hpp"
#include "annealab/error.hpp"
#include "annealab/harness.hpp"
#include "annealab/landscape.hpp"
#include "annealab/schedule.hpp"

namespace fs = std::filesystem;
using namespace annealab;

namespace {

// Dense scan plus bisection on the exact polynomial (mpmath, 50 digits).
constexpr double kDoubleWellDepth = 0.807572128628269;
constexpr double kNormalTail = 0.31731050786291410;

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void info(const std::string& what) { details.push_back("     " + what); }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Context {
  fs::path out;
  unsigned workers = 16;
};

// Depth --------------------------------------------------------------------

// Lowest level at which cells a and b share a component of {f <= level}.
double brute_force_saddle(const GridField& g, std::size_t a, std::size_t b,
                          const std::vector<double>& levels) {
  auto connected = [&](double level) {
    std::vector<char> seen(g.size(), 0);
    std::queue<std::size_t> q;
    if (g.values[a] > level) return false;
    q.push(a);
    seen[a] = 1;
    while (!q.empty()) {
      const std::size_t c = q.front();
      q.pop();
      if (c == b) return true;
      g.for_each_neighbor(c, [&](std::size_t n) {
        if (!seen[n] && g.values[n] <= level) {
          seen[n] = 1;
          q.push(n);
        }
      });
    }
    return false;
  };
  std::size_t lo = 0, hi = levels.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (connected(levels[mid])) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return levels[lo];
}

Outcome run_a1(const Context&) {
  Outcome o;
  const std::size_t cells = std::size_t{1} << 14;
  const GridField dw = discretize(normalize(double_well(0.2), cells), cells);
  const DepthReport rep = critical_depth(dw);
  o.check(std::abs(rep.critical_depth - kDoubleWellDepth) <= 1e-3,
          "double_well(0.2) E* = " + fmt("%.9f", rep.critical_depth) + " vs oracle " +
              fmt("%.9f", kDoubleWellDepth));

  struct Case {
    Landscape land;
    std::size_t cells;
  };
  const std::vector<Case> catalog{{quadratic(1), 4097},      {quadratic(2), 99},
                                  {quadratic(3), 21},        {double_well(0.0), 4097},
                                  {double_well(0.2), 4097},  {double_well(0.5), 4097},
                                  {triple_well(), 4097},     {double_well_2d(0.2), 99}};
  for (const auto& c : catalog) {
    const GridField g = discretize(normalize(c.land, c.cells), c.cells);
    const DepthReport r = critical_depth(g);
    const SaddleTable& t = r.saddles;
    bool symmetric = true, ultrametric = true, bounded = true;
    for (std::size_t i = 0; i < t.n; ++i) {
      for (std::size_t j = 0; j < t.n; ++j) {
        symmetric = symmetric && t.height(i, j) == t.height(j, i);
        bounded = bounded && t.height(i, j) >= std::max(r.minima[i].value, r.minima[j].value);
        for (std::size_t k = 0; k < t.n; ++k) {
          ultrametric = ultrametric && t.height(i, j) <= std::max(t.height(i, k), t.height(k, j));
        }
      }
    }
    std::vector<double> levels = g.values;
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    bool brute = g.size() <= 10000;
    for (std::size_t i = 0; i < t.n && brute; ++i) {
      for (std::size_t j = i + 1; j < t.n; ++j) {
        brute = brute && brute_force_saddle(g, r.minima[i].cell, r.minima[j].cell, levels) == t.height(i, j);
      }
    }
    o.check(symmetric && ultrametric && bounded && brute,
            c.land.name() + " (" + std::to_string(g.size()) + " cells, " + std::to_string(t.n) +
                " minima): symmetric, ultrametric, brute-force equal");
  }
  return o;
}

// Schedules ----------------------------------------------------------------

Outcome run_a2(const Context&) {
  Outcome o;
  const std::vector<std::pair<double, Verdict>> expected{
      {0.3, Verdict::kInvalid}, {0.45, Verdict::kInvalid}, {0.5, Verdict::kInvalid},
      {0.55, Verdict::kValid},  {0.75, Verdict::kValid},   {1.0, Verdict::kValid}};
  for (const auto& [theta, want] : expected) {
    const ScheduleCheckReport r = validate(StepSchedule(1.0, theta), 1.0 / 1.5, 1'000'000);
    o.check(r.verdict == want, "theta " + fmt("%.2f", theta) + ": " + std::string(to_string(r.verdict)));
  }
  return o;
}

// Gibbs tail and Laplace ---------------------------------------------------

Outcome run_a3(const Context&) {
  Outcome o;
  const GridField q = discretize(quadratic(1, 8.0), std::size_t{1} << 16);
  const double p = gibbs_tail_quadrature(q, 1.0, 0.5);
  o.check(std::abs(p - kNormalTail) <= 1e-6, "normal tail " + fmt("%.9f", p) + ", error " +
                                                  fmt("%.2e", std::abs(p - kNormalTail)));

  const std::size_t cells = std::size_t{1} << 16;
  const GridField dw = discretize(normalize(double_well(0.2), cells), cells);
  const double delta = 0.3;
  std::vector<std::pair<double, double>> sweep;
  for (double tau : {0.1, 0.05, 0.025, 0.02}) {
    sweep.emplace_back(tau, -tau * std::log(gibbs_tail_quadrature(dw, tau, delta)));
    o.info("tau " + fmt("%.3f", tau) + ": -tau ln P = " + fmt("%.6f", sweep.back().second));
  }
  const double at_end = sweep.back().second;
  o.check(std::abs(at_end - delta) <= 0.1 * delta,
          "-tau ln P at tau 0.02 = " + fmt("%.4f", at_end) + ", relative gap " +
              fmt("%.3f", std::abs(at_end - delta) / delta) + " (limit 0.10)");
  // Linear extrapolation to tau = 0 from the two coldest points.
  const auto& [t1, v1] = sweep[sweep.size() - 2];
  const auto& [t2, v2] = sweep.back();
  o.info("extrapolated tau -> 0 limit " + fmt("%.4f", v2 - t2 * (v1 - v2) / (t1 - t2)));

  std::vector<double> taus;
  for (int i = 0; i < 10; ++i) taus.push_back(0.2 * std::pow(0.1, i / 9.0));
  const GridField q1 = discretize(quadratic(1), 20001);
  const GridField q2 = discretize(quadratic(2), 1001);
  o.info("quadratic d=1 Laplace slope " + fmt("%.6f", laplace_check(q1, taus).fit.slope));
  o.info("quadratic d=2 Laplace slope " + fmt("%.6f", laplace_check(q2, taus).fit.slope));
  const LaplaceFit l1 = laplace_check(discretize(normalize(double_well(0.2), 16384), 16384), taus);
  const LaplaceFit l2 = laplace_check(discretize(normalize(double_well_2d(0.2), 1024), 1024), taus);
  o.check(l1.within_tolerance, "double_well d=1 Laplace slope " + fmt("%.4f", l1.fit.slope) +
                                   ", relative error " + fmt("%.3f", l1.relative_error) + " (limit 0.05)");
  o.check(l2.within_tolerance, "double_well_2d d=2 Laplace slope " + fmt("%.4f", l2.fit.slope) +
                                   ", relative error " + fmt("%.3f", l2.relative_error) + " (limit 0.05)");
  return o;
}

// Spectral gap -------------------------------------------------------------

Outcome run_a4(const Context&) {
  Outcome o;
  const double gap = spectral_gap_1d(quadratic(1, 8.0), 1.0, 2048);
  o.check(std::abs(gap - 1.0) <= 0.01, "OU gap " + fmt("%.6f", gap));

  std::vector<double> taus;
  for (int i = 0; i < 11; ++i) taus.push_back(0.15 - 0.01 * i);
  const SpectralReport dw = eyring_kramers_fit(double_well(0.2), taus, 4096);
  o.check(std::abs(dw.fitted_barrier / kDoubleWellDepth - 1.0) <= 0.1,
          "double_well fitted barrier " + fmt("%.4f", dw.fitted_barrier) + " vs E* " +
              fmt("%.4f", kDoubleWellDepth) + " (r^2 " + fmt("%.4f", dw.fit_r_squared) + ")");
  const SpectralReport quad = eyring_kramers_fit(quadratic(1, 8.0), taus, 2049);
  o.check(std::abs(quad.fitted_barrier) < 0.02, "quadratic fitted barrier " + fmt("%.2e", quad.fitted_barrier));
  return o;
}

// End-to-end runs ----------------------------------------------------------

ExperimentConfig main_config(const fs::path& dir) {
  ExperimentConfig c;
  c.landscape = {"double_well", {{"a", 0.2}}};
  c.cooling.e_multiplier = 1.5;
  c.steps.theta = 0.75;
  c.delta = 0.3;
  c.n_chains = 10000;
  c.checkpoints = GeometricCheckpoints{2, 20};
  c.seed = 20260101;
  c.mu0.minimum_index = 1;
  c.output_dir = dir.string();
  c.epsilon = 0.05;
  c.burn_in_theta = 1.0;
  return c;
}

RunOptions run_options(unsigned workers, bool force = false) {
  RunOptions o;
  o.workers = workers;
  o.force = force;
  o.log = [](const std::string& msg) { std::fprintf(stderr, "  %s\n", msg.c_str()); };
  return o;
}

Outcome run_a5(const Context& ctx) {
  Outcome o;
  const ExperimentResult r = run_anneal(main_config(ctx.out / "a5"), run_options(ctx.workers));
  const auto& rows = r.tail.rows;
  o.info("E " + fmt("%.6f", r.energy) + ", E* " + fmt("%.6f", r.critical_depth) + ", eta0 " +
         fmt("%.6f", r.eta0) + ", rate " + fmt("%.6f", r.rate.value_or(NAN)));
  for (std::size_t i = rows.size() > 8 ? rows.size() - 8 : 0; i < rows.size(); ++i) {
    o.info("k " + std::to_string(rows[i].k) + " theta " + fmt("%.4f", rows[i].theta_cum) + " p_hat " +
           fmt("%.4f", rows[i].p_hat));
  }
  bool decreasing = rows.size() >= 8;
  for (std::size_t i = rows.size() - 7; decreasing && i < rows.size(); ++i) {
    decreasing = rows[i].p_hat < rows[i - 1].p_hat;
  }
  o.check(decreasing, "p_hat strictly decreasing over the last 8 checkpoints");
  o.check(r.bound && r.bound->holds,
          "bound check holds (" + std::to_string(r.bound ? r.bound->n_violations : 0) + " violations of " +
              std::to_string(r.bound ? r.bound->n_checked : 0) + " checked rows)");
  const double slope = r.fit ? r.fit->slope : NAN;
  const double rate = r.rate.value_or(NAN);
  o.check(slope < 0.0 && std::abs(slope) >= rate / 3.0,
          "fitted slope " + fmt("%.4f", slope) + " vs rate/3 " + fmt("%.4f", rate / 3.0));
  o.check(r.status == RunStatus::kComplete, "run status complete");
  return o;
}

Outcome run_a6(const Context& ctx) {
  Outcome o;
  ExperimentConfig c = main_config(ctx.out / "a6");
  c.cooling.e_multiplier = 0.5;
  const ExperimentResult r = run_anneal(c, run_options(ctx.workers, true));
  const TailRow& last = r.tail.rows.back();
  o.check(last.p_hat >= 0.2 && last.ci_lo >= 0.15,
          "final p_hat " + fmt("%.4f", last.p_hat) + ", Wilson lower " + fmt("%.4f", last.ci_lo));
  return o;
}

Outcome run_a7(const Context&) {
  Outcome o;
  {
    const double eta = 0.1, tau = 0.5;
    const double exact = 2.0 * tau * eta / (1.0 - (1.0 - eta) * (1.0 - eta));
    ChainState s = init_chain(PointMass{{0.0}}, 5, 0);
    const Landscape q = quadratic(1);
    for (int i = 0; i < 1000; ++i) ula_step_inplace(s, q, eta, tau);
    const int n = 1'000'000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      ula_step_inplace(s, q, eta, tau);
      sum += s.x[0];
      sum2 += s.x[0] * s.x[0];
    }
    const double var = sum2 / n - (sum / n) * (sum / n);
    o.check(std::abs(var / exact - 1.0) <= 0.03,
            "ULA stationary variance " + fmt("%.5f", var) + " vs AR(1) " + fmt("%.5f", exact));
  }
  {
    const Landscape zero = Landscape::from_functions(
        "zero", 1, [](std::span<const double>) { return 0.0; },
        [](std::span<const double>, std::span<double> g) { g[0] = 0.0; }, Box({-10.0}, {10.0}));
    const double eta = 0.01, tau = 0.4;
    ChainState s = init_chain(PointMass{{0.0}}, 6, 0);
    const int n = 1'000'000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double before = s.x[0];
      ula_step_inplace(s, zero, eta, tau);
      const double inc = s.x[0] - before;
      sum += inc;
      sum2 += inc * inc;
    }
    const double var = sum2 / n - (sum / n) * (sum / n);
    o.check(std::abs(var / (2.0 * tau * eta) - 1.0) <= 0.02,
            "flat increment variance " + fmt("%.6f", var) + " vs 2 tau eta " + fmt("%.6f", 2.0 * tau * eta));
  }
  {
    const std::vector<Landscape> catalog{quadratic(1), quadratic(3), double_well(0.0), double_well(0.2),
                                         double_well(0.5), triple_well(), double_well_2d(0.2)};
    std::size_t bad = 0, checked = 0;
    CounterStream rng(17, 3);
    for (const auto& land : catalog) {
      const Box& box = land.domain();
      for (int i = 0; i < 200; ++i) {
        Point x(box.dim());
        for (std::size_t a = 0; a < x.size(); ++a) {
          x[a] = 0.95 * (box.lo[a] + (box.hi[a] - box.lo[a]) * rng.next_uniform());
        }
        const Point g = land.grad(x);
        for (std::size_t a = 0; a < x.size(); ++a) {
          const double h = 1e-4 * std::max(1.0, std::abs(x[a]));
          Point xp = x, xm = x;
          xp[a] += h;
          xm[a] -= h;
          const double fd = (land.eval(xp) - land.eval(xm)) / (2.0 * h);
          ++checked;
          if (std::abs(fd - g[a]) > 1e-5 * std::max(1.0, std::abs(g[a]))) ++bad;
        }
      }
    }
    o.check(bad == 0, "gradient finite differences: " + std::to_string(bad) + " mismatches in " +
                          std::to_string(checked) + " components");
  }
  return o;
}

Outcome run_a8(const Context& ctx) {
  Outcome o;
  const fs::path many = ctx.out / "a5";
  const fs::path one = ctx.out / "a8_single";
  run_anneal(main_config(many), run_options(ctx.workers));
  fs::remove_all(one);
  run_anneal(main_config(one), run_options(1));
  const bool same = read_text_file(many / "tail.csv") == read_text_file(one / "tail.csv");
  o.check(same, "tail.csv byte-identical for " + std::to_string(ctx.workers) + " workers and 1 worker");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<std::string> only;
  Context ctx;
  std::string out = "acceptance_runs";
  app.add_option("--only", only, "Criteria to run (A1..A8)");
  app.add_option("--out", out, "Directory for experiment outputs");
  app.add_option("--workers", ctx.workers, "Worker threads for the end-to-end runs");
  CLI11_PARSE(app, argc, argv);
  ctx.out = out;

  const std::map<std::string, std::function<Outcome(const Context&)>> criteria{
      {"A1", run_a1}, {"A2", run_a2}, {"A3", run_a3}, {"A4", run_a4},
      {"A5", run_a5}, {"A6", run_a6}, {"A7", run_a7}, {"A8", run_a8}};
  if (only.empty()) {
    for (const auto& [name, fn] : criteria) only.push_back(name);
  }
  bool all_pass = true;
  for (const auto& name : only) {
    const auto it = criteria.find(name);
    if (it == criteria.end()) {
      std::fprintf(stderr, "unknown criterion %s\n", name.c_str());
      return 2;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome result;
    try {
      result = it->second(ctx);
    } catch (const Error& e) {
      result.check(false, std::string("error: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const auto& d : result.details) std::printf("  %s\n", d.c_str());
    std::printf("%s %s (%.1f s)\n", name.c_str(), result.pass ? "PASS" : "FAIL", secs);
    std::fflush(stdout);
    all_pass = all_pass && result.pass;
  }
  return all_pass ? 0 : 1;
}
