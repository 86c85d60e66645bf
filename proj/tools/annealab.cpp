#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "annealab/analysis.hpp"
#include "annealab/error.hpp"
#include "annealab/harness.hpp"

namespace fs = std::filesystem;
using namespace annealab;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned workers = 1;
  bool force = false;
  bool restart = false;
  bool quiet = false;
};

struct LandscapeOptions {
  std::optional<std::string> id;
  std::optional<double> a, dim, scale, half_width;
  std::vector<std::string> params;
  std::optional<std::uint64_t> cells;
};

void add_landscape_options(CLI::App* cmd, LandscapeOptions& o) {
  cmd->add_option("--landscape", o.id, "Catalog landscape id");
  cmd->add_option("--a", o.a, "Tilt parameter of the double wells");
  cmd->add_option("--dim", o.dim, "Dimension of the quadratic");
  cmd->add_option("--scale", o.scale, "Scale of the triple well");
  cmd->add_option("--half-width", o.half_width, "Half width of the domain box");
  cmd->add_option("--param", o.params, "Extra landscape parameter key=value");
  cmd->add_option("--cells", o.cells, "Grid cells per axis");
}

ExperimentConfig base_config(const GlobalOptions& g) {
  ExperimentConfig c = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  if (!g.out.empty()) c.output_dir = g.out;
  return c;
}

void apply_landscape(ExperimentConfig& c, const LandscapeOptions& o) {
  if (o.id && *o.id != c.landscape.id) {
    c.landscape.id = *o.id;
    c.landscape.params.clear();
  }
  if (o.a) c.landscape.params["a"] = *o.a;
  if (o.dim) c.landscape.params["dim"] = *o.dim;
  if (o.scale) c.landscape.params["scale"] = *o.scale;
  if (o.half_width) c.landscape.params["half_width"] = *o.half_width;
  for (const auto& kv : o.params) {
    const auto eq = kv.find('=');
    require(eq != std::string::npos && eq > 0, "--param expects key=value, got '" + kv + "'");
    try {
      c.landscape.params[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    } catch (const std::exception&) {
      fail(ErrorKind::kInvalidInput, "--param value is not a number: '" + kv + "'");
    }
  }
  if (o.cells) c.grid_cells = *o.cells;
}

Landscape build_landscape(const ExperimentConfig& c, std::uint64_t* cells_out) {
  const Landscape raw = make_catalog_landscape(c.landscape.id, c.landscape.params);
  const std::uint64_t cells = c.grid_cells.value_or(default_grid_cells(raw.dim()));
  if (cells_out) *cells_out = cells;
  return normalize(raw, cells);
}

void emit(const GlobalOptions& g, const std::string& file_name, const std::string& text) {
  std::cout << text;
  if (!g.out.empty() && !file_name.empty()) {
    fs::create_directories(g.out);
    write_text_file_atomic(fs::path(g.out) / file_name, text);
  }
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput:
    case ErrorKind::kDomainExceeded:
    case ErrorKind::kUnsupported:
    case ErrorKind::kDegenerateInput:
      return 2;
    default:
      return 1;
  }
}

std::string json_number(double v) {
  if (std::isfinite(v)) return format_double(v);
  return "\"" + format_double(v) + "\"";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated-annealing laboratory"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override the config seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--force", g.force, "Run even when the schedule is not valid or E <= E*");
  app.add_flag("--restart", g.restart, "Discard partial results in the output directory");
  app.add_flag("--quiet", g.quiet, "Suppress progress messages");

  // depth
  LandscapeOptions depth_land;
  auto* depth_cmd = app.add_subcommand("depth", "Critical depth of a landscape");
  add_landscape_options(depth_cmd, depth_land);

  // validate-schedule
  LandscapeOptions sched_land;
  std::optional<double> sched_theta, sched_eta0, sched_ratio, sched_energy, sched_mult;
  std::uint64_t sched_horizon = 1000000;
  auto* sched_cmd = app.add_subcommand("validate-schedule", "Check the step-size conditions");
  add_landscape_options(sched_cmd, sched_land);
  sched_cmd->add_option("--theta", sched_theta, "Step-size decay exponent");
  sched_cmd->add_option("--eta0", sched_eta0, "Initial step size");
  sched_cmd->add_option("--depth-ratio", sched_ratio, "E*/E; computed from the landscape when omitted");
  sched_cmd->add_option("--E", sched_energy, "Cooling energy");
  sched_cmd->add_option("--E-multiplier", sched_mult, "Cooling energy as a multiple of E*");
  sched_cmd->add_option("--horizon", sched_horizon, "Largest iteration sampled");

  // anneal
  LandscapeOptions anneal_land;
  std::optional<double> an_theta, an_eta0, an_energy, an_mult, an_delta, an_burn;
  std::optional<std::uint64_t> an_mu0_min;
  std::vector<double> an_mu0_x;
  std::optional<std::uint64_t> an_chains;
  std::optional<std::string> an_checkpoints;
  bool an_traj = false, an_record_x = false;
  auto* anneal_cmd = app.add_subcommand("anneal", "Run an annealing experiment");
  add_landscape_options(anneal_cmd, anneal_land);
  anneal_cmd->add_option("--theta", an_theta, "Step-size decay exponent");
  anneal_cmd->add_option("--eta0", an_eta0, "Initial step size");
  anneal_cmd->add_option("--E", an_energy, "Cooling energy");
  anneal_cmd->add_option("--E-multiplier", an_mult, "Cooling energy as a multiple of E*");
  anneal_cmd->add_option("--delta", an_delta, "Tail level");
  anneal_cmd->add_option("--n-chains", an_chains, "Number of chains");
  anneal_cmd->add_option("--checkpoints", an_checkpoints, "geometric(base,count)");
  anneal_cmd->add_option("--burn-in-theta", an_burn, "Burn-in in cumulative time");
  anneal_cmd->add_flag("--trajectories", an_traj, "Write trajectories.csv");
  anneal_cmd->add_flag("--record-x", an_record_x, "Include coordinates in trajectories.csv");
  auto* mu0_min_opt =
      anneal_cmd->add_option("--mu0-minimum", an_mu0_min, "Start at this grid minimum (0 is the global one)");
  anneal_cmd->add_option("--mu0-x", an_mu0_x, "Start at this point")->excludes(mu0_min_opt);

  // gibbs-tail
  LandscapeOptions gibbs_land;
  std::vector<double> gibbs_taus;
  std::optional<double> gibbs_delta;
  auto* gibbs_cmd = app.add_subcommand("gibbs-tail", "Gibbs tail probability by quadrature");
  add_landscape_options(gibbs_cmd, gibbs_land);
  gibbs_cmd->add_option("--tau", gibbs_taus, "Temperatures")->required();
  gibbs_cmd->add_option("--delta", gibbs_delta, "Tail level");

  // spectral
  LandscapeOptions spec_land;
  std::vector<double> spec_taus;
  auto* spec_cmd = app.add_subcommand("spectral", "Spectral gap of the 1-D generator");
  add_landscape_options(spec_cmd, spec_land);
  spec_cmd->add_option("--tau", spec_taus, "Temperatures (decreasing)")->required();

  // fit
  std::string fit_tail;
  std::optional<double> fit_burn, fit_rate, fit_eps;
  std::uint64_t fit_min_exceed = 5;
  auto* fit_cmd = app.add_subcommand("fit", "Re-fit the decay of an existing tail.csv");
  fit_cmd->add_option("--tail", fit_tail, "tail.csv to fit")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--burn-in-theta", fit_burn, "Burn-in in cumulative time")->required();
  fit_cmd->add_option("--min-exceed", fit_min_exceed, "Minimum exceedances per usable row");
  fit_cmd->add_option("--rate", fit_rate, "Theoretical rate for the bound check");
  fit_cmd->add_option("--epsilon", fit_eps, "Slack for the bound check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*depth_cmd) {
      ExperimentConfig c = base_config(g);
      apply_landscape(c, depth_land);
      std::uint64_t cells = 0;
      const Landscape land = build_landscape(c, &cells);
      emit(g, "depth.json", depth_report_json(critical_depth(discretize(land, cells))));
      return 0;
    }

    if (*sched_cmd) {
      ExperimentConfig c = base_config(g);
      apply_landscape(c, sched_land);
      if (sched_theta) c.steps.theta = *sched_theta;
      const double eta0 = sched_eta0.value_or(c.steps.eta0.value_or(1.0));
      double ratio = 0.0;
      if (sched_ratio) {
        ratio = *sched_ratio;
      } else {
        std::uint64_t cells = 0;
        const Landscape land = build_landscape(c, &cells);
        const double e_star = critical_depth(discretize(land, cells)).critical_depth;
        double energy = 0.0;
        if (sched_energy) {
          energy = *sched_energy;
        } else if (sched_mult) {
          energy = *sched_mult * e_star;
        } else if (c.cooling.energy) {
          energy = *c.cooling.energy;
        } else {
          energy = *c.cooling.e_multiplier * e_star;
        }
        require(energy > 0.0, "cooling energy must be positive");
        ratio = e_star / energy;
      }
      const StepSchedule ss(eta0, c.steps.theta);
      emit(g, "schedule.json", schedule_report_json(validate_allowing_zero_depth(ss, ratio, sched_horizon)));
      return 0;
    }

    if (*anneal_cmd) {
      ExperimentConfig c = base_config(g);
      apply_landscape(c, anneal_land);
      if (an_theta) c.steps.theta = *an_theta;
      if (an_eta0) c.steps.eta0 = *an_eta0;
      if (an_energy) {
        c.cooling.energy = *an_energy;
        c.cooling.e_multiplier.reset();
      }
      if (an_mult) {
        c.cooling.e_multiplier = *an_mult;
        c.cooling.energy.reset();
      }
      if (an_delta) c.delta = *an_delta;
      if (an_chains) c.n_chains = *an_chains;
      if (an_burn) c.burn_in_theta = *an_burn;
      if (an_mu0_min || !an_mu0_x.empty()) c.mu0 = InitialSpec{};
      if (an_mu0_min) c.mu0.minimum_index = *an_mu0_min;
      if (!an_mu0_x.empty()) c.mu0.x = an_mu0_x;
      if (an_checkpoints) {
        c.checkpoints = parse_config("{\"checkpoints\": \"" + *an_checkpoints + "\"}").checkpoints;
      }
      c = parse_config(config_to_json(c));
      RunOptions opts;
      opts.workers = g.workers;
      opts.force = g.force;
      opts.restart = g.restart;
      opts.trajectories = an_traj;
      opts.record_x = an_record_x;
      if (!g.quiet) opts.log = [](const std::string& m) { std::cerr << m << "\n"; };
      const ExperimentResult r = run_anneal(c, opts);
      std::cout << read_text_file(fs::path(c.output_dir) / "result.json");
      return r.status == RunStatus::kComplete ? 0 : 1;
    }

    if (*gibbs_cmd) {
      ExperimentConfig c = base_config(g);
      apply_landscape(c, gibbs_land);
      const double delta = gibbs_delta.value_or(c.delta);
      std::uint64_t cells = 0;
      const Landscape land = build_landscape(c, &cells);
      const GridField grid = discretize(land, cells);
      std::string out = "{\n  \"delta\": " + json_number(delta) + ",\n  \"rows\": [\n";
      for (std::size_t i = 0; i < gibbs_taus.size(); ++i) {
        const double p = gibbs_tail_quadrature(grid, gibbs_taus[i], delta);
        out += "    {\"tau\": " + json_number(gibbs_taus[i]) + ", \"probability\": " + json_number(p) +
               ", \"minus_tau_log_p\": " + json_number(-gibbs_taus[i] * std::log(p)) + "}";
        out += i + 1 < gibbs_taus.size() ? ",\n" : "\n";
      }
      out += "  ]\n}\n";
      emit(g, "gibbs_tail.json", out);
      return 0;
    }

    if (*spec_cmd) {
      ExperimentConfig c = base_config(g);
      apply_landscape(c, spec_land);
      if (!c.grid_cells) c.grid_cells = 2049;
      const Landscape land = make_catalog_landscape(c.landscape.id, c.landscape.params);
      if (spec_taus.size() == 1) {
        SpectralReport rep;
        rep.taus = spec_taus;
        rep.gaps.push_back(spectral_gap_1d(land, spec_taus[0], *c.grid_cells));
        rep.critical_depth = critical_depth(discretize(normalize(land, *c.grid_cells), *c.grid_cells)).critical_depth;
        rep.notes.push_back("single temperature: no barrier fit");
        emit(g, "spectral.json", spectral_report_json(rep));
      } else {
        emit(g, "spectral.json", spectral_report_json(eyring_kramers_fit(land, spec_taus, *c.grid_cells)));
      }
      return 0;
    }

    if (*fit_cmd) {
      const TailCurve curve = parse_tail_csv(read_text_file(fit_tail), 0.0);
      FitOptions fo{*fit_burn, fit_min_exceed};
      const FitResult fit = fit_decay(curve, fo);
      std::string text = fit_result_json(fit);
      int code = 0;
      if (fit_rate) {
        const BoundCheck b = theoretical_bound_check(curve, *fit_rate, fit_eps.value_or(0.05), fo);
        text.resize(text.size() - 3);
        text += ",\n  \"bound_holds\": " + std::string(b.holds ? "true" : "false") +
                ",\n  \"fitted_c\": " + json_number(b.fitted_c) + "\n}\n";
        if (!b.holds) code = 1;
      }
      emit(g, "fit.json", text);
      return code;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
