#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "annealab/analysis.hpp"
#include "annealab/depth.hpp"
#include "annealab/dynamics.hpp"
#include "annealab/landscape.hpp"
#include "annealab/schedule.hpp"

namespace annealab {

inline constexpr const char* kArtifactVersion = "annealab 0.1.0";
inline constexpr double kMaxDivergenceFraction = 0.1;

struct LandscapeSpec {
  std::string id = "double_well";
  ParamMap params;
  bool operator==(const LandscapeSpec&) const = default;
};

struct CoolingSpec {
  std::optional<double> energy;        // absolute E
  std::optional<double> e_multiplier = 1.5;  // E = multiplier * E*
  double t_offset = std::numbers::e;
  bool operator==(const CoolingSpec&) const = default;
};

struct StepSpec {
  std::optional<double> eta0;  // empty means "auto" (1 / Lipschitz estimate)
  double theta = 0.75;
  bool operator==(const StepSpec&) const = default;
};

// k = base^1, ..., base^count.
struct GeometricCheckpoints {
  std::uint64_t base = 2;
  std::uint64_t count = 20;
  bool operator==(const GeometricCheckpoints&) const = default;
};

using CheckpointSpec = std::variant<GeometricCheckpoints, std::vector<std::uint64_t>>;

std::vector<std::uint64_t> resolve_checkpoints(const CheckpointSpec& spec);

struct InitialSpec {
  std::string kind = "point_mass";            // point_mass | gaussian
  std::optional<Point> x;                     // point_mass location or gaussian mean
  std::optional<std::uint64_t> minimum_index; // index into the sorted grid minima
                                              // (neither set: the highest minimum)
  double stddev = 1.0;
  bool operator==(const InitialSpec&) const = default;
};

struct ExperimentConfig {
  LandscapeSpec landscape;
  CoolingSpec cooling;
  StepSpec steps;
  double delta = 0.3;
  std::uint64_t n_chains = 1000;
  CheckpointSpec checkpoints = GeometricCheckpoints{};
  std::uint64_t seed = 0;
  InitialSpec mu0;
  std::string output_dir = "run";
  double epsilon = 0.05;
  std::optional<std::uint64_t> grid_cells;  // per axis; default depends on dimension
  std::optional<double> burn_in_theta;      // default: first Theta with tau <= E / ln 100
  std::uint64_t min_exceed = 5;
  double ci_level = 0.95;

  bool operator==(const ExperimentConfig&) const = default;
};

// JSON text <-> config. Unknown keys and malformed values raise invalid-input.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

std::uint64_t default_grid_cells(std::size_t dim);

// Resolved run parameters shared by the subcommands.
struct ExperimentSetup {
  Landscape landscape;
  GridField grid;
  DepthReport depth;
  CoolingSchedule cooling;
  StepSchedule steps;
  InitialDistribution mu0;
  std::vector<std::uint64_t> checkpoints;
};

ExperimentSetup prepare_experiment(const ExperimentConfig& config);

// Schedule report for the run; E <= E* yields an invalid verdict with a note
// instead of an error.
ScheduleCheckReport check_run_schedule(const ExperimentSetup& setup);

struct RunOptions {
  unsigned workers = 1;
  bool force = false;        // run even if the schedule verdict is not valid
  bool restart = false;      // discard partial results instead of resuming
  bool trajectories = false; // write trajectories.csv
  bool record_x = false;     // include coordinates in trajectories.csv
  std::uint64_t batch_size = 250;
  std::function<void(const std::string&)> log;
};

enum class RunStatus { kComplete, kFailed };

struct ExperimentResult {
  RunStatus status = RunStatus::kFailed;
  std::filesystem::path output_dir;
  double energy = 0.0;
  double eta0 = 0.0;
  double critical_depth = 0.0;
  std::optional<double> rate;
  TailCurve tail;
  std::optional<FitResult> fit;
  std::optional<BoundCheck> bound;
  std::uint64_t n_diverged = 0;
  std::vector<std::string> failures;
  std::vector<std::string> notes;
  std::string content_hash;
  double wall_seconds = 0.0;
};

// Runs the experiment and persists config.json, depth.json, schedule.json,
// tail.csv, fit.json, result.json and a status file in the output directory.
ExperimentResult run_anneal(const ExperimentConfig& config, const RunOptions& options);

// Serializers shared with the CLI and the bindings. Floats use 17 significant
// digits in CSV.
std::string depth_report_json(const DepthReport& report);
std::string schedule_report_json(const ScheduleCheckReport& report);
std::string spectral_report_json(const SpectralReport& report);
std::string fit_result_json(const FitResult& fit);
std::string tail_curve_csv(const TailCurve& curve);
TailCurve parse_tail_csv(const std::string& csv_text, double delta);

std::string format_double(double v);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file_atomic(const std::filesystem::path& path, const std::string& text);

// FNV-1a over the run's output files, excluding wall-clock metadata.
std::string content_hash(const std::filesystem::path& output_dir);

}  // namespace annealab
