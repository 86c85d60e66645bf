#include "annealab/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

#include "annealab/error.hpp"

namespace annealab {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kMaxCheckpoint = std::uint64_t{1} << 24;
constexpr std::size_t kLipschitzSamples = 256;

[[noreturn]] void bad_config(const std::string& msg) { fail(ErrorKind::kInvalidInput, "config: " + msg); }

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) bad_config(where + " must be an object");
  for (const auto& item : obj.items()) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(),
                                [&](const char* a) { return item.key() == a; });
    if (!ok) bad_config("unknown key '" + item.key() + "' in " + where);
  }
}

double get_number(const json& j, const std::string& what) {
  if (!j.is_number()) bad_config(what + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad_config(what + " must be finite");
  return v;
}

std::uint64_t get_count(const json& j, const std::string& what) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
  bad_config(what + " must be a nonnegative integer");
}

Point get_point(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) bad_config(what + " must be a nonempty array of numbers");
  Point p;
  for (const auto& v : j) p.push_back(get_number(v, what));
  return p;
}

CheckpointSpec parse_checkpoints(const json& j) {
  if (j.is_string()) {
    static const std::regex pattern(R"(\s*geometric\(\s*(\d+)\s*,\s*(\d+)\s*\)\s*)");
    std::smatch m;
    const std::string s = j.get<std::string>();
    if (!std::regex_match(s, m, pattern)) bad_config("checkpoints string must be geometric(base, count)");
    return GeometricCheckpoints{std::stoull(m[1].str()), std::stoull(m[2].str())};
  }
  if (!j.is_array()) bad_config("checkpoints must be a list or geometric(base, count)");
  std::vector<std::uint64_t> ks;
  for (const auto& v : j) ks.push_back(get_count(v, "checkpoint"));
  return ks;
}

json checkpoints_to_json(const CheckpointSpec& spec) {
  if (const auto* g = std::get_if<GeometricCheckpoints>(&spec)) {
    return "geometric(" + std::to_string(g->base) + "," + std::to_string(g->count) + ")";
  }
  return std::get<std::vector<std::uint64_t>>(spec);
}

void validate_config(const ExperimentConfig& c) {
  require(!c.landscape.id.empty(), "config: landscape.id is required");
  require(c.cooling.energy.has_value() != c.cooling.e_multiplier.has_value(),
          "config: cooling needs exactly one of E and E_multiplier");
  if (c.cooling.energy) require(*c.cooling.energy > 0.0, "config: cooling.E must be positive");
  if (c.cooling.e_multiplier) require(*c.cooling.e_multiplier > 0.0, "config: cooling.E_multiplier must be positive");
  require(c.cooling.t_offset >= std::numbers::e, "config: cooling.t_offset must be >= e");
  if (c.steps.eta0) require(*c.steps.eta0 > 0.0, "config: steps.eta0 must be positive");
  require(c.steps.theta > 0.0 && c.steps.theta <= 1.0, "config: steps.theta must lie in (0, 1]");
  require(c.delta > 0.0, "config: delta must be positive");
  require(c.n_chains >= 1, "config: n_chains must be at least 1");
  require(c.epsilon > 0.0, "config: epsilon must be positive");
  require(c.ci_level > 0.0 && c.ci_level < 1.0, "config: ci_level must lie in (0, 1)");
  if (c.grid_cells) require(*c.grid_cells >= 3, "config: grid_cells must be at least 3");
  if (c.burn_in_theta) require(*c.burn_in_theta >= 0.0, "config: burn_in_theta must be nonnegative");
  require(c.mu0.kind == "point_mass" || c.mu0.kind == "gaussian",
          "config: mu0.kind must be point_mass or gaussian");
  if (c.mu0.kind == "point_mass") {
    require(!(c.mu0.x.has_value() && c.mu0.minimum_index.has_value()),
            "config: point_mass takes at most one of x and minimum_index");
  } else {
    require(c.mu0.x.has_value(), "config: gaussian needs mean");
    require(c.mu0.stddev > 0.0, "config: gaussian stddev must be positive");
  }
  resolve_checkpoints(c.checkpoints);
}

std::string iso_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// JSON number, or the string "inf"/"nan" for values JSON cannot hold.
json num(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

json point_json(const Point& p) {
  json a = json::array();
  for (double v : p) a.push_back(num(v));
  return a;
}

json fit_json(const FitResult& f) {
  json j;
  j["slope"] = num(f.slope);
  j["intercept"] = num(f.intercept);
  j["r_squared"] = num(f.r_squared);
  j["n_points"] = f.n_points;
  j["burn_in_k"] = f.burn_in_k;
  return j;
}

json bound_json(const BoundCheck& b) {
  json j;
  j["holds"] = b.holds;
  j["fitted_c"] = num(b.fitted_c);
  j["first_half_c"] = num(b.first_half_c);
  j["n_usable"] = b.n_usable;
  j["n_checked"] = b.n_checked;
  j["n_violations"] = b.n_violations;
  return j;
}

std::uint64_t fnv1a(std::uint64_t h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Batch files ------------------------------------------------------------------

struct ChainRecord {
  std::uint64_t chain_id = 0;
  std::uint64_t diverged_k = 0;  // 0 when the chain never diverged
  std::vector<double> f;         // per checkpoint
  std::vector<double> x;         // per checkpoint, d coordinates each
};

std::string hex_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') fail(ErrorKind::kIo, "malformed number '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string batch_text(const std::vector<ChainRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += std::to_string(r.chain_id) + "," + std::to_string(r.diverged_k);
    for (double v : r.f) out += "," + hex_double(v);
    for (double v : r.x) out += "," + hex_double(v);
    out += "\n";
  }
  return out;
}

std::vector<ChainRecord> parse_batch(const std::string& text, std::size_t n_checkpoints, std::size_t dim) {
  std::vector<ChainRecord> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 2 + n_checkpoints * (1 + dim)) fail(ErrorKind::kIo, "corrupt batch file");
    ChainRecord r;
    r.chain_id = std::stoull(cells[0]);
    r.diverged_k = std::stoull(cells[1]);
    for (std::size_t j = 0; j < n_checkpoints; ++j) r.f.push_back(parse_double(cells[2 + j]));
    for (std::size_t j = 2 + n_checkpoints; j < cells.size(); ++j) r.x.push_back(parse_double(cells[j]));
    out.push_back(std::move(r));
  }
  return out;
}

ChainRecord simulate_chain(const ExperimentSetup& setup, const ScheduleTable& table,
                           std::uint64_t seed, std::uint64_t chain_id) {
  const std::size_t d = setup.landscape.dim();
  ChainRecord r;
  r.chain_id = chain_id;
  ChainState s = init_chain(setup.mu0, seed, chain_id);
  for (std::uint64_t k : setup.checkpoints) {
    if (r.diverged_k == 0) {
      try {
        advance_chain(s, setup.landscape, table, k);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kDivergence) throw;
        r.diverged_k = s.k + 1;
      }
    }
    if (r.diverged_k == 0) {
      r.f.push_back(setup.landscape.value(s.x));
      r.x.insert(r.x.end(), s.x.begin(), s.x.end());
    } else {
      r.f.push_back(std::numeric_limits<double>::infinity());
      r.x.insert(r.x.end(), d, std::numeric_limits<double>::quiet_NaN());
    }
  }
  return r;
}

const char* kManagedFiles[] = {"config.json", "depth.json",       "schedule.json", "tail.csv",
                               "fit.json",    "result.json",      "status",        "trajectories.csv"};

void clear_run_dir(const fs::path& dir) {
  for (const char* name : kManagedFiles) fs::remove(dir / name);
  fs::remove_all(dir / "chains");
}

}  // namespace

// Formatting -------------------------------------------------------------------

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) fail(ErrorKind::kIo, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

// Config -----------------------------------------------------------------------

std::vector<std::uint64_t> resolve_checkpoints(const CheckpointSpec& spec) {
  std::vector<std::uint64_t> ks;
  if (const auto* g = std::get_if<GeometricCheckpoints>(&spec)) {
    require(g->base >= 2, "config: geometric checkpoint base must be at least 2");
    require(g->count >= 1, "config: geometric checkpoint count must be at least 1");
    std::uint64_t k = 1;
    for (std::uint64_t i = 0; i < g->count; ++i) {
      if (k > kMaxCheckpoint / g->base) {
        fail(ErrorKind::kResource, "checkpoints exceed the limit of " + std::to_string(kMaxCheckpoint) + " steps");
      }
      k *= g->base;
      ks.push_back(k);
    }
  } else {
    ks = std::get<std::vector<std::uint64_t>>(spec);
    require(!ks.empty(), "config: checkpoints must be nonempty");
    require(ks.front() >= 1, "config: checkpoints must be positive");
    for (std::size_t i = 1; i < ks.size(); ++i) {
      require(ks[i] > ks[i - 1], "config: checkpoints must be strictly increasing");
    }
    if (ks.back() > kMaxCheckpoint) {
      fail(ErrorKind::kResource, "checkpoints exceed the limit of " + std::to_string(kMaxCheckpoint) + " steps");
    }
  }
  return ks;
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    bad_config(std::string("malformed JSON: ") + e.what());
  }
  check_keys(j, "config",
             {"landscape", "cooling", "steps", "delta", "n_chains", "checkpoints", "seed", "mu0",
              "output_dir", "epsilon", "grid_cells", "burn_in_theta", "min_exceed", "ci_level"});
  ExperimentConfig c;
  if (j.contains("landscape")) {
    const auto& l = j["landscape"];
    check_keys(l, "landscape", {"id", "params"});
    if (!l.contains("id") || !l["id"].is_string()) bad_config("landscape.id must be a string");
    c.landscape.id = l["id"].get<std::string>();
    if (l.contains("params")) {
      if (!l["params"].is_object()) bad_config("landscape.params must be an object");
      for (const auto& p : l["params"].items()) {
        c.landscape.params[p.key()] = get_number(p.value(), "landscape.params." + p.key());
      }
    }
  }
  if (j.contains("cooling")) {
    const auto& cj = j["cooling"];
    check_keys(cj, "cooling", {"E", "E_multiplier", "t_offset"});
    if (cj.contains("E") && cj.contains("E_multiplier")) bad_config("cooling needs exactly one of E and E_multiplier");
    if (cj.contains("E")) {
      c.cooling.energy = get_number(cj["E"], "cooling.E");
      c.cooling.e_multiplier.reset();
    }
    if (cj.contains("E_multiplier")) c.cooling.e_multiplier = get_number(cj["E_multiplier"], "cooling.E_multiplier");
    if (cj.contains("t_offset")) c.cooling.t_offset = get_number(cj["t_offset"], "cooling.t_offset");
  }
  if (j.contains("steps")) {
    const auto& sj = j["steps"];
    check_keys(sj, "steps", {"eta0", "theta"});
    if (sj.contains("eta0")) {
      if (sj["eta0"].is_string()) {
        if (sj["eta0"].get<std::string>() != "auto") bad_config("steps.eta0 must be a number or \"auto\"");
        c.steps.eta0.reset();
      } else {
        c.steps.eta0 = get_number(sj["eta0"], "steps.eta0");
      }
    }
    if (sj.contains("theta")) c.steps.theta = get_number(sj["theta"], "steps.theta");
  }
  if (j.contains("delta")) c.delta = get_number(j["delta"], "delta");
  if (j.contains("n_chains")) c.n_chains = get_count(j["n_chains"], "n_chains");
  if (j.contains("checkpoints")) c.checkpoints = parse_checkpoints(j["checkpoints"]);
  if (j.contains("seed")) c.seed = get_count(j["seed"], "seed");
  if (j.contains("mu0")) {
    const auto& mj = j["mu0"];
    check_keys(mj, "mu0", {"kind", "x", "minimum_index", "mean", "stddev"});
    if (mj.contains("kind")) {
      if (!mj["kind"].is_string()) bad_config("mu0.kind must be a string");
      c.mu0.kind = mj["kind"].get<std::string>();
    }
    if (c.mu0.kind == "gaussian") {
      if (mj.contains("x") || mj.contains("minimum_index")) bad_config("gaussian mu0 takes mean and stddev");
      if (mj.contains("mean")) c.mu0.x = get_point(mj["mean"], "mu0.mean");
      if (mj.contains("stddev")) c.mu0.stddev = get_number(mj["stddev"], "mu0.stddev");
    } else {
      if (mj.contains("mean") || mj.contains("stddev")) bad_config("point_mass mu0 takes x or minimum_index");
      if (mj.contains("x")) c.mu0.x = get_point(mj["x"], "mu0.x");
      if (mj.contains("minimum_index")) c.mu0.minimum_index = get_count(mj["minimum_index"], "mu0.minimum_index");
    }
  }
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string()) bad_config("output_dir must be a string");
    c.output_dir = j["output_dir"].get<std::string>();
  }
  if (j.contains("epsilon")) c.epsilon = get_number(j["epsilon"], "epsilon");
  if (j.contains("grid_cells")) c.grid_cells = get_count(j["grid_cells"], "grid_cells");
  if (j.contains("burn_in_theta")) c.burn_in_theta = get_number(j["burn_in_theta"], "burn_in_theta");
  if (j.contains("min_exceed")) c.min_exceed = get_count(j["min_exceed"], "min_exceed");
  if (j.contains("ci_level")) c.ci_level = get_number(j["ci_level"], "ci_level");
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const fs::path& path) { return parse_config(read_text_file(path)); }

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["landscape"]["id"] = c.landscape.id;
  j["landscape"]["params"] = json::object();
  for (const auto& [k, v] : c.landscape.params) j["landscape"]["params"][k] = v;
  if (c.cooling.energy) j["cooling"]["E"] = *c.cooling.energy;
  if (c.cooling.e_multiplier) j["cooling"]["E_multiplier"] = *c.cooling.e_multiplier;
  j["cooling"]["t_offset"] = c.cooling.t_offset;
  if (c.steps.eta0) {
    j["steps"]["eta0"] = *c.steps.eta0;
  } else {
    j["steps"]["eta0"] = "auto";
  }
  j["steps"]["theta"] = c.steps.theta;
  j["delta"] = c.delta;
  j["n_chains"] = c.n_chains;
  j["checkpoints"] = checkpoints_to_json(c.checkpoints);
  j["seed"] = c.seed;
  j["mu0"]["kind"] = c.mu0.kind;
  if (c.mu0.kind == "gaussian") {
    if (c.mu0.x) j["mu0"]["mean"] = *c.mu0.x;
    j["mu0"]["stddev"] = c.mu0.stddev;
  } else {
    if (c.mu0.x) j["mu0"]["x"] = *c.mu0.x;
    if (c.mu0.minimum_index) j["mu0"]["minimum_index"] = *c.mu0.minimum_index;
  }
  j["output_dir"] = c.output_dir;
  j["epsilon"] = c.epsilon;
  if (c.grid_cells) j["grid_cells"] = *c.grid_cells;
  if (c.burn_in_theta) j["burn_in_theta"] = *c.burn_in_theta;
  j["min_exceed"] = c.min_exceed;
  j["ci_level"] = c.ci_level;
  return j.dump(2) + "\n";
}

std::uint64_t default_grid_cells(std::size_t dim) {
  switch (dim) {
    case 1: return 16385;
    case 2: return 1025;
    case 3: return 129;
    default: return std::max<std::uint64_t>(3, static_cast<std::uint64_t>(std::pow(1e6, 1.0 / static_cast<double>(dim))));
  }
}

// Setup ------------------------------------------------------------------------

ExperimentSetup prepare_experiment(const ExperimentConfig& config) {
  validate_config(config);
  const Landscape raw = make_catalog_landscape(config.landscape.id, config.landscape.params);
  const std::uint64_t cells = config.grid_cells.value_or(default_grid_cells(raw.dim()));
  const Landscape land = normalize(raw, cells);
  GridField grid = discretize(land, cells);
  DepthReport depth = critical_depth(grid);

  double energy = 0.0;
  if (config.cooling.energy) {
    energy = *config.cooling.energy;
  } else {
    require(depth.critical_depth > 0.0,
            "cooling.E_multiplier needs a landscape with positive critical depth; set cooling.E instead");
    energy = *config.cooling.e_multiplier * depth.critical_depth;
  }
  const CoolingSchedule cooling(energy, config.cooling.t_offset);

  const double eta0 = config.steps.eta0 ? *config.steps.eta0
                                        : 1.0 / estimate_lipschitz(land, kLipschitzSamples, 0);
  const StepSchedule steps(eta0, config.steps.theta);

  InitialDistribution mu0;
  const auto& m = config.mu0;
  if (m.kind == "gaussian") {
    require(m.x->size() == land.dim(), "config: mu0.mean dimension does not match the landscape");
    mu0 = Gaussian{*m.x, m.stddev};
  } else if (m.minimum_index) {
    require(*m.minimum_index < depth.minima.size(),
            "config: mu0.minimum_index " + std::to_string(*m.minimum_index) + " out of range; the grid has " +
                std::to_string(depth.minima.size()) + " minima");
    mu0 = PointMass{depth.minima[*m.minimum_index].x};
  } else if (m.x) {
    require(m.x->size() == land.dim(), "config: mu0.x dimension does not match the landscape");
    mu0 = PointMass{*m.x};
  } else {
    mu0 = PointMass{depth.minima.back().x};
  }

  return {land, std::move(grid), std::move(depth), cooling, steps, std::move(mu0),
          resolve_checkpoints(config.checkpoints)};
}

ScheduleCheckReport check_run_schedule(const ExperimentSetup& setup) {
  const std::uint64_t horizon = std::max<std::uint64_t>(1000, setup.checkpoints.back());
  const double ratio = setup.depth.critical_depth / setup.cooling.energy;
  if (ratio >= 1.0) {
    ScheduleCheckReport rep = validate_allowing_zero_depth(setup.steps, 0.0, horizon);
    rep.depth_ratio = ratio;
    rep.verdict = Verdict::kInvalid;
    rep.notes.push_back("E <= E*: outside the convergence regime; technical condition not evaluated");
    return rep;
  }
  return validate_allowing_zero_depth(setup.steps, ratio, horizon);
}

// Serializers ------------------------------------------------------------------

std::string depth_report_json(const DepthReport& r) {
  json j;
  j["minima"] = json::array();
  for (const auto& m : r.minima) {
    json mj;
    mj["x"] = point_json(m.x);
    mj["f"] = num(m.value);
    j["minima"].push_back(mj);
  }
  const std::size_t n = r.minima.size();
  j["saddle_heights"] = json::array();
  j["communicating_saddles"] = json::array();
  for (std::size_t a = 0; a < n; ++a) {
    json row = json::array(), pts = json::array();
    for (std::size_t b = 0; b < n; ++b) {
      row.push_back(num(r.saddles.height(a, b)));
      pts.push_back(point_json(r.saddle_points[a * n + b]));
    }
    j["saddle_heights"].push_back(row);
    j["communicating_saddles"].push_back(pts);
  }
  j["critical_depth"] = num(r.critical_depth);
  j["dominating_index"] = r.dominating_index;
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

std::string schedule_report_json(const ScheduleCheckReport& r) {
  json j;
  j["depth_ratio"] = num(r.depth_ratio);
  j["horizon"] = r.horizon;
  j["theta_in_valid_range"] = r.theta_in_valid_range;
  j["cond_theta_diverges"] = r.cond_theta_diverges;
  j["cond_product_vanishes"] = r.cond_product_vanishes;
  j["cond_technical"] = r.cond_technical;
  j["numeric_theta_diverges"] = r.numeric_theta_diverges;
  j["numeric_product_vanishes"] = r.numeric_product_vanishes;
  j["numeric_technical"] = r.numeric_technical;
  j["numeric_trends"] = json::array();
  for (const auto& t : r.numeric_trends) {
    json tj;
    tj["k"] = t.k;
    tj["theta_cum"] = num(t.theta_cum);
    tj["step_times_cumulative"] = num(t.step_times_cumulative);
    tj["technical_ratio"] = num(t.technical_ratio);
    j["numeric_trends"].push_back(tj);
  }
  j["verdict"] = std::string(to_string(r.verdict));
  j["notes"] = r.notes;
  return j.dump(2) + "\n";
}

std::string spectral_report_json(const SpectralReport& r) {
  json j;
  j["taus"] = json::array();
  j["gaps"] = json::array();
  for (double t : r.taus) j["taus"].push_back(num(t));
  for (double g : r.gaps) j["gaps"].push_back(num(g));
  j["fitted_barrier"] = num(r.fitted_barrier);
  j["fit_intercept"] = num(r.fit_intercept);
  j["fit_r_squared"] = num(r.fit_r_squared);
  j["critical_depth"] = num(r.critical_depth);
  j["notes"] = r.notes;
  return j.dump(2) + "\n";
}

std::string fit_result_json(const FitResult& fit) { return fit_json(fit).dump(2) + "\n"; }

std::string tail_curve_csv(const TailCurve& curve) {
  std::string out = "k,theta,tau,n,n_exceed,p_hat,ci_lo,ci_hi\n";
  for (const auto& r : curve.rows) {
    out += std::to_string(r.k) + "," + format_double(r.theta_cum) + "," + format_double(r.tau) + "," +
           std::to_string(r.n_chains) + "," + std::to_string(r.n_exceed) + "," + format_double(r.p_hat) +
           "," + format_double(r.ci_lo) + "," + format_double(r.ci_hi) + "\n";
  }
  return out;
}

TailCurve parse_tail_csv(const std::string& csv_text, double delta) {
  std::istringstream is(csv_text);
  std::string line;
  if (!std::getline(is, line) || line != "k,theta,tau,n,n_exceed,p_hat,ci_lo,ci_hi") {
    fail(ErrorKind::kInvalidInput, "tail CSV must start with the header k,theta,tau,n,n_exceed,p_hat,ci_lo,ci_hi");
  }
  TailCurve curve;
  curve.delta = delta;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 8) fail(ErrorKind::kInvalidInput, "tail CSV line " + std::to_string(line_no) + " needs 8 fields");
    try {
      TailRow r;
      r.k = std::stoull(cells[0]);
      r.theta_cum = parse_double(cells[1]);
      r.tau = parse_double(cells[2]);
      r.n_chains = std::stoull(cells[3]);
      r.n_exceed = std::stoull(cells[4]);
      r.p_hat = parse_double(cells[5]);
      r.ci_lo = parse_double(cells[6]);
      r.ci_hi = parse_double(cells[7]);
      if (!curve.rows.empty()) require(r.k > curve.rows.back().k, "tail CSV rows must be sorted by k");
      curve.rows.push_back(r);
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      fail(ErrorKind::kInvalidInput, "tail CSV line " + std::to_string(line_no) + " is malformed");
    }
  }
  require(!curve.rows.empty(), "tail CSV has no rows");
  return curve;
}

std::string content_hash(const fs::path& dir) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char* name : {"config.json", "depth.json", "schedule.json", "tail.csv", "fit.json"}) {
    h = fnv1a(h, name);
    h = fnv1a(h, read_text_file(dir / name));
  }
  json result = json::parse(read_text_file(dir / "result.json"));
  result.erase("wall_clock");
  result.erase("content_hash");
  h = fnv1a(h, "result.json");
  h = fnv1a(h, result.dump());
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Orchestration ----------------------------------------------------------------

ExperimentResult run_anneal(const ExperimentConfig& config, const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  const std::string started_iso = iso_now();
  auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };
  require(options.workers >= 1, "workers must be at least 1");
  require(options.batch_size >= 1, "batch size must be at least 1");

  const ExperimentSetup setup = prepare_experiment(config);
  const ScheduleCheckReport schedule = check_run_schedule(setup);
  if (config.cooling.e_multiplier && *config.cooling.e_multiplier <= 1.0 && !options.force) {
    fail(ErrorKind::kInvalidInput, "E_multiplier <= 1 puts E at or below E*; pass --force to run anyway");
  }
  if (schedule.verdict != Verdict::kValid && !options.force) {
    fail(ErrorKind::kInvalidInput, "schedule verdict is " + std::string(to_string(schedule.verdict)) +
                                       "; pass --force to run anyway");
  }

  ExperimentResult result;
  result.output_dir = config.output_dir;
  result.energy = setup.cooling.energy;
  result.eta0 = setup.steps.eta0;
  result.critical_depth = setup.depth.critical_depth;
  if (schedule.verdict != Verdict::kValid) {
    result.notes.push_back("forced run: schedule verdict is " + std::string(to_string(schedule.verdict)));
  }

  const fs::path dir = config.output_dir;
  const std::string config_text = config_to_json(config);
  fs::create_directories(dir);
  if (fs::exists(dir / "config.json")) {
    const bool same = read_text_file(dir / "config.json") == config_text;
    if (!same && !options.restart) {
      fail(ErrorKind::kInvalidInput, "output directory " + dir.string() +
                                         " holds a different experiment; pass --restart to overwrite it");
    }
    if (options.restart) {
      clear_run_dir(dir);
    } else {
      log("resuming run in " + dir.string());
    }
  }
  write_text_file_atomic(dir / "status", "status=incomplete\n");
  write_text_file_atomic(dir / "config.json", config_text);
  write_text_file_atomic(dir / "depth.json", depth_report_json(setup.depth));
  write_text_file_atomic(dir / "schedule.json", schedule_report_json(schedule));
  fs::create_directories(dir / "chains");

  const std::uint64_t max_k = setup.checkpoints.back();
  const ScheduleTable table(setup.steps, setup.cooling, max_k);
  CheckpointGrid grid;
  for (std::uint64_t k : setup.checkpoints) {
    grid.k.push_back(k);
    grid.theta_cum.push_back(table.theta_cum(k));
    grid.tau.push_back(setup.cooling.temperature(table.theta_cum(k)));
  }

  const std::uint64_t n_batches = (config.n_chains + options.batch_size - 1) / options.batch_size;
  auto batch_path = [&](std::uint64_t b) {
    char name[32];
    std::snprintf(name, sizeof name, "batch_%06llu.csv", static_cast<unsigned long long>(b));
    return dir / "chains" / name;
  };

  std::atomic<std::uint64_t> next{0};
  std::atomic<std::uint64_t> done{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::atomic<bool> stop{false};
  auto worker = [&]() {
    try {
      while (!stop.load()) {
        const std::uint64_t b = next.fetch_add(1);
        if (b >= n_batches) break;
        const fs::path path = batch_path(b);
        if (!fs::exists(path)) {
          const std::uint64_t first = b * options.batch_size;
          const std::uint64_t last = std::min(config.n_chains, first + options.batch_size);
          std::vector<ChainRecord> records;
          records.reserve(last - first);
          for (std::uint64_t c = first; c < last; ++c) {
            records.push_back(simulate_chain(setup, table, config.seed, c));
          }
          write_text_file_atomic(path, batch_text(records));
        }
        const std::uint64_t finished = done.fetch_add(1) + 1;
        if (finished % std::max<std::uint64_t>(1, n_batches / 10) == 0 || finished == n_batches) {
          std::lock_guard<std::mutex> lock(error_mutex);
          log("batches " + std::to_string(finished) + "/" + std::to_string(n_batches));
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
      stop.store(true);
    }
  };
  const unsigned n_threads = static_cast<unsigned>(std::min<std::uint64_t>(options.workers, n_batches));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  // Single-threaded reduce in chain order.
  const std::size_t m = setup.checkpoints.size();
  const std::size_t d = setup.landscape.dim();
  std::vector<double> f_values;
  f_values.reserve(config.n_chains * m);
  const bool write_traj = options.trajectories;
  const bool include_x = options.record_x || d <= 3;
  std::string traj;
  if (write_traj) {
    traj = "chain_id,k,theta,tau,f_value";
    if (include_x) {
      for (std::size_t a = 0; a < d; ++a) traj += ",x" + std::to_string(a);
    }
    traj += "\n";
  }
  std::uint64_t expected_chain = 0;
  for (std::uint64_t b = 0; b < n_batches; ++b) {
    for (const auto& r : parse_batch(read_text_file(batch_path(b)), m, d)) {
      if (r.chain_id != expected_chain++) fail(ErrorKind::kIo, "batch files are out of order or incomplete");
      if (r.diverged_k != 0) ++result.n_diverged;
      f_values.insert(f_values.end(), r.f.begin(), r.f.end());
      if (write_traj) {
        for (std::size_t j = 0; j < m; ++j) {
          traj += std::to_string(r.chain_id) + "," + std::to_string(grid.k[j]) + "," +
                  format_double(grid.theta_cum[j]) + "," + format_double(grid.tau[j]) + "," +
                  format_double(r.f[j]);
          if (include_x) {
            for (std::size_t a = 0; a < d; ++a) traj += "," + format_double(r.x[j * d + a]);
          }
          traj += "\n";
        }
      }
    }
  }
  if (expected_chain != config.n_chains) fail(ErrorKind::kIo, "batch files do not cover every chain");
  if (write_traj) write_text_file_atomic(dir / "trajectories.csv", traj);

  result.tail = estimate_tail(grid, f_values, config.delta, config.ci_level);
  write_text_file_atomic(dir / "tail.csv", tail_curve_csv(result.tail));

  FitOptions fit_options;
  fit_options.burn_in_theta = config.burn_in_theta.value_or(default_burn_in_theta(setup.cooling));
  fit_options.min_exceed = config.min_exceed;
  json fit_doc;
  try {
    result.fit = fit_decay(result.tail, fit_options);
    fit_doc = fit_json(*result.fit);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kInsufficientData) throw;
    result.notes.push_back(std::string("fit skipped: ") + e.what());
    fit_doc["error"] = e.what();
  }
  fit_doc["burn_in_theta"] = num(fit_options.burn_in_theta);
  fit_doc["min_exceed"] = fit_options.min_exceed;
  write_text_file_atomic(dir / "fit.json", fit_doc.dump(2) + "\n");

  if (setup.cooling.energy > setup.depth.critical_depth) {
    result.rate = rate_exponent(setup.cooling.energy, setup.depth.critical_depth, config.delta);
    result.bound = theoretical_bound_check(result.tail, *result.rate, config.epsilon, fit_options);
    if (result.bound->n_usable < 2) {
      result.notes.push_back("bound check not evaluated: fewer than 2 usable rows");
    } else if (!result.bound->holds) {
      result.failures.push_back("theoretical bound violated at " + std::to_string(result.bound->n_violations) +
                                " checkpoints");
    }
  } else {
    result.notes.push_back("E <= E*: no theoretical rate; bound check skipped");
  }
  const double diverged_fraction =
      static_cast<double>(result.n_diverged) / static_cast<double>(config.n_chains);
  if (diverged_fraction > kMaxDivergenceFraction) {
    result.failures.push_back("divergence fraction " + format_double(diverged_fraction) + " exceeds " +
                              format_double(kMaxDivergenceFraction));
  }
  if (result.n_diverged > 0) {
    result.notes.push_back(std::to_string(result.n_diverged) + " chains diverged and count as exceedances");
  }
  result.status = result.failures.empty() ? RunStatus::kComplete : RunStatus::kFailed;
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  json rj;
  rj["artifact_version"] = kArtifactVersion;
  rj["status"] = result.status == RunStatus::kComplete ? "complete" : "failed";
  rj["config"] = json::parse(config_text);
  rj["resolved"]["E"] = num(result.energy);
  rj["resolved"]["critical_depth"] = num(result.critical_depth);
  rj["resolved"]["eta0"] = num(result.eta0);
  rj["resolved"]["max_k"] = max_k;
  if (const auto* pm = std::get_if<PointMass>(&setup.mu0)) rj["resolved"]["mu0_x"] = point_json(pm->x);
  rj["schedule_verdict"] = std::string(to_string(schedule.verdict));
  rj["rate"] = result.rate ? num(*result.rate) : json(nullptr);
  rj["fit"] = result.fit ? fit_json(*result.fit) : json(nullptr);
  rj["bound_check"] = result.bound ? bound_json(*result.bound) : json(nullptr);
  rj["n_diverged"] = result.n_diverged;
  rj["final_p_hat"] = num(result.tail.rows.back().p_hat);
  rj["failures"] = result.failures;
  rj["notes"] = result.notes;
  json files = json::array({"config.json", "depth.json", "schedule.json", "tail.csv", "fit.json"});
  if (write_traj) files.push_back("trajectories.csv");
  rj["files"] = files;
  rj["wall_clock"]["started"] = started_iso;
  rj["wall_clock"]["seconds"] = result.wall_seconds;
  rj["wall_clock"]["workers"] = options.workers;
  write_text_file_atomic(dir / "result.json", rj.dump(2) + "\n");
  result.content_hash = content_hash(dir);
  rj["content_hash"] = result.content_hash;
  write_text_file_atomic(dir / "result.json", rj.dump(2) + "\n");
  write_text_file_atomic(dir / "status",
                         result.status == RunStatus::kComplete ? "status=complete\n" : "status=failed\n");
  log("run " + std::string(rj["status"]) + " in " + format_double(result.wall_seconds) + " s");
  return result;
}

}  // namespace annealab
