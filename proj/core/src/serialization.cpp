#include "nestdoa/serialization.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

#include "nestdoa/error.hpp"

namespace nestdoa {

namespace {

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) throw InvalidConfiguration(what + ": expected an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) throw InvalidConfiguration(what + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
T read(const Json& j, const std::string& key, const std::string& what) {
  if (!j.contains(key)) throw InvalidConfiguration(what + ": missing required key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw InvalidConfiguration(what + "." + key + ": " + e.what());
  }
}

template <typename T>
T read_or(const Json& j, const std::string& key, T fallback, const std::string& what) {
  return j.contains(key) ? read<T>(j, key, what) : fallback;
}

// null <-> NaN
Json number(double v) { return std::isnan(v) ? Json(nullptr) : Json(v); }

double to_number(const Json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

Json numbers(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

std::vector<double> to_numbers(const Json& j) {
  std::vector<double> out;
  for (const Json& x : j) out.push_back(to_number(x));
  return out;
}

const char* to_string(PruneMode m) { return m == PruneMode::Relative ? "relative" : "absolute"; }

const char* to_string(SigmaPath p) {
  switch (p) {
    case SigmaPath::Direct: return "direct";
    case SigmaPath::LowRank: return "low_rank";
    default: return "automatic";
  }
}

}  // namespace

Json load_json_file(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) throw InvalidConfiguration("cannot open '" + path.string() + "'");
  try {
    return Json::parse(file);
  } catch (const Json::exception& e) {
    throw InvalidConfiguration("'" + path.string() + "': " + e.what());
  }
}

void write_json_file(const Json& value, const std::filesystem::path& path) {
  std::ofstream file(path);
  if (!file) throw InvalidInput("cannot open '" + path.string() + "' for writing");
  file << value.dump(2) << '\n';
  if (!file) throw InvalidInput("failed writing '" + path.string() + "'");
}

void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw InvalidConfiguration("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::exception&) {
    value = text;
  }
  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw InvalidConfiguration("override '" + assignment + "' has an empty key segment");
    if (!node->is_object()) {
      if (!node->is_null()) throw InvalidConfiguration("override '" + assignment + "' descends into a non-object");
      *node = Json::object();
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = std::move(value);
}

Json to_json(const ArrayGeometry& geometry) {
  if (geometry.is_nested()) {
    return {{"m1", geometry.m1()}, {"m2", geometry.m2()}, {"spacing", geometry.spacing()}};
  }
  return {{"positions", std::vector<int>(geometry.positions().begin(), geometry.positions().end())},
          {"spacing", geometry.spacing()}};
}

ArrayGeometry geometry_from_json(const Json& j) {
  check_keys(j, {"m1", "m2", "spacing", "positions"}, "array");
  const double spacing = read_or<double>(j, "spacing", 0.5, "array");
  if (j.contains("positions")) {
    if (j.contains("m1") || j.contains("m2")) throw InvalidConfiguration("array: give either positions or m1/m2");
    return ArrayGeometry::from_positions(read<std::vector<int>>(j, "positions", "array"), spacing);
  }
  return ArrayGeometry::nested(read<int>(j, "m1", "array"), read<int>(j, "m2", "array"), spacing);
}

Json to_json(const Scenario& scenario) {
  return {{"doas_deg", scenario.doas_deg},
          {"powers", scenario.powers},
          {"noise_var", scenario.noise_var},
          {"snapshots", scenario.snapshots},
          {"seed", scenario.seed}};
}

Scenario scenario_from_json(const Json& j) {
  check_keys(j, {"doas_deg", "powers", "noise_var", "snr_db", "snapshots", "seed"}, "scenario");
  Scenario s;
  s.doas_deg = read<std::vector<double>>(j, "doas_deg", "scenario");
  s.powers = read<std::vector<double>>(j, "powers", "scenario");
  s.snapshots = read<int>(j, "snapshots", "scenario");
  s.seed = read_or<std::uint64_t>(j, "seed", 0, "scenario");
  const bool has_var = j.contains("noise_var");
  const bool has_snr = j.contains("snr_db");
  if (has_var == has_snr) throw InvalidConfiguration("scenario: give exactly one of noise_var and snr_db");
  if (has_var) {
    s.noise_var = read<double>(j, "noise_var", "scenario");
  } else {
    if (s.powers.empty()) throw InvalidConfiguration("scenario: snr_db needs at least one source power");
    for (double p : s.powers) {
      if (!(p > 0.0)) throw InvalidConfiguration("scenario: powers must be positive");
    }
    s.noise_var = snr_to_noise_var(s.powers, read<double>(j, "snr_db", "scenario"));
  }
  s.validate();
  return s;
}

Json to_json(const SolverConfig& c) {
  return {{"n_grid", c.n_grid},
          {"prune_threshold", c.prune_threshold},
          {"prune_mode", to_string(c.prune_mode)},
          {"tol", c.tol},
          {"max_outer", c.max_outer},
          {"max_linesearch", c.max_linesearch},
          {"linesearch_shrink", c.linesearch_shrink},
          {"initial_step", c.initial_step},
          {"grid_min", c.grid_min},
          {"grid_max", c.grid_max},
          {"merge_tol", c.merge_tol},
          {"gamma_floor", c.gamma_floor},
          {"initial_noise_var", number(c.initial_noise_var)},
          {"sigma_path", to_string(c.sigma_path)}};
}

SolverConfig solver_config_from_json(const Json& j) {
  const std::string what = "solver";
  check_keys(j,
             {"n_grid", "prune_threshold", "prune_mode", "tol", "max_outer", "max_linesearch", "linesearch_shrink",
              "initial_step", "grid_min", "grid_max", "merge_tol", "gamma_floor", "initial_noise_var", "sigma_path"},
             what);
  SolverConfig c;
  c.n_grid = read_or(j, "n_grid", c.n_grid, what);
  c.prune_threshold = read_or(j, "prune_threshold", c.prune_threshold, what);
  c.tol = read_or(j, "tol", c.tol, what);
  c.max_outer = read_or(j, "max_outer", c.max_outer, what);
  c.max_linesearch = read_or(j, "max_linesearch", c.max_linesearch, what);
  c.linesearch_shrink = read_or(j, "linesearch_shrink", c.linesearch_shrink, what);
  c.initial_step = read_or(j, "initial_step", c.initial_step, what);
  c.grid_min = read_or(j, "grid_min", c.grid_min, what);
  c.grid_max = read_or(j, "grid_max", c.grid_max, what);
  c.merge_tol = read_or(j, "merge_tol", c.merge_tol, what);
  c.gamma_floor = read_or(j, "gamma_floor", c.gamma_floor, what);
  if (j.contains("initial_noise_var") && !j.at("initial_noise_var").is_null()) {
    c.initial_noise_var = read<double>(j, "initial_noise_var", what);
  }
  if (j.contains("prune_mode")) {
    const auto mode = read<std::string>(j, "prune_mode", what);
    if (mode == "relative") {
      c.prune_mode = PruneMode::Relative;
    } else if (mode == "absolute") {
      c.prune_mode = PruneMode::Absolute;
    } else {
      throw InvalidConfiguration("solver.prune_mode: expected relative or absolute, got '" + mode + "'");
    }
  }
  if (j.contains("sigma_path")) {
    const auto path = read<std::string>(j, "sigma_path", what);
    if (path == "automatic") {
      c.sigma_path = SigmaPath::Automatic;
    } else if (path == "direct") {
      c.sigma_path = SigmaPath::Direct;
    } else if (path == "low_rank") {
      c.sigma_path = SigmaPath::LowRank;
    } else {
      throw InvalidConfiguration("solver.sigma_path: expected automatic, direct or low_rank, got '" + path + "'");
    }
  }
  c.validate();
  return c;
}

Json to_json(const ExperimentSpec& spec) {
  Json j = {{"name", spec.name},
            {"array", {{"m1", spec.m1}, {"m2", spec.m2}, {"spacing", spec.spacing}}},
            {"source_power", spec.source_power},
            {"sweep", {{"variable", to_string(spec.sweep_variable)}, {"values", spec.sweep_values}}},
            {"snr_db", spec.snr_db},
            {"snapshots", spec.snapshots},
            {"trials", spec.n_trials},
            {"seed", spec.base_seed},
            {"resolution_deg", spec.resolution_deg},
            {"jobs", spec.jobs},
            {"solver", to_json(spec.solver)}};
  if (spec.random_doas) {
    const RandomDoaRule& r = *spec.random_doas;
    j["random_doas"] = {{"count", r.count},
                        {"min_separation_deg", r.min_separation_deg},
                        {"range_deg", {r.range_min, r.range_max}}};
  } else {
    j["doas_deg"] = spec.doas_deg;
  }
  return j;
}

ExperimentSpec experiment_spec_from_json(const Json& j) {
  const std::string what = "experiment";
  check_keys(j,
             {"name", "array", "doas_deg", "random_doas", "source_power", "sweep", "snr_db", "snapshots", "trials",
              "seed", "resolution_deg", "jobs", "solver"},
             what);
  ExperimentSpec spec;
  spec.name = read_or<std::string>(j, "name", spec.name, what);
  if (j.contains("array")) {
    const Json& a = j.at("array");
    check_keys(a, {"m1", "m2", "spacing"}, "experiment.array");
    spec.m1 = read_or(a, "m1", spec.m1, "experiment.array");
    spec.m2 = read_or(a, "m2", spec.m2, "experiment.array");
    spec.spacing = read_or(a, "spacing", spec.spacing, "experiment.array");
  }
  const bool fixed = j.contains("doas_deg");
  if (fixed == j.contains("random_doas")) {
    throw InvalidConfiguration("experiment: give exactly one of doas_deg and random_doas");
  }
  if (fixed) {
    spec.doas_deg = read<std::vector<double>>(j, "doas_deg", what);
  } else {
    const Json& r = j.at("random_doas");
    check_keys(r, {"count", "min_separation_deg", "range_deg"}, "experiment.random_doas");
    RandomDoaRule rule;
    rule.count = read<int>(r, "count", "experiment.random_doas");
    rule.min_separation_deg = read_or(r, "min_separation_deg", rule.min_separation_deg, "experiment.random_doas");
    if (r.contains("range_deg")) {
      const auto range = read<std::vector<double>>(r, "range_deg", "experiment.random_doas");
      if (range.size() != 2) throw InvalidConfiguration("experiment.random_doas.range_deg: expected [min, max]");
      rule.range_min = range[0];
      rule.range_max = range[1];
    }
    spec.random_doas = rule;
  }
  spec.source_power = read_or(j, "source_power", spec.source_power, what);
  const Json& sweep = j.contains("sweep") ? j.at("sweep") : throw InvalidConfiguration("experiment: missing 'sweep'");
  check_keys(sweep, {"variable", "values"}, "experiment.sweep");
  spec.sweep_variable = parse_sweep_variable(read<std::string>(sweep, "variable", "experiment.sweep"));
  spec.sweep_values = read<std::vector<double>>(sweep, "values", "experiment.sweep");
  spec.snr_db = read_or(j, "snr_db", spec.snr_db, what);
  spec.snapshots = read_or(j, "snapshots", spec.snapshots, what);
  spec.n_trials = read_or(j, "trials", spec.n_trials, what);
  spec.base_seed = read_or(j, "seed", spec.base_seed, what);
  spec.resolution_deg = read_or(j, "resolution_deg", spec.resolution_deg, what);
  spec.jobs = read_or(j, "jobs", spec.jobs, what);
  if (j.contains("solver")) spec.solver = solver_config_from_json(j.at("solver"));
  spec.validate();
  return spec;
}

Json to_json(const EstimationOutput& out) {
  Json trace = {{"iteration", Json::array()},      {"objective", Json::array()},
                {"objective_after_update", Json::array()}, {"grid_objective_before", Json::array()},
                {"grid_objective_after", Json::array()}, {"p_change", Json::array()},
                {"sigma_n2", Json::array()},       {"support_size", Json::array()},
                {"refine_steps", Json::array()},   {"clipped", Json::array()},
                {"pruned", Json::array()}};
  for (const IterationRecord& r : out.trace) {
    trace["iteration"].push_back(r.iteration);
    trace["objective"].push_back(number(r.objective));
    trace["objective_after_update"].push_back(number(r.objective_after_update));
    trace["grid_objective_before"].push_back(number(r.grid_objective_before));
    trace["grid_objective_after"].push_back(number(r.grid_objective_after));
    trace["p_change"].push_back(number(r.p_change));
    trace["sigma_n2"].push_back(number(r.sigma_n2));
    trace["support_size"].push_back(r.support_size);
    trace["refine_steps"].push_back(r.refine_steps);
    trace["clipped"].push_back(r.clipped);
    trace["pruned"].push_back(r.pruned);
  }
  return {{"doas_deg", numbers(out.doas_deg)},
          {"powers", numbers(out.powers)},
          {"noise_var", number(out.noise_var)},
          {"iterations", out.iterations},
          {"converged", out.converged},
          {"support_flagged", out.support_flagged},
          {"covariance",
           {{"regularized", out.covariance.regularized},
            {"ridge", out.covariance.ridge},
            {"condition_number", number(out.covariance.condition_number)}}},
          {"trace", trace}};
}

Json to_json(const OracleReport& report) {
  return {{"name", report.name},
          {"instances", report.instances},
          {"max_rel_error", number(report.max_rel_error)},
          {"tolerance", report.tolerance},
          {"passed", report.passed},
          {"notes", report.notes}};
}

Json to_json(const ExperimentResult& result) {
  Json points = Json::array();
  for (const SweepPointResult& p : result.points) {
    Json trials = Json::array();
    for (const TrialResult& t : p.trials) {
      trials.push_back({{"trial", t.trial},
                        {"seed", t.seed},
                        {"truth_deg", numbers(t.truth_deg)},
                        {"estimates_deg", numbers(t.estimates_deg)},
                        {"powers", numbers(t.powers)},
                        {"noise_var_est", number(t.noise_var_est)},
                        {"iterations", t.iterations},
                        {"converged", t.converged},
                        {"solver_failed", t.solver_failed},
                        {"error", t.error},
                        {"matched_deg", numbers(t.match.matched)},
                        {"errors_deg", numbers(t.match.errors)},
                        {"unresolved", t.match.unresolved},
                        {"failed", t.match.failed},
                        {"elapsed_s", t.elapsed_s}});
    }
    points.push_back({{"value", p.value},
                      {"rmse", number(p.rmse)},
                      {"pr", number(p.pr)},
                      {"mean_time_s", number(p.mean_time_s)},
                      {"n_fail", p.n_fail},
                      {"flagged", p.flagged},
                      {"trials", trials}});
  }
  return {{"name", result.name},
          {"spec_hash", result.spec_hash},
          {"software_version", result.software_version},
          {"sweep_variable", to_string(result.sweep_variable)},
          {"base_seed", result.base_seed},
          {"n_trials", result.n_trials},
          {"points", points}};
}

ExperimentResult experiment_result_from_json(const Json& j) {
  try {
    ExperimentResult result;
    result.name = j.at("name").get<std::string>();
    result.spec_hash = j.at("spec_hash").get<std::string>();
    result.software_version = j.at("software_version").get<std::string>();
    result.sweep_variable = parse_sweep_variable(j.at("sweep_variable").get<std::string>());
    result.base_seed = j.at("base_seed").get<std::uint64_t>();
    result.n_trials = j.at("n_trials").get<int>();
    for (const Json& jp : j.at("points")) {
      SweepPointResult p;
      p.value = to_number(jp.at("value"));
      p.rmse = to_number(jp.at("rmse"));
      p.pr = to_number(jp.at("pr"));
      p.mean_time_s = to_number(jp.at("mean_time_s"));
      p.n_fail = jp.at("n_fail").get<int>();
      p.flagged = jp.at("flagged").get<bool>();
      for (const Json& jt : jp.at("trials")) {
        TrialResult t;
        t.trial = jt.at("trial").get<int>();
        t.seed = jt.at("seed").get<std::uint64_t>();
        t.truth_deg = to_numbers(jt.at("truth_deg"));
        t.estimates_deg = to_numbers(jt.at("estimates_deg"));
        t.powers = to_numbers(jt.at("powers"));
        t.noise_var_est = to_number(jt.at("noise_var_est"));
        t.iterations = jt.at("iterations").get<int>();
        t.converged = jt.at("converged").get<bool>();
        t.solver_failed = jt.at("solver_failed").get<bool>();
        t.error = jt.at("error").get<std::string>();
        t.match.matched = to_numbers(jt.at("matched_deg"));
        t.match.errors = to_numbers(jt.at("errors_deg"));
        t.match.unresolved = jt.at("unresolved").get<bool>();
        t.match.failed = jt.at("failed").get<bool>();
        t.elapsed_s = to_number(jt.at("elapsed_s"));
        p.trials.push_back(std::move(t));
      }
      result.points.push_back(std::move(p));
    }
    return result;
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("malformed experiment result: ") + e.what());
  }
}

std::string spec_hash(const ExperimentSpec& spec) {
  Json j = to_json(spec);
  j.erase("jobs");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace nestdoa
