#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>

#include "nestdoa/covariance.hpp"
#include "nestdoa/error.hpp"
#include "nestdoa/harness.hpp"
#include "nestdoa/oracles.hpp"
#include "nestdoa/serialization.hpp"
#include "nestdoa/solver.hpp"
#include "nestdoa/version.hpp"

namespace nestdoa::cli {

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string snapshots;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> jobs;
  std::optional<int> sources;
  std::string only;
  std::string format;
  std::vector<std::string> overrides;
  bool verbose = false;
  bool inject_fault = false;
};

Json load_config(const Options& opt) {
  Json doc = load_json_file(opt.config);
  for (const std::string& o : opt.overrides) apply_override(doc, o);
  return doc;
}

const Json& section(const Json& doc, const char* name) {
  if (!doc.contains(name)) throw InvalidConfiguration(std::string("config: missing '") + name + "' section");
  return doc.at(name);
}

SolverConfig solver_section(const Json& doc) {
  return doc.contains("solver") ? solver_config_from_json(doc.at("solver")) : SolverConfig{};
}

void print_list(std::ostream& out, const char* label, const std::vector<double>& v) {
  out << label;
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : " ") << v[i];
  out << '\n';
}

// The k largest-power points, in angle order.
std::pair<std::vector<double>, std::vector<double>> strongest(const EstimationOutput& result, int k) {
  std::vector<std::size_t> order(result.powers.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return result.powers[a] > result.powers[b]; });
  order.resize(std::min(order.size(), static_cast<std::size_t>(k)));
  std::sort(order.begin(), order.end());
  std::pair<std::vector<double>, std::vector<double>> out;
  for (std::size_t i : order) {
    out.first.push_back(result.doas_deg[i]);
    out.second.push_back(result.powers[i]);
  }
  return out;
}

int cmd_simulate(const Options& opt, std::ostream& out) {
  const Json doc = load_config(opt);
  const ArrayGeometry geometry = geometry_from_json(section(doc, "array"));
  Scenario scenario = scenario_from_json(section(doc, "scenario"));
  if (opt.seed) scenario.seed = *opt.seed;
  if (opt.out.empty()) throw InvalidConfiguration("simulate: --out is required");
  write_snapshots_csv(simulate_snapshots(geometry, scenario), opt.out);
  out << "sensors " << geometry.size() << ", snapshots " << scenario.snapshots << ", sources "
      << scenario.num_sources() << ", noise_var " << scenario.noise_var << ", seed " << scenario.seed << '\n';
  print_list(out, "doas_deg:", scenario.doas_deg);
  out << "wrote " << opt.out << '\n';
  return kOk;
}

int cmd_estimate(const Options& opt, std::ostream& out) {
  const Json doc = load_config(opt);
  const ArrayGeometry geometry = geometry_from_json(section(doc, "array"));
  const SolverConfig config = solver_section(doc);

  SnapshotMatrix data;
  std::optional<int> sources = opt.sources;
  if (!opt.snapshots.empty()) {
    data = read_snapshots_csv(opt.snapshots);
    if (data.sensors() != geometry.size()) {
      throw InvalidConfiguration("snapshot file has " + std::to_string(data.sensors()) +
                                 " sensors but the array has " + std::to_string(geometry.size()));
    }
  } else {
    Scenario scenario = scenario_from_json(section(doc, "scenario"));
    if (opt.seed) scenario.seed = *opt.seed;
    if (!sources && scenario.num_sources() > 0) sources = scenario.num_sources();
    data = simulate_snapshots(geometry, scenario);
  }

  const EstimationOutput result = solve(sample_covariance(data), geometry, config);
  if (opt.verbose) {
    out << "iter  objective            support  sigma_n2\n";
    for (const IterationRecord& r : result.trace) {
      out << std::setw(4) << r.iteration << "  " << std::setw(19) << std::setprecision(12) << r.objective << "  "
          << std::setw(7) << r.support_size << "  " << std::setprecision(6) << r.sigma_n2 << '\n';
    }
  }
  out << std::setprecision(8);
  print_list(out, "doas_deg:", result.doas_deg);
  print_list(out, "powers:", result.powers);
  out << "noise_var: " << result.noise_var << '\n'
      << "iterations: " << result.iterations << (result.converged ? " (converged)" : " (iteration limit)") << '\n';
  Json json = to_json(result);
  if (sources && static_cast<int>(result.doas_deg.size()) > *sources) {
    const auto [doas, powers] = strongest(result, *sources);
    out << "strongest " << *sources << ":\n";
    print_list(out, "  doas_deg:", doas);
    print_list(out, "  powers:", powers);
    json["strongest"] = {{"doas_deg", doas}, {"powers", powers}};
  }
  if (result.support_flagged) out << "warning: every power was pruned; the strongest point was kept\n";
  if (result.covariance.regularized) out << "warning: sample covariance was regularized\n";
  if (!opt.out.empty()) {
    write_json_file(json, opt.out);
    out << "wrote " << opt.out << '\n';
  }
  return kOk;
}

int cmd_experiment(const Options& opt, std::ostream& out) {
  const Json doc = load_config(opt);
  Json exp = section(doc, "experiment");
  if (!exp.contains("array") && doc.contains("array")) exp["array"] = doc.at("array");
  if (!exp.contains("solver") && doc.contains("solver")) exp["solver"] = doc.at("solver");
  if (opt.trials) exp["trials"] = *opt.trials;
  if (opt.jobs) exp["jobs"] = *opt.jobs;
  if (opt.seed) exp["seed"] = *opt.seed;
  const ExperimentSpec spec = experiment_spec_from_json(exp);

  const ExperimentResult result = run_monte_carlo(spec);

  const std::string base = opt.out.empty() ? spec.name : opt.out;
  const bool csv = opt.format.empty() || opt.format == "csv";
  const bool json = opt.format.empty() || opt.format == "json";
  out << std::setw(10) << to_string(spec.sweep_variable) << std::setw(14) << "rmse" << std::setw(10) << "pr"
      << std::setw(14) << "mean_time_s" << std::setw(8) << "n_fail" << '\n';
  int failures = 0;
  for (const SweepPointResult& p : result.points) {
    out << std::setprecision(6) << std::setw(10) << p.value << std::setw(14) << p.rmse << std::setw(10) << p.pr
        << std::setw(14) << p.mean_time_s << std::setw(8) << p.n_fail << (p.flagged ? "  (>10% failed)" : "")
        << '\n';
    failures += p.n_fail;
  }
  if (csv) {
    export_results(result, base + ".csv", ExportFormat::Csv);
    out << "wrote " << base << ".csv\n";
  }
  if (json) {
    export_results(result, base + ".json", ExportFormat::Json);
    out << "wrote " << base << ".json\n";
  }
  const int total = static_cast<int>(result.points.size()) * result.n_trials;
  return failures == total ? kNumericalError : kOk;
}

int cmd_verify(const Options& opt, std::ostream& out) {
  OracleSuiteOptions suite;
  if (opt.trials) suite.trials = *opt.trials;
  if (opt.seed) suite.seed = *opt.seed;
  suite.only = opt.only;
  suite.inject_gradient_fault = opt.inject_fault;
  const std::vector<OracleReport> reports = run_oracle_suite(suite);

  bool all = true;
  Json j = Json::array();
  out << std::left << std::setw(14) << "check" << std::right << std::setw(10) << "instances" << std::setw(14)
      << "max_rel_err" << std::setw(12) << "tolerance" << "  result\n";
  for (const OracleReport& r : reports) {
    out << std::left << std::setw(14) << r.name << std::right << std::setw(10) << r.instances << std::setw(14)
        << std::setprecision(3) << std::scientific << r.max_rel_error << std::setw(12) << r.tolerance
        << std::defaultfloat << "  " << (r.passed ? "PASS" : "FAIL") << '\n';
    for (const std::string& n : r.notes) out << "    " << n << '\n';
    all = all && r.passed;
    j.push_back(to_json(r));
  }
  if (!opt.out.empty()) write_json_file(j, opt.out);
  return all ? kOk : kCheckFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Off-grid DOA estimation for nested arrays", "doa"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", opt.config, "JSON configuration file");
    cmd->add_option("-o,--out", opt.out, "Output path");
    cmd->add_option("--seed", opt.seed, "Override the random seed");
    cmd->add_option("--set", opt.overrides, "Override a config value, e.g. solver.tol=1e-7")->allow_extra_args(false);
    cmd->add_flag("-v,--verbose", opt.verbose, "Print more detail");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "Simulate array snapshots to a CSV file");
  add_common(simulate);
  simulate->get_option("--config")->required();

  CLI::App* estimate = app.add_subcommand("estimate", "Estimate DOAs from snapshots or a simulated scenario");
  add_common(estimate);
  estimate->get_option("--config")->required();
  estimate->add_option("--snapshots", opt.snapshots, "Snapshot CSV written by `simulate`")->check(CLI::ExistingFile);
  estimate->add_option("--sources", opt.sources, "Also report this many strongest points")
      ->check(CLI::PositiveNumber);

  CLI::App* experiment = app.add_subcommand("experiment", "Run a Monte-Carlo sweep");
  add_common(experiment);
  experiment->get_option("--config")->required();
  experiment->add_option("--trials", opt.trials, "Override the trial count")->check(CLI::PositiveNumber);
  experiment->add_option("--jobs", opt.jobs, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  experiment->add_option("--format", opt.format, "Write only csv or json")->check(CLI::IsMember({"csv", "json"}));

  CLI::App* verify = app.add_subcommand("verify", "Run the numerical verification oracles");
  verify->add_option("-o,--out", opt.out, "Write the reports as JSON");
  verify->add_option("--seed", opt.seed, "Base seed");
  verify->add_option("--trials", opt.trials, "Instances per oracle")->check(CLI::PositiveNumber);
  verify->add_option("--only", opt.only, "Run one oracle")
      ->check(CLI::IsMember({"lemma1", "majorization", "gradient", "woodbury"}));
  verify->add_flag("--inject-fault", opt.inject_fault)->group("");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (*simulate) return cmd_simulate(opt, out);
    if (*estimate) return cmd_estimate(opt, out);
    if (*experiment) return cmd_experiment(opt, out);
    return cmd_verify(opt, out);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace nestdoa::cli
