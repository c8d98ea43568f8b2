#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nestdoa/array_model.hpp"
#include "nestdoa/solver.hpp"

namespace nestdoa {

/// Sources drawn uniformly in [range_min, range_max] with a minimum pairwise separation.
struct RandomDoaRule {
  int count = 3;
  double min_separation_deg = 5.0;
  double range_min = -90.0;
  double range_max = 90.0;
};

enum class SweepVariable { SnrDb, Snapshots };

const char* to_string(SweepVariable v) noexcept;
SweepVariable parse_sweep_variable(const std::string& name);

struct ExperimentSpec {
  std::string name = "experiment";
  int m1 = 3;
  int m2 = 3;
  double spacing = 0.5;
  std::vector<double> doas_deg;              ///< fixed sources; ignored when random_doas is set
  std::optional<RandomDoaRule> random_doas;
  double source_power = 1.0;                 ///< every source has this variance
  SweepVariable sweep_variable = SweepVariable::SnrDb;
  std::vector<double> sweep_values;
  double snr_db = 10.0;                      ///< fixed when sweeping snapshots
  int snapshots = 200;                       ///< fixed when sweeping SNR
  int n_trials = 50;
  std::uint64_t base_seed = 1;
  double resolution_deg = 0.8;
  int jobs = 1;                              ///< worker threads; 0 = hardware concurrency
  SolverConfig solver;

  int num_sources() const noexcept;
  ArrayGeometry geometry() const;
  void validate() const;
};

/// sigma_n^2 = sum(powers) / 10^(snr_db / 10).
double snr_to_noise_var(const std::vector<double>& powers, double snr_db);

struct MatchResult {
  std::vector<double> matched;  ///< estimate assigned to each truth, truth order
  std::vector<double> errors;   ///< |matched - truth|, capped at 180
  bool unresolved = false;      ///< fewer estimates than truths
  bool failed = false;          ///< no estimate at all
};

/// Minimum total absolute error assignment, ties broken by total squared error.
/// Throws InvalidInput on empty truth or more than 16 truths.
MatchResult match_estimates(const std::vector<double>& estimates, const std::vector<double>& truth);

/// sqrt((1/runs) sum_i sum_k err_ki^2), not normalized by K.
double rmse(const std::vector<MatchResult>& trials);

/// Fraction of trials where every truth has an estimate within delta_deg.
/// Unresolved and failed trials count as misses.
double probability_of_resolution(const std::vector<MatchResult>& trials, double delta_deg);

/// Spearman rank correlation with average ranks for ties. NaN for fewer than 2 points
/// or zero rank variance.
double spearman_correlation(const std::vector<double>& x, const std::vector<double>& y);

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  std::vector<double> truth_deg;
  std::vector<double> estimates_deg;  ///< at most K, the largest-power candidates, sorted
  std::vector<double> powers;
  double noise_var_est = 0.0;
  int iterations = 0;
  bool converged = false;
  bool solver_failed = false;
  std::string error;
  MatchResult match;
  double elapsed_s = 0.0;
};

struct SweepPointResult {
  double value = 0.0;
  double rmse = 0.0;
  double pr = 0.0;
  double mean_time_s = 0.0;
  int n_fail = 0;
  bool flagged = false;  ///< more than 10% of trials failed
  std::vector<TrialResult> trials;
};

struct ExperimentResult {
  std::string name;
  std::string spec_hash;
  std::string software_version;
  SweepVariable sweep_variable = SweepVariable::SnrDb;
  std::uint64_t base_seed = 0;
  int n_trials = 0;
  std::vector<SweepPointResult> points;
};

/// Run one trial of `spec` at sweep point `point` (index into sweep_values).
TrialResult run_trial(const ExperimentSpec& spec, int point, int trial);

/// Every (point, trial) pair, in parallel over spec.jobs threads. The result does
/// not depend on the thread count or on completion order.
ExperimentResult run_monte_carlo(const ExperimentSpec& spec);

enum class ExportFormat { Csv, Json };

/// CSV: header "<variable>,rmse,pr,mean_time_s,n_fail", one row per point,
/// 6 significant digits. JSON: full per-trial detail.
void export_results(const ExperimentResult& result, const std::filesystem::path& path, ExportFormat format);
ExperimentResult import_results_json(const std::filesystem::path& path);

std::string results_csv(const ExperimentResult& result);

}  // namespace nestdoa
