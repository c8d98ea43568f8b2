#include "nestdoa/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "nestdoa/covariance.hpp"
#include "nestdoa/error.hpp"
#include "nestdoa/random.hpp"
#include "nestdoa/serialization.hpp"
#include "nestdoa/version.hpp"

namespace nestdoa {

namespace {

constexpr double kErrorCap = 180.0;

std::string format_general(double v) {
  if (std::isnan(v)) return "nan";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 6);
  return std::string(buf.data(), res.ptr);
}

std::vector<double> draw_doas(const RandomDoaRule& rule, Rng& rng) {
  std::vector<double> doas;
  for (int attempt = 0; attempt < 100000; ++attempt) {
    doas.clear();
    for (int k = 0; k < rule.count; ++k) {
      doas.push_back(rule.range_min + (rule.range_max - rule.range_min) * uniform_open(rng));
    }
    std::sort(doas.begin(), doas.end());
    bool ok = true;
    for (std::size_t k = 1; k < doas.size() && ok; ++k) ok = doas[k] - doas[k - 1] >= rule.min_separation_deg;
    if (ok) return doas;
  }
  throw InvalidConfiguration("random_doas: could not place sources with the requested separation");
}

}  // namespace

const char* to_string(SweepVariable v) noexcept {
  return v == SweepVariable::SnrDb ? "snr_db" : "snapshots";
}

SweepVariable parse_sweep_variable(const std::string& name) {
  if (name == "snr_db") return SweepVariable::SnrDb;
  if (name == "snapshots") return SweepVariable::Snapshots;
  throw InvalidConfiguration("unknown sweep variable '" + name + "' (expected snr_db or snapshots)");
}

int ExperimentSpec::num_sources() const noexcept {
  return random_doas ? random_doas->count : static_cast<int>(doas_deg.size());
}

ArrayGeometry ExperimentSpec::geometry() const { return ArrayGeometry::nested(m1, m2, spacing); }

void ExperimentSpec::validate() const {
  if (n_trials < 1) throw InvalidConfiguration("experiment: trials must be >= 1");
  if (sweep_values.empty()) throw InvalidConfiguration("experiment: sweep values must be nonempty");
  if (!(resolution_deg > 0.0)) throw InvalidConfiguration("experiment: resolution_deg must be > 0");
  if (!(source_power > 0.0)) throw InvalidConfiguration("experiment: source_power must be > 0");
  if (jobs < 0) throw InvalidConfiguration("experiment: jobs must be >= 0");
  if (num_sources() < 1) throw InvalidConfiguration("experiment: at least one source is required");
  if (random_doas) {
    const RandomDoaRule& r = *random_doas;
    if (r.range_min < -90.0 || r.range_max > 90.0 || !(r.range_min < r.range_max)) {
      throw InvalidConfiguration("random_doas: range must be an interval inside [-90, 90]");
    }
    if (r.min_separation_deg < 0.0 || (r.count - 1) * r.min_separation_deg > r.range_max - r.range_min) {
      throw InvalidConfiguration("random_doas: separation does not fit in the range");
    }
  }
  for (double v : sweep_values) {
    if (!std::isfinite(v)) throw InvalidConfiguration("experiment: sweep values must be finite");
    if (sweep_variable == SweepVariable::Snapshots && (v < 1.0 || v != std::floor(v))) {
      throw InvalidConfiguration("experiment: snapshot counts must be positive integers");
    }
  }
  if (snapshots < 1) throw InvalidConfiguration("experiment: snapshots must be >= 1");
  (void)geometry();
  solver.validate();
  if (!random_doas) {
    Scenario probe{doas_deg, std::vector<double>(doas_deg.size(), source_power), 1.0, 1, 0};
    probe.validate();
  }
}

double snr_to_noise_var(const std::vector<double>& powers, double snr_db) {
  if (powers.empty()) throw InvalidInput("snr_to_noise_var: powers must be nonempty");
  double total = 0.0;
  for (double p : powers) {
    if (!(p > 0.0)) throw InvalidInput("snr_to_noise_var: powers must be positive");
    total += p;
  }
  return total / std::pow(10.0, snr_db / 10.0);
}

MatchResult match_estimates(const std::vector<double>& estimates, const std::vector<double>& truth) {
  if (truth.empty()) throw InvalidInput("match_estimates: truth must be nonempty");
  if (truth.size() > 16) throw InvalidInput("match_estimates: at most 16 truths are supported");
  const std::size_t k = truth.size();
  MatchResult result;
  result.matched.assign(k, std::numeric_limits<double>::quiet_NaN());
  result.errors.assign(k, kErrorCap);
  if (estimates.empty()) {
    result.failed = true;
    result.unresolved = true;
    return result;
  }

  // Minimum total absolute error. Ties, which in one dimension arise whenever
  // pairs cross, go to the smaller total squared error.
  // dp over (estimates consumed, set of assigned truths). Estimates may be skipped
  // only when there are more of them than truths.
  struct Cost {
    double abs = std::numeric_limits<double>::infinity();
    double sq = 0.0;
    bool operator<(const Cost& o) const {
      constexpr double eps = 1e-9;
      return abs < o.abs - eps || (abs <= o.abs + eps && sq < o.sq);
    }
  };
  const std::size_t n = estimates.size();
  const bool may_skip = n > k;
  const std::size_t target = std::min(n, k);
  const std::size_t states = std::size_t{1} << k;
  std::vector<std::vector<Cost>> cost(n + 1, std::vector<Cost>(states));
  std::vector<std::vector<int>> choice(n + 1, std::vector<int>(states, -2));
  cost[0][0] = {0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t mask = 0; mask < states; ++mask) {
      if (std::isinf(cost[i][mask].abs)) continue;
      if (may_skip && cost[i][mask] < cost[i + 1][mask]) {
        cost[i + 1][mask] = cost[i][mask];
        choice[i + 1][mask] = -1;
      }
      for (std::size_t t = 0; t < k; ++t) {
        if (mask & (std::size_t{1} << t)) continue;
        const std::size_t next = mask | (std::size_t{1} << t);
        const double e = std::min(std::abs(estimates[i] - truth[t]), kErrorCap);
        const Cost c{cost[i][mask].abs + e, cost[i][mask].sq + e * e};
        if (c < cost[i + 1][next]) {
          cost[i + 1][next] = c;
          choice[i + 1][next] = static_cast<int>(t);
        }
      }
    }
  }
  std::size_t best = 0;
  Cost best_cost;
  for (std::size_t mask = 0; mask < states; ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) == target && cost[n][mask] < best_cost) {
      best_cost = cost[n][mask];
      best = mask;
    }
  }
  for (std::size_t i = n, mask = best; i > 0; --i) {
    const int t = choice[i][mask];
    if (t >= 0) {
      result.matched[static_cast<std::size_t>(t)] = estimates[i - 1];
      mask &= ~(std::size_t{1} << t);
    }
  }
  for (std::size_t t = 0; t < k; ++t) {
    if (std::isnan(result.matched[t])) {
      result.unresolved = true;
      const auto nearest = std::min_element(estimates.begin(), estimates.end(), [&](double a, double b) {
        return std::abs(a - truth[t]) < std::abs(b - truth[t]);
      });
      result.matched[t] = *nearest;
    }
    result.errors[t] = std::min(std::abs(result.matched[t] - truth[t]), kErrorCap);
  }
  return result;
}

double rmse(const std::vector<MatchResult>& trials) {
  if (trials.empty()) throw InvalidInput("rmse: at least one trial is required");
  double sum = 0.0;
  for (const MatchResult& t : trials) {
    for (double e : t.errors) sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(trials.size()));
}

double probability_of_resolution(const std::vector<MatchResult>& trials, double delta_deg) {
  if (!(delta_deg > 0.0)) throw InvalidInput("probability_of_resolution: delta must be > 0");
  if (trials.empty()) throw InvalidInput("probability_of_resolution: at least one trial is required");
  int resolved = 0;
  for (const MatchResult& t : trials) {
    if (t.failed || t.unresolved) continue;
    if (std::all_of(t.errors.begin(), t.errors.end(), [&](double e) { return e <= delta_deg; })) ++resolved;
  }
  return static_cast<double>(resolved) / static_cast<double>(trials.size());
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t q = i; q <= j; ++q) ranks[order[q]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidInput("spearman_correlation: size mismatch");
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

TrialResult run_trial(const ExperimentSpec& spec, int point, int trial) {
  if (point < 0 || point >= static_cast<int>(spec.sweep_values.size())) {
    throw InvalidInput("run_trial: sweep point out of range");
  }
  const double value = spec.sweep_values[static_cast<std::size_t>(point)];
  TrialResult result;
  result.trial = trial;
  result.seed = trial_seed(spec.base_seed, static_cast<std::uint64_t>(point), static_cast<std::uint64_t>(trial));
  Rng rng(result.seed);

  result.truth_deg = spec.random_doas ? draw_doas(*spec.random_doas, rng) : spec.doas_deg;
  const std::vector<double> powers(result.truth_deg.size(), spec.source_power);
  const double snr = spec.sweep_variable == SweepVariable::SnrDb ? value : spec.snr_db;
  const int snapshots = spec.sweep_variable == SweepVariable::Snapshots ? static_cast<int>(value) : spec.snapshots;
  const Scenario scenario{result.truth_deg, powers, snr_to_noise_var(powers, snr), snapshots, rng()};
  const ArrayGeometry geometry = spec.geometry();
  const SnapshotMatrix data = simulate_snapshots(geometry, scenario);

  const auto start = std::chrono::steady_clock::now();
  try {
    const EstimationOutput out = solve(sample_covariance(data), geometry, spec.solver);
    result.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.noise_var_est = out.noise_var;
    result.iterations = out.iterations;
    result.converged = out.converged;

    // Keep the K strongest candidates.
    std::vector<std::size_t> order(out.doas_deg.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return out.powers[a] > out.powers[b]; });
    order.resize(std::min(order.size(), result.truth_deg.size()));
    std::sort(order.begin(), order.end());
    for (std::size_t i : order) {
      result.estimates_deg.push_back(out.doas_deg[i]);
      result.powers.push_back(out.powers[i]);
    }
  } catch (const Error& e) {
    result.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.solver_failed = true;
    result.error = e.what();
  }
  result.match = match_estimates(result.estimates_deg, result.truth_deg);
  return result;
}

ExperimentResult run_monte_carlo(const ExperimentSpec& spec) {
  spec.validate();
  const int points = static_cast<int>(spec.sweep_values.size());
  const std::size_t total = static_cast<std::size_t>(points) * static_cast<std::size_t>(spec.n_trials);
  std::vector<TrialResult> trials(total);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      try {
        trials[i] = run_trial(spec, static_cast<int>(i / static_cast<std::size_t>(spec.n_trials)),
                              static_cast<int>(i % static_cast<std::size_t>(spec.n_trials)));
      } catch (...) {
        const std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = total;
      }
    }
  };
  unsigned jobs = spec.jobs > 0 ? static_cast<unsigned>(spec.jobs) : std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(total, 1)));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentResult result;
  result.name = spec.name;
  result.spec_hash = spec_hash(spec);
  result.software_version = kVersion;
  result.sweep_variable = spec.sweep_variable;
  result.base_seed = spec.base_seed;
  result.n_trials = spec.n_trials;
  for (int p = 0; p < points; ++p) {
    SweepPointResult point;
    point.value = spec.sweep_values[static_cast<std::size_t>(p)];
    const auto first = trials.begin() + static_cast<std::ptrdiff_t>(p) * spec.n_trials;
    point.trials.assign(std::make_move_iterator(first), std::make_move_iterator(first + spec.n_trials));
    std::vector<MatchResult> matches;
    double time = 0.0;
    for (const TrialResult& t : point.trials) {
      matches.push_back(t.match);
      time += t.elapsed_s;
      if (t.solver_failed || t.match.failed) ++point.n_fail;
    }
    point.rmse = rmse(matches);
    point.pr = probability_of_resolution(matches, spec.resolution_deg);
    point.mean_time_s = time / spec.n_trials;
    point.flagged = 10 * point.n_fail > spec.n_trials;
    result.points.push_back(std::move(point));
  }
  return result;
}

std::string results_csv(const ExperimentResult& result) {
  std::string out = std::string(to_string(result.sweep_variable)) + ",rmse,pr,mean_time_s,n_fail\n";
  for (const SweepPointResult& p : result.points) {
    out += format_general(p.value) + ',' + format_general(p.rmse) + ',' + format_general(p.pr) + ',' +
           format_general(p.mean_time_s) + ',' + std::to_string(p.n_fail) + '\n';
  }
  return out;
}

void export_results(const ExperimentResult& result, const std::filesystem::path& path, ExportFormat format) {
  if (format == ExportFormat::Json) {
    write_json_file(to_json(result), path);
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw InvalidInput("cannot open '" + path.string() + "' for writing");
  file << results_csv(result);
  if (!file) throw InvalidInput("failed writing '" + path.string() + "'");
}

ExperimentResult import_results_json(const std::filesystem::path& path) {
  return experiment_result_from_json(load_json_file(path));
}

}  // namespace nestdoa
