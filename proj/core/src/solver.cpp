#include "nestdoa/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>

#include "nestdoa/error.hpp"

namespace nestdoa {

void SolverConfig::validate() const {
  if (n_grid < 2) throw InvalidConfiguration("n_grid must be >= 2");
  if (!(tol > 0.0)) throw InvalidConfiguration("tol must be > 0");
  if (max_outer < 1) throw InvalidConfiguration("max_outer must be >= 1");
  if (max_linesearch < 1) throw InvalidConfiguration("max_linesearch must be >= 1");
  if (!(linesearch_shrink > 0.0 && linesearch_shrink < 1.0)) {
    throw InvalidConfiguration("linesearch_shrink must lie in (0, 1)");
  }
  if (!(initial_step > 0.0)) throw InvalidConfiguration("initial_step must be > 0");
  if (!(prune_threshold >= 0.0)) throw InvalidConfiguration("prune_threshold must be >= 0");
  if (prune_mode == PruneMode::Relative && prune_threshold > 1.0) {
    throw InvalidConfiguration("relative prune_threshold must be <= 1");
  }
  if (!(grid_min >= -90.0 && grid_max <= 90.0 && grid_min < grid_max)) {
    throw InvalidConfiguration("grid bounds must satisfy -90 <= grid_min < grid_max <= 90");
  }
  if (!(merge_tol >= 0.0)) throw InvalidConfiguration("merge_tol must be >= 0");
  if (!(gamma_floor >= 0.0)) throw InvalidConfiguration("gamma_floor must be >= 0");
  if (!std::isnan(initial_noise_var) && !(initial_noise_var >= 0.0)) {
    throw InvalidConfiguration("initial_noise_var must be >= 0");
  }
}

std::vector<double> init_grid(const SolverConfig& config) {
  if (config.n_grid < 2) throw InvalidConfiguration("n_grid must be >= 2");
  std::vector<double> grid(static_cast<std::size_t>(config.n_grid));
  const double span = config.grid_max - config.grid_min;
  for (int k = 0; k < config.n_grid; ++k) {
    grid[static_cast<std::size_t>(k)] = config.grid_min + span * k / config.n_grid;
  }
  return grid;
}

RealVector init_gamma(const RealModel& model) {
  const RealVector norms2 = model.b_bar.colwise().squaredNorm().transpose();
  if ((norms2.array() <= 0.0).any()) throw InvalidInput("dictionary has a zero-norm column");
  const RealVector inner = model.b_bar.transpose() * model.r_bar;
  return inner.array().square() / norms2.array().square();
}

RealVector compute_weights(const SigmaFactorization& sigma) {
  RealVector w = sigma.dictionary_weights();
  if (!w.allFinite() || (w.array() <= 0.0).any()) {
    throw NumericalError("non-positive weight b_k^T Sigma^{-1} b_k");
  }
  return w;
}

PUpdate update_p(const RealModel& model, const RealVector& gamma, const SigmaFactorization& sigma) {
  if ((gamma.array() < 0.0).any()) throw InvalidInput("gamma must be elementwise >= 0");
  PUpdate out;
  out.unconstrained = gamma.cwiseProduct(model.b_bar.transpose() * sigma.solve(model.r_bar));
  out.p = out.unconstrained.cwiseMax(0.0);
  out.clipped = (out.unconstrained.array() < 0.0).any();
  return out;
}

RealVector update_gamma(const RealVector& p, const RealVector& w) {
  if (p.size() != w.size()) throw InvalidInput("update_gamma: length mismatch");
  if ((w.array() <= 0.0).any()) throw NumericalError("update_gamma: weights must be positive");
  if ((p.array() < 0.0).any()) throw InvalidInput("update_gamma: p must be >= 0");
  return p.array() / w.array().sqrt();
}

double update_noise_variance(const CovarianceData& cov, const ComplexMatrix& dictionary,
                             const RealVector& p, double current_sigma_n2) {
  if (dictionary.cols() != p.size()) throw InvalidInput("update_noise_variance: length mismatch");
  const int m = cov.sensors();
  const ComplexVector residual = cov.r_hat_vec - dictionary * p.cast<Complex>();
  const ComplexVector v1 = residual.real().cast<Complex>();
  const ComplexVector v2 = residual.imag().cast<Complex>();
  const ComplexVector ones = noise_selection(m).cast<Complex>();

  const ComplexVector k_v1 = kron_inverse_apply(cov, v1);
  const ComplexVector k_v2 = kron_inverse_apply(cov, v2);
  const ComplexVector k_ones = kron_inverse_apply(cov, ones);

  const RealVector ones_real = noise_selection(m);
  const double numerator = ones_real.dot(k_v1.real() - k_v2.imag());
  const double denominator = ones_real.dot(k_ones.real());
  if (!(denominator > 0.0)) throw NumericalError("noise update denominator is not positive");
  const double estimate = numerator / denominator;
  return estimate > 0.0 ? estimate : current_sigma_n2;
}

double evaluate_objective(const RealModel& model, const SigmaFactorization& sigma) {
  return sigma.log_det() + model.r_bar.dot(sigma.solve(model.r_bar));
}

double evaluate_objective(const RealModel& model, const RealVector& gamma, SigmaPath path) {
  return evaluate_objective(model, SigmaFactorization(model, gamma, path));
}

double grid_objective(const RealModel& model, const RealVector& gamma) {
  const SigmaFactorization sigma(model, gamma);
  return model.r_bar.dot(sigma.solve(model.r_bar)) -
         model.r_bar.dot(model.noise.apply_inverse(model.r_bar));
}

RealVector grid_objective_gradient(const ArrayGeometry& geometry, const RealModel& model,
                                   const RealVector& gamma, std::span<const double> grid_deg,
                                   double gamma_floor) {
  const auto n = static_cast<Eigen::Index>(grid_deg.size());
  if (n != model.grid_size() || n != gamma.size()) throw InvalidInput("gradient: grid size mismatch");
  const SigmaFactorization sigma(model, gamma);
  const RealVector s = sigma.solve(model.r_bar);
  RealVector gradient = RealVector::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (gamma[k] < gamma_floor || gamma[k] == 0.0) continue;
    const RealVector d = lift_real(dictionary_column_derivative(geometry, grid_deg[static_cast<std::size_t>(k)]));
    const double z = gamma[k] * model.b_bar.col(k).dot(s);
    gradient[k] = -2.0 * z * d.dot(s);
  }
  return gradient;
}

namespace {

// Sigma^{-1} and Sigma^{-1} r maintained under single-column dictionary moves.
class RankTwoTracker {
 public:
  RankTwoTracker(const RealModel& model, const RealVector& gamma)
      : r_(model.r_bar) {
    const SigmaFactorization sigma(model, gamma, SigmaPath::Direct);
    inverse_ = sigma.inverse();
    inverse_ = 0.5 * (inverse_ + inverse_.transpose()).eval();
    s_ = inverse_ * r_;
    fit_ = r_.dot(s_);
  }

  const RealVector& s() const noexcept { return s_; }
  double fit() const noexcept { return fit_; }

  // r^T Sigma'^{-1} r for Sigma' = Sigma + g (b_new b_new^T - b_old b_old^T).
  double trial(const RealVector& b_new, const RealVector& b_old, double g) {
    prepare(b_new, b_old, g);
    return fit_ - t_.dot(small_.solve(t_));
  }

  // Commit the most recent trial.
  void accept() {
    const Eigen::Matrix2d small_inv = small_.inverse();
    s_.noalias() -= pu_ * (small_inv * t_);
    inverse_.noalias() -= pu_ * small_inv * pu_.transpose();
    fit_ = r_.dot(s_);
  }

 private:
  void prepare(const RealVector& b_new, const RealVector& b_old, double g) {
    u_.resize(b_new.size(), 2);
    u_.col(0) = b_new;
    u_.col(1) = b_old;
    pu_.noalias() = inverse_ * u_;
    Eigen::Matrix2d small = u_.transpose() * pu_;
    small(0, 0) += 1.0 / g;
    small(1, 1) -= 1.0 / g;
    small_.compute(small);
    t_ = u_.transpose() * s_;
  }

  RealVector r_;
  RealMatrix inverse_;
  RealVector s_;
  double fit_ = 0.0;
  RealMatrix u_;
  RealMatrix pu_;
  Eigen::Vector2d t_;
  Eigen::FullPivLU<Eigen::Matrix2d> small_;
};

RealVector lifted_column(const ArrayGeometry& geometry, double phi_deg) {
  const std::vector<double> single{phi_deg};
  return lift_real(ComplexVector(virtual_dictionary(geometry, single).col(0)));
}

}  // namespace

RefineResult refine_grid(const ArrayGeometry& geometry, const RealModel& model,
                         const SolverState& state, const SolverConfig& config) {
  const int n = state.size();
  if (n == 0) throw InvalidInput("refine_grid: active support is empty");
  if (model.grid_size() != n || state.gamma.size() != n) throw InvalidInput("refine_grid: size mismatch");

  RefineResult result;
  result.grid_deg = state.grid_deg;
  const double baseline = model.r_bar.dot(model.noise.apply_inverse(model.r_bar));

  RankTwoTracker tracker(model, state.gamma);
  result.objective_before = tracker.fit() - baseline;
  double current = result.objective_before;

  // Infinity norm of the full gradient at the start of the pass.
  double scale = 0.0;
  for (int k = 0; k < n; ++k) {
    const double g = state.gamma[k];
    if (g < config.gamma_floor || g == 0.0) continue;
    const RealVector b = lifted_column(geometry, state.grid_deg[k]);
    const RealVector d = lift_real(dictionary_column_derivative(geometry, state.grid_deg[k]));
    scale = std::max(scale, std::abs(2.0 * g * b.dot(tracker.s()) * d.dot(tracker.s())));
  }
  for (int k = 0; k < n; ++k) {
    const double g = state.gamma[k];
    if (g < config.gamma_floor || g == 0.0) continue;
    double& phi = result.grid_deg[static_cast<std::size_t>(k)];
    const RealVector b_old = lifted_column(geometry, phi);
    const RealVector d = lift_real(dictionary_column_derivative(geometry, phi));
    const double gradient = -2.0 * g * b_old.dot(tracker.s()) * d.dot(tracker.s());
    if (gradient == 0.0 || !std::isfinite(gradient) || !std::isfinite(scale)) continue;

    // The steepest coordinate's first trial moves initial_step degrees.
    const double direction = std::clamp(-gradient / scale, -1.0, 1.0);
    double step = config.initial_step;
    for (int trial = 0; trial < config.max_linesearch; ++trial, step *= config.linesearch_shrink) {
      const double candidate = std::clamp(phi + direction * step, config.grid_min, config.grid_max);
      if (candidate == phi) continue;
      const RealVector b_new = lifted_column(geometry, candidate);
      const double value = tracker.trial(b_new, b_old, g) - baseline;
      if (value < current) {
        tracker.accept();
        phi = candidate;
        current = value;
        result.accepted_values.push_back(value);
        ++result.accepted_steps;
        break;
      }
    }
  }

  if (result.accepted_steps > 0) {
    // Re-evaluate from scratch so the non-increase guarantee does not rest on the rank-2 updates.
    RealModel moved = model;
    set_dictionary(moved, virtual_dictionary(geometry, result.grid_deg));
    const double fresh_after = grid_objective(moved, state.gamma);
    const double fresh_before = grid_objective(model, state.gamma);
    if (fresh_after > fresh_before) {
      result.grid_deg = state.grid_deg;
      result.accepted_values.clear();
      result.accepted_steps = 0;
      result.reverted = true;
      result.objective_before = result.objective_after = fresh_before;
      return result;
    }
    result.objective_before = fresh_before;
    result.objective_after = fresh_after;
  } else {
    result.objective_after = result.objective_before;
  }
  return result;
}

bool prune_support(SolverState& state, const SolverConfig& config) {
  const int n = state.size();
  if (n == 0) return true;
  if (state.p.size() != n || state.gamma.size() != n || static_cast<int>(state.support_ids.size()) != n) {
    throw InvalidInput("prune_support: state size mismatch");
  }
  const double max_p = state.p.maxCoeff();
  const double threshold =
      config.prune_mode == PruneMode::Relative ? config.prune_threshold * max_p : config.prune_threshold;

  std::vector<int> keep;
  for (int k = 0; k < n; ++k) {
    if (state.p[k] > 0.0 && state.p[k] >= threshold) keep.push_back(k);
  }
  bool flagged = false;
  if (keep.empty()) {
    Eigen::Index best = 0;
    state.p.maxCoeff(&best);
    keep.push_back(static_cast<int>(best));
    flagged = true;
  }

  // Merge neighbours closer than merge_tol, keeping the larger p. The grid is sorted.
  std::vector<int> merged;
  for (int k : keep) {
    if (!merged.empty() &&
        state.grid_deg[static_cast<std::size_t>(k)] - state.grid_deg[static_cast<std::size_t>(merged.back())] <
            config.merge_tol) {
      if (state.p[k] > state.p[merged.back()]) merged.back() = k;
      continue;
    }
    merged.push_back(k);
  }

  if (static_cast<int>(merged.size()) == n) return flagged;
  SolverState pruned;
  const auto count = static_cast<Eigen::Index>(merged.size());
  pruned.gamma.resize(count);
  pruned.p.resize(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    const int k = merged[static_cast<std::size_t>(i)];
    pruned.grid_deg.push_back(state.grid_deg[static_cast<std::size_t>(k)]);
    pruned.support_ids.push_back(state.support_ids[static_cast<std::size_t>(k)]);
    pruned.gamma[i] = state.gamma[k];
    pruned.p[i] = state.p[k];
  }
  state.grid_deg = std::move(pruned.grid_deg);
  state.support_ids = std::move(pruned.support_ids);
  state.gamma = std::move(pruned.gamma);
  state.p = std::move(pruned.p);
  return flagged;
}

namespace {

void sort_by_grid(SolverState& state) {
  const int n = state.size();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return state.grid_deg[static_cast<std::size_t>(a)] < state.grid_deg[static_cast<std::size_t>(b)];
  });
  if (std::is_sorted(order.begin(), order.end())) return;
  SolverState sorted;
  sorted.gamma.resize(n);
  sorted.p.resize(n);
  for (int i = 0; i < n; ++i) {
    const int k = order[static_cast<std::size_t>(i)];
    sorted.grid_deg.push_back(state.grid_deg[static_cast<std::size_t>(k)]);
    sorted.support_ids.push_back(state.support_ids[static_cast<std::size_t>(k)]);
    sorted.gamma[i] = state.gamma[k];
    sorted.p[i] = state.p[k];
  }
  state.grid_deg = std::move(sorted.grid_deg);
  state.support_ids = std::move(sorted.support_ids);
  state.gamma = std::move(sorted.gamma);
  state.p = std::move(sorted.p);
}

double initial_noise_variance(const CovarianceData& cov, const SolverConfig& config) {
  if (!std::isnan(config.initial_noise_var)) return config.initial_noise_var;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(cov.r_hat_matrix, Eigen::EigenvaluesOnly);
  return std::max(eig.eigenvalues().minCoeff(), 0.0);
}

}  // namespace

EstimationOutput solve(const CovarianceData& cov, const ArrayGeometry& geometry, const SolverConfig& config) {
  config.validate();
  if (cov.sensors() != geometry.size()) {
    throw InvalidInput("covariance is " + std::to_string(cov.sensors()) + "x" + std::to_string(cov.sensors()) +
                       " but the array has " + std::to_string(geometry.size()) + " sensors");
  }

  SolverState state;
  state.grid_deg = init_grid(config);
  state.support_ids.resize(state.grid_deg.size());
  std::iota(state.support_ids.begin(), state.support_ids.end(), 0);
  state.sigma_n2 = initial_noise_variance(cov, config);

  ComplexMatrix dictionary = virtual_dictionary(geometry, state.grid_deg);
  RealModel model = build_real_model(cov, state.sigma_n2, dictionary);
  state.gamma = init_gamma(model);

  EstimationOutput out;
  out.covariance = cov.diagnostics;
  std::optional<RealVector> previous_p;

  for (int iter = 1; iter <= config.max_outer; ++iter) {
    IterationRecord record;
    record.iteration = iter;
    try {
      // p and gamma share one factorization of Sigma at the current gamma.
      const SigmaFactorization sigma(model, state.gamma, config.sigma_path);
      record.objective = evaluate_objective(model, sigma);
      state.objective_trace.push_back(record.objective);

      PUpdate p_update = update_p(model, state.gamma, sigma);
      const RealVector w = compute_weights(sigma);
      state.p = std::move(p_update.p);
      state.gamma = update_gamma(state.p, w);
      record.clipped = p_update.clipped;

      state.sigma_n2 = update_noise_variance(cov, dictionary, state.p, state.sigma_n2);
      set_noise_variance(model, cov, state.sigma_n2);
      record.objective_after_update = evaluate_objective(model, state.gamma, config.sigma_path);

      const std::vector<int> ids_before = state.support_ids;
      out.support_flagged = prune_support(state, config);
      record.pruned = state.support_ids != ids_before;
      if (!record.pruned && previous_p && previous_p->size() == state.p.size()) {
        record.p_change = (state.p - *previous_p).norm();
      }
      if (record.pruned) {
        dictionary = virtual_dictionary(geometry, state.grid_deg);
        set_dictionary(model, dictionary);
      }

      const RefineResult refined = refine_grid(geometry, model, state, config);
      record.grid_objective_before = refined.objective_before;
      record.grid_objective_after = refined.objective_after;
      record.refine_steps = refined.accepted_steps;
      record.refine_values = refined.accepted_values;
      if (refined.accepted_steps > 0) {
        state.grid_deg = refined.grid_deg;
        sort_by_grid(state);
        dictionary = virtual_dictionary(geometry, state.grid_deg);
        set_dictionary(model, dictionary);
      }
    } catch (const NumericalError& e) {
      throw NumericalError(e.what(), iter);
    }

    record.sigma_n2 = state.sigma_n2;
    record.support_size = state.size();
    out.trace.push_back(record);
    state.outer_iter = iter;
    previous_p = state.p;
    if (!std::isnan(record.p_change) && record.p_change <= config.tol) {
      out.converged = true;
      break;
    }
  }

  out.doas_deg = state.grid_deg;
  out.powers.assign(state.p.data(), state.p.data() + state.p.size());
  out.noise_var = state.sigma_n2;
  out.iterations = state.outer_iter;
  return out;
}

}  // namespace nestdoa
