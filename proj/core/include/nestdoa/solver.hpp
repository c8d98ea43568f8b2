#pragma once

#include <limits>
#include <span>
#include <vector>

#include "nestdoa/array_model.hpp"
#include "nestdoa/covariance.hpp"
#include "nestdoa/types.hpp"

namespace nestdoa {

enum class PruneMode {
  Relative,  ///< keep p_k >= threshold * max(p)
  Absolute,  ///< keep p_k >= threshold
};

struct SolverConfig {
  int n_grid = 200;               ///< initial uniform grid size
  double prune_threshold = 0.05;
  PruneMode prune_mode = PruneMode::Relative;
  double tol = 1e-6;              ///< stop when ||p_new - p_old||_2 <= tol
  int max_outer = 160;
  int max_linesearch = 20;        ///< backtracking trials per coordinate
  double linesearch_shrink = 0.5;
  double initial_step = 1.0;      ///< first trial step, degrees
  double grid_min = -90.0;
  double grid_max = 90.0;
  double merge_tol = 0.05;        ///< grid points closer than this (deg) are merged
  double gamma_floor = 1e-12;     ///< support entries below this are not refined
  /// Starting noise variance; NaN selects the smallest eigenvalue of R_hat.
  double initial_noise_var = std::numeric_limits<double>::quiet_NaN();
  SigmaPath sigma_path = SigmaPath::Automatic;

  void validate() const;
};

/// Mutable estimator state. `support_ids` are indices into the initial grid
/// and identify each surviving point across pruning.
struct SolverState {
  std::vector<double> grid_deg;
  RealVector gamma;
  RealVector p;
  double sigma_n2 = 0.0;
  int outer_iter = 0;
  std::vector<int> support_ids;
  std::vector<double> objective_trace;

  int size() const noexcept { return static_cast<int>(grid_deg.size()); }
};

/// Per outer iteration diagnostics.
struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;              ///< negative log-likelihood at the start of the iteration
  double objective_after_update = 0.0; ///< after the p, gamma and noise updates (same grid)
  double grid_objective_before = 0.0;  ///< f(phi) entering refinement
  double grid_objective_after = 0.0;   ///< f(phi) leaving refinement
  double p_change = std::numeric_limits<double>::quiet_NaN();  ///< NaN when skipped
  double sigma_n2 = 0.0;
  int support_size = 0;                ///< after pruning
  int refine_steps = 0;                ///< accepted coordinate moves
  std::vector<double> refine_values;   ///< f(phi) after each accepted move
  bool clipped = false;                ///< projection onto p >= 0 was active
  bool pruned = false;                 ///< support changed this iteration
};

struct EstimationOutput {
  std::vector<double> doas_deg;
  std::vector<double> powers;
  double noise_var = 0.0;
  int iterations = 0;
  bool converged = false;
  bool support_flagged = false;  ///< every p was zero; the largest entry was kept
  CovarianceDiagnostics covariance;
  std::vector<IterationRecord> trace;
};

/// Uniform grid of n_grid points over [grid_min, grid_max).
std::vector<double> init_grid(const SolverConfig& config);

/// Periodogram start: gamma_k = (b_k^T r)^2 / ||b_k||^4.
RealVector init_gamma(const RealModel& model);

/// w_k = b_k^T Sigma^{-1} b_k, all strictly positive.
RealVector compute_weights(const SigmaFactorization& sigma);

struct PUpdate {
  RealVector p;             ///< projected onto p >= 0
  RealVector unconstrained; ///< gamma_k b_k^T Sigma^{-1} r
  bool clipped = false;     ///< some unconstrained entry was negative
};

PUpdate update_p(const RealModel& model, const RealVector& gamma, const SigmaFactorization& sigma);

/// gamma_k = p_k / sqrt(w_k).
RealVector update_gamma(const RealVector& p, const RealVector& w);

/// Closed-form noise variance for fixed p. Returns `current_sigma_n2` unchanged
/// when the closed form is not positive.
double update_noise_variance(const CovarianceData& cov, const ComplexMatrix& dictionary,
                             const RealVector& p, double current_sigma_n2);

/// ln|Sigma| + r^T Sigma^{-1} r at the model's noise level.
double evaluate_objective(const RealModel& model, const RealVector& gamma,
                          SigmaPath path = SigmaPath::Automatic);
double evaluate_objective(const RealModel& model, const SigmaFactorization& sigma);

/// Grid objective f(phi) = -r^T Rbar^{-1} Bbar H Bbar^T Rbar^{-1} r with
/// H = (Bbar^T Rbar^{-1} Bbar + Gamma^{-1})^{-1}, evaluated through the
/// equivalent r^T Sigma^{-1} r - r^T Rbar^{-1} r so that gamma_k = 0 is allowed.
double grid_objective(const RealModel& model, const RealVector& gamma);

/// df/dphi_k in 1/degree. Only column k of the dictionary depends on phi_k, which gives
///   df/dphi_k = -2 z_k d_k^T Sigma^{-1} r,  z = Gamma Bbar^T Sigma^{-1} r.
/// Entries with gamma_k < gamma_floor are set to zero.
RealVector grid_objective_gradient(const ArrayGeometry& geometry, const RealModel& model,
                                   const RealVector& gamma, std::span<const double> grid_deg,
                                   double gamma_floor = 1e-12);

struct RefineResult {
  std::vector<double> grid_deg;        ///< same ordering as the input grid
  double objective_before = 0.0;
  double objective_after = 0.0;
  std::vector<double> accepted_values; ///< f after each accepted coordinate move
  int accepted_steps = 0;
  bool reverted = false;               ///< round-off made the pass non-improving; grid restored
};

/// One sequential pass of backtracking gradient descent over the grid coordinates.
/// `model` must hold the dictionary of `state.grid_deg`.
RefineResult refine_grid(const ArrayGeometry& geometry, const RealModel& model,
                         const SolverState& state, const SolverConfig& config);

/// Drop points with small p (and their gamma) and merge points closer than
/// merge_tol. Returns true when nothing survived and the largest entry was kept.
bool prune_support(SolverState& state, const SolverConfig& config);

/// Full block alternating estimator.
EstimationOutput solve(const CovarianceData& cov, const ArrayGeometry& geometry,
                       const SolverConfig& config);

}  // namespace nestdoa
