#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nestdoa/array_model.hpp"
#include "nestdoa/covariance.hpp"
#include "nestdoa/types.hpp"

namespace nestdoa {

/// Outcome of one verification oracle. passed <=> max_rel_error <= tolerance.
struct OracleReport {
  std::string name;
  int instances = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::vector<std::string> notes;
};

/// r^T Sigma^{-1} r as the minimum over p of sum(p_k^2 / gamma_k) + (r - B p)^T Rbar^{-1} (r - B p):
/// closed-form minimizer, minimum value and local optimality, checked against the solver's p update.
/// Dimensions: m sensors (<= 4), n grid points (<= 8).
OracleReport lemma1_check(int trials, int m, int n, std::uint64_t seed);

/// Tangent-plane majorization of ln|Sigma(gamma)| built from the solver's weights.
OracleReport majorization_check(int trials, int m, int n, std::uint64_t seed);

/// Direct Cholesky and matrix-inversion-lemma paths of the Sigma factorization agree.
/// Samples grids both smaller and larger than 2 m^2.
OracleReport woodbury_equivalence_check(int trials, int m, std::uint64_t seed);

/// Random problem for the grid-gradient check.
struct GradientInstance {
  ArrayGeometry geometry;
  CovarianceData covariance;
  double sigma_n2 = 0.0;
  std::vector<double> grid_deg;
  RealVector gamma;
};

GradientInstance random_gradient_instance(int m1, int m2, int n_grid, std::uint64_t seed);

using GridGradientFn = std::function<RealVector(const ArrayGeometry&, const RealModel&,
                                                const RealVector&, std::span<const double>)>;

/// The solver's analytic gradient, the default subject of the check.
RealVector analytic_grid_gradient(const ArrayGeometry& geometry, const RealModel& model,
                                  const RealVector& gamma, std::span<const double> grid_deg);

/// Analytic gradient against central differences of a dense, explicitly inverted f(phi).
/// Coordinates within `step_deg` of the +-90 boundary use a one-sided second-order stencil.
/// Errors are relative to the infinity norm of the finite-difference gradient.
OracleReport gradient_fd_check(const GradientInstance& instance, double step_deg,
                               const GridGradientFn& gradient = analytic_grid_gradient);

/// gradient_fd_check over `trials` random instances (M = 6 nested array, n grid points).
OracleReport gradient_fd_check(int trials, int n, double step_deg, std::uint64_t seed,
                               const GridGradientFn& gradient = analytic_grid_gradient);

struct OracleSuiteOptions {
  int trials = 100;
  std::uint64_t seed = 20240601;
  std::string only;  ///< empty = all; otherwise one of lemma1, majorization, gradient, woodbury
  bool inject_gradient_fault = false;  ///< flip the sign of the analytic gradient
};

std::vector<OracleReport> run_oracle_suite(const OracleSuiteOptions& options);

/// Dense reference implementations. They deliberately avoid the structured code
/// paths of the library: explicit Kronecker products, explicit inverses and LU.
namespace dense {

ComplexVector steering(std::span<const int> positions, double spacing, double theta_deg);

/// [Re; Im] lift of the virtual dictionary built with explicit Kronecker products.
RealMatrix real_dictionary(const ArrayGeometry& geometry, std::span<const double> grid_deg);

/// 1/2 [[Re C, -Im C], [Im C, Re C]] with C = (1/T) kron(R^T, R) formed entry by entry.
RealMatrix noise_covariance(const ComplexMatrix& r, int snapshots);

/// ln|A| through partial-pivot LU.
double log_det(const RealMatrix& a);

/// f(phi) = -r^T Rbar^{-1} B H B^T Rbar^{-1} r with H = (B^T Rbar^{-1} B + Gamma^{-1})^{-1}.
double grid_objective(const RealMatrix& noise_cov, const RealMatrix& b, const RealVector& gamma,
                      const RealVector& r);

}  // namespace dense

}  // namespace nestdoa
