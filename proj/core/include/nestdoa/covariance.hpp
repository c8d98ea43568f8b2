#pragma once

#include "nestdoa/array_model.hpp"
#include "nestdoa/types.hpp"

namespace nestdoa {

/// Conditioning report for the matrix used to weight the fitting residual.
struct CovarianceDiagnostics {
  bool regularized = false;   ///< a ridge was added because R_hat was numerically singular
  double ridge = 0.0;         ///< ridge magnitude added to the diagonal
  double condition_number = 0.0;  ///< of R_hat before regularization
};

/// Sample covariance and everything derived from it that stays fixed during a solve.
struct CovarianceData {
  ComplexMatrix r_hat_matrix;  ///< M x M Hermitian sample covariance
  ComplexVector r_hat_vec;     ///< vec(r_hat_matrix), column-major
  int snapshots = 0;

  /// r_hat_matrix plus the ridge (equal to it when no regularization happened).
  ComplexMatrix weight_matrix;
  ComplexMatrix weight_inverse;
  double log_det_weight = 0.0;  ///< ln det(weight_matrix)

  CovarianceDiagnostics diagnostics;

  int sensors() const noexcept { return static_cast<int>(r_hat_matrix.rows()); }
};

/// (1/T) sum_t y(t) y(t)^H, symmetrized to be exactly Hermitian.
CovarianceData sample_covariance(const SnapshotMatrix& snapshots);

/// Wrap a given covariance (for example an exact model covariance) as if it
/// had been estimated from `snapshots` samples.
CovarianceData covariance_from_matrix(const ComplexMatrix& r_hat, int snapshots);

/// Column-major vectorization.
ComplexVector vectorize_covariance(const ComplexMatrix& r);

/// vec(I_M): the noise selection vector.
RealVector noise_selection(int m);

/// [Re(z); Im(z)].
RealVector lift_real(const ComplexVector& z);
RealMatrix lift_real(const ComplexMatrix& z);

/// Real-lifted asymptotic covariance of the vectorized sample covariance,
///   Rbar = 1/2 [[Re C, -Im C], [Im C, Re C]],  C = (1/T) R^T kron R.
/// Products with Rbar and Rbar^{-1} use (A^T kron B) vec(X) = vec(B X A), so
/// only M x M matrices are ever inverted.
class NoiseCovariance {
 public:
  NoiseCovariance() = default;
  explicit NoiseCovariance(const CovarianceData& cov);

  int dim() const noexcept { return 2 * m_ * m_; }

  RealVector apply(const RealVector& x) const;
  RealVector apply_inverse(const RealVector& x) const;
  RealMatrix apply_inverse(const RealMatrix& x) const;

  /// ln|Rbar| = -2M^2 ln 2 - 2M^2 ln T + 4M ln det R.
  double log_det() const noexcept { return log_det_; }

  /// Dense 2M^2 x 2M^2 Rbar (not its inverse).
  const RealMatrix& dense() const noexcept { return dense_; }

 private:
  int m_ = 0;
  double snapshots_ = 1.0;
  ComplexMatrix weight_;
  ComplexMatrix weight_inverse_;
  double log_det_ = 0.0;
  RealMatrix dense_;
};

/// (R^{-T} kron R^{-1}) z = vec(R^{-1} Z R^{-1}), using the (possibly regularized) weight matrix.
ComplexVector kron_inverse_apply(const CovarianceData& cov, const ComplexVector& z);

/// Rbar^{-1} x for the covariance in `cov`.
RealVector apply_noise_covariance_inverse(const CovarianceData& cov, const RealVector& x);

/// Real-valued measurement model for one noise level and one grid.
struct RealModel {
  RealVector r_bar;   ///< [Re(r_hat) - sigma_n2 vec(I); Im(r_hat)]
  RealMatrix b_bar;   ///< [Re(B); Im(B)]
  RealVector ones_n;  ///< vec(I_M)
  double sigma_n2 = 0.0;
  NoiseCovariance noise;

  int grid_size() const noexcept { return static_cast<int>(b_bar.cols()); }
  int dim() const noexcept { return static_cast<int>(r_bar.size()); }
};

RealModel build_real_model(const CovarianceData& cov, double sigma_n2, const ComplexMatrix& dictionary);

/// Recompute r_bar for a new noise variance, keeping the dictionary.
void set_noise_variance(RealModel& model, const CovarianceData& cov, double sigma_n2);

/// Replace the dictionary, keeping r_bar.
void set_dictionary(RealModel& model, const ComplexMatrix& dictionary);

enum class SigmaPath {
  Automatic,  ///< LowRank when the grid is smaller than 2M^2, Direct otherwise
  Direct,     ///< Cholesky of the dense 2M^2 x 2M^2 matrix, whitened by Rbar
  LowRank,    ///< matrix inversion lemma around Rbar with an Ngrid x Ngrid capacitance
};

/// Sigma = Bbar Gamma Bbar^T + Rbar, factorized once for solves and the log-determinant.
/// The low-rank path is written in terms of Gamma^{1/2}, so zero entries of gamma are allowed.
/// Holds a reference to `model`, which must outlive the factorization.
class SigmaFactorization {
 public:
  SigmaFactorization(const RealModel& model, const RealVector& gamma,
                     SigmaPath path = SigmaPath::Automatic);

  SigmaPath path() const noexcept { return path_; }
  int dim() const noexcept { return dim_; }

  RealVector solve(const RealVector& v) const;
  RealMatrix solve(const RealMatrix& v) const;
  double log_det() const noexcept { return log_det_; }

  /// w_k = b_k^T Sigma^{-1} b_k for every column of the model dictionary.
  RealVector dictionary_weights() const;

  /// Dense Sigma^{-1}.
  RealMatrix inverse() const;

  /// Dense Sigma.
  RealMatrix dense() const;

 private:
  const RealModel* model_;
  RealVector gamma_;
  SigmaPath path_;
  int dim_ = 0;
  double log_det_ = 0.0;

  // Direct path: Rbar = L L^T, W = L^{-1} Bbar, sigma_llt_ factors I + W Gamma W^T.
  Eigen::LLT<RealMatrix> noise_llt_;
  RealMatrix whitened_b_;
  Eigen::LLT<RealMatrix> sigma_llt_;

  // Low-rank path: Sigma^{-1} = Rbar^{-1} - U C^{-1} U^T, U = Rbar^{-1} Bbar S, S = Gamma^{1/2}.
  RealMatrix rinv_b_;   // Rbar^{-1} Bbar
  RealMatrix gram_;     // Bbar^T Rbar^{-1} Bbar
  RealVector sqrt_gamma_;
  Eigen::LLT<RealMatrix> capacitance_llt_;
};

/// Factorize Sigma for the given hyper-variances. Throws InvalidInput on
/// negative or non-finite gamma and NumericalError when Sigma is not SPD.
SigmaFactorization assemble_sigma(const RealModel& model, const RealVector& gamma,
                                  SigmaPath path = SigmaPath::Automatic);

}  // namespace nestdoa
