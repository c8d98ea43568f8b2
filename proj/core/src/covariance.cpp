#include "nestdoa/covariance.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "nestdoa/error.hpp"

namespace nestdoa {

namespace {

constexpr double kSingularCondition = 1e10;
constexpr double kRidgeFactor = 1e-8;

// Complex M^2 vector from its real lift [x1; x2].
ComplexVector unlift(const Eigen::Ref<const RealVector>& x) {
  const Eigen::Index n = x.size() / 2;
  ComplexVector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = Complex(x[i], x[n + i]);
  return z;
}

// vec(left X right) where vec(X) = z.
ComplexVector sandwich(const ComplexMatrix& left, const ComplexVector& z, const ComplexMatrix& right) {
  const Eigen::Index m = left.rows();
  const Eigen::Map<const ComplexMatrix> x(z.data(), m, m);
  const ComplexMatrix y = left * x * right;
  return Eigen::Map<const ComplexVector>(y.data(), m * m);
}

CovarianceData finish_covariance(ComplexMatrix r_hat, int snapshots) {
  const Eigen::Index m = r_hat.rows();
  CovarianceData cov;
  cov.snapshots = snapshots;
  cov.r_hat_matrix = 0.5 * (r_hat + r_hat.adjoint());
  cov.r_hat_vec = vectorize_covariance(cov.r_hat_matrix);

  Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(cov.r_hat_matrix, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmax > 0.0) || !std::isfinite(lmax)) {
    throw InvalidInput("sample covariance is zero or non-finite");
  }
  cov.diagnostics.condition_number = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();

  cov.weight_matrix = cov.r_hat_matrix;
  if (cov.diagnostics.condition_number > kSingularCondition) {
    const double ridge = kRidgeFactor * cov.r_hat_matrix.trace().real() / static_cast<double>(m);
    cov.weight_matrix.diagonal().array() += ridge;
    cov.diagnostics.regularized = true;
    cov.diagnostics.ridge = ridge;
  }
  Eigen::LLT<ComplexMatrix> llt(cov.weight_matrix);
  if (llt.info() != Eigen::Success) throw NumericalError("sample covariance is not positive definite");
  cov.weight_inverse = llt.solve(ComplexMatrix::Identity(m, m));
  cov.weight_inverse = 0.5 * (cov.weight_inverse + cov.weight_inverse.adjoint()).eval();
  cov.log_det_weight = 2.0 * llt.matrixL().toDenseMatrix().diagonal().real().array().log().sum();
  return cov;
}

}  // namespace

CovarianceData sample_covariance(const SnapshotMatrix& snapshots) {
  const int t_count = snapshots.snapshots();
  if (t_count < 1) throw InvalidInput("sample covariance needs at least one snapshot");
  if (!snapshots.data.allFinite()) throw InvalidInput("snapshot matrix contains non-finite values");
  ComplexMatrix r = snapshots.data * snapshots.data.adjoint() / static_cast<double>(t_count);
  return finish_covariance(std::move(r), t_count);
}

CovarianceData covariance_from_matrix(const ComplexMatrix& r_hat, int snapshots) {
  if (r_hat.rows() != r_hat.cols() || r_hat.rows() == 0) throw InvalidInput("covariance must be square");
  if (snapshots < 1) throw InvalidInput("snapshot count must be >= 1");
  return finish_covariance(r_hat, snapshots);
}

ComplexVector vectorize_covariance(const ComplexMatrix& r) {
  if (r.rows() != r.cols()) throw InvalidInput("vectorize_covariance expects a square matrix");
  return Eigen::Map<const ComplexVector>(r.data(), r.size());
}

RealVector noise_selection(int m) {
  RealVector ones = RealVector::Zero(static_cast<Eigen::Index>(m) * m);
  for (int i = 0; i < m; ++i) ones[i * m + i] = 1.0;
  return ones;
}

RealVector lift_real(const ComplexVector& z) {
  RealVector x(2 * z.size());
  x << z.real(), z.imag();
  return x;
}

RealMatrix lift_real(const ComplexMatrix& z) {
  RealMatrix x(2 * z.rows(), z.cols());
  x << z.real(), z.imag();
  return x;
}

NoiseCovariance::NoiseCovariance(const CovarianceData& cov)
    : m_(cov.sensors()),
      snapshots_(static_cast<double>(cov.snapshots)),
      weight_(cov.weight_matrix),
      weight_inverse_(cov.weight_inverse) {
  const double n2 = static_cast<double>(m_) * m_;
  log_det_ = -2.0 * n2 * std::log(2.0) - 2.0 * n2 * std::log(snapshots_) + 4.0 * m_ * cov.log_det_weight;

  // C = (1/T) R^T kron R; entry (j*M + i, l*M + k) = R(l, j) R(i, k) / T.
  const Eigen::Index n = static_cast<Eigen::Index>(n2);
  ComplexMatrix c(n, n);
  for (int j = 0; j < m_; ++j) {
    for (int l = 0; l < m_; ++l) {
      c.block(j * m_, l * m_, m_, m_) = weight_(l, j) * weight_ / snapshots_;
    }
  }
  dense_.resize(2 * n, 2 * n);
  dense_ << c.real(), -c.imag(), c.imag(), c.real();
  dense_ *= 0.5;
}

RealVector NoiseCovariance::apply(const RealVector& x) const {
  if (x.size() != dim()) throw InvalidInput("noise covariance apply: dimension mismatch");
  // C z = (1/T) vec(R Z R).
  const ComplexVector cz = sandwich(weight_, unlift(x), weight_) / snapshots_;
  return 0.5 * lift_real(cz);
}

RealVector NoiseCovariance::apply_inverse(const RealVector& x) const {
  if (x.size() != dim()) throw InvalidInput("noise covariance inverse: dimension mismatch");
  // C^{-1} z = T vec(R^{-1} Z R^{-1}); the 1/2 in Rbar inverts to 2.
  const ComplexVector kz = sandwich(weight_inverse_, unlift(x), weight_inverse_);
  return (2.0 * snapshots_) * lift_real(kz);
}

RealMatrix NoiseCovariance::apply_inverse(const RealMatrix& x) const {
  RealMatrix out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) out.col(j) = apply_inverse(RealVector(x.col(j)));
  return out;
}

ComplexVector kron_inverse_apply(const CovarianceData& cov, const ComplexVector& z) {
  const Eigen::Index m = cov.sensors();
  if (z.size() != m * m) throw InvalidInput("kron_inverse_apply: dimension mismatch");
  return sandwich(cov.weight_inverse, z, cov.weight_inverse);
}

RealVector apply_noise_covariance_inverse(const CovarianceData& cov, const RealVector& x) {
  return NoiseCovariance(cov).apply_inverse(x);
}

RealModel build_real_model(const CovarianceData& cov, double sigma_n2, const ComplexMatrix& dictionary) {
  const int m = cov.sensors();
  if (dictionary.rows() != static_cast<Eigen::Index>(m) * m) {
    throw InvalidInput("dictionary has " + std::to_string(dictionary.rows()) + " rows, expected " +
                       std::to_string(m * m));
  }
  RealModel model;
  model.ones_n = noise_selection(m);
  model.noise = NoiseCovariance(cov);
  set_noise_variance(model, cov, sigma_n2);
  set_dictionary(model, dictionary);
  return model;
}

void set_noise_variance(RealModel& model, const CovarianceData& cov, double sigma_n2) {
  if (!(sigma_n2 >= 0.0) || !std::isfinite(sigma_n2)) throw InvalidInput("noise variance must be >= 0");
  const Eigen::Index n = cov.r_hat_vec.size();
  model.sigma_n2 = sigma_n2;
  model.r_bar.resize(2 * n);
  model.r_bar << cov.r_hat_vec.real() - sigma_n2 * model.ones_n, cov.r_hat_vec.imag();
}

void set_dictionary(RealModel& model, const ComplexMatrix& dictionary) {
  if (dictionary.rows() * 2 != model.r_bar.size()) throw InvalidInput("dictionary dimension mismatch");
  model.b_bar = lift_real(dictionary);
}

SigmaFactorization::SigmaFactorization(const RealModel& model, const RealVector& gamma, SigmaPath path)
    : model_(&model), gamma_(gamma), dim_(model.dim()) {
  if (gamma.size() != model.grid_size()) throw InvalidInput("gamma length does not match the grid");
  if (!gamma.allFinite()) throw InvalidInput("gamma contains non-finite values");
  if ((gamma.array() < 0.0).any()) throw InvalidInput("gamma must be elementwise >= 0");

  if (path == SigmaPath::Automatic) {
    path = model.grid_size() < dim_ ? SigmaPath::LowRank : SigmaPath::Direct;
  }
  path_ = path;

  if (path_ == SigmaPath::Direct) {
    // Sigma = L (I + W Gamma W^T) L^T with Rbar = L L^T and W = L^{-1} Bbar. The inner
    // matrix is identity plus PSD, so it stays well conditioned when gamma dwarfs Rbar.
    noise_llt_.compute(model.noise.dense());
    if (noise_llt_.info() != Eigen::Success) throw NumericalError("Rbar is not positive definite");
    whitened_b_ = noise_llt_.matrixL().solve(model.b_bar);
    RealMatrix inner = whitened_b_ * gamma.asDiagonal() * whitened_b_.transpose();
    inner.diagonal().array() += 1.0;
    sigma_llt_.compute(inner);
    if (sigma_llt_.info() != Eigen::Success) throw NumericalError("Sigma is not positive definite");
    log_det_ = 2.0 * (noise_llt_.matrixLLT().diagonal().array().log().sum() +
                      sigma_llt_.matrixLLT().diagonal().array().log().sum());
  } else {
    rinv_b_ = model.noise.apply_inverse(model.b_bar);
    gram_.noalias() = model.b_bar.transpose() * rinv_b_;
    sqrt_gamma_ = gamma.array().sqrt();
    RealMatrix cap = sqrt_gamma_.asDiagonal() * gram_ * sqrt_gamma_.asDiagonal();
    cap.diagonal().array() += 1.0;
    capacitance_llt_.compute(cap);
    if (capacitance_llt_.info() != Eigen::Success) {
      throw NumericalError("capacitance matrix is not positive definite");
    }
    log_det_ = model.noise.log_det() + 2.0 * capacitance_llt_.matrixLLT().diagonal().array().log().sum();
  }
  if (!std::isfinite(log_det_)) throw NumericalError("log-determinant of Sigma is not finite");
}

RealVector SigmaFactorization::solve(const RealVector& v) const {
  if (path_ == SigmaPath::Direct) {
    return noise_llt_.matrixU().solve(sigma_llt_.solve(noise_llt_.matrixL().solve(v)));
  }
  const RealVector rinv_v = model_->noise.apply_inverse(v);
  const RealVector proj = sqrt_gamma_.cwiseProduct(model_->b_bar.transpose() * rinv_v);
  return rinv_v - rinv_b_ * sqrt_gamma_.cwiseProduct(capacitance_llt_.solve(proj));
}

RealMatrix SigmaFactorization::solve(const RealMatrix& v) const {
  if (path_ == SigmaPath::Direct) {
    return noise_llt_.matrixU().solve(sigma_llt_.solve(noise_llt_.matrixL().solve(v)));
  }
  const RealMatrix rinv_v = model_->noise.apply_inverse(v);
  const RealMatrix proj = sqrt_gamma_.asDiagonal() * (model_->b_bar.transpose() * rinv_v);
  return rinv_v - rinv_b_ * (sqrt_gamma_.asDiagonal() * capacitance_llt_.solve(proj));
}

RealVector SigmaFactorization::dictionary_weights() const {
  if (path_ == SigmaPath::Direct) {
    return (whitened_b_.cwiseProduct(sigma_llt_.solve(whitened_b_))).colwise().sum().transpose();
  }
  // b_k^T Sigma^{-1} b_k = G_kk - (S G_k)^T C^{-1} (S G_k).
  const RealMatrix sg = sqrt_gamma_.asDiagonal() * gram_;
  const RealMatrix solved = capacitance_llt_.solve(sg);
  return gram_.diagonal() - sg.cwiseProduct(solved).colwise().sum().transpose();
}

RealMatrix SigmaFactorization::inverse() const {
  return solve(RealMatrix(RealMatrix::Identity(dim_, dim_)));
}

RealMatrix SigmaFactorization::dense() const {
  RealMatrix sigma = model_->noise.dense();
  sigma.noalias() += model_->b_bar * gamma_.asDiagonal() * model_->b_bar.transpose();
  return sigma;
}

SigmaFactorization assemble_sigma(const RealModel& model, const RealVector& gamma, SigmaPath path) {
  return SigmaFactorization(model, gamma, path);
}

}  // namespace nestdoa
