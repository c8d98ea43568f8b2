#include "nestdoa/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nestdoa/error.hpp"
#include "nestdoa/random.hpp"
#include "nestdoa/solver.hpp"

namespace nestdoa {

namespace dense {

ComplexVector steering(std::span<const int> positions, double spacing, double theta_deg) {
  const double phase = 2.0 * kPi * spacing * std::sin(theta_deg * kPi / 180.0);
  ComplexVector a(static_cast<Eigen::Index>(positions.size()));
  for (std::size_t m = 0; m < positions.size(); ++m) {
    a[static_cast<Eigen::Index>(m)] = Complex(std::cos(phase * positions[m]), std::sin(phase * positions[m]));
  }
  return a;
}

RealMatrix real_dictionary(const ArrayGeometry& geometry, std::span<const double> grid_deg) {
  const Eigen::Index m = geometry.size();
  RealMatrix b(2 * m * m, static_cast<Eigen::Index>(grid_deg.size()));
  for (std::size_t n = 0; n < grid_deg.size(); ++n) {
    const ComplexVector a = steering(geometry.positions(), geometry.spacing(), grid_deg[n]);
    // vec(a a^H): entry (i, j) of the outer product lands at j*M + i.
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = 0; i < m; ++i) {
        const Complex v = a[i] * std::conj(a[j]);
        b(j * m + i, static_cast<Eigen::Index>(n)) = v.real();
        b(m * m + j * m + i, static_cast<Eigen::Index>(n)) = v.imag();
      }
    }
  }
  return b;
}

RealMatrix noise_covariance(const ComplexMatrix& r, int snapshots) {
  const Eigen::Index m = r.rows();
  const Eigen::Index n = m * m;
  const ComplexMatrix rt = r.transpose();
  ComplexMatrix c(n, n);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) {
      for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
          c(a * m + i, b * m + j) = rt(a, b) * r(i, j) / static_cast<double>(snapshots);
        }
      }
    }
  }
  RealMatrix out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = 0.5 * c.real();
  out.topRightCorner(n, n) = -0.5 * c.imag();
  out.bottomLeftCorner(n, n) = 0.5 * c.imag();
  out.bottomRightCorner(n, n) = 0.5 * c.real();
  return out;
}

double log_det(const RealMatrix& a) {
  const Eigen::PartialPivLU<RealMatrix> lu(a);
  const RealMatrix& packed = lu.matrixLU();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < packed.rows(); ++i) sum += std::log(std::abs(packed(i, i)));
  return sum;
}

double grid_objective(const RealMatrix& noise_cov, const RealMatrix& b, const RealVector& gamma,
                      const RealVector& r) {
  const RealMatrix rinv = noise_cov.fullPivLu().inverse();
  RealMatrix h_inv = b.transpose() * rinv * b;
  h_inv.diagonal() += gamma.cwiseInverse();
  const RealMatrix h = h_inv.fullPivLu().inverse();
  const RealVector u = b.transpose() * (rinv * r);
  return -u.dot(h * u);
}

}  // namespace dense

namespace {

double normal(Rng& rng) {
  const double u1 = uniform_open(rng);
  const double u2 = uniform_open(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform_open(rng); }

RealVector random_normal(Rng& rng, Eigen::Index n) {
  RealVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

ArrayGeometry small_nested(int m) {
  if (m < 2) throw InvalidConfiguration("oracle arrays need at least 2 sensors");
  return ArrayGeometry::nested((m + 1) / 2, m / 2);
}

ComplexMatrix random_covariance(Rng& rng, int m) {
  ComplexMatrix a(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) a(i, j) = Complex(normal(rng), normal(rng));
  }
  ComplexMatrix r = a * a.adjoint() / static_cast<double>(m);
  r.diagonal().array() += 0.2;
  return r;
}

std::vector<double> random_grid(Rng& rng, int n, double lo, double hi) {
  std::vector<double> grid(static_cast<std::size_t>(n));
  for (double& g : grid) g = uniform(rng, lo, hi);
  std::sort(grid.begin(), grid.end());
  return grid;
}

struct SmallProblem {
  ArrayGeometry geometry;
  CovarianceData cov;
  RealModel model;
  RealVector gamma;
};

SmallProblem random_small_problem(Rng& rng, int m, int n) {
  ArrayGeometry geometry = small_nested(m);
  const int snapshots = 20 + static_cast<int>(uniform(rng, 0.0, 480.0));
  CovarianceData cov = covariance_from_matrix(random_covariance(rng, m), snapshots);
  const std::vector<double> grid = random_grid(rng, n, -80.0, 80.0);
  RealModel model = build_real_model(cov, 0.0, virtual_dictionary(geometry, grid));
  model.r_bar = random_normal(rng, model.dim());
  RealVector gamma(n);
  for (int k = 0; k < n; ++k) gamma[k] = std::pow(10.0, uniform(rng, -2.0, 1.0)) / snapshots;
  return {std::move(geometry), std::move(cov), std::move(model), std::move(gamma)};
}

double rel_error(const RealVector& a, const RealVector& b) {
  const double scale = std::max(b.norm(), 1e-300);
  return (a - b).norm() / scale;
}

double rel_error(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

OracleReport finish(OracleReport report) {
  report.passed = report.max_rel_error <= report.tolerance;
  return report;
}

}  // namespace

OracleReport lemma1_check(int trials, int m, int n, std::uint64_t seed) {
  OracleReport report{"lemma1", 0, 0.0, 1e-8, false, {}};
  Rng rng(seed);
  int perturbation_failures = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const SmallProblem problem = random_small_problem(rng, m, n);
    const RealModel& model = problem.model;

    // Library path: p = Gamma B^T Sigma^{-1} r via the structured factorization.
    const SigmaFactorization sigma(model, problem.gamma);
    const RealVector p_library = update_p(model, problem.gamma, sigma).unconstrained;
    const double min_library = model.r_bar.dot(sigma.solve(model.r_bar));

    // Dense closed form p* = (Gamma^{-1} + B^T Rbar^{-1} B)^{-1} B^T Rbar^{-1} r.
    const RealMatrix& b_bar = model.b_bar;
    const RealMatrix rinv =
        dense::noise_covariance(problem.cov.weight_matrix, problem.cov.snapshots).fullPivLu().inverse();
    RealMatrix normal_matrix = b_bar.transpose() * rinv * b_bar;
    normal_matrix.diagonal() += problem.gamma.cwiseInverse();
    const RealVector p_dense = normal_matrix.fullPivLu().solve(b_bar.transpose() * (rinv * model.r_bar));

    auto quadratic = [&](const RealVector& p) {
      const RealVector e = model.r_bar - b_bar * p;
      return e.dot(rinv * e) + p.dot(problem.gamma.cwiseInverse().cwiseProduct(p));
    };
    const double min_dense = quadratic(p_dense);

    report.max_rel_error = std::max({report.max_rel_error, rel_error(p_library, p_dense),
                                     rel_error(min_library, min_dense)});

    for (int j = 0; j < 5; ++j) {
      const RealVector delta = 1e-3 * (p_dense.norm() + 1e-12) * random_normal(rng, n).normalized();
      if (quadratic(p_dense + delta) < min_dense - 1e-12 * std::abs(min_dense)) ++perturbation_failures;
    }
    ++report.instances;
  }
  if (perturbation_failures > 0) {
    report.notes.push_back(std::to_string(perturbation_failures) + " perturbations decreased the quadratic");
    report.max_rel_error = std::max(report.max_rel_error, 1.0);
  }
  return finish(report);
}

OracleReport majorization_check(int trials, int m, int n, std::uint64_t seed) {
  OracleReport report{"majorization", 0, 0.0, 1e-10, false, {}};
  Rng rng(seed);
  double worst_violation = 0.0;
  double worst_tangency = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const SmallProblem problem = random_small_problem(rng, m, n);
    const RealModel& model = problem.model;
    const RealVector& gamma_hat = problem.gamma;
    const SigmaFactorization sigma_hat(model, gamma_hat);
    const RealVector w = compute_weights(sigma_hat);

    RealVector gamma(n);
    for (int k = 0; k < n; ++k) {
      // Mix of zeros, shrinkage and growth around gamma_hat.
      const double u = uniform_open(rng);
      gamma[k] = u < 0.15 ? 0.0 : gamma_hat[k] * std::pow(10.0, uniform(rng, -2.0, 2.0));
    }

    const RealMatrix noise_cov = dense::noise_covariance(problem.cov.weight_matrix, problem.cov.snapshots);
    auto dense_log_det = [&](const RealVector& g) {
      return dense::log_det(noise_cov + model.b_bar * g.asDiagonal() * model.b_bar.transpose());
    };
    const double target = dense_log_det(gamma);
    const double surrogate = sigma_hat.log_det() + w.dot(gamma - gamma_hat);
    const double scale = std::max(1.0, std::abs(target));
    worst_violation = std::max(worst_violation, -(surrogate - target) / scale);

    const double at_hat = dense_log_det(gamma_hat);
    worst_tangency = std::max(worst_tangency, std::abs(sigma_hat.log_det() - at_hat) / std::max(1.0, std::abs(at_hat)));
    ++report.instances;
  }
  report.max_rel_error = std::max(worst_violation, worst_tangency);
  std::ostringstream note;
  note << "worst surrogate deficit " << worst_violation << ", worst tangency error " << worst_tangency;
  report.notes.push_back(note.str());
  return finish(report);
}

OracleReport woodbury_equivalence_check(int trials, int m, std::uint64_t seed) {
  OracleReport report{"woodbury", 0, 0.0, 1e-8, false, {}};
  Rng rng(seed);
  const int dim = 2 * m * m;
  int small = 0;
  int large = 0;
  for (int trial = 0; trial < trials; ++trial) {
    // Alternate between grids below and above 2 m^2.
    const int n = trial % 2 == 0 ? 1 + static_cast<int>(uniform(rng, 0.0, dim - 1.0))
                                 : dim + 1 + static_cast<int>(uniform(rng, 0.0, dim));
    (n < dim ? small : large) += 1;
    SmallProblem problem = random_small_problem(rng, m, n);
    for (int k = 0; k < n; ++k) {
      if (uniform_open(rng) < 0.1) problem.gamma[k] = 0.0;
    }
    const SigmaFactorization direct(problem.model, problem.gamma, SigmaPath::Direct);
    const SigmaFactorization low_rank(problem.model, problem.gamma, SigmaPath::LowRank);
    const RealVector v = random_normal(rng, dim);
    report.max_rel_error = std::max({report.max_rel_error, rel_error(low_rank.solve(v), direct.solve(v)),
                                     rel_error(low_rank.dictionary_weights(), direct.dictionary_weights()),
                                     rel_error(low_rank.log_det(), direct.log_det())});
    ++report.instances;
  }
  report.notes.push_back(std::to_string(small) + " instances with grid < 2M^2, " + std::to_string(large) +
                         " with grid > 2M^2");
  return finish(report);
}

GradientInstance random_gradient_instance(int m1, int m2, int n_grid, std::uint64_t seed) {
  Rng rng(seed);
  ArrayGeometry geometry = ArrayGeometry::nested(m1, m2);
  const int k_sources = 1 + static_cast<int>(uniform(rng, 0.0, 3.0));
  std::vector<double> doas = random_grid(rng, k_sources, -70.0, 70.0);
  std::vector<double> powers(doas.size(), 1.0);
  const double noise_var = std::pow(10.0, uniform(rng, -1.0, 0.5));
  Scenario scenario{doas, powers, noise_var, 100 + static_cast<int>(uniform(rng, 0.0, 400.0)), rng()};
  CovarianceData cov = sample_covariance(simulate_snapshots(geometry, scenario));

  // Grid points near the sources plus a few elsewhere.
  std::vector<double> grid;
  for (int k = 0; k < n_grid; ++k) {
    const double centre = k < k_sources ? doas[static_cast<std::size_t>(k)] : uniform(rng, -85.0, 85.0);
    grid.push_back(std::clamp(centre + uniform(rng, -2.0, 2.0), -89.0, 89.0));
  }
  std::sort(grid.begin(), grid.end());
  RealVector gamma(n_grid);
  for (int k = 0; k < n_grid; ++k) gamma[k] = std::pow(10.0, uniform(rng, -3.0, -1.0));
  return {std::move(geometry), std::move(cov), noise_var * uniform(rng, 0.8, 1.2), std::move(grid),
          std::move(gamma)};
}

RealVector analytic_grid_gradient(const ArrayGeometry& geometry, const RealModel& model,
                                  const RealVector& gamma, std::span<const double> grid_deg) {
  return grid_objective_gradient(geometry, model, gamma, grid_deg, 0.0);
}

OracleReport gradient_fd_check(const GradientInstance& instance, double step_deg, const GridGradientFn& gradient) {
  OracleReport report{"gradient", 1, 0.0, 1e-5, false, {}};
  const RealModel model = build_real_model(instance.covariance, instance.sigma_n2,
                                           virtual_dictionary(instance.geometry, instance.grid_deg));
  const RealVector analytic = gradient(instance.geometry, model, instance.gamma, instance.grid_deg);

  // Dense f(phi) assembled without the library's structured paths.
  const RealMatrix noise_cov = dense::noise_covariance(instance.covariance.weight_matrix,
                                                       instance.covariance.snapshots);
  RealVector r(model.dim());
  const Eigen::Index half = model.dim() / 2;
  const RealVector ones = noise_selection(instance.geometry.size());
  r.head(half) = instance.covariance.r_hat_vec.real() - instance.sigma_n2 * ones;
  r.tail(half) = instance.covariance.r_hat_vec.imag();
  auto f = [&](const std::vector<double>& grid) {
    return dense::grid_objective(noise_cov, dense::real_dictionary(instance.geometry, grid), instance.gamma, r);
  };

  const auto n = static_cast<Eigen::Index>(instance.grid_deg.size());
  RealVector numeric(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double phi = instance.grid_deg[static_cast<std::size_t>(k)];
    auto at = [&](double offset) {
      std::vector<double> grid = instance.grid_deg;
      grid[static_cast<std::size_t>(k)] = phi + offset;
      return f(grid);
    };
    if (phi + step_deg > 90.0) {
      numeric[k] = (3.0 * at(0.0) - 4.0 * at(-step_deg) + at(-2.0 * step_deg)) / (2.0 * step_deg);
      report.notes.push_back("coordinate " + std::to_string(k) + " at the +90 boundary: backward stencil");
    } else if (phi - step_deg < -90.0) {
      numeric[k] = (-3.0 * at(0.0) + 4.0 * at(step_deg) - at(2.0 * step_deg)) / (2.0 * step_deg);
      report.notes.push_back("coordinate " + std::to_string(k) + " at the -90 boundary: forward stencil");
    } else {
      numeric[k] = (at(step_deg) - at(-step_deg)) / (2.0 * step_deg);
    }
  }
  const double scale = std::max(numeric.cwiseAbs().maxCoeff(), 1e-300);
  report.max_rel_error = (analytic - numeric).cwiseAbs().maxCoeff() / scale;
  return finish(report);
}

OracleReport gradient_fd_check(int trials, int n, double step_deg, std::uint64_t seed,
                               const GridGradientFn& gradient) {
  OracleReport report{"gradient", 0, 0.0, 1e-5, false, {}};
  for (int trial = 0; trial < trials; ++trial) {
    const GradientInstance instance = random_gradient_instance(3, 3, n, mix_seed(seed + static_cast<std::uint64_t>(trial)));
    const OracleReport single = gradient_fd_check(instance, step_deg, gradient);
    report.max_rel_error = std::max(report.max_rel_error, single.max_rel_error);
    ++report.instances;
  }
  return finish(report);
}

std::vector<OracleReport> run_oracle_suite(const OracleSuiteOptions& options) {
  static const std::vector<std::string> known{"lemma1", "majorization", "gradient", "woodbury"};
  if (!options.only.empty() && std::find(known.begin(), known.end(), options.only) == known.end()) {
    throw InvalidConfiguration("unknown oracle '" + options.only + "'");
  }
  auto wanted = [&](const std::string& name) { return options.only.empty() || options.only == name; };
  std::vector<OracleReport> reports;
  if (wanted("lemma1")) reports.push_back(lemma1_check(options.trials, 3, 6, options.seed));
  if (wanted("majorization")) reports.push_back(majorization_check(options.trials, 3, 6, options.seed + 1));
  if (wanted("gradient")) {
    GridGradientFn gradient = analytic_grid_gradient;
    if (options.inject_gradient_fault) {
      gradient = [](const ArrayGeometry& g, const RealModel& model, const RealVector& gamma,
                    std::span<const double> grid) { return RealVector(-analytic_grid_gradient(g, model, gamma, grid)); };
    }
    reports.push_back(gradient_fd_check(options.trials, 5, 1e-4, options.seed + 2, gradient));
  }
  if (wanted("woodbury")) reports.push_back(woodbury_equivalence_check(options.trials, 3, options.seed + 3));
  return reports;
}

}  // namespace nestdoa
