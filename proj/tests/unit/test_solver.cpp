#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nestdoa/error.hpp"
#include "nestdoa/oracles.hpp"
#include "nestdoa/solver.hpp"
#include "test_util.hpp"

namespace nestdoa {
namespace {

using test::random_hpd;
using test::random_vector;

RealModel model_for(const CovarianceData& cov, double sigma, const ArrayGeometry& g, const std::vector<double>& grid) {
  return build_real_model(cov, sigma, virtual_dictionary(g, grid));
}

// Joint p/gamma cost for fixed weights: sum(w gamma + p^2 / gamma) + residual^T Rbar^{-1} residual.
double joint_cost(const RealModel& m, const RealVector& w, const RealVector& gamma, const RealVector& p) {
  const RealVector e = m.r_bar - m.b_bar * p;
  double penalty = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) penalty += w[k] * gamma[k] + p[k] * p[k] / gamma[k];
  return penalty + e.dot(m.noise.apply_inverse(e));
}

TEST(SolverConfig, Validation) {
  SolverConfig c;
  EXPECT_NO_THROW(c.validate());
  auto expect_bad = [](auto mutate) {
    SolverConfig bad;
    mutate(bad);
    EXPECT_THROW(bad.validate(), InvalidConfiguration);
  };
  expect_bad([](SolverConfig& b) { b.n_grid = 1; });
  expect_bad([](SolverConfig& b) { b.tol = 0.0; });
  expect_bad([](SolverConfig& b) { b.max_outer = 0; });
  expect_bad([](SolverConfig& b) { b.linesearch_shrink = 1.0; });
  expect_bad([](SolverConfig& b) { b.linesearch_shrink = 0.0; });
  expect_bad([](SolverConfig& b) { b.grid_min = -95.0; });
  expect_bad([](SolverConfig& b) { b.prune_threshold = 1.5; });
  expect_bad([](SolverConfig& b) { b.initial_step = -1.0; });
}

TEST(InitGrid, UniformOverHalfOpenDomain) {
  SolverConfig c;
  c.n_grid = 4;
  EXPECT_EQ(init_grid(c), (std::vector<double>{-90.0, -45.0, 0.0, 45.0}));
  c.n_grid = 180;
  const auto g180 = init_grid(c);
  for (std::size_t i = 1; i < g180.size(); ++i) EXPECT_NEAR(g180[i] - g180[i - 1], 1.0, 1e-12);
  c.n_grid = 200;
  const auto g200 = init_grid(c);
  ASSERT_EQ(g200.size(), 200u);
  EXPECT_NEAR(g200[1] - g200[0], 0.9, 1e-12);
  EXPECT_LT(g200.back(), 90.0);
}

TEST(InitGamma, PeriodogramFormula) {
  const auto g = ArrayGeometry::nested(3, 3);
  Rng rng(1);
  RealModel m = model_for(covariance_from_matrix(random_hpd(rng, 6), 100), 0.0, g, {-30.0, 10.0, 55.0});
  const double c = 1.7;
  m.r_bar = c * m.b_bar.col(1);
  EXPECT_NEAR(init_gamma(m)[1], c * c, 1e-12);

  // Orthogonal to column 0.
  RealVector r = random_vector(rng, m.dim());
  const RealVector b0 = m.b_bar.col(0);
  m.r_bar = r - b0 * (b0.dot(r) / b0.squaredNorm());
  EXPECT_NEAR(init_gamma(m)[0], 0.0, 1e-20);

  m.b_bar.col(2).setZero();
  EXPECT_THROW(init_gamma(m), InvalidInput);
}

TEST(InitGamma, PeaksAtOnGridSource) {
  const auto g = ArrayGeometry::nested(3, 3);
  SolverConfig c;
  const auto grid = init_grid(c);
  const double theta = grid[137];
  const RealModel m = model_for(test::exact_covariance(g, {theta}, {1.0}, 0.1), 0.1, g, grid);
  const RealVector gamma = init_gamma(m);
  Eigen::Index arg = 0;
  gamma.maxCoeff(&arg);
  EXPECT_EQ(arg, 137);
}

TEST(Weights, IdentityAndScaledMetric) {
  const auto g = ArrayGeometry::nested(3, 3);
  const std::vector<double> grid{-40.0, 0.0, 25.0};
  // Rbar = I when R = sqrt(2) I and T = 1.
  const CovarianceData unit = covariance_from_matrix(std::sqrt(2.0) * ComplexMatrix::Identity(6, 6), 1);
  const RealModel m1 = model_for(unit, 0.0, g, grid);
  const RealVector w1 = compute_weights(SigmaFactorization(m1, RealVector::Zero(3)));
  EXPECT_LT((w1.array() - 36.0).abs().maxCoeff(), 1e-10);
  const CovarianceData twice = covariance_from_matrix(2.0 * ComplexMatrix::Identity(6, 6), 1);
  const RealModel m2 = model_for(twice, 0.0, g, grid);
  const RealVector w2 = compute_weights(SigmaFactorization(m2, RealVector::Zero(3)));
  EXPECT_LT((w2.array() - 18.0).abs().maxCoeff(), 1e-10);
}

TEST(Weights, MatchDenseInverse) {
  const auto g = ArrayGeometry::nested(2, 1);
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const CovarianceData cov = covariance_from_matrix(random_hpd(rng, 3), 50);
    const RealModel m = model_for(cov, 0.1, g, {-50.0, -5.0, 20.0, 70.0});
    RealVector gamma(4);
    for (int k = 0; k < 4; ++k) gamma[k] = 0.01 + 0.05 * uniform_open(rng);
    const RealMatrix sigma = dense::noise_covariance(cov.r_hat_matrix, 50) + m.b_bar * gamma.asDiagonal() * m.b_bar.transpose();
    const RealMatrix inv = sigma.inverse();
    const RealVector expected = (m.b_bar.transpose() * inv * m.b_bar).diagonal();
    const RealVector w = compute_weights(SigmaFactorization(m, gamma));
    EXPECT_LT(test::rel_err(w, expected), 1e-10);
    EXPECT_TRUE((w.array() > 0.0).all());
  }
}

TEST(UpdateP, ZeroGammaAndProjection) {
  const auto g = ArrayGeometry::nested(3, 3);
  Rng rng(3);
  const RealModel m = model_for(covariance_from_matrix(random_hpd(rng, 6), 100), 0.2, g, {-60.0, -10.0, 35.0, 70.0});
  const RealVector zero = RealVector::Zero(4);
  const PUpdate none = update_p(m, zero, SigmaFactorization(m, zero));
  EXPECT_EQ(none.p, zero);

  const RealVector gamma = RealVector::Constant(4, 0.05);
  const PUpdate up = update_p(m, gamma, SigmaFactorization(m, gamma));
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(up.p[k], std::max(0.0, up.unconstrained[k]));
  }
  EXPECT_EQ(up.clipped, (up.unconstrained.array() < 0.0).any());
}

TEST(UpdateP, MatchesLemmaOneClosedForm) {
  const auto report = lemma1_check(20, 3, 6, 99);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(UpdateGamma, Formula) {
  const RealVector g = update_gamma((RealVector(3) << 0.0, 2.0, 1.0).finished(), (RealVector(3) << 1.0, 4.0, 9.0).finished());
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 1.0);
  EXPECT_NEAR(g[2], 1.0 / 3.0, 1e-16);
  EXPECT_THROW(update_gamma(RealVector::Ones(2), (RealVector(2) << 1.0, 0.0).finished()), NumericalError);
  EXPECT_THROW(update_gamma(-RealVector::Ones(2), RealVector::Ones(2)), InvalidInput);
}

TEST(UpdateGamma, AlternationDecreasesJointCostWithoutClipping) {
  const auto g = ArrayGeometry::nested(3, 3);
  Rng rng(4);
  int used = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const std::vector<double> doas{-50.0 + 20.0 * uniform_open(rng), 5.0 + 20.0 * uniform_open(rng), 50.0 + 20.0 * uniform_open(rng)};
    const Scenario s{doas, {1.0, 1.0, 1.0}, 0.2, 300, rng()};
    const CovarianceData cov = sample_covariance(simulate_snapshots(g, s));
    const RealModel m = model_for(cov, 0.2, g, doas);
    RealVector gamma = RealVector::Constant(3, 0.5 + uniform_open(rng));
    const SigmaFactorization sigma(m, gamma);
    const RealVector w = compute_weights(sigma);
    const PUpdate up = update_p(m, gamma, sigma);
    if (up.clipped) continue;
    ++used;
    const RealVector p0 = RealVector::Constant(3, 0.3);
    const double before = joint_cost(m, w, gamma, p0);
    const double after_p = joint_cost(m, w, gamma, up.p);
    const RealVector gamma_new = update_gamma(up.p, w);
    const double after_gamma = joint_cost(m, w, gamma_new, up.p);
    EXPECT_LT(after_p, before);
    EXPECT_LE(after_gamma, after_p * (1.0 + 1e-12));
  }
  EXPECT_GE(used, 10);
}

TEST(NoiseVariance, IdentityWeightIsMeanDiagonalResidual) {
  const auto g = ArrayGeometry::nested(2, 1);
  Rng rng(5);
  const CovarianceData cov = covariance_from_matrix(ComplexMatrix::Identity(3, 3), 10);
  const ComplexMatrix dict = virtual_dictionary(g, std::vector<double>{-20.0, 30.0});
  const RealVector p = (RealVector(2) << 0.1, 0.05).finished();
  const ComplexVector residual = cov.r_hat_vec - dict * p.cast<Complex>();
  double diag = 0.0;
  for (int i = 0; i < 3; ++i) diag += residual[i * 3 + i].real();
  EXPECT_NEAR(update_noise_variance(cov, dict, p, 123.0), diag / 3.0, 1e-14);
}

TEST(NoiseVariance, ExactRecoveryAndGuard) {
  const auto g = ArrayGeometry::nested(3, 3);
  const std::vector<double> doas{-20.0, 40.0};
  const std::vector<double> powers{1.0, 0.5};
  const CovarianceData cov = test::exact_covariance(g, doas, powers, 0.37);
  const ComplexMatrix dict = virtual_dictionary(g, doas);
  const RealVector p = Eigen::Map<const RealVector>(powers.data(), 2);
  EXPECT_NEAR(update_noise_variance(cov, dict, p, 1.0), 0.37, 1e-10);
  // Overstated powers push the closed form below zero.
  EXPECT_EQ(update_noise_variance(cov, dict, 100.0 * p, 0.42), 0.42);
}

TEST(Objective, ZeroGammaAndDenseOracle) {
  const auto g = ArrayGeometry::nested(2, 1);
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const CovarianceData cov = covariance_from_matrix(random_hpd(rng, 3), 40);
    const RealModel m = model_for(cov, 0.05, g, {-35.0, 0.0, 42.0});
    const RealVector zero = RealVector::Zero(3);
    const double base = m.noise.log_det() + m.r_bar.dot(m.noise.apply_inverse(m.r_bar));
    EXPECT_NEAR(evaluate_objective(m, zero), base, 1e-10 * std::abs(base));

    const RealVector gamma = (RealVector(3) << 0.02, 0.001, 0.05).finished();
    const RealMatrix sigma = dense::noise_covariance(cov.r_hat_matrix, 40) + m.b_bar * gamma.asDiagonal() * m.b_bar.transpose();
    const double dense_value = dense::log_det(sigma) + m.r_bar.dot(sigma.fullPivLu().solve(m.r_bar));
    for (SigmaPath path : {SigmaPath::Direct, SigmaPath::LowRank}) {
      EXPECT_NEAR(evaluate_objective(m, gamma, path), dense_value, 1e-10 * std::abs(dense_value));
    }
  }
}

TEST(Gradient, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const GradientInstance inst = random_gradient_instance(3, 3, 5, seed);
    const OracleReport r = gradient_fd_check(inst, 1e-4);
    EXPECT_TRUE(r.passed) << seed << ' ' << r.max_rel_error;
  }
}

TEST(Gradient, VanishesAtExactSourceAndForTinyGamma) {
  const auto g = ArrayGeometry::nested(3, 3);
  const CovarianceData cov = test::exact_covariance(g, {12.0}, {1.0}, 0.2);
  const std::vector<double> grid{12.0};
  const RealModel m = model_for(cov, 0.2, g, grid);
  const RealVector gamma = RealVector::Constant(1, 0.01);
  const RealVector at_source = grid_objective_gradient(g, m, gamma, grid);
  const std::vector<double> off{12.5};
  const RealModel m_off = model_for(cov, 0.2, g, off);
  const RealVector away = grid_objective_gradient(g, m_off, gamma, off);
  EXPECT_LT(std::abs(at_source[0]), 1e-6 * std::abs(away[0]));

  const std::vector<double> two{-30.0, 12.5};
  const RealModel m2 = model_for(cov, 0.2, g, two);
  const RealVector small = grid_objective_gradient(g, m2, (RealVector(2) << 1e-12, 0.01).finished(), two, 0.0);
  const RealVector larger = grid_objective_gradient(g, m2, (RealVector(2) << 1e-6, 0.01).finished(), two, 0.0);
  EXPECT_LT(std::abs(small[0]), 1e-4 * std::abs(larger[0]));
  EXPECT_EQ(grid_objective_gradient(g, m2, (RealVector(2) << 1e-13, 0.01).finished(), two)[0], 0.0);
}

SolverState state_for(const std::vector<double>& grid, const RealVector& gamma) {
  SolverState s;
  s.grid_deg = grid;
  s.gamma = gamma;
  s.p = gamma;
  for (int k = 0; k < static_cast<int>(grid.size()); ++k) s.support_ids.push_back(k);
  return s;
}

TEST(Refine, ZeroGammaLeavesGridUnchanged) {
  const auto g = ArrayGeometry::nested(3, 3);
  const std::vector<double> grid{-10.0, 20.0};
  const CovarianceData cov = test::exact_covariance(g, {21.0}, {1.0}, 0.2);
  const RealModel m = model_for(cov, 0.2, g, grid);
  const RefineResult r = refine_grid(g, m, state_for(grid, RealVector::Zero(2)), SolverConfig{});
  EXPECT_EQ(r.grid_deg, grid);
  EXPECT_EQ(r.accepted_steps, 0);
}

TEST(Refine, MovesTowardOffGridSource) {
  const auto g = ArrayGeometry::nested(3, 3);
  const double theta = 20.43;
  const CovarianceData cov = test::exact_covariance(g, {theta}, {1.0}, 0.1);
  const std::vector<double> grid{19.8, 20.7};
  const RealModel m = model_for(cov, 0.1, g, grid);
  const RealVector gamma = (RealVector(2) << 0.05, 0.3).finished();
  const RefineResult r = refine_grid(g, m, state_for(grid, gamma), SolverConfig{});
  EXPECT_LT(std::abs(r.grid_deg[1] - theta), std::abs(grid[1] - theta));
  EXPECT_LE(r.objective_after, r.objective_before);
}

TEST(Refine, AcceptedStepsNeverIncreaseGridObjective) {
  const auto g = ArrayGeometry::nested(3, 3);
  Rng rng(7);
  int moved = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> doas{-60.0 + 30.0 * uniform_open(rng), -10.0 + 20.0 * uniform_open(rng), 30.0 + 30.0 * uniform_open(rng)};
    const Scenario s{doas, {1.0, 1.0, 1.0}, 0.3, 200, rng()};
    const CovarianceData cov = sample_covariance(simulate_snapshots(g, s));
    std::vector<double> grid;
    for (double d : doas) grid.push_back(d + 2.0 * (uniform_open(rng) - 0.5));
    const RealModel m = model_for(cov, 0.3, g, grid);
    RealVector gamma(3);
    for (int k = 0; k < 3; ++k) gamma[k] = 0.01 + 0.2 * uniform_open(rng);
    const RefineResult r = refine_grid(g, m, state_for(grid, gamma), SolverConfig{});
    double previous = r.objective_before;
    for (double v : r.accepted_values) {
      EXPECT_LT(v, previous);
      previous = v;
    }
    EXPECT_LE(r.objective_after, r.objective_before);
    const double fresh = grid_objective(model_for(cov, 0.3, g, r.grid_deg), gamma);
    EXPECT_LE(fresh, grid_objective(m, gamma));
    moved += r.accepted_steps > 0;
  }
  EXPECT_GT(moved, 50);
}

TEST(Refine, ClampsToBounds) {
  const auto g = ArrayGeometry::nested(3, 3);
  const CovarianceData cov = test::exact_covariance(g, {-89.5}, {1.0}, 0.1);
  const std::vector<double> grid{-88.0};
  SolverConfig c;
  c.initial_step = 5.0;
  const RefineResult r = refine_grid(g, model_for(cov, 0.1, g, grid), state_for(grid, RealVector::Constant(1, 0.5)), c);
  EXPECT_GE(r.grid_deg[0], -90.0);
}

TEST(Prune, ThresholdArithmetic) {
  SolverConfig c;
  SolverState s = state_for({-10.0, 0.0, 10.0}, RealVector::Ones(3));
  s.p = (RealVector(3) << 1.0, 0.04, 0.9).finished();
  EXPECT_FALSE(prune_support(s, c));
  EXPECT_EQ(s.grid_deg, (std::vector<double>{-10.0, 10.0}));
  EXPECT_EQ(s.support_ids, (std::vector<int>{0, 2}));
  EXPECT_EQ(s.gamma.size(), 2);

  SolverState equal = state_for({-10.0, 0.0, 10.0}, RealVector::Ones(3));
  equal.p = RealVector::Constant(3, 0.3);
  EXPECT_FALSE(prune_support(equal, c));
  EXPECT_EQ(equal.size(), 3);

  c.prune_mode = PruneMode::Absolute;
  SolverState absolute = state_for({-10.0, 0.0, 10.0}, RealVector::Ones(3));
  absolute.p = (RealVector(3) << 0.01, 0.04, 0.9).finished();
  prune_support(absolute, c);
  EXPECT_EQ(absolute.grid_deg, (std::vector<double>{10.0}));
}

TEST(Prune, EmptySupportKeepsLargestAndFlags) {
  SolverState s = state_for({-10.0, 0.0, 10.0}, RealVector::Ones(3));
  SolverConfig c;
  c.prune_mode = PruneMode::Absolute;
  s.p = (RealVector(3) << 0.01, 0.02, 0.0).finished();
  EXPECT_TRUE(prune_support(s, c));
  EXPECT_EQ(s.size(), 1);
  EXPECT_EQ(s.grid_deg[0], 0.0);
}

TEST(Prune, MergesClosePointsKeepingLargerPower) {
  SolverState s = state_for({5.0, 5.03, 30.0}, RealVector::Ones(3));
  s.p = (RealVector(3) << 0.4, 0.8, 0.5).finished();
  prune_support(s, SolverConfig{});
  EXPECT_EQ(s.grid_deg, (std::vector<double>{5.03, 30.0}));
  EXPECT_EQ(s.p[0], 0.8);
}

TEST(Solve, NoiselessOnGridSourceCollapsesSupport) {
  const auto g = ArrayGeometry::nested(3, 3);
  SolverConfig c;
  const double theta = init_grid(c)[123];
  const EstimationOutput out = solve(test::exact_covariance(g, {theta}, {1.0}, 0.01), g, c);
  ASSERT_EQ(out.doas_deg.size(), 1u);
  EXPECT_LT(std::abs(out.doas_deg[0] - theta), 1e-3);
  const auto first_single = std::find_if(out.trace.begin(), out.trace.end(),
                                         [](const IterationRecord& r) { return r.support_size == 1; });
  ASSERT_NE(first_single, out.trace.end());
  EXPECT_LE(first_single->iteration, 20);
}

TEST(Solve, OverdeterminedMedianAccuracy) {
  const auto g = ArrayGeometry::nested(3, 3);
  const std::vector<double> doas{-42.7, 8.15, 51.3};
  std::vector<double> worst;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Scenario s{doas, {1.0, 1.0, 1.0}, 0.3, 200, seed};
    const EstimationOutput out = solve(sample_covariance(simulate_snapshots(g, s)), g, SolverConfig{});
    double err = 180.0;
    if (out.doas_deg.size() >= 3) {
      std::vector<std::size_t> idx(out.powers.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return out.powers[a] > out.powers[b]; });
      std::vector<double> top{out.doas_deg[idx[0]], out.doas_deg[idx[1]], out.doas_deg[idx[2]]};
      std::sort(top.begin(), top.end());
      err = 0.0;
      for (int k = 0; k < 3; ++k) err = std::max(err, std::abs(top[k] - doas[k]));
    }
    worst.push_back(err);
  }
  std::nth_element(worst.begin(), worst.begin() + 25, worst.end());
  EXPECT_LT(worst[25], 0.5);
}

TEST(Solve, UnderdeterminedResolvesSevenSources) {
  const auto g = ArrayGeometry::nested(3, 3);
  const std::vector<double> doas{-54.8, -38.2, -28.6, 3.3, 20.5, 30.6, 48.5};
  SolverConfig c;
  c.n_grid = 300;
  c.tol = 1e-7;
  c.max_outer = 500;
  int resolved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Scenario s{doas, std::vector<double>(7, 1.0), 0.7, 500, 1000 + seed};
    const EstimationOutput out = solve(sample_covariance(simulate_snapshots(g, s)), g, c);
    bool ok = out.doas_deg.size() >= 7;
    for (double d : doas) {
      ok = ok && std::any_of(out.doas_deg.begin(), out.doas_deg.end(), [&](double e) { return std::abs(e - d) <= 0.8; });
    }
    resolved += ok;
  }
  EXPECT_GE(resolved, 8);
}

TEST(Solve, NoiseOnlyEstimatesNoiseVariance) {
  const auto g = ArrayGeometry::nested(3, 3);
  const double var = 0.8;
  const EstimationOutput out = solve(sample_covariance(simulate_snapshots(g, Scenario{{}, {}, var, 1000, 21})), g, SolverConfig{});
  EXPECT_LT(std::abs(out.noise_var - var) / var, 0.2);
  double total = 0.0;
  for (double p : out.powers) total += p;
  EXPECT_LT(total, 0.2 * var);
}

TEST(Solve, RejectsMismatchedGeometryAndAttachesIteration) {
  const auto g = ArrayGeometry::nested(3, 3);
  Rng rng(8);
  EXPECT_THROW(solve(covariance_from_matrix(random_hpd(rng, 4), 10), g, SolverConfig{}), InvalidInput);
  const NumericalError e("boom", 7);
  EXPECT_EQ(e.iteration(), 7);
  EXPECT_NE(std::string(e.what()).find("7"), std::string::npos);
}

TEST(Solve, TraceInvariants) {
  const auto g = ArrayGeometry::nested(3, 3);
  const Scenario s{{-30.0, 15.0}, {1.0, 1.0}, 0.5, 200, 4};
  const EstimationOutput out = solve(sample_covariance(simulate_snapshots(g, s)), g, SolverConfig{});
  ASSERT_FALSE(out.trace.empty());
  EXPECT_EQ(out.iterations, static_cast<int>(out.trace.size()));
  EXPECT_EQ(out.doas_deg.size(), out.powers.size());
  EXPECT_TRUE(std::is_sorted(out.doas_deg.begin(), out.doas_deg.end()));
  for (double p : out.powers) EXPECT_GE(p, 0.0);
  for (const IterationRecord& r : out.trace) {
    EXPECT_GE(r.sigma_n2, 0.0);
    EXPECT_LE(r.grid_objective_after, r.grid_objective_before);
  }
}

TEST(Solve, SmallerToleranceNeverStopsEarlier) {
  const auto g = ArrayGeometry::nested(3, 3);
  const CovarianceData cov = sample_covariance(simulate_snapshots(g, Scenario{{-30.0, 15.0}, {1.0, 1.0}, 0.5, 200, 4}));
  SolverConfig loose;
  loose.tol = 1e-2;
  SolverConfig tight;
  tight.tol = 1e-9;
  EXPECT_LT(solve(cov, g, loose).iterations, solve(cov, g, tight).iterations);
}

}  // namespace
}  // namespace nestdoa
