#include <gtest/gtest.h>

#include <numeric>

#include "fptgrf/fptgrf.hpp"
#include "oracles.hpp"

using namespace fptgrf;

namespace {

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

Dataset mean_data(std::vector<double> ys) {
  const auto n = static_cast<Eigen::Index>(ys.size());
  Matrix x(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) x(i, 0) = static_cast<double>(i);
  return Dataset(x, RowMatrix(n, 0), Eigen::Map<Vector>(ys.data(), n), ModelKind::mean);
}

}  // namespace

TEST(ParentExact, MeanRegressionIsTheNodeMean) {
  const auto data = mean_data({1, 2, 3, 10});
  const auto fit = solve_parent_exact(data, std::vector<std::size_t>{0, 1, 2});
  EXPECT_DOUBLE_EQ(fit.nu, 2.0);
  EXPECT_EQ(fit.theta.size(), 0);
}

TEST(ParentExact, MatchesDenseNormalEquations) {
  std::mt19937_64 rng(1);
  for (std::size_t K : {1u, 3u, 6u}) {
    const auto data = oracle::random_vcm(60, 2, K, rng);
    std::vector<std::size_t> node;
    for (std::size_t i = 0; i < 60; i += 2) node.push_back(i);
    const auto fit = solve_parent_exact(data, node);
    const auto ref = oracle::node_ols(data, node);
    EXPECT_LT((fit.theta - ref.slope).norm(), 1e-10 * (1 + ref.slope.norm()));
    EXPECT_NEAR(fit.nu, ref.intercept, 1e-10 * (1 + std::abs(ref.intercept)));
  }
}

TEST(ParentExact, ScoreSumsToZeroAtTheSolution) {
  std::mt19937_64 rng(2);
  const auto data = oracle::random_vcm(40, 1, 4, rng);
  const auto node = all_rows(40);
  const auto fit = solve_parent_exact(data, node);
  Vector score_w = Vector::Zero(4);
  double score_1 = 0;
  for (std::size_t i : node) {
    const auto r = static_cast<Eigen::Index>(i);
    const double resid = data.y()(r) - data.w().row(r).dot(fit.theta) - fit.nu;
    score_1 += resid;
    score_w += resid * data.w().row(r).transpose();
  }
  EXPECT_NEAR(score_1, 0, 1e-10);
  EXPECT_LT(score_w.norm(), 1e-10);
}

TEST(ParentExact, CollinearRegressorsGetRidgeNotFailure) {
  Matrix x = Matrix::Zero(10, 1);
  RowMatrix w(10, 2);
  Vector y(10);
  for (Eigen::Index i = 0; i < 10; ++i) {
    w(i, 0) = static_cast<double>(i);
    w(i, 1) = 2.0 * static_cast<double>(i);
    y(i) = 3.0 * static_cast<double>(i);
  }
  const Dataset data(x, w, y, ModelKind::vcm);
  const auto fit = solve_parent_exact(data, all_rows(10));
  ASSERT_TRUE(fit.theta.allFinite());
  // The ridge picks the minimum-norm direction: theta proportional to (1, 2).
  EXPECT_NEAR(fit.theta(0) + 2 * fit.theta(1), 3.0, 1e-6);
  EXPECT_NEAR(fit.theta(1), 2 * fit.theta(0), 1e-4);
}

TEST(ParentExact, ConstantRegressorsGiveZeroTheta) {
  const Dataset data(Matrix::Zero(4, 1), RowMatrix::Ones(4, 2), Vector::LinSpaced(4, 0, 3), ModelKind::vcm);
  const auto fit = solve_parent_exact(data, all_rows(4));
  EXPECT_EQ(fit.theta, Vector::Zero(2));
  EXPECT_DOUBLE_EQ(fit.nu, 1.5);
}

TEST(ParentExact, EmptyNodeThrows) {
  const auto data = mean_data({1, 2});
  EXPECT_THROW(solve_parent_exact(data, std::vector<std::size_t>{}), DataError);
}

TEST(ParentOneStep, StepSizeMinimizesTheResidualAlongTheGradient) {
  std::mt19937_64 rng(3);
  const auto data = oracle::random_vcm(50, 1, 5, rng);
  const auto node = all_rows(50);
  const auto fit = solve_parent_one_step(data, node);
  const auto c = detail::center(data, node);
  const Vector g = c.wc.transpose() * c.yc;
  auto loss = [&](double gamma) { return (c.yc - c.wc * (gamma * g)).squaredNorm(); };
  const double gamma_ref = oracle::golden_section(loss, 0.0, 1.0);
  EXPECT_LT((fit.theta - gamma_ref * g).norm(), 1e-7 * fit.theta.norm());
}

TEST(ParentOneStep, EqualsExactForOrthogonalBalancedDesign) {
  // Centered W with W'W = n I: one gradient step with line search is exact.
  RowMatrix w(4, 2);
  w << 1, 1, 1, -1, -1, 1, -1, -1;
  const Vector y = (Vector(4) << 3, 1, 0, -2).finished();
  const Dataset data(Matrix::Zero(4, 1), w, y, ModelKind::vcm);
  const auto exact = solve_parent_exact(data, all_rows(4));
  const auto one = solve_parent_one_step(data, all_rows(4));
  EXPECT_LT((exact.theta - one.theta).norm(), 1e-12);
}

TEST(ParentOneStep, ZeroGradientGivesZeroTheta) {
  const Dataset data(Matrix::Zero(3, 1), RowMatrix::Ones(3, 2), Vector::Ones(3), ModelKind::vcm);
  const auto fit = solve_parent_one_step(data, all_rows(3));
  EXPECT_EQ(fit.theta, Vector::Zero(2));
}

TEST(ParentOneStep, LiteralScalingDividesByNodeSize) {
  std::mt19937_64 rng(4);
  const auto data = oracle::random_vcm(30, 1, 3, rng);
  const auto a = solve_parent_one_step(data, all_rows(30), OneStepScaling::line_search);
  const auto b = solve_parent_one_step(data, all_rows(30), OneStepScaling::literal);
  EXPECT_LT((a.theta / 30.0 - b.theta).norm(), 1e-14 * (1 + a.theta.norm()));
}

TEST(ParentOneStep, RejectsMeanRegression) {
  EXPECT_THROW(solve_parent_one_step(mean_data({1, 2}), all_rows(2)), ConfigError);
}

TEST(Jacobian, IsNegativeScaledCenteredGram) {
  std::mt19937_64 rng(5);
  const auto data = oracle::random_vcm(25, 1, 3, rng);
  const auto jac = build_jacobian(data, all_rows(25));
  Matrix ref = Matrix::Zero(3, 3);
  const Vector mean = data.w().colwise().mean().transpose();
  for (Eigen::Index i = 0; i < 25; ++i) {
    const Vector d = data.w().row(i).transpose() - mean;
    ref -= d * d.transpose() / 25.0;
  }
  EXPECT_LT((jac.matrix - ref).norm(), 1e-12);
  EXPECT_FALSE(jac.cond_flag);
}

TEST(Jacobian, FlagsNearSingularMatrices) {
  RowMatrix w(6, 2);
  for (Eigen::Index i = 0; i < 6; ++i) w.row(i) << static_cast<double>(i), static_cast<double>(i) * (1 + 1e-13);
  const Dataset data(Matrix::Zero(6, 1), w, Vector::Zero(6), ModelKind::vcm);
  const auto jac = build_jacobian(data, all_rows(6));
  EXPECT_TRUE(jac.cond_flag);
  EXPECT_LT(oracle::inverse_condition(jac.matrix), 1e-10);
}

TEST(Jacobian, MeanRegressionIsMinusOne) {
  const auto jac = build_jacobian(mean_data({1, 2, 3}), all_rows(3));
  EXPECT_EQ(jac.matrix, Matrix::Constant(1, 1, -1.0));
}

TEST(PseudoOutcomes, FptMatchesDefinition) {
  std::mt19937_64 rng(6);
  const auto data = oracle::random_vcm(20, 1, 2, rng);
  const std::vector<std::size_t> node{1, 4, 6, 7, 9, 12, 15, 18};
  const auto fit = solve_parent_exact(data, node);
  const auto rho = fpt_pseudo_outcomes(data, node, fit);
  ASSERT_EQ(rho.rho.rows(), 8);
  for (std::size_t r = 0; r < node.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(node[r]);
    const Vector wc = data.w().row(i).transpose() - fit.w_mean;
    const double resid = data.y()(i) - fit.y_mean - wc.dot(fit.theta);
    const Vector expected = -wc * resid;
    EXPECT_LT((rho.rho.row(static_cast<Eigen::Index>(r)).transpose() - expected).norm(), 1e-12);
  }
  // Centered regressors and exact normal equations make the labels sum to zero.
  EXPECT_LT(rho.rho.colwise().sum().norm(), 1e-10);
}

TEST(PseudoOutcomes, MeanRegressionFlavors) {
  const auto data = mean_data({1, 2, 6});
  const auto fit = solve_parent_exact(data, all_rows(3));
  const auto f = fpt_pseudo_outcomes(data, all_rows(3), fit);
  EXPECT_DOUBLE_EQ(f.rho(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(f.rho(2, 0), -3.0);
  const auto g = grad_pseudo_outcomes(data, all_rows(3), fit, build_jacobian(data, all_rows(3)));
  EXPECT_DOUBLE_EQ(g.rho(0, 0), -2.0);
  EXPECT_DOUBLE_EQ(g.rho(2, 0), 3.0);
}

TEST(PseudoOutcomes, GradIsJacobianInverseTimesFpt) {
  std::mt19937_64 rng(7);
  const auto data = oracle::random_vcm(30, 1, 4, rng);
  const auto node = all_rows(30);
  const auto fit = solve_parent_exact(data, node);
  const auto jac = build_jacobian(data, node);
  const auto fpt = fpt_pseudo_outcomes(data, node, fit);
  const auto grad = grad_pseudo_outcomes(data, node, fit, jac);
  const Eigen::FullPivLU<Matrix> lu(jac.matrix);
  for (Eigen::Index r = 0; r < 30; ++r) {
    const Vector expected = lu.solve(fpt.rho.row(r).transpose());
    EXPECT_LT((grad.rho.row(r).transpose() - expected).norm(), 1e-9 * (1 + expected.norm()));
  }
}

TEST(PseudoOutcomes, FlaggedJacobianStaysFinite) {
  const Dataset data(Matrix::Zero(4, 1), RowMatrix::Ones(4, 2), Vector::LinSpaced(4, 0, 3), ModelKind::vcm);
  const auto fit = solve_parent_exact(data, all_rows(4));
  const auto jac = build_jacobian(data, all_rows(4));
  ASSERT_TRUE(jac.cond_flag);
  const auto grad = grad_pseudo_outcomes(data, all_rows(4), fit, jac);
  EXPECT_TRUE(grad.rho.allFinite());
}
