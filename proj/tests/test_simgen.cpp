#include <gtest/gtest.h>

#include "fptgrf/fptgrf.hpp"

using namespace fptgrf;

TEST(Varsigma, CenterValue) { EXPECT_DOUBLE_EQ(varsigma(1.0 / 3.0), 1.5); }

TEST(SimSpec, Validation) {
  SimSpec s;
  s.setting = 5;
  EXPECT_THROW(s.validate(), ConfigError);
  s.family = Family::hte;
  EXPECT_NO_THROW(s.validate());
  s.setting = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = SimSpec{};
  s.setting = 2;
  s.p = 1;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Generate, VcmShapesAndModel) {
  for (int setting = 1; setting <= 4; ++setting) {
    SimSpec spec{Family::vcm, setting, 500, 5, 4, 3, 1.0};
    const auto gen = generate(spec);
    EXPECT_EQ(gen.data.size(), 500u);
    EXPECT_EQ(gen.data.num_features(), 5u);
    EXPECT_EQ(gen.theta_true.cols(), 4);
    EXPECT_EQ(gen.pi_true.size(), 0);
    EXPECT_GE(gen.data.x().minCoeff(), 0.0);
    EXPECT_LE(gen.data.x().maxCoeff(), 1.0);
  }
}

TEST(Generate, NoiselessOutcomeIsExactlyTheLinearModel) {
  SimSpec spec{Family::vcm, 3, 200, 5, 3, 8, 0.0};
  const auto gen = generate(spec);
  for (Eigen::Index i = 0; i < 200; ++i)
    EXPECT_EQ(gen.data.y()(i), gen.data.w().row(i).dot(gen.theta_true.row(i)));
}

TEST(Generate, SettingOneIsLinearInX1) {
  SimSpec spec{Family::vcm, 1, 50, 5, 2, 4, 1.0};
  const auto gen = generate(spec);
  // theta_k(x) / x1 is the same coefficient for every row.
  for (Eigen::Index k = 0; k < 2; ++k) {
    const double slope = gen.theta_true(0, k) / gen.data.x()(0, 0);
    for (Eigen::Index i = 1; i < 50; ++i) EXPECT_NEAR(gen.theta_true(i, k), slope * gen.data.x()(i, 0), 1e-12);
  }
}

TEST(Generate, DeterministicGivenSeed) {
  SimSpec spec{Family::hte, 5, 100, 5, 4, 21, 1.0};
  const auto a = generate(spec), b = generate(spec);
  EXPECT_EQ(a.data.y(), b.data.y());
  EXPECT_EQ(a.theta_true, b.theta_true);
}

TEST(Generate, ThetaRecomputedFromCoefficientsMatchesBitwise) {
  for (int setting = 1; setting <= 5; ++setting) {
    SimSpec spec{Family::hte, setting, 100, 5, 4, 6, 1.0};
    Rng model_rng(derive_seed(spec.seed, {0}));
    const EffectModel model = draw_effect_model(spec, model_rng);
    const auto gen = generate(spec);
    for (Eigen::Index i = 0; i < 100; ++i) {
      const Vector x = gen.data.covariates(static_cast<std::size_t>(i));
      const Vector th = model.theta(std::span<const double>(x.data(), 5));
      EXPECT_EQ(th, gen.theta_true.row(i).transpose());
      EXPECT_EQ(model.pi(std::span<const double>(x.data(), 5)), gen.pi_true.row(i).transpose());
    }
  }
}

TEST(Generate, HteProbabilitiesAreDistributions) {
  for (int setting = 1; setting <= 5; ++setting) {
    SimSpec spec{Family::hte, setting, 1000, 5, 6, 2, 1.0};
    const auto gen = generate(spec);
    for (Eigen::Index i = 0; i < 1000; ++i) {
      EXPECT_NEAR(gen.pi_true.row(i).sum(), 1.0, 1e-12);
      EXPECT_GE(gen.pi_true.row(i).minCoeff(), 0.0);
    }
  }
}

TEST(Generate, HteSettingTwoProbabilities) {
  SimSpec spec{Family::hte, 2, 100, 5, 4, 1, 1.0};
  const auto gen = generate(spec);
  for (Eigen::Index i = 0; i < 100; ++i) {
    const double x1 = gen.data.x()(i, 0);
    EXPECT_DOUBLE_EQ(gen.pi_true(i, 0), x1);
    EXPECT_DOUBLE_EQ(gen.pi_true(i, 3), (1 - x1) / 3);
  }
}

TEST(Generate, HteArmFrequenciesMatchProbabilities) {
  for (int setting : {2, 5}) {
    Rng model_rng(77);
    const EffectModel model = draw_effect_model(Family::hte, setting, 3, 3, model_rng);
    Rng sample_rng(78);
    std::uniform_real_distribution<double> unit;
    for (int probe = 0; probe < 20; ++probe) {
      const std::vector<double> x{unit(sample_rng), unit(sample_rng), unit(sample_rng)};
      const Vector pi = model.pi(x);
      std::vector<int> counts(3, 0);
      const int draws = 50000;
      for (int d = 0; d < draws; ++d) ++counts[draw_arm(pi, sample_rng)];
      for (int k = 0; k < 3; ++k) {
        const double se = std::sqrt(draws * pi(k) * (1 - pi(k)));
        EXPECT_NEAR(counts[static_cast<std::size_t>(k)], draws * pi(k), 4 * se + 1);
      }
    }
  }
}

TEST(Generate, InterceptIsZero) {
  SimSpec spec{Family::vcm, 2, 20000, 5, 3, 12, 1.0};
  const auto gen = generate(spec);
  double mean = 0;
  for (Eigen::Index i = 0; i < 20000; ++i) mean += gen.data.y()(i) - gen.data.w().row(i).dot(gen.theta_true.row(i));
  mean /= 20000;
  EXPECT_LT(std::abs(mean), 3.0 / std::sqrt(20000.0));
}

TEST(Rfg, SingleCoordinateTerms) {
  Rng rng(1);
  const auto f = rfg(1, rng);
  for (const auto& t : f.terms()) EXPECT_EQ(t.vars.size(), 1u);
}

TEST(Rfg, TermStructure) {
  Rng rng(2);
  const auto f = rfg(5, rng);
  ASSERT_EQ(f.terms().size(), 20u);
  for (const auto& t : f.terms()) {
    EXPECT_GE(t.vars.size(), 1u);
    EXPECT_LE(t.vars.size(), 5u);
    EXPECT_LE(std::abs(t.a), 1.0);
    const auto m = static_cast<Eigen::Index>(t.vars.size());
    EXPECT_LT((t.U.transpose() * t.U - Matrix::Identity(m, m)).norm(), 1e-10);
    EXPECT_LT((t.V - t.V.transpose()).norm(), 1e-12);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(t.V).eigenvalues().minCoeff(), 0.0);
    for (Eigen::Index j = 0; j < m; ++j) {
      EXPECT_GE(t.d(j), 0.01 - 1e-15);
      EXPECT_LE(t.d(j), 4.0 + 1e-15);
    }
  }
}

TEST(Rfg, SubsetSizeDistribution) {
  // p_l = min(floor(2.5 + r), p) with r exponential of mean 2:
  // P(p_l = 2) = P(r < 0.5) = 1 - exp(-0.25).
  Rng rng(3);
  int twos = 0, total = 0;
  for (int rep = 0; rep < 500; ++rep) {
    const auto f = rfg(50, rng);
    for (const auto& t : f.terms()) {
      twos += t.vars.size() == 2;
      ++total;
    }
  }
  const double p2 = 1 - std::exp(-0.25);
  EXPECT_NEAR(static_cast<double>(twos) / total, p2, 4 * std::sqrt(p2 * (1 - p2) / total));
}

TEST(Rfg, BoundedAndDeterministic) {
  Rng a(4), b(4);
  const auto f = rfg(5, a), g = rfg(5, b);
  Rng probe(5);
  std::uniform_real_distribution<double> unit(-1, 2);
  for (int q = 0; q < 100; ++q) {
    const std::vector<double> x{unit(probe), unit(probe), unit(probe), unit(probe), unit(probe)};
    EXPECT_LE(std::abs(f(x)), 20.0);
    EXPECT_EQ(f(x), g(x));
  }
}

TEST(Stability, CorrelationOfRegressors) {
  for (double corr : {0.0, 0.99}) {
    Rng rng(6);
    const auto gen = generate_stability(10000, corr, rng);
    const auto& w = gen.data.w();
    const double m0 = w.col(0).mean(), m1 = w.col(1).mean();
    const double c = ((w.col(0).array() - m0) * (w.col(1).array() - m1)).sum();
    const double s0 = (w.col(0).array() - m0).square().sum(), s1 = (w.col(1).array() - m1).square().sum();
    const double r = c / std::sqrt(s0 * s1);
    if (corr == 0.0) EXPECT_NEAR(r, 0.0, 0.05);
    else EXPECT_TRUE(r >= 0.985 && r <= 0.995) << r;
  }
}

TEST(Stability, OutcomeModel) {
  EXPECT_EQ(stability_outcome(0.6, 1.25, -0.5, 0.0), 1.25 - 0.5);
  EXPECT_EQ(stability_outcome(0.4, 1.25, -0.5, 0.0), -0.5);
  Rng rng(7);
  EXPECT_THROW(generate_stability(10, 1.0, rng), ConfigError);
  const auto gen = generate_stability(50, 0.5, rng, 0.0);
  for (Eigen::Index i = 0; i < 50; ++i)
    EXPECT_EQ(gen.data.y()(i), stability_outcome(gen.data.x()(i, 0), gen.data.w()(i, 0), gen.data.w()(i, 1), 0.0));
}
