#include "deconf/parallel.hpp"
#include "deconf/random.hpp"
#include "deconf/stats.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>

using namespace deconf;

TEST(Stats, LogisticIsStableAndSymmetric) {
  EXPECT_DOUBLE_EQ(stats::logistic(0.0), 0.5);
  EXPECT_NEAR(stats::logistic(800.0), 1.0, 0.0);
  EXPECT_GT(stats::logistic(-800.0), -1e-300);
  EXPECT_NEAR(stats::logistic(2.0) + stats::logistic(-2.0), 1.0, 1e-15);
  EXPECT_NEAR(stats::logit(stats::logistic(1.3)), 1.3, 1e-12);
}

TEST(Stats, NormalQuantileMatchesTable) {
  EXPECT_NEAR(stats::normal_quantile(0.8), 0.8416212335729143, 1e-12);
  EXPECT_NEAR(stats::normal_quantile(0.975), 1.959963984540054, 1e-12);
}

TEST(Stats, DigammaKnownValues) {
  EXPECT_NEAR(stats::digamma(1.0), -0.5772156649015329, 1e-13);
  EXPECT_NEAR(stats::digamma(0.5), -1.9635100260214235, 1e-13);
}

TEST(Stats, Type7QuantileByHand) {
  const std::vector<double> v = {1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(stats::sorted_quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(stats::sorted_quantile(v, 1.0), 5.0);
  EXPECT_DOUBLE_EQ(stats::sorted_quantile(v, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(stats::sorted_quantile(v, 0.1), 1.4);  // h = 0.4
  EXPECT_THROW(stats::sorted_quantile(std::vector<double>{}, 0.5), UsageError);
}

TEST(Stats, SampleSdUsesNMinusOne) {
  const std::vector<double> v = {1, 2, 3};
  EXPECT_DOUBLE_EQ(stats::sample_sd(v), 1.0);
}

TEST(Stats, SpearmanPerfectAndTied) {
  const std::vector<double> x = {1, 2, 3, 4, 5, 6};
  const std::vector<double> y = {10, 20, 30, 40, 50, 60};
  std::vector<double> rev(y.rbegin(), y.rend());
  EXPECT_DOUBLE_EQ(stats::spearman(x, y).rho, 1.0);
  EXPECT_DOUBLE_EQ(stats::spearman(x, rev).rho, -1.0);
  // Ranks of {1,2,2,3} are {1,2.5,2.5,4}; Pearson of the ranks against 1..4.
  const std::vector<double> a = {1, 2, 3, 4};
  const std::vector<double> b = {1, 2, 2, 3};
  const double expected = 4.5 / std::sqrt(5.0 * 4.5);
  EXPECT_NEAR(stats::spearman(a, b).rho, expected, 1e-14);
}

TEST(Stats, SpearmanPValueAgainstReference) {
  // Reference values: scipy.stats.spearmanr gives rho = 0.73333, p = 0.015801.
  const std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const std::vector<double> y = {2, 1, 4, 3, 9, 5, 10, 6, 8, 7};
  const auto c = stats::spearman(x, y);
  // sum d^2 = 1+1+1+1+16+1+9+4+1+9 = 44 -> rho = 1 - 6*44/990
  EXPECT_NEAR(c.rho, 1.0 - 6.0 * 44.0 / 990.0, 1e-12);
  const double t = c.rho * std::sqrt(8.0 / (1.0 - c.rho * c.rho));
  EXPECT_NEAR(t, 3.05085, 1e-4);
  EXPECT_NEAR(c.p_value, 0.0158006, 1e-6);
}

TEST(Stats, LeastSquaresMatchesNormalEquations) {
  Matrix x(6, 2);
  x << 1, 0, 2, 1, 3, 0, 4, 1, 5, 0, 6, 1;
  Vector y(6);
  y << 1.1, 2.9, 3.2, 5.1, 5.0, 7.2;
  Matrix d(6, 3);
  d.col(0).setOnes();
  d.rightCols(2) = x;
  const Vector expected = (d.transpose() * d).inverse() * d.transpose() * y;
  const Matrix coef = stats::least_squares(x, y);
  EXPECT_LT((coef.col(0) - expected).cwiseAbs().maxCoeff(), 1e-12);
  const auto split = stats::regress_out(x, y);
  EXPECT_LT((split.fitted + split.residuals - y).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(split.residuals.sum(), 0.0, 1e-12);
}

TEST(Stats, EffectiveSampleSizeOfIidNearN) {
  Rng rng(5);
  std::vector<double> v(4000);
  for (auto& e : v) e = rng.normal();
  const double ess = stats::effective_sample_size(v);
  EXPECT_GT(ess, 3000.0);
  EXPECT_LT(ess, 5500.0);
}

TEST(Parallel, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> seen(257);
  parallel_for(seen.size(), 4, [&](std::size_t i) { seen[i]++; });
  for (auto& s : seen) EXPECT_EQ(s.load(), 1);
}

TEST(Parallel, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(100, 3,
                            [](std::size_t i) {
                              if (i == 42) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
  EXPECT_THROW(parallel_for(10, 1,
                            [](std::size_t i) {
                              if (i == 2) throw DataError("x");
                            }),
               DataError);
}
