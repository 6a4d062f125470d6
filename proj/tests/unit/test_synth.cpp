#include "deconf/outcome.hpp"
#include "deconf/stats.hpp"
#include "deconf/synth.hpp"

#include <gtest/gtest.h>

#include <map>
#include <sstream>

using namespace deconf;
using namespace deconf::synth;

TEST(PcaTop2, LineDataHasConstantSecondComponent) {
  Matrix x(20, 3);
  for (Index i = 0; i < 20; ++i) x.row(i) << i, 2.0 * i, -1.0 * i;
  const Matrix s = pca_top2(x);
  EXPECT_DOUBLE_EQ(s.col(0).minCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(s.col(0).maxCoeff(), 1.0);
  EXPECT_TRUE(s.col(1).isZero(0.0));
  EXPECT_THROW(pca_top2(Matrix::Ones(10, 3)), DataError);
}

TEST(PcaTop2, MatchesDenseEigenOracle) {
  Rng rng(2);
  Matrix x(100, 5);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  x.col(1) += 2.0 * x.col(0);
  x.col(3) -= x.col(2);
  const Matrix s = pca_top2(x);
  const Matrix c = x.rowwise() - x.colwise().mean();
  const Matrix cov = c.transpose() * c / 99.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  for (Index comp = 0; comp < 2; ++comp) {
    const Vector v = es.eigenvectors().col(4 - comp);
    Vector score = c * v;
    score = (score.array() - score.minCoeff()) / (score.maxCoeff() - score.minCoeff());
    const Vector flipped = 1.0 - score.array();
    const double err = std::min((score - s.col(comp)).cwiseAbs().maxCoeff(), (flipped - s.col(comp)).cwiseAbs().maxCoeff());
    EXPECT_LT(err, 1e-10) << "component " << comp;
    EXPECT_DOUBLE_EQ(s.col(comp).minCoeff(), 0.0);
    EXPECT_DOUBLE_EQ(s.col(comp).maxCoeff(), 1.0);
  }
}

TEST(KMeans, RecoversPlantedBlobs) {
  Rng rng(3);
  const double cx[4] = {0, 10, 0, 10}, cy[4] = {0, 0, 10, 10};
  Matrix pts(400, 2);
  std::vector<int> truth;
  for (Index i = 0; i < 400; ++i) {
    const int b = static_cast<int>(i % 4);
    truth.push_back(b);
    pts(i, 0) = cx[b] + rng.normal();
    pts(i, 1) = cy[b] + rng.normal();
  }
  const auto km = kmeans(pts, 4, 9);
  // Majority label per blob, then agreement.
  Index agree = 0;
  for (int b = 0; b < 4; ++b) {
    std::map<int, int> count;
    for (Index i = 0; i < 400; ++i)
      if (truth[static_cast<std::size_t>(i)] == b) count[km.labels(i)]++;
    int best = 0;
    for (auto [l, c] : count) best = std::max(best, c);
    agree += best;
  }
  EXPECT_GE(agree, 396);
  EXPECT_GE(km.labels.minCoeff(), 1);
  EXPECT_LE(km.labels.maxCoeff(), 4);
  for (Index c = 1; c < 4; ++c) EXPECT_LE(km.centroids(c - 1, 0), km.centroids(c, 0));
}

TEST(KMeans, OnePointPerCluster) {
  Matrix pts(6, 2);
  pts << 0, 0, 1, 0, 2, 5, 3, 1, 7, 7, -1, 4;
  const auto km = kmeans(pts, 6, 1);
  EXPECT_NEAR(km.cost, 0.0, 1e-24);
  std::vector<int> labels(km.labels.data(), km.labels.data() + 6);
  std::sort(labels.begin(), labels.end());
  EXPECT_EQ(labels, (std::vector<int>{1, 2, 3, 4, 5, 6}));
}

TEST(KMeans, ObjectiveNonIncreasing) {
  Rng rng(4);
  Matrix pts(300, 2);
  for (Index i = 0; i < pts.size(); ++i) pts.data()[i] = rng.uniform();
  const auto km = kmeans(pts, 5, 2);
  ASSERT_FALSE(km.cost_trace.empty());
  for (std::size_t t = 1; t < km.cost_trace.size(); ++t) {
    EXPECT_LE(km.cost_trace[t], km.cost_trace[t - 1] + 1e-12);
  }
  EXPECT_NEAR(km.cost_trace.back(), km.cost, 1e-9);
  EXPECT_TRUE(kmeans(pts, 5, 2).labels == km.labels);
  EXPECT_THROW(kmeans(pts.topRows(3), 4, 1), UsageError);
}

TEST(SparseNormal, ZeroFractionAndThreshold) {
  const Vector v = sparse_normal(100000, 1.0, 20, 80, 5);
  const double zeros = static_cast<double>((v.array() == 0.0).count()) / 1e5;
  EXPECT_GE(zeros, 0.59);
  EXPECT_LE(zeros, 0.61);
  for (Index i = 0; i < v.size(); ++i) {
    if (v(i) != 0.0) EXPECT_GE(std::abs(v(i)), 0.8416);
  }
}

TEST(SparseNormal, ScaleEquivariant) {
  const Vector a = sparse_normal(1000, 1.0, 20, 80, 6);
  const Vector b = sparse_normal(1000, 2.0, 20, 80, 6);
  EXPECT_TRUE(b == 2.0 * a);
}

TEST(Generate, ZeroSignalPartition) {
  SurrogateConfig sur;
  sur.n = 1000;
  SynthConfig cfg;
  cfg.nu_x = 0.0;
  cfg.nu_z = 0.0;
  cfg.seed = 7;
  const auto ds = generate(sur, cfg);
  EXPECT_TRUE(ds.true_effects.isZero(0.0));
  EXPECT_TRUE(ds.terms.col(0).isZero(0.0));
  EXPECT_TRUE(ds.terms.col(1).isZero(0.0));
  const Vector b = fit_logistic(ds.data.causes, ds.data.outcome);
  EXPECT_LT(b.tail(19).norm(), 0.5);
}

TEST(Generate, VarianceAuditOnEveryGridPoint) {
  SurrogateConfig sur;
  sur.n = 10000;
  for (const auto& g : default_grid()) {
    SynthConfig cfg;
    cfg.nu_x = 0.9 * g.a / (g.a + g.b);
    cfg.nu_z = 0.9 * g.b / (g.a + g.b);
    cfg.seed = 8;
    const auto ds = generate(sur, cfg);
    const Eigen::Vector3d shares = variance_shares(ds);
    EXPECT_NEAR(shares(0), cfg.nu_x, 0.02) << g.label();
    EXPECT_NEAR(shares(1), cfg.nu_z, 0.02) << g.label();
    EXPECT_NEAR(shares(2), cfg.nu_eps(), 0.02) << g.label();
    EXPECT_GE(ds.positive_fraction, 0.48);
    EXPECT_LE(ds.positive_fraction, 0.52);
    EXPECT_DOUBLE_EQ(ds.data.outcome.mean(), ds.positive_fraction);
  }
}

TEST(Generate, StructureAndDeterminism) {
  SurrogateConfig sur;
  sur.n = 500;
  SynthConfig cfg;
  cfg.seed = 9;
  const auto a = generate(sur, cfg);
  const auto b = generate(sur, cfg);
  EXPECT_TRUE(a.data.causes == b.data.causes);
  EXPECT_TRUE(a.data.outcome == b.data.outcome);
  EXPECT_TRUE(a.true_beta == b.true_beta);
  EXPECT_EQ(a.b0, b.b0);
  EXPECT_EQ(a.data.d(), 19);
  EXPECT_EQ(a.data.p(), 2);
  EXPECT_EQ(a.u.minCoeff(), 1.0);
  EXPECT_EQ(a.u.maxCoeff(), 4.0);
  EXPECT_EQ(a.sigma_k.size(), 4);
  EXPECT_TRUE((a.sigma_k.array() > 1.0).all());
  cfg.seed = 10;
  EXPECT_FALSE(generate(sur, cfg).data.outcome == a.data.outcome);
}

TEST(Benchmark, NonCausalEqualsRoaWhenAgeIsIndependent) {
  // Causes orthogonal to age by construction: regressing out age changes
  // every cause only by its (zero) fitted part, up to the column mean.
  Rng rng(11);
  const Index n = 400;
  Vector age(n), gender(n);
  for (Index i = 0; i < n; ++i) {
    age(i) = rng.normal();
    gender(i) = rng.uniform() < 0.5 ? 1.0 : 0.0;
  }
  Matrix x(n, 6);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  x = stats::regress_out(age, x).residuals;
  SynthConfig cfg;
  cfg.seed = 12;
  cfg.age_coef_scale = 0.0;  // gamma = 0
  cfg.signal = CauseSignal::Raw;
  const auto syn = generate(x, age, gender, cfg);
  EXPECT_EQ(syn.true_gamma, 0.0);
  const Vector nc = fit_logistic(syn.data.causes, syn.data.outcome);
  const Vector roa = fit_logistic(stats::regress_out(age, syn.data.causes).residuals, syn.data.outcome);
  EXPECT_LT((nc.tail(6) - roa.tail(6)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Benchmark, SingleSimulationIsReproducible) {
  BenchmarkConfig cfg;
  cfg.grid = {{1, 1}};
  cfg.n_sims = 1;
  cfg.surrogate.n = 400;
  cfg.chain = ChainConfig{40, 20, 1};
  cfg.seed = 13;
  const auto a = run_benchmark(cfg);
  const auto b = run_benchmark(cfg);
  std::ostringstream ta, tb, sa, sb;
  write_benchmark_table(ta, a, {});
  write_benchmark_table(tb, b, {});
  write_benchmark_sims(sa, a, {});
  write_benchmark_sims(sb, b, {});
  EXPECT_EQ(ta.str(), tb.str());
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_NE(ta.str().find("ratio,Non-causal,ROA,PPCA,BPMF,Oracle,dROA,dPPCA,dBPMF"), std::string::npos);
  const auto& cell = a.cells[0];
  for (int arm = 0; arm < kArmCount; ++arm) EXPECT_TRUE(std::isfinite(cell.sims[0].rmse[arm]) || arm == kPpca || arm == kBpmf);
  EXPECT_NEAR(cell.nu_x, 0.45, 1e-15);
}

TEST(Benchmark, GridLabels) {
  const auto g = default_grid();
  ASSERT_EQ(g.size(), 15u);
  EXPECT_EQ(g.front().label(), "10/1");
  EXPECT_EQ(g[4].label(), "5/2");
  EXPECT_EQ(g.back().label(), "1/10");
}
