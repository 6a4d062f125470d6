#include "deconf/outcome.hpp"
#include "deconf/plfm.hpp"
#include "deconf/ppc.hpp"
#include "deconf/random.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace deconf;

namespace {

Matrix gaussian(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

struct Problem {
  MaskedMatrix x;
  Matrix f;
};

Problem make_problem(Index n, Index d, Index k) {
  Rng rng(1);
  Problem p;
  p.f = gaussian(n, 2, rng);
  const Matrix x = gaussian(n, k, rng) * gaussian(d, k, rng).transpose() + p.f * gaussian(d, 2, rng).transpose() +
                   0.5 * gaussian(n, d, rng);
  p.x = MaskedMatrix::dense(x);
  for (Index i = 0; i < n; ++i) p.x.present(i, i % d) = false;
  return p;
}

// One full sweep per iteration: warmup 0, one retained draw.
void BM_GibbsSweep(benchmark::State& state) {
  const Index n = state.range(0);
  const Problem p = make_problem(n, 19, 5);
  PlfmSpec spec;
  spec.latent_dim = 5;
  for (auto _ : state) {
    auto draws = fit_gibbs(p.x, p.f, spec, ChainConfig{0, 1, 1});
    benchmark::DoNotOptimize(draws.states.front().sigma2);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_GibbsSweep)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_PosteriorPredictiveCheck(benchmark::State& state) {
  const Problem p = make_problem(500, 19, 5);
  const MaskedMatrix& obs = p.x;
  MaskedMatrix held = p.x;
  held.present = (!p.x.present.array()).matrix();
  PlfmSpec spec;
  spec.latent_dim = 5;
  const auto draws = fit_gibbs(obs, p.f, spec, ChainConfig{50, 50, 1});
  PpcConfig cfg{100, 0.1, static_cast<Index>(state.range(0)), 1};
  for (auto _ : state) {
    auto report = bayesian_p_values(draws, obs, held, p.f, cfg, 7);
    benchmark::DoNotOptimize(report.mean_p);
  }
}
BENCHMARK(BM_PosteriorPredictiveCheck)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_BetaLogLikelihood(benchmark::State& state) {
  const Index n = state.range(0);
  Rng rng(3);
  const Matrix design = gaussian(n, 20, rng);
  Vector y(n);
  for (Index i = 0; i < n; ++i) y(i) = 0.05 + 0.9 * rng.uniform();
  BetaParams params{0.1, Vector::Constant(20, 0.05), 20.0};
  const BetaPrior prior;
  for (auto _ : state) {
    auto ld = beta_log_likelihood(params, design, y, &prior);
    benchmark::DoNotOptimize(ld.value);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_BetaLogLikelihood)->Arg(500)->Arg(2000);

}  // namespace

BENCHMARK_MAIN();
