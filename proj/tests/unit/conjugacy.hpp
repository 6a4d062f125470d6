#pragma once

// One-step moment checks of the Gibbs block samplers against independently
// derived conditionals. Shared by the unit tests and the acceptance runner.

#include "helpers.hpp"

#include "deconf/plfm.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace deconf::testing {

struct MomentCheck {
  std::string name;
  double expected_mean, sample_mean, mean_se;
  double expected_var, sample_var, var_se;

  double mean_z() const { return std::abs(sample_mean - expected_mean) / mean_se; }
  double var_z() const { return std::abs(sample_var - expected_var) / var_se; }
  bool ok(double limit = 3.0) const { return mean_z() < limit && var_z() < limit; }
};

inline MomentCheck moment_check(const std::string& name, const std::vector<double>& xs, double mean,
                                double var) {
  const double n = static_cast<double>(xs.size());
  double m = 0.0;
  for (double x : xs) m += x;
  m /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double c = x - m;
    m2 += c * c;
    m4 += c * c * c * c;
  }
  const double s2 = m2 / (n - 1.0);
  m4 /= n;
  const double pop2 = m2 / n;
  MomentCheck r{name, mean, m, std::sqrt(var / n), var, s2, std::sqrt(std::max(m4 - pop2 * pop2, 1e-300) / n)};
  return r;
}

struct ConjugacyFixture {
  ParameterState state;
  MaskedMatrix x_obs;
  Matrix f;
  PlfmSpec spec;
};

// Small problem with missing cells, K=2, P=1, and non-trivial tau2.
inline ConjugacyFixture conjugacy_fixture(std::uint64_t seed) {
  const Index n = 30, d = 6, k = 2, p = 1;
  const PlfmSample smp = sample_plfm(n, d, k, p, 0.3, seed);
  ConjugacyFixture fx;
  fx.x_obs = MaskedMatrix::dense(smp.x);
  Rng rng(seed + 1);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j)
      if (rng.uniform() < 0.25 && j != i % d) fx.x_obs.present(i, j) = false;
  fx.f = smp.f;
  fx.spec.kind = ModelKind::BPMF;
  fx.spec.latent_dim = k;
  fx.spec.prior_scale_coefficients = 1.3;
  fx.state.W = smp.w * 0.9;
  fx.state.A = smp.a * 1.1;
  fx.state.Z = smp.z;
  fx.state.sigma2 = 0.4;
  fx.state.tau2 = Vector(k);
  fx.state.tau2 << 0.7, 1.8;
  return fx;
}

// Posterior of z_i from the joint Gaussian of (z, x_o): Woodbury form.
inline gibbs::Gaussian oracle_latent(const ConjugacyFixture& fx, Index row) {
  const auto& s = fx.state;
  std::vector<Index> obs;
  for (Index j = 0; j < s.d(); ++j)
    if (fx.x_obs.present(row, j)) obs.push_back(j);
  const auto o = static_cast<Index>(obs.size());
  Matrix wo(o, s.k());
  Vector resid(o);
  for (Index a = 0; a < o; ++a) {
    const Index j = obs[static_cast<std::size_t>(a)];
    wo.row(a) = s.W.row(j);
    resid(a) = fx.x_obs.values(row, j) - s.A.row(j).dot(fx.f.row(row));
  }
  const Matrix cx = wo * wo.transpose() + s.sigma2 * Matrix::Identity(o, o);
  const Matrix cinv = cx.inverse();
  return {wo.transpose() * cinv * resid, Matrix::Identity(s.k(), s.k()) - wo.transpose() * cinv * wo};
}

inline gibbs::Gaussian oracle_loading(const ConjugacyFixture& fx, Index cause) {
  const auto& s = fx.state;
  std::vector<Index> obs;
  for (Index i = 0; i < s.n(); ++i)
    if (fx.x_obs.present(i, cause)) obs.push_back(i);
  const auto o = static_cast<Index>(obs.size());
  const Index q = s.k() + s.p();
  Matrix g(o, q);
  Vector y(o);
  for (Index a = 0; a < o; ++a) {
    const Index i = obs[static_cast<std::size_t>(a)];
    g.row(a) << s.Z.row(i), fx.f.row(i);
    y(a) = fx.x_obs.values(i, cause);
  }
  Vector prior_var(q);
  prior_var << s.tau2, Vector::Constant(s.p(), fx.spec.prior_scale_coefficients * fx.spec.prior_scale_coefficients);
  const Matrix l0 = prior_var.asDiagonal();
  const Matrix cy = g * l0 * g.transpose() + s.sigma2 * Matrix::Identity(o, o);
  const Matrix k = l0 * g.transpose() * cy.inverse();
  return {k * y, l0 - k * g * l0};
}

inline gibbs::InverseGamma oracle_noise(const ConjugacyFixture& fx) {
  const auto& s = fx.state;
  double sse = 0.0;
  double count = 0.0;
  for (Index i = 0; i < s.n(); ++i) {
    for (Index j = 0; j < s.d(); ++j) {
      if (!fx.x_obs.present(i, j)) continue;
      double m = 0.0;
      for (Index k = 0; k < s.k(); ++k) m += s.W(j, k) * s.Z(i, k);
      for (Index c = 0; c < s.p(); ++c) m += s.A(j, c) * fx.f(i, c);
      sse += (fx.x_obs.values(i, j) - m) * (fx.x_obs.values(i, j) - m);
      count += 1.0;
    }
  }
  return {fx.spec.noise_shape + 0.5 * count, fx.spec.noise_scale + 0.5 * sse};
}

inline gibbs::InverseGamma oracle_ard(const ConjugacyFixture& fx, Index dim) {
  double ss = 0.0;
  for (Index j = 0; j < fx.state.d(); ++j) ss += fx.state.W(j, dim) * fx.state.W(j, dim);
  return {fx.spec.ard_shape + 0.5 * static_cast<double>(fx.state.d()), fx.spec.ard_scale + 0.5 * ss};
}

inline double ig_mean(const gibbs::InverseGamma& g) { return g.scale / (g.shape - 1.0); }
inline double ig_var(const gibbs::InverseGamma& g) {
  return g.scale * g.scale / ((g.shape - 1.0) * (g.shape - 1.0) * (g.shape - 2.0));
}

// Runs every block sampler `reps` times from the fixture state and compares
// the draws of one row / cause / dimension with the oracle moments.
inline std::vector<MomentCheck> run_conjugacy_checks(std::uint64_t seed, int reps = 10000) {
  const ConjugacyFixture fx = conjugacy_fixture(seed);
  const gibbs::Problem pb(fx.x_obs, fx.f);
  const Index row = 3, cause = 2;
  const auto lat = oracle_latent(fx, row);
  const auto load = oracle_loading(fx, cause);
  const auto noise = oracle_noise(fx);
  const auto ard0 = oracle_ard(fx, 0);
  const auto ard1 = oracle_ard(fx, 1);

  const Index k = fx.state.k();
  const Index q = k + fx.state.p();
  std::vector<std::vector<double>> z(static_cast<std::size_t>(k)), w(static_cast<std::size_t>(q));
  std::vector<double> s2, t0, t1;
  Rng rng(derive_seed(seed, "conjugacy"));
  for (int r = 0; r < reps; ++r) {
    ParameterState s = fx.state;
    gibbs::sample_latents(s, pb, rng);
    for (Index c = 0; c < k; ++c) z[static_cast<std::size_t>(c)].push_back(s.Z(row, c));
    s = fx.state;
    gibbs::sample_loadings(s, pb, fx.spec, rng);
    for (Index c = 0; c < k; ++c) w[static_cast<std::size_t>(c)].push_back(s.W(cause, c));
    for (Index c = 0; c < fx.state.p(); ++c) w[static_cast<std::size_t>(k + c)].push_back(s.A(cause, c));
    s = fx.state;
    gibbs::sample_noise(s, pb, fx.spec, rng);
    s2.push_back(s.sigma2);
    s = fx.state;
    gibbs::sample_ard(s, fx.spec, rng);
    t0.push_back(s.tau2(0));
    t1.push_back(s.tau2(1));
  }
  std::vector<MomentCheck> out;
  for (Index c = 0; c < k; ++c) {
    out.push_back(moment_check("Z[" + std::to_string(row) + "," + std::to_string(c) + "]",
                               z[static_cast<std::size_t>(c)], lat.mean(c), lat.cov(c, c)));
  }
  for (Index c = 0; c < q; ++c) {
    const std::string label = c < k ? "W[" + std::to_string(cause) + "," + std::to_string(c) + "]"
                                    : "A[" + std::to_string(cause) + "," + std::to_string(c - k) + "]";
    out.push_back(moment_check(label, w[static_cast<std::size_t>(c)], load.mean(c), load.cov(c, c)));
  }
  out.push_back(moment_check("sigma2", s2, ig_mean(noise), ig_var(noise)));
  out.push_back(moment_check("tau2[0]", t0, ig_mean(ard0), ig_var(ard0)));
  out.push_back(moment_check("tau2[1]", t1, ig_mean(ard1), ig_var(ard1)));
  return out;
}

}  // namespace deconf::testing
