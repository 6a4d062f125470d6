#pragma once

#include "deconf/common.hpp"
#include "deconf/plfm.hpp"
#include "deconf/random.hpp"

#include <algorithm>
#include <cmath>

namespace deconf::testing {

struct PlfmSample {
  Matrix x, f, w, a, z;
  double sigma2;
};

// x = z W^T + f A^T + noise, with iid N(0, 1) entries for z, f, W, A unless scaled.
inline PlfmSample sample_plfm(Index n, Index d, Index k, Index p, double sigma2, std::uint64_t seed,
                              double loading_sd = 1.0) {
  Rng rng(seed);
  auto fill = [&](Index r, Index c, double sd) {
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) m(i, j) = sd * rng.normal();
    return m;
  };
  PlfmSample s;
  s.z = fill(n, k, 1.0);
  s.f = fill(n, p, 1.0);
  s.w = fill(d, k, loading_sd);
  s.a = fill(d, p, 1.0);
  s.sigma2 = sigma2;
  s.x = s.z * s.w.transpose() + s.f * s.a.transpose() + fill(n, d, std::sqrt(sigma2));
  return s;
}

// Largest principal angle (degrees) between the column spans of a and b.
inline double max_principal_angle_deg(const Matrix& a, const Matrix& b) {
  const Matrix qa = Eigen::HouseholderQR<Matrix>(a).householderQ() * Matrix::Identity(a.rows(), a.cols());
  const Matrix qb = Eigen::HouseholderQR<Matrix>(b).householderQ() * Matrix::Identity(b.rows(), b.cols());
  Eigen::JacobiSVD<Matrix> svd(qa.transpose() * qb);
  const double smallest = std::min(1.0, svd.singularValues().minCoeff());
  return std::acos(smallest) * 180.0 / 3.14159265358979323846;
}

inline PosteriorDraws single_draw(const Matrix& w, const Matrix& a, double sigma2, const Matrix& z) {
  PosteriorDraws d;
  ParameterState s;
  s.W = w;
  s.A = a;
  s.sigma2 = sigma2;
  s.Z = z;
  s.tau2 = Vector::Ones(w.cols());
  d.states.push_back(s);
  return d;
}

struct BetaSample {
  Matrix design;
  Vector y;
};

// Standard-normal design, logit-link means, y ~ Beta(mu phi, (1 - mu) phi).
inline BetaSample sample_beta_regression(Index n, double b0, const Vector& beta, double phi,
                                         std::uint64_t seed) {
  Rng rng(seed);
  BetaSample s;
  s.design.resize(n, beta.size());
  for (Index i = 0; i < s.design.size(); ++i) s.design.data()[i] = rng.normal();
  s.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double mu = 1.0 / (1.0 + std::exp(-(b0 + s.design.row(i).dot(beta))));
    const double g1 = rng.gamma(mu * phi, 1.0);
    const double g2 = rng.gamma((1.0 - mu) * phi, 1.0);
    s.y(i) = std::clamp(g1 / (g1 + g2), 1e-12, 1.0 - 1e-12);
  }
  return s;
}

}  // namespace deconf::testing
