#include "deconf/plfm.hpp"

#include <cmath>

namespace deconf::gibbs {

namespace {

// Draw from N(Q^{-1} b, Q^{-1}) given the precision Q.
Vector draw_from_precision(const Matrix& q, const Vector& b, Rng& rng, const char* block) {
  Eigen::LLT<Matrix> llt(q);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string("precision matrix of block ") + block +
                         " is not positive definite");
  }
  Vector mean = llt.solve(b);
  Vector e(q.rows());
  for (Index k = 0; k < e.size(); ++k) e(k) = rng.normal();
  return mean + llt.matrixU().solve(e);
}

Gaussian moments_from_precision(const Matrix& q, const Vector& b) {
  Eigen::LLT<Matrix> llt(q);
  if (llt.info() != Eigen::Success) throw NumericalError("conditional precision is not positive definite");
  Gaussian g;
  g.mean = llt.solve(b);
  g.cov = llt.solve(Matrix::Identity(q.rows(), q.cols()));
  return g;
}

Vector loading_prior_precision(const ParameterState& s, const PlfmSpec& spec) {
  Vector prec(s.k() + s.p());
  for (Index k = 0; k < s.k(); ++k) prec(k) = 1.0 / s.tau2(k);
  const double sa2 = spec.prior_scale_coefficients * spec.prior_scale_coefficients;
  for (Index c = 0; c < s.p(); ++c) prec(s.k() + c) = 1.0 / sa2;
  return prec;
}

// Design [Z F] used by the loading block.
Matrix loading_design(const ParameterState& s, const Problem& pb) {
  Matrix g(s.n(), s.k() + s.p());
  g.leftCols(s.k()) = s.Z;
  g.rightCols(s.p()) = pb.f;
  return g;
}

}  // namespace

Problem::Problem(const MaskedMatrix& x_obs, const Matrix& covariates)
    : x(x_obs.present.select(x_obs.values, Matrix::Zero(x_obs.rows(), x_obs.cols()))),
      present(x_obs.present),
      f(covariates),
      missing_in_row(static_cast<std::size_t>(x_obs.rows())),
      missing_in_col(static_cast<std::size_t>(x_obs.cols())) {
  if (x_obs.present.rows() != x_obs.rows() || x_obs.present.cols() != x_obs.cols()) {
    throw UsageError("presence mask shape does not match the cause matrix");
  }
  if (f.rows() != x.rows()) {
    throw UsageError("covariates have " + std::to_string(f.rows()) + " rows, causes have " +
                     std::to_string(x.rows()));
  }
  if (!x.allFinite() || !f.allFinite()) throw DataError("non-finite value in model inputs");
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      if (present(i, j)) {
        ++n_observed;
      } else {
        missing_in_row[static_cast<std::size_t>(i)].push_back(j);
        missing_in_col[static_cast<std::size_t>(j)].push_back(i);
      }
    }
  }
}

Gaussian latent_conditional(const ParameterState& s, const Problem& pb, Index row) {
  Matrix q = Matrix::Identity(s.k(), s.k());
  Vector b = Vector::Zero(s.k());
  const RowVector fa = pb.f.row(row) * s.A.transpose();
  for (Index j = 0; j < s.d(); ++j) {
    if (!pb.present(row, j)) continue;
    q.noalias() += s.W.row(j).transpose() * s.W.row(j) / s.sigma2;
    b += s.W.row(j).transpose() * (pb.x(row, j) - fa(j)) / s.sigma2;
  }
  return moments_from_precision(q, b);
}

Gaussian loading_conditional(const ParameterState& s, const Problem& pb, const PlfmSpec& spec,
                             Index cause) {
  const Matrix g = loading_design(s, pb);
  Matrix q = loading_prior_precision(s, spec).asDiagonal();
  Vector b = Vector::Zero(g.cols());
  for (Index i = 0; i < s.n(); ++i) {
    if (!pb.present(i, cause)) continue;
    q.noalias() += g.row(i).transpose() * g.row(i) / s.sigma2;
    b += g.row(i).transpose() * pb.x(i, cause) / s.sigma2;
  }
  return moments_from_precision(q, b);
}

namespace {

double observed_sse(const ParameterState& s, const Problem& pb) {
  Matrix resid = pb.x - s.Z * s.W.transpose() - pb.f * s.A.transpose();
  return pb.present.select(resid, Matrix::Zero(resid.rows(), resid.cols())).squaredNorm();
}

}  // namespace

InverseGamma noise_conditional(const ParameterState& s, const Problem& pb, const PlfmSpec& spec) {
  return {spec.noise_shape + 0.5 * static_cast<double>(pb.n_observed),
          spec.noise_scale + 0.5 * observed_sse(s, pb)};
}

InverseGamma ard_conditional(const ParameterState& s, const PlfmSpec& spec, Index dim) {
  return {spec.ard_shape + 0.5 * static_cast<double>(s.d()),
          spec.ard_scale + 0.5 * s.W.col(dim).squaredNorm()};
}

void sample_latents(ParameterState& s, const Problem& pb, Rng& rng) {
  const Index k = s.k();
  const double inv = 1.0 / s.sigma2;
  // Full-row precision, corrected per row for its missing cells.
  const Matrix q_full = Matrix::Identity(k, k) + inv * s.W.transpose() * s.W;
  const Matrix resid = pb.x - pb.f * s.A.transpose();
  const Matrix masked = pb.present.select(resid, Matrix::Zero(resid.rows(), resid.cols()));
  const Matrix rhs = inv * masked * s.W;  // N x K
  Matrix q(k, k);
  for (Index i = 0; i < s.n(); ++i) {
    q = q_full;
    for (Index j : pb.missing_in_row[static_cast<std::size_t>(i)]) {
      q.noalias() -= inv * s.W.row(j).transpose() * s.W.row(j);
    }
    s.Z.row(i) = draw_from_precision(q, rhs.row(i).transpose(), rng, "Z").transpose();
  }
}

void sample_loadings(ParameterState& s, const Problem& pb, const PlfmSpec& spec, Rng& rng) {
  const double inv = 1.0 / s.sigma2;
  const Matrix g = loading_design(s, pb);
  const Matrix gram = g.transpose() * g;
  const Matrix rhs = inv * g.transpose() * pb.x;  // (K+P) x D, held-out cells are zero
  const Vector prior = loading_prior_precision(s, spec);
  Matrix q(g.cols(), g.cols());
  for (Index j = 0; j < s.d(); ++j) {
    q = inv * gram;
    for (Index i : pb.missing_in_col[static_cast<std::size_t>(j)]) {
      q.noalias() -= inv * g.row(i).transpose() * g.row(i);
    }
    q.diagonal() += prior;
    const Vector draw = draw_from_precision(q, rhs.col(j), rng, "[W A]");
    s.W.row(j) = draw.head(s.k()).transpose();
    s.A.row(j) = draw.tail(s.p()).transpose();
  }
}

void sample_noise(ParameterState& s, const Problem& pb, const PlfmSpec& spec, Rng& rng) {
  const InverseGamma c = noise_conditional(s, pb, spec);
  s.sigma2 = rng.inverse_gamma(c.shape, c.scale);
}

void sample_ard(ParameterState& s, const PlfmSpec& spec, Rng& rng) {
  for (Index k = 0; k < s.k(); ++k) {
    const InverseGamma c = ard_conditional(s, spec, k);
    s.tau2(k) = rng.inverse_gamma(c.shape, c.scale);
  }
}

ParameterState initial_state(const Problem& pb, const PlfmSpec& spec) {
  const Index n = pb.x.rows();
  const Index d = pb.x.cols();
  const Index k = spec.latent_dim;
  const Index p = pb.f.cols();

  ParameterState s;
  s.A = Matrix::Zero(d, p);
  Matrix resid = pb.x;
  if (p > 0) {
    s.A = pb.f.colPivHouseholderQr().solve(pb.x).transpose();
    resid -= pb.f * s.A.transpose();
  }
  Eigen::BDCSVD<Matrix> svd(resid, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double root_n = std::sqrt(static_cast<double>(n));
  s.W = svd.matrixV().leftCols(k) * svd.singularValues().head(k).asDiagonal() / root_n;
  s.Z = svd.matrixU().leftCols(k) * root_n;

  const Matrix rest = resid - s.Z * s.W.transpose();
  const double mse = pb.present.select(rest, Matrix::Zero(n, d)).squaredNorm() /
                     std::max<double>(1.0, static_cast<double>(pb.n_observed));
  s.sigma2 = std::max(mse, 1e-3);
  s.tau2 = Vector::Constant(k, spec.prior_scale_loadings * spec.prior_scale_loadings);
  return s;
}

}  // namespace deconf::gibbs
