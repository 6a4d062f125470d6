#include "deconf/plfm.hpp"

#include "deconf/stats.hpp"

#include <cmath>
#include <numbers>

namespace deconf {

std::string model_name(ModelKind kind) { return kind == ModelKind::PPCA ? "ppca" : "bpmf"; }

ModelKind parse_model(const std::string& name) {
  if (name == "ppca" || name == "PPCA") return ModelKind::PPCA;
  if (name == "bpmf" || name == "BPMF") return ModelKind::BPMF;
  throw UsageError("unknown model '" + name + "' (expected ppca or bpmf)");
}

void PlfmSpec::validate(Index n_causes) const {
  if (latent_dim < 1) throw UsageError("latent_dim must be at least 1");
  if (latent_dim >= n_causes) {
    throw UsageError("latent_dim (" + std::to_string(latent_dim) +
                     ") must be smaller than the number of causes (" + std::to_string(n_causes) + ")");
  }
  if (!(prior_scale_loadings > 0.0) || !(prior_scale_coefficients > 0.0)) {
    throw UsageError("prior scales must be positive");
  }
  if (!(noise_shape > 0.0) || !(noise_scale > 0.0) || !(ard_shape > 0.0) || !(ard_scale > 0.0)) {
    throw UsageError("inverse-gamma hyperparameters must be positive");
  }
}

void ChainConfig::validate() const {
  if (n_warmup < 0) throw UsageError("n_warmup must be non-negative");
  if (n_samples < 1) throw UsageError("n_samples must be at least 1");
  if (thin < 1) throw UsageError("thin must be at least 1");
}

Matrix PosteriorDraws::mean_loadings() const {
  Matrix m = Matrix::Zero(d(), k());
  for (const auto& s : states) m += s.W;
  return m / static_cast<double>(states.size());
}

Matrix PosteriorDraws::mean_coefficients() const {
  Matrix m = Matrix::Zero(d(), p());
  for (const auto& s : states) m += s.A;
  return m / static_cast<double>(states.size());
}

double PosteriorDraws::mean_sigma2() const {
  double m = 0.0;
  for (const auto& s : states) m += s.sigma2;
  return m / static_cast<double>(states.size());
}

void PosteriorDraws::validate() const {
  if (states.empty()) throw UsageError("posterior draws are empty");
  const auto& f = states.front();
  for (const auto& s : states) {
    if (s.W.rows() != f.d() || s.W.cols() != f.k() || s.A.rows() != f.d() ||
        s.A.cols() != f.p() || s.Z.rows() != f.n() || s.Z.cols() != f.k()) {
      throw DataError("posterior draws have inconsistent shapes");
    }
    if (!(s.sigma2 > 0.0)) throw DataError("posterior draw with non-positive sigma2");
  }
}

namespace {

void check_finite(bool ok, const char* block, Index iteration) {
  if (!ok) {
    throw NumericalError(std::string("non-finite value in block ") + block + " at iteration " +
                         std::to_string(iteration));
  }
}

void align_rotations(std::vector<ParameterState>& states) {
  const Matrix reference = states.front().W;
  for (auto& s : states) {
    Eigen::JacobiSVD<Matrix> svd(s.W.transpose() * reference, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Matrix r = svd.matrixU() * svd.matrixV().transpose();
    s.W = s.W * r;
    s.Z = s.Z * r;
  }
}

}  // namespace

PosteriorDraws fit_gibbs(const MaskedMatrix& x_obs, const Matrix& f, const PlfmSpec& spec,
                         const ChainConfig& chain) {
  spec.validate(x_obs.cols());
  chain.validate();
  if (x_obs.rows() <= spec.latent_dim) throw UsageError("need more rows than latent dimensions");
  const gibbs::Problem pb(x_obs, f);
  for (Index i = 0; i < x_obs.rows(); ++i) {
    if (pb.missing_in_row[static_cast<std::size_t>(i)].size() == static_cast<std::size_t>(x_obs.cols())) {
      throw DataError("row " + std::to_string(i + 1) + " has no observed cause");
    }
  }

  ParameterState state = gibbs::initial_state(pb, spec);
  Rng rng(spec.seed);
  const bool ard = spec.kind == ModelKind::BPMF && spec.learn_loading_scale;

  PosteriorDraws out;
  out.kind = spec.kind;
  out.states.reserve(static_cast<std::size_t>(chain.n_samples));
  const Index total = chain.n_warmup + chain.n_samples * chain.thin;
  for (Index it = 0; it < total; ++it) {
    gibbs::sample_latents(state, pb, rng);
    check_finite(state.Z.allFinite(), "Z", it);
    gibbs::sample_loadings(state, pb, spec, rng);
    check_finite(state.W.allFinite() && state.A.allFinite(), "[W A]", it);
    gibbs::sample_noise(state, pb, spec, rng);
    check_finite(std::isfinite(state.sigma2) && state.sigma2 > 0.0, "sigma2", it);
    if (ard) {
      gibbs::sample_ard(state, spec, rng);
      check_finite(state.tau2.allFinite() && (state.tau2.array() > 0.0).all(), "tau2", it);
    }
    if (it >= chain.n_warmup && (it - chain.n_warmup + 1) % chain.thin == 0) {
      out.states.push_back(state);
    }
  }
  align_rotations(out.states);

  auto& diag = out.diagnostics;
  diag.iterations = total;
  diag.n_warmup = chain.n_warmup;
  diag.thin = chain.thin;
  double norm_sum = 0.0;
  for (const auto& s : out.states) {
    diag.sigma2_trace.push_back(s.sigma2);
    norm_sum += s.W.norm();
  }
  diag.sigma2_mean = stats::mean(diag.sigma2_trace);
  diag.sigma2_sd = stats::sample_sd(diag.sigma2_trace);
  diag.sigma2_ess = stats::effective_sample_size(diag.sigma2_trace);
  diag.loading_norm_mean = norm_sum / static_cast<double>(out.states.size());
  return out;
}

SubstituteConfounder extract_substitute(const PosteriorDraws& draws) {
  draws.validate();
  Matrix z = Matrix::Zero(draws.n(), draws.k());
  for (const auto& s : draws.states) z += s.Z;
  return {z / static_cast<double>(draws.states.size())};
}

RowVector reconstruct_mean(const PosteriorDraws& draws, const RowVector& z, const RowVector& f) {
  draws.validate();
  if (z.size() != draws.k() || f.size() != draws.p()) {
    throw UsageError("reconstruct_mean: z or f has the wrong length");
  }
  return z * draws.mean_loadings().transpose() + f * draws.mean_coefficients().transpose();
}

Matrix reconstruct_mean(const PosteriorDraws& draws, const Matrix& z, const Matrix& f) {
  draws.validate();
  if (z.cols() != draws.k() || f.cols() != draws.p() || z.rows() != f.rows()) {
    throw UsageError("reconstruct_mean: z or f has the wrong shape");
  }
  return z * draws.mean_loadings().transpose() + f * draws.mean_coefficients().transpose();
}

std::vector<Matrix> sample_posterior_predictive(const PosteriorDraws& draws,
                                                const MaskedMatrix& x_obs, const Matrix& f,
                                                Index n_replicates, std::uint64_t seed) {
  draws.validate();
  if (n_replicates < 1) throw UsageError("n_replicates must be at least 1");
  if (x_obs.rows() != draws.n() || x_obs.cols() != draws.d() || f.rows() != draws.n()) {
    throw UsageError("sample_posterior_predictive: shapes do not match the fit");
  }
  const gibbs::Problem pb(x_obs, f);
  std::vector<Matrix> out(static_cast<std::size_t>(n_replicates));
  for (Index m = 0; m < n_replicates; ++m) {
    ParameterState theta = draws.states[static_cast<std::size_t>(m % draws.size())];
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(m)));
    gibbs::sample_latents(theta, pb, rng);
    Matrix x = theta.Z * theta.W.transpose() + f * theta.A.transpose();
    const double sd = std::sqrt(theta.sigma2);
    for (Index j = 0; j < x.cols(); ++j) {
      for (Index i = 0; i < x.rows(); ++i) x(i, j) += sd * rng.normal();
    }
    out[static_cast<std::size_t>(m)] = std::move(x);
  }
  return out;
}

double row_log_likelihood(const ParameterState& theta, const RowVector& x_row,
                          const Eigen::Matrix<bool, 1, Eigen::Dynamic>& present,
                          const RowVector& f_row) {
  std::vector<Index> obs;
  for (Index j = 0; j < present.size(); ++j) {
    if (present(j)) obs.push_back(j);
  }
  if (obs.empty()) return 0.0;
  const auto m = static_cast<Index>(obs.size());
  Matrix w(m, theta.k());
  Vector r(m);
  const RowVector mu = f_row * theta.A.transpose();
  for (Index a = 0; a < m; ++a) {
    const Index j = obs[static_cast<std::size_t>(a)];
    w.row(a) = theta.W.row(j);
    r(a) = x_row(j) - mu(j);
  }
  Matrix cov = w * w.transpose();
  cov.diagonal().array() += theta.sigma2;
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("row covariance is not positive definite");
  }
  const Matrix& l = llt.matrixL();
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  const Vector u = llt.matrixL().solve(r);
  return -0.5 * (static_cast<double>(m) * std::log(2.0 * std::numbers::pi) + logdet + u.squaredNorm());
}

}  // namespace deconf
