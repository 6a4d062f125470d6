#pragma once

#include "deconf/common.hpp"
#include "deconf/random.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace deconf {

enum class ModelKind { PPCA, BPMF };

std::string model_name(ModelKind kind);
ModelKind parse_model(const std::string& name);

/// Probabilistic latent factor model with covariates:
///   x_i = W z_i + A f_i + eps_i,  z_i ~ N(0, I_K),  eps_i ~ N(0, sigma2 I_D).
///
/// PPCA puts fixed N(0, s_w^2) priors on the loadings. BPMF gives each latent
/// dimension k its own loading variance tau_k^2 ~ InvGamma(ard_shape,
/// ard_scale), shared across causes, and samples it as well.
struct PlfmSpec {
  ModelKind kind = ModelKind::PPCA;
  Index latent_dim = 5;
  double prior_scale_loadings = 1.0;
  double prior_scale_coefficients = 1.0;
  double noise_shape = 3.0;
  double noise_scale = 1.0;
  double ard_shape = 2.0;
  double ard_scale = 1.0;
  /// BPMF only. When false tau^2 stays at prior_scale_loadings^2, which makes
  /// the sampler identical to PPCA.
  bool learn_loading_scale = true;
  std::uint64_t seed = 0;

  void validate(Index n_causes) const;
};

struct ChainConfig {
  Index n_warmup = 1000;
  Index n_samples = 500;
  Index thin = 2;

  void validate() const;
};

/// One state of the chain.
struct ParameterState {
  Matrix W;       // D x K (V for BPMF)
  Matrix A;       // D x P
  double sigma2 = 1.0;
  Matrix Z;       // N x K
  Vector tau2;    // K; loading prior variances

  Index n() const { return Z.rows(); }
  Index d() const { return W.rows(); }
  Index k() const { return W.cols(); }
  Index p() const { return A.cols(); }
};

struct ChainDiagnostics {
  Index iterations = 0;
  Index n_warmup = 0;
  Index thin = 1;
  std::vector<double> sigma2_trace;  // retained draws only
  double sigma2_mean = 0.0;
  double sigma2_sd = 0.0;
  double sigma2_ess = 0.0;
  double loading_norm_mean = 0.0;
};

struct PosteriorDraws {
  ModelKind kind = ModelKind::PPCA;
  std::vector<ParameterState> states;
  ChainDiagnostics diagnostics;

  Index size() const { return static_cast<Index>(states.size()); }
  Index n() const { return states.front().n(); }
  Index d() const { return states.front().d(); }
  Index k() const { return states.front().k(); }
  Index p() const { return states.front().p(); }

  Matrix mean_loadings() const;
  Matrix mean_coefficients() const;
  double mean_sigma2() const;

  /// Throws if empty or shapes disagree across states.
  void validate() const;
};

struct SubstituteConfounder {
  Matrix z_hat;  // N x K
};

/// Gibbs sampler over the full conditionals. Held-out cells of `x_obs`
/// (present == false) are excluded from every likelihood term. Block order
/// per sweep: Z rows, [W A] rows, sigma2, then tau2 (BPMF). Retained states
/// are rotated onto the first retained state (orthogonal Procrustes on W),
/// which leaves W Z^T unchanged and keeps Z averages meaningful.
PosteriorDraws fit_gibbs(const MaskedMatrix& x_obs, const Matrix& f, const PlfmSpec& spec,
                         const ChainConfig& chain);

SubstituteConfounder extract_substitute(const PosteriorDraws& draws);

/// Average over draws of W z + A f.
RowVector reconstruct_mean(const PosteriorDraws& draws, const RowVector& z, const RowVector& f);

/// Row-wise reconstruct_mean for whole matrices.
Matrix reconstruct_mean(const PosteriorDraws& draws, const Matrix& z, const Matrix& f);

/// M replicate matrices. Replicate m uses draw m mod S, samples z_i from its
/// conditional given the observed part of row i, and adds N(0, sigma2) noise.
std::vector<Matrix> sample_posterior_predictive(const PosteriorDraws& draws,
                                                const MaskedMatrix& x_obs, const Matrix& f,
                                                Index n_replicates, std::uint64_t seed);

/// Gaussian log-density of the present entries of `x_row` with z integrated
/// out: mean A_o f, covariance W_o W_o^T + sigma2 I. Empty rows give 0.
double row_log_likelihood(const ParameterState& theta, const RowVector& x_row,
                          const Eigen::Matrix<bool, 1, Eigen::Dynamic>& present,
                          const RowVector& f_row);

namespace gibbs {

/// Observed data with the bookkeeping the block samplers need.
struct Problem {
  Problem(const MaskedMatrix& x_obs, const Matrix& f);

  Matrix x;  // held-out cells zeroed
  BoolMatrix present;
  Matrix f;
  std::vector<std::vector<Index>> missing_in_row;
  std::vector<std::vector<Index>> missing_in_col;
  Index n_observed = 0;
};

struct Gaussian {
  Vector mean;
  Matrix cov;
};

struct InverseGamma {
  double shape;
  double scale;
};

Gaussian latent_conditional(const ParameterState& s, const Problem& pb, Index row);
/// Joint conditional of [w_j; a_j] for cause j.
Gaussian loading_conditional(const ParameterState& s, const Problem& pb, const PlfmSpec& spec,
                             Index cause);
InverseGamma noise_conditional(const ParameterState& s, const Problem& pb, const PlfmSpec& spec);
InverseGamma ard_conditional(const ParameterState& s, const PlfmSpec& spec, Index dim);

void sample_latents(ParameterState& s, const Problem& pb, Rng& rng);
void sample_loadings(ParameterState& s, const Problem& pb, const PlfmSpec& spec, Rng& rng);
void sample_noise(ParameterState& s, const Problem& pb, const PlfmSpec& spec, Rng& rng);
void sample_ard(ParameterState& s, const PlfmSpec& spec, Rng& rng);

/// Starting state: principal components of the covariate-adjusted observed
/// data, with held-out cells filled by zero.
ParameterState initial_state(const Problem& pb, const PlfmSpec& spec);

}  // namespace gibbs

}  // namespace deconf
