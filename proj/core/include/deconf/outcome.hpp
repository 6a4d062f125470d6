#pragma once

#include "deconf/data.hpp"
#include "deconf/plfm.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace deconf {

/// Which observed covariates enter the outcome regression next to the
/// residualized causes.
struct DesignOptions {
  bool include_age = true;
  std::vector<Index> extra_covariates;  // columns of Dataset::covariates
};

struct ResidualizedDesign {
  Matrix residuals;  // N x D, x_i - E[X | z_hat_i, f_i]
  Matrix controls;   // N x C (age and any extra covariates)
  std::vector<std::string> names;  // D + C column names
  Index source_rows = 0;
  Index source_draws = 0;

  /// [residuals controls]
  Matrix design() const;
};

/// Residuals of the causes against the posterior-mean reconstruction.
Matrix residualize(const Matrix& causes, const Matrix& f, const PosteriorDraws& draws,
                   const SubstituteConfounder& z_hat);

ResidualizedDesign residualize(const Dataset& ds, const PosteriorDraws& draws,
                               const SubstituteConfounder& z_hat, const DesignOptions& options = {});

/// (adas + 0.5) / (max_score + 1), strictly inside (0, 1).
Vector scale_outcome(const Vector& adas, double max_score = 85.0);
Vector unscale_outcome(const Vector& y, double max_score = 85.0);

struct BetaParams {
  double b0 = 0.0;
  Vector beta;
  double phi = 1.0;
};

/// Priors: coefficients ~ N(0, coef_scale^2), log phi ~ N(log_phi_mean, log_phi_sd^2).
struct BetaPrior {
  double coef_scale = 2.5;
  double log_phi_mean = 0.0;
  double log_phi_sd = 3.0;
};

struct LogDensity {
  double value = 0.0;
  Vector gradient;  // order: b0, beta..., phi
};

/// Beta-regression log-likelihood with logit mean link, plus the log prior
/// density (on the phi scale) when `prior` is given.
LogDensity beta_log_likelihood(const BetaParams& params, const Matrix& design, const Vector& y,
                               const BetaPrior* prior = nullptr);

struct BetaRegConfig {
  BetaPrior prior;
  Index n_warmup = 2000;
  Index n_samples = 2000;
  Index thin = 1;
  double target_acceptance = 0.3;
};

struct BetaRegFit {
  Matrix draws;  // S x (p + 2): b0, beta..., phi
  std::vector<std::string> names;  // "(intercept)", design names..., "phi"
  BetaPrior prior;
  double acceptance_rate = 0.0;
  double proposal_scale = 0.0;
  Vector ess;
  bool flagged = false;
  std::string diagnostic;

  Index n_draws() const { return draws.rows(); }
  Index n_coefficients() const { return draws.cols() - 2; }
  BetaParams params(Index s) const;
};

/// Adaptive random-walk Metropolis on (b0, beta, log phi), started at the
/// posterior mode. Adaptation runs during warmup only.
BetaRegFit fit_beta_regression(const Matrix& design, const Vector& y, const BetaRegConfig& config,
                               std::uint64_t seed, const std::vector<std::string>& names = {});

/// Ridge-penalized logistic regression (penalty excludes the intercept).
/// Returns [b0, beta...].
Vector fit_logistic(const Matrix& design, const Vector& y, double l2 = 0.0);

struct CoefficientRow {
  std::string name;
  double mean = 0.0;
  double lo80 = 0.0, hi80 = 0.0;
  double lo95 = 0.0, hi95 = 0.0;
  bool significant = false;
};

using CoefficientSummary = std::vector<CoefficientRow>;

/// Intercept and slopes, equal-tailed intervals. Needs at least 100 draws.
CoefficientSummary summarize_coefficients(const BetaRegFit& fit);

/// Summary of a single column of draws.
CoefficientRow summarize_draws(const std::string& name, std::vector<double> draws);

void write_coefficients(std::ostream& out, const CoefficientSummary& summary,
                        const std::vector<std::string>& comments);

/// Per draw, the mean over rows of logistic(b0 + x_i beta).
Vector mean_prediction(const BetaRegFit& fit, const Matrix& design);

}  // namespace deconf
