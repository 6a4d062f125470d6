#include "deconf/outcome.hpp"

#include "deconf/random.hpp"
#include "deconf/stats.hpp"

#include <cmath>
#include <numbers>

namespace deconf {

namespace {

void check_inputs(const Matrix& design, const Vector& y) {
  if (design.rows() != y.size()) throw UsageError("design and outcome have different lengths");
  if (!design.allFinite()) throw DataError("outcome design contains non-finite values");
  for (Index i = 0; i < y.size(); ++i) {
    if (!(y(i) > 0.0 && y(i) < 1.0)) {
      throw DataError("beta regression needs outcomes strictly inside (0, 1); row " +
                      std::to_string(i + 1) + " is not (scale the outcome first)");
    }
  }
}

double log_normal_density(double x, double sd) {
  return -0.5 * std::log(2.0 * std::numbers::pi * sd * sd) - 0.5 * x * x / (sd * sd);
}

// Unnormalized log posterior in u = (b0, beta, log phi), value only.
double log_posterior_u(const Vector& u, const Matrix& design, const Vector& y,
                       const Vector& log_y, const Vector& log_1my, const BetaPrior& prior) {
  const Index p = design.cols();
  const double phi = std::exp(u(p + 1));
  if (!std::isfinite(phi) || phi <= 0.0) return -std::numeric_limits<double>::infinity();
  const Vector eta = (design * u.segment(1, p)).array() + u(0);
  const double lg_phi = std::lgamma(phi);
  double ll = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    const double mu = stats::logistic(eta(i));
    const double a = mu * phi;
    const double b = (1.0 - mu) * phi;
    ll += lg_phi - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * log_y(i) + (b - 1.0) * log_1my(i);
  }
  const double s2 = prior.coef_scale * prior.coef_scale;
  const double lp_coef = -0.5 * u.head(p + 1).squaredNorm() / s2;
  const double z = (u(p + 1) - prior.log_phi_mean) / prior.log_phi_sd;
  return ll + lp_coef - 0.5 * z * z;
}

// Gradient of the same log posterior in u space.
Vector gradient_u(const Vector& u, const Matrix& design, const Vector& y, const BetaPrior& prior) {
  const Index p = design.cols();
  BetaParams params{u(0), u.segment(1, p), std::exp(u(p + 1))};
  const LogDensity ld = beta_log_likelihood(params, design, y, nullptr);
  Vector g = ld.gradient;
  const double s2 = prior.coef_scale * prior.coef_scale;
  g.head(p + 1) -= u.head(p + 1) / s2;
  g(p + 1) = g(p + 1) * params.phi - (u(p + 1) - prior.log_phi_mean) / (prior.log_phi_sd * prior.log_phi_sd);
  return g;
}

Matrix fd_hessian(const Vector& u, const Matrix& design, const Vector& y, const BetaPrior& prior) {
  const Index n = u.size();
  Matrix h(n, n);
  for (Index k = 0; k < n; ++k) {
    const double step = 1e-5 * std::max(1.0, std::abs(u(k)));
    Vector up = u, dn = u;
    up(k) += step;
    dn(k) -= step;
    h.col(k) = (gradient_u(up, design, y, prior) - gradient_u(dn, design, y, prior)) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

}  // namespace

LogDensity beta_log_likelihood(const BetaParams& params, const Matrix& design, const Vector& y,
                               const BetaPrior* prior) {
  check_inputs(design, y);
  const Index p = design.cols();
  if (params.beta.size() != p) throw UsageError("beta has the wrong length for the design");
  if (!(params.phi > 0.0)) throw UsageError("phi must be positive");
  const double phi = params.phi;

  LogDensity out;
  out.gradient = Vector::Zero(p + 2);
  const Vector eta = (design * params.beta).array() + params.b0;
  const double lg_phi = std::lgamma(phi);
  const double dg_phi = stats::digamma(phi);
  Vector d_eta(y.size());
  double d_phi = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    const double mu = stats::logistic(eta(i));
    const double a = mu * phi;
    const double b = (1.0 - mu) * phi;
    const double ly = std::log(y(i));
    const double l1y = std::log1p(-y(i));
    out.value += lg_phi - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * ly + (b - 1.0) * l1y;
    const double dg_a = stats::digamma(a);
    const double dg_b = stats::digamma(b);
    d_eta(i) = mu * (1.0 - mu) * phi * (ly - l1y - dg_a + dg_b);
    d_phi += dg_phi - mu * dg_a - (1.0 - mu) * dg_b + mu * ly + (1.0 - mu) * l1y;
  }
  out.gradient(0) = d_eta.sum();
  out.gradient.segment(1, p) = design.transpose() * d_eta;
  out.gradient(p + 1) = d_phi;

  if (prior) {
    const double s = prior->coef_scale;
    out.value += log_normal_density(params.b0, s);
    out.gradient(0) -= params.b0 / (s * s);
    for (Index j = 0; j < p; ++j) {
      out.value += log_normal_density(params.beta(j), s);
      out.gradient(1 + j) -= params.beta(j) / (s * s);
    }
    // log phi ~ N(m, sd^2), expressed as a density on phi.
    const double lp = std::log(phi);
    const double v = prior->log_phi_sd * prior->log_phi_sd;
    out.value += log_normal_density(lp - prior->log_phi_mean, prior->log_phi_sd) - lp;
    out.gradient(p + 1) += -(lp - prior->log_phi_mean) / (v * phi) - 1.0 / phi;
  }
  return out;
}

BetaParams BetaRegFit::params(Index s) const {
  const Index p = n_coefficients();
  return {draws(s, 0), draws.row(s).segment(1, p).transpose(), draws(s, p + 1)};
}

BetaRegFit fit_beta_regression(const Matrix& design, const Vector& y, const BetaRegConfig& config,
                               std::uint64_t seed, const std::vector<std::string>& names) {
  check_inputs(design, y);
  if (config.n_samples < 1 || config.n_warmup < 0 || config.thin < 1) {
    throw UsageError("invalid beta-regression chain lengths");
  }
  if (!(config.prior.coef_scale > 0.0) || !(config.prior.log_phi_sd > 0.0)) {
    throw UsageError("beta-regression prior scales must be positive");
  }
  const Index p = design.cols();
  const Index dim = p + 2;
  const Vector log_y = y.array().log();
  const Vector log_1my = (-y.array()).log1p();
  auto logpost = [&](const Vector& u) {
    return log_posterior_u(u, design, y, log_y, log_1my, config.prior);
  };

  // Start from the posterior mode: damped Newton with a finite-difference
  // Hessian of the analytic gradient.
  Vector u = Vector::Zero(dim);
  const double ybar = y.mean();
  const double yvar = std::max((y.array() - ybar).square().mean(), 1e-8);
  u(0) = stats::logit(ybar);
  u(p + 1) = std::log(std::max(ybar * (1.0 - ybar) / yvar - 1.0, 1.0));
  double current = logpost(u);
  Matrix neg_h = Matrix::Identity(dim, dim);
  for (int it = 0; it < 100; ++it) {
    const Vector g = gradient_u(u, design, y, config.prior);
    neg_h = -fd_hessian(u, design, y, config.prior);
    double damp = 0.0;
    bool improved = false;
    for (int tries = 0; tries < 30 && !improved; ++tries) {
      Matrix m = neg_h;
      m.diagonal().array() += damp;
      Eigen::LLT<Matrix> llt(m);
      if (llt.info() == Eigen::Success) {
        const Vector cand = u + llt.solve(g);
        const double val = logpost(cand);
        if (std::isfinite(val) && val >= current) {
          u = cand;
          current = val;
          improved = true;
          break;
        }
      }
      damp = damp == 0.0 ? 1e-4 * (1.0 + neg_h.diagonal().cwiseAbs().maxCoeff()) : damp * 10.0;
    }
    if (!improved || g.norm() < 1e-8) break;
  }
  neg_h = -fd_hessian(u, design, y, config.prior);

  Matrix cov;
  {
    Eigen::LLT<Matrix> llt(neg_h);
    if (llt.info() == Eigen::Success) {
      cov = llt.solve(Matrix::Identity(dim, dim));
    } else {
      cov = Matrix::Identity(dim, dim) * 0.01;
    }
  }
  double log_scale = std::log(2.38 * 2.38 / static_cast<double>(dim));
  Eigen::LLT<Matrix> chol(cov);

  Rng rng(seed);
  BetaRegFit fit;
  fit.prior = config.prior;
  fit.names.push_back("(intercept)");
  for (Index j = 0; j < p; ++j) {
    fit.names.push_back(static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)]
                                                                   : "x" + std::to_string(j + 1));
  }
  fit.names.push_back("phi");
  fit.draws.resize(config.n_samples, dim);

  const Index total = config.n_warmup + config.n_samples * config.thin;
  const Index cov_from = config.n_warmup / 4;
  const Index cov_at = config.n_warmup / 2;
  std::vector<Vector> warm;
  Index accepted_sampling = 0;
  Vector e(dim);
  for (Index it = 0; it < total; ++it) {
    for (Index k = 0; k < dim; ++k) e(k) = rng.normal();
    const Vector step = chol.matrixL() * e;
    const Vector prop = u + std::exp(0.5 * log_scale) * step;
    const double val = logpost(prop);
    const double log_alpha = std::isfinite(val) ? std::min(0.0, val - current) : -std::numeric_limits<double>::infinity();
    const bool accept = std::log(rng.uniform()) < log_alpha;
    if (accept) {
      u = prop;
      current = val;
    }
    if (it < config.n_warmup) {
      const double rate = std::exp(log_alpha);
      log_scale += (rate - config.target_acceptance) / std::pow(static_cast<double>(it + 1), 0.6);
      if (it >= cov_from) warm.push_back(u);
      if (it + 1 == cov_at && warm.size() > static_cast<std::size_t>(4 * dim)) {
        Vector mean = Vector::Zero(dim);
        for (const auto& w : warm) mean += w;
        mean /= static_cast<double>(warm.size());
        Matrix emp = Matrix::Zero(dim, dim);
        for (const auto& w : warm) emp += (w - mean) * (w - mean).transpose();
        emp /= static_cast<double>(warm.size() - 1);
        emp.diagonal().array() += 1e-10;
        Eigen::LLT<Matrix> next(emp);
        if (next.info() == Eigen::Success) {
          chol = next;
          log_scale = std::log(2.38 * 2.38 / static_cast<double>(dim));
        }
      }
    } else {
      if (accept) ++accepted_sampling;
      const Index k = it - config.n_warmup;
      if ((k + 1) % config.thin == 0) {
        const Index s = k / config.thin;
        fit.draws.row(s) = u.transpose();
        fit.draws(s, p + 1) = std::exp(u(p + 1));
      }
    }
  }
  fit.acceptance_rate = static_cast<double>(accepted_sampling) /
                        static_cast<double>(config.n_samples * config.thin);
  fit.proposal_scale = std::exp(0.5 * log_scale);
  fit.ess.resize(dim);
  for (Index c = 0; c < dim; ++c) {
    const Vector col = fit.draws.col(c);
    fit.ess(c) = stats::effective_sample_size(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
  }
  if (fit.acceptance_rate < 0.05 || fit.acceptance_rate > 0.8) {
    fit.flagged = true;
    fit.diagnostic = "acceptance rate " + std::to_string(fit.acceptance_rate) +
                     " outside [0.05, 0.8] after adaptation";
  }
  return fit;
}

}  // namespace deconf
