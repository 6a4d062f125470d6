#include "deconf/stats.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/digamma.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace deconf::stats {

double logistic(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double digamma(double x) { return boost::math::digamma(x); }

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) {
    throw UsageError("quantile of an empty sample");
  }
  if (!(q >= 0.0 && q <= 1.0)) {
    throw UsageError("quantile level must lie in [0, 1]");
  }
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double sample_sd(const Vector& xs) {
  return sample_sd(std::span<const double>(xs.data(), static_cast<std::size_t>(xs.size())));
}

namespace {

std::vector<double> ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 3) {
    throw UsageError("spearman needs two samples of equal length >= 3");
  }
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double mx = mean(rx);
  const double my = mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  Correlation c;
  if (sxx == 0.0 || syy == 0.0) return c;
  c.rho = sxy / std::sqrt(sxx * syy);
  const double n = static_cast<double>(x.size());
  if (std::abs(c.rho) >= 1.0) {
    c.p_value = 0.0;
    return c;
  }
  const double t = c.rho * std::sqrt((n - 2.0) / (1.0 - c.rho * c.rho));
  boost::math::students_t_distribution<double> dist(n - 2.0);
  c.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return c;
}

Matrix least_squares(const Matrix& regressors, const Matrix& response) {
  if (regressors.rows() != response.rows()) {
    throw UsageError("least_squares: row count mismatch");
  }
  Matrix design(regressors.rows(), regressors.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(regressors.cols()) = regressors;
  return design.colPivHouseholderQr().solve(response);
}

OlsSplit regress_out(const Matrix& regressors, const Matrix& response) {
  const Matrix coef = least_squares(regressors, response);
  Matrix fitted = (regressors * coef.bottomRows(regressors.cols())).rowwise() +
                  coef.row(0);
  Matrix residuals = response - fitted;
  return {std::move(fitted), std::move(residuals)};
}

double effective_sample_size(std::span<const double> chain) {
  const std::size_t n = chain.size();
  if (n < 4) return static_cast<double>(n);
  const double m = mean(chain);
  double var = 0.0;
  for (double v : chain) var += (v - m) * (v - m);
  var /= static_cast<double>(n);
  if (var <= 0.0) return static_cast<double>(n);
  auto autocorr = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (chain[i] - m) * (chain[i + lag] - m);
    return s / (static_cast<double>(n) * var);
  };
  double sum = 0.0;
  for (std::size_t lag = 1; lag + 1 < n; lag += 2) {
    const double pair = autocorr(lag) + autocorr(lag + 1);
    if (pair <= 0.0) break;
    sum += pair;
  }
  return static_cast<double>(n) / (1.0 + 2.0 * sum);
}

}  // namespace deconf::stats
