#pragma once

#include "deconf/common.hpp"

#include <span>
#include <vector>

namespace deconf::stats {

/// Numerically stable inverse logit.
double logistic(double x);
double logit(double p);

double digamma(double x);

/// Quantile of the standard normal distribution.
double normal_quantile(double p);

/// Quantile of already-sorted data, linear interpolation between order
/// statistics (Hyndman-Fan type 7).
double sorted_quantile(std::span<const double> sorted, double q);

double mean(std::span<const double> xs);

/// Sample standard deviation (n - 1 denominator).
double sample_sd(std::span<const double> xs);
double sample_sd(const Vector& xs);

struct Correlation {
  double rho = 0.0;
  double p_value = 1.0;  // two-sided
};

/// Spearman rank correlation with a t-approximation p-value. Ties get
/// average ranks.
Correlation spearman(std::span<const double> x, std::span<const double> y);

/// Ordinary least squares of every column of `response` on [1, regressors].
/// Returns the (1 + p) x q coefficient matrix, intercept in the first row.
Matrix least_squares(const Matrix& regressors, const Matrix& response);

/// Fitted values and residuals of the same regression.
struct OlsSplit {
  Matrix fitted;
  Matrix residuals;
};
OlsSplit regress_out(const Matrix& regressors, const Matrix& response);

/// Effective sample size of a scalar chain, initial-positive-sequence
/// truncation of the autocorrelation sum.
double effective_sample_size(std::span<const double> chain);

}  // namespace deconf::stats
