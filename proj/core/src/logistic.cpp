#include "deconf/outcome.hpp"

#include "deconf/stats.hpp"

#include <cmath>

namespace deconf {

namespace {

struct LogisticObjective {
  double value;
  Vector gradient;
  Matrix hessian;  // negative definite
  double max_abs_eta;
};

LogisticObjective evaluate(const Matrix& x1, const Vector& y, const Vector& b, double l2) {
  const Vector eta = x1 * b;
  LogisticObjective o;
  o.value = 0.0;
  o.max_abs_eta = eta.cwiseAbs().maxCoeff();
  Vector resid(y.size()), w(y.size());
  for (Index i = 0; i < y.size(); ++i) {
    // log(1 + exp(eta)) without overflow
    const double softplus = eta(i) > 0.0 ? eta(i) + std::log1p(std::exp(-eta(i))) : std::log1p(std::exp(eta(i)));
    o.value += y(i) * eta(i) - softplus;
    const double mu = stats::logistic(eta(i));
    resid(i) = y(i) - mu;
    w(i) = mu * (1.0 - mu);
  }
  o.gradient = x1.transpose() * resid;
  o.hessian = -(x1.transpose() * w.asDiagonal() * x1);
  if (l2 > 0.0) {
    const Index p = b.size() - 1;
    o.value -= 0.5 * l2 * b.tail(p).squaredNorm();
    o.gradient.tail(p) -= l2 * b.tail(p);
    o.hessian.diagonal().tail(p).array() -= l2;
  }
  return o;
}

}  // namespace

Vector fit_logistic(const Matrix& design, const Vector& y, double l2) {
  if (design.rows() != y.size()) throw UsageError("design and outcome have different lengths");
  if (l2 < 0.0) throw UsageError("l2 penalty must be non-negative");
  for (Index i = 0; i < y.size(); ++i) {
    if (y(i) != 0.0 && y(i) != 1.0) throw DataError("logistic regression needs a 0/1 outcome");
  }
  if (!design.allFinite()) throw DataError("logistic design contains non-finite values");

  Matrix x1(design.rows(), design.cols() + 1);
  x1.col(0).setOnes();
  x1.rightCols(design.cols()) = design;
  Vector b = Vector::Zero(x1.cols());

  constexpr int kMaxIter = 200;
  LogisticObjective cur = evaluate(x1, y, b, l2);
  for (int it = 0; it < kMaxIter; ++it) {
    if (cur.gradient.norm() < 1e-8) return b;
    // A separable problem drives |eta| without bound while the likelihood
    // creeps towards 0.
    if (cur.max_abs_eta > 40.0 && l2 == 0.0) {
      throw NumericalError("logistic regression: perfect or quasi-complete separation detected "
                           "(coefficients diverge); refit with l2 > 0");
    }
    Eigen::LDLT<Matrix> ldlt(-cur.hessian);
    Vector step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      step = ldlt.solve(cur.gradient);
    }
    if (step.size() == 0 || !step.allFinite()) {
      Matrix m = -cur.hessian;
      m.diagonal().array() += 1e-8 * (1.0 + m.diagonal().maxCoeff());
      step = m.ldlt().solve(cur.gradient);
    }
    double t = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 50; ++halving, t *= 0.5) {
      const Vector cand = b + t * step;
      LogisticObjective next = evaluate(x1, y, cand, l2);
      if (std::isfinite(next.value) && next.value >= cur.value - 1e-12 * std::abs(cur.value)) {
        b = cand;
        cur = std::move(next);
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  if (cur.gradient.norm() < 1e-8) return b;
  if (l2 == 0.0 && cur.max_abs_eta > 20.0) {
    throw NumericalError("logistic regression: perfect or quasi-complete separation detected "
                         "(coefficients diverge); refit with l2 > 0");
  }
  if (cur.gradient.norm() < 1e-6) return b;  // at the limit of double precision
  throw NumericalError("logistic regression did not converge (gradient norm " +
                       std::to_string(cur.gradient.norm()) + ")");
}

}  // namespace deconf
