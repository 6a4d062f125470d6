#include "deconf/ppc.hpp"

#include "deconf/csv.hpp"
#include "deconf/parallel.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

namespace deconf {

void PpcConfig::validate() const {
  if (n_replicates < 100) {
    throw UsageError("the predictive check needs at least 100 replicates, got " +
                     std::to_string(n_replicates));
  }
  if (!(tau >= 0.0 && tau < 1.0)) throw UsageError("tau must lie in [0, 1)");
  if (statistic_draws < 0) throw UsageError("statistic_draws must be non-negative");
}

double test_statistic(const PosteriorDraws& draws, const RowVector& x_row,
                      const Eigen::Matrix<bool, 1, Eigen::Dynamic>& present,
                      const RowVector& f_row) {
  draws.validate();
  double total = 0.0;
  for (const auto& s : draws.states) total -= row_log_likelihood(s, x_row, present, f_row);
  return total / static_cast<double>(draws.size());
}

namespace {

std::vector<std::size_t> statistic_subset(Index available, Index wanted) {
  std::vector<std::size_t> idx;
  if (wanted <= 0 || wanted >= available) {
    for (Index s = 0; s < available; ++s) idx.push_back(static_cast<std::size_t>(s));
    return idx;
  }
  for (Index s = 0; s < wanted; ++s) {
    idx.push_back(static_cast<std::size_t>((s * available) / wanted));
  }
  return idx;
}

// Marginal density of the held-out coordinates of one row under one draw.
struct HeldDensity {
  Eigen::LLT<Matrix> llt;
  Vector mean;
  double log_norm = 0.0;  // m log(2 pi) + log det C

  double neg_log(const Vector& x) const {
    const Vector u = llt.matrixL().solve(x - mean);
    return 0.5 * (log_norm + u.squaredNorm());
  }
};

}  // namespace

PpcReport bayesian_p_values(const PosteriorDraws& draws, const MaskedMatrix& x_obs,
                            const MaskedMatrix& x_holdout, const Matrix& f,
                            const PpcConfig& config, std::uint64_t seed) {
  config.validate();
  draws.validate();
  const Index n = draws.n();
  const Index d = draws.d();
  if (x_obs.rows() != n || x_obs.cols() != d || x_holdout.rows() != n || x_holdout.cols() != d ||
      f.rows() != n || f.cols() != draws.p()) {
    throw UsageError("predictive check inputs do not match the fitted shapes");
  }
  const auto subset = statistic_subset(draws.size(), config.statistic_draws);
  const Index n_rep = config.n_replicates;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  PpcReport report;
  report.p_values = Vector::Constant(n, nan);
  report.t_holdout = Vector::Constant(n, nan);
  report.scored.assign(static_cast<std::size_t>(n), false);
  report.n_holdout.assign(static_cast<std::size_t>(n), 0);
  report.tau = config.tau;
  report.n_replicates = n_rep;

  parallel_for(static_cast<std::size_t>(n), resolve_threads(config.threads), [&](std::size_t row) {
    const auto i = static_cast<Index>(row);
    std::vector<Index> held, obs;
    for (Index j = 0; j < d; ++j) {
      if (x_holdout.present(i, j)) held.push_back(j);
      else if (x_obs.present(i, j)) obs.push_back(j);
    }
    report.n_holdout[row] = static_cast<Index>(held.size());
    if (held.empty()) return;
    const auto m = static_cast<Index>(held.size());
    const Index k = draws.k();
    const RowVector f_row = f.row(i);

    std::vector<HeldDensity> dens;
    dens.reserve(subset.size());
    for (std::size_t s : subset) {
      const ParameterState& th = draws.states[s];
      Matrix w(m, k);
      HeldDensity hd;
      hd.mean.resize(m);
      const RowVector mu = f_row * th.A.transpose();
      for (Index a = 0; a < m; ++a) {
        w.row(a) = th.W.row(held[static_cast<std::size_t>(a)]);
        hd.mean(a) = mu(held[static_cast<std::size_t>(a)]);
      }
      Matrix cov = w * w.transpose();
      cov.diagonal().array() += th.sigma2;
      hd.llt.compute(cov);
      if (hd.llt.info() != Eigen::Success) throw NumericalError("held-out covariance is not positive definite");
      const Matrix& l = hd.llt.matrixL();
      hd.log_norm = static_cast<double>(m) * std::log(2.0 * std::numbers::pi) +
                    2.0 * l.diagonal().array().log().sum();
      dens.push_back(std::move(hd));
    }
    auto statistic = [&](const Vector& x) {
      double t = 0.0;
      for (const auto& hd : dens) t += hd.neg_log(x);
      return t / static_cast<double>(dens.size());
    };

    Vector x_held(m);
    for (Index a = 0; a < m; ++a) x_held(a) = x_holdout.values(i, held[static_cast<std::size_t>(a)]);
    const double t_obs = statistic(x_held);

    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    Index exceed = 0;
    Vector x_sim(m), e(k);
    for (Index r = 0; r < n_rep; ++r) {
      const ParameterState& th = draws.states[static_cast<std::size_t>(r % draws.size())];
      // z | observed part of the row, then the held-out coordinates given z.
      Matrix q = Matrix::Identity(k, k);
      Vector b = Vector::Zero(k);
      const RowVector mu = f_row * th.A.transpose();
      for (Index j : obs) {
        q.noalias() += th.W.row(j).transpose() * th.W.row(j) / th.sigma2;
        b += th.W.row(j).transpose() * (x_obs.values(i, j) - mu(j)) / th.sigma2;
      }
      Eigen::LLT<Matrix> llt(q);
      for (Index c = 0; c < k; ++c) e(c) = rng.normal();
      const Vector z = llt.solve(b) + llt.matrixU().solve(e);
      const double sd = std::sqrt(th.sigma2);
      for (Index a = 0; a < m; ++a) {
        const Index j = held[static_cast<std::size_t>(a)];
        x_sim(a) = th.W.row(j).dot(z) + mu(j) + sd * rng.normal();
      }
      if (statistic(x_sim) >= t_obs) ++exceed;
    }
    report.t_holdout(i) = t_obs;
    report.p_values(i) = static_cast<double>(exceed) / static_cast<double>(n_rep);
    report.scored[row] = true;
  });

  double sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (report.scored[static_cast<std::size_t>(i)]) {
      sum += report.p_values(i);
      ++report.n_scored;
    }
  }
  report.n_excluded = n - report.n_scored;
  if (report.n_scored == 0) throw DataError("no row has a held-out cell; nothing to check");
  report.mean_p = sum / static_cast<double>(report.n_scored);
  report.passed = report.mean_p > report.tau;
  return report;
}

void write_ppc_table(std::ostream& out, const PpcReport& report,
                     const std::vector<std::string>& comments) {
  csv::write_comments(out, comments);
  out << "row,n_holdout,t_holdout,p_value,scored\n";
  for (Index i = 0; i < report.p_values.size(); ++i) {
    const auto r = static_cast<std::size_t>(i);
    out << i + 1 << ',' << report.n_holdout[r] << ',';
    if (report.scored[r]) {
      out << csv::format_double(report.t_holdout(i)) << ',' << csv::format_double(report.p_values(i)) << ",1\n";
    } else {
      out << ",,0\n";
    }
  }
}

void write_ppc_summary(std::ostream& out, const PpcReport& report) {
  out << "mean_p=" << csv::format_double(report.mean_p) << '\n'
      << "tau=" << csv::format_double(report.tau) << '\n'
      << "passed=" << (report.passed ? "true" : "false") << '\n'
      << "n_replicates=" << report.n_replicates << '\n'
      << "n_scored=" << report.n_scored << '\n'
      << "n_excluded=" << report.n_excluded << '\n';
}

}  // namespace deconf
