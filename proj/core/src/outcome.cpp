#include "deconf/outcome.hpp"

#include "deconf/csv.hpp"
#include "deconf/stats.hpp"

#include <algorithm>
#include <ostream>

namespace deconf {

Matrix ResidualizedDesign::design() const {
  Matrix m(residuals.rows(), residuals.cols() + controls.cols());
  m.leftCols(residuals.cols()) = residuals;
  m.rightCols(controls.cols()) = controls;
  return m;
}

Matrix residualize(const Matrix& causes, const Matrix& f, const PosteriorDraws& draws,
                   const SubstituteConfounder& z_hat) {
  draws.validate();
  if (causes.rows() != z_hat.z_hat.rows() || causes.rows() != f.rows()) {
    throw UsageError("residualize: row counts of causes, covariates and z_hat differ");
  }
  if (causes.cols() != draws.d()) throw UsageError("residualize: cause count differs from the fit");
  return causes - reconstruct_mean(draws, z_hat.z_hat, f);
}

ResidualizedDesign residualize(const Dataset& ds, const PosteriorDraws& draws,
                               const SubstituteConfounder& z_hat, const DesignOptions& options) {
  ResidualizedDesign out;
  out.residuals = residualize(ds.causes, ds.covariates, draws, z_hat);
  out.source_rows = draws.n();
  out.source_draws = draws.size();
  out.names = ds.cause_names;

  std::vector<Index> cols;
  if (options.include_age) {
    if (!ds.age_index) throw UsageError("outcome design asks for age but no age column is declared");
    cols.push_back(*ds.age_index);
  }
  for (Index c : options.extra_covariates) {
    if (c < 0 || c >= ds.p()) throw UsageError("extra covariate index out of range");
    if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
  }
  out.controls.resize(ds.n(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    out.controls.col(static_cast<Index>(c)) = ds.covariates.col(cols[c]);
    out.names.push_back(ds.covariate_names[static_cast<std::size_t>(cols[c])]);
  }
  return out;
}

Vector scale_outcome(const Vector& adas, double max_score) {
  if (!(max_score > 0.0)) throw UsageError("max_score must be positive");
  for (Index i = 0; i < adas.size(); ++i) {
    if (!(adas(i) >= 0.0 && adas(i) <= max_score)) {
      throw DataError("outcome value " + csv::format_double(adas(i)) + " in row " +
                      std::to_string(i + 1) + " is outside [0, " + csv::format_double(max_score) + "]");
    }
  }
  return (adas.array() + 0.5) / (max_score + 1.0);
}

Vector unscale_outcome(const Vector& y, double max_score) {
  return y.array() * (max_score + 1.0) - 0.5;
}

CoefficientRow summarize_draws(const std::string& name, std::vector<double> draws) {
  if (draws.size() < 100) {
    throw UsageError("summarizing '" + name + "' needs at least 100 draws, got " +
                     std::to_string(draws.size()));
  }
  CoefficientRow row;
  row.name = name;
  row.mean = stats::mean(draws);
  std::sort(draws.begin(), draws.end());
  row.lo80 = stats::sorted_quantile(draws, 0.10);
  row.hi80 = stats::sorted_quantile(draws, 0.90);
  row.lo95 = stats::sorted_quantile(draws, 0.025);
  row.hi95 = stats::sorted_quantile(draws, 0.975);
  row.significant = row.lo95 > 0.0 || row.hi95 < 0.0;
  return row;
}

CoefficientSummary summarize_coefficients(const BetaRegFit& fit) {
  CoefficientSummary out;
  for (Index c = 0; c + 1 < fit.draws.cols(); ++c) {
    const Vector col = fit.draws.col(c);
    out.push_back(summarize_draws(fit.names[static_cast<std::size_t>(c)],
                                  std::vector<double>(col.data(), col.data() + col.size())));
  }
  return out;
}

void write_coefficients(std::ostream& out, const CoefficientSummary& summary,
                        const std::vector<std::string>& comments) {
  csv::write_comments(out, comments);
  out << "name,mean,lo80,hi80,lo95,hi95,significant\n";
  for (const auto& r : summary) {
    out << r.name << ',' << csv::format_double(r.mean) << ',' << csv::format_double(r.lo80) << ','
        << csv::format_double(r.hi80) << ',' << csv::format_double(r.lo95) << ','
        << csv::format_double(r.hi95) << ',' << (r.significant ? 1 : 0) << '\n';
  }
}

Vector mean_prediction(const BetaRegFit& fit, const Matrix& design) {
  if (design.cols() != fit.n_coefficients()) {
    throw UsageError("design has " + std::to_string(design.cols()) + " columns, the fit has " +
                     std::to_string(fit.n_coefficients()) + " slopes");
  }
  Vector out(fit.n_draws());
  for (Index s = 0; s < fit.n_draws(); ++s) {
    const Vector beta = fit.draws.row(s).segment(1, fit.n_coefficients()).transpose();
    const Vector eta = (design * beta).array() + fit.draws(s, 0);
    double sum = 0.0;
    for (Index i = 0; i < eta.size(); ++i) sum += stats::logistic(eta(i));
    out(s) = sum / static_cast<double>(eta.size());
  }
  return out;
}

}  // namespace deconf
