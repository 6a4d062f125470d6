#include "deconf/ace.hpp"

#include "deconf/csv.hpp"
#include "deconf/stats.hpp"

#include <algorithm>
#include <set>

namespace deconf {

void Intervention::validate(Index n_causes) const {
  if (columns.empty()) throw UsageError("an intervention needs at least one cause");
  if (static_cast<Index>(columns.size()) != values.size()) {
    throw UsageError("intervention has " + std::to_string(columns.size()) + " columns but " +
                     std::to_string(values.size()) + " values");
  }
  std::set<Index> seen;
  for (Index c : columns) {
    if (c < 0 || c >= n_causes) {
      throw UsageError("intervention column index " + std::to_string(c) + " is out of range");
    }
    if (!seen.insert(c).second) throw UsageError("intervention lists a cause twice");
  }
  if (!values.allFinite()) throw UsageError("intervention values must be finite");
}

Matrix apply_intervention(const Matrix& causes, const Intervention& iv) {
  iv.validate(causes.cols());
  Matrix out = causes;
  for (std::size_t k = 0; k < iv.columns.size(); ++k) {
    out.col(iv.columns[k]).setConstant(iv.values(static_cast<Index>(k)));
  }
  return out;
}

namespace {

void enforce_gate(const GateStatus& gate) {
  if (!gate.passed && !gate.override_gate) {
    throw GateError("the posterior predictive check failed (mean p = " +
                    csv::format_double(gate.mean_p) + ", not above tau = " +
                    csv::format_double(gate.tau) +
                    "); the substitute confounder is not trusted. Pass the gate override to proceed anyway");
  }
}

Vector ace_draws(const Dataset& ds, const PosteriorDraws& draws, const SubstituteConfounder& z_hat,
                 const BetaRegFit& fit, const DesignOptions& options, const Intervention& iv) {
  Dataset intervened = ds;
  intervened.causes = apply_intervention(ds.causes, iv);
  const ResidualizedDesign design = residualize(intervened, draws, z_hat, options);
  return mean_prediction(fit, design.design());
}

AceEstimate summarize(Vector values, Index n, const GateStatus& gate) {
  AceEstimate est;
  est.n_individuals = n;
  est.gate_passed = gate.passed;
  est.gate_overridden = !gate.passed && gate.override_gate;
  est.mean = values.mean();
  std::vector<double> sorted(values.data(), values.data() + values.size());
  std::sort(sorted.begin(), sorted.end());
  est.lo95 = stats::sorted_quantile(sorted, 0.025);
  est.hi95 = stats::sorted_quantile(sorted, 0.975);
  est.draws = std::move(values);
  return est;
}

}  // namespace

AceEstimate average_causal_effect(const Dataset& ds, const PosteriorDraws& draws,
                                  const SubstituteConfounder& z_hat, const BetaRegFit& outcome_fit,
                                  const DesignOptions& options, const Intervention& iv,
                                  const GateStatus& gate) {
  enforce_gate(gate);
  return summarize(ace_draws(ds, draws, z_hat, outcome_fit, options, iv), ds.n(), gate);
}

AceEstimate ace_contrast(const Dataset& ds, const PosteriorDraws& draws,
                         const SubstituteConfounder& z_hat, const BetaRegFit& outcome_fit,
                         const DesignOptions& options, const Intervention& iv_a,
                         const Intervention& iv_b, const GateStatus& gate) {
  enforce_gate(gate);
  const Vector a = ace_draws(ds, draws, z_hat, outcome_fit, options, iv_a);
  const Vector b = ace_draws(ds, draws, z_hat, outcome_fit, options, iv_b);
  return summarize(a - b, ds.n(), gate);
}

}  // namespace deconf
