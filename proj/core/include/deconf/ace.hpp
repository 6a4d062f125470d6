#pragma once

#include "deconf/outcome.hpp"

#include <string>
#include <vector>

namespace deconf {

/// do(X_S = x'_S), values in the same units as the dataset's causes.
struct Intervention {
  std::vector<Index> columns;
  Vector values;

  void validate(Index n_causes) const;
};

/// Copy of `causes` with every column in S overwritten by its x'_S value.
Matrix apply_intervention(const Matrix& causes, const Intervention& iv);

struct GateStatus {
  bool passed = false;
  bool override_gate = false;
  double mean_p = 0.0;
  double tau = 0.1;
};

struct AceEstimate {
  Vector draws;  // one value per outcome-model draw
  double mean = 0.0;
  double lo95 = 0.0;
  double hi95 = 0.0;
  Index n_individuals = 0;
  bool gate_passed = false;
  bool gate_overridden = false;
};

/// Monte-Carlo estimate of E[y | do(X_S = x'_S)]: for each outcome draw,
/// the mean over individuals of logistic(b0 + d_i beta), where d_i holds the
/// residuals of the intervened causes (reconstruction from the unchanged
/// z_hat_i and f_i) followed by the outcome controls. `ds` must be the same
/// (standardized) dataset the fits were made on.
AceEstimate average_causal_effect(const Dataset& ds, const PosteriorDraws& draws,
                                  const SubstituteConfounder& z_hat, const BetaRegFit& outcome_fit,
                                  const DesignOptions& options, const Intervention& iv,
                                  const GateStatus& gate);

/// Draw-paired ACE(a) - ACE(b).
AceEstimate ace_contrast(const Dataset& ds, const PosteriorDraws& draws,
                         const SubstituteConfounder& z_hat, const BetaRegFit& outcome_fit,
                         const DesignOptions& options, const Intervention& iv_a,
                         const Intervention& iv_b, const GateStatus& gate);

}  // namespace deconf
