#pragma once

#include "deconf/plfm.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace deconf {

struct PpcConfig {
  Index n_replicates = 200;
  double tau = 0.1;
  /// Draws averaged inside the test statistic. 0 uses every retained draw;
  /// otherwise an evenly spaced subset of that size.
  Index statistic_draws = 0;
  unsigned threads = 1;

  void validate() const;
};

struct PpcReport {
  Vector p_values;            // NaN for rows that were not scored
  std::vector<bool> scored;   // false where the row had no held-out cell
  Vector t_holdout;           // statistic of the held-out values, NaN if unscored
  std::vector<Index> n_holdout;
  double mean_p = 0.0;
  double tau = 0.1;
  bool passed = false;
  Index n_replicates = 0;
  Index n_scored = 0;
  Index n_excluded = 0;
};

/// Expected negative log-likelihood of the present cells of `x_row`, averaged
/// over the given draws.
double test_statistic(const PosteriorDraws& draws, const RowVector& x_row,
                      const Eigen::Matrix<bool, 1, Eigen::Dynamic>& present,
                      const RowVector& f_row);

/// Per-row Bayesian p-values on the held-out cells. Replicates for row i come
/// from a stream seeded by derive_seed(seed, i), so results do not depend on
/// the thread count.
PpcReport bayesian_p_values(const PosteriorDraws& draws, const MaskedMatrix& x_obs,
                            const MaskedMatrix& x_holdout, const Matrix& f,
                            const PpcConfig& config, std::uint64_t seed);

/// One CSV line per observation: row, n_holdout, t_holdout, p_value, scored.
void write_ppc_table(std::ostream& out, const PpcReport& report,
                     const std::vector<std::string>& comments);

/// key=value summary lines.
void write_ppc_summary(std::ostream& out, const PpcReport& report);

}  // namespace deconf
