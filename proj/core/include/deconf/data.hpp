#pragma once

#include "deconf/common.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace deconf {

enum class Role { CauseVolume, CauseThickness, Covariate, Outcome, Tiv, Age };

Role parse_role(const std::string& name);
std::string role_name(Role role);

/// Ordered column-to-role assignment. Column order here fixes the column
/// order of the resulting matrices. An `Age` column is a covariate that is
/// additionally remembered as the age variable.
struct RoleDeclaration {
  std::vector<std::pair<std::string, Role>> columns;

  RoleDeclaration& add(std::string column, Role role) {
    columns.emplace_back(std::move(column), role);
    return *this;
  }
};

struct Dataset {
  Matrix causes;      // N x D
  Matrix covariates;  // N x P
  Vector outcome;     // N
  std::optional<Vector> tiv;

  std::vector<std::string> cause_names;
  std::vector<Role> cause_roles;  // CauseVolume or CauseThickness
  std::vector<std::string> covariate_names;
  std::string outcome_name;
  std::optional<Index> age_index;  // column of `covariates`

  Index n() const { return causes.rows(); }
  Index d() const { return causes.cols(); }
  Index p() const { return covariates.cols(); }

  /// Throws DataError if shapes disagree or values are non-finite.
  void validate() const;

  /// Age column as a vector; UsageError if no age role was declared.
  Vector age() const;
};

Dataset load_dataset(const std::filesystem::path& path, const RoleDeclaration& roles);

/// Writes covariates, causes, outcome and (if present) a `tiv` column, with
/// full-precision numbers, after the given `# ` comment lines.
void write_dataset(std::ostream& out, const Dataset& ds, const std::vector<std::string>& comments = {});

/// Role declaration that reloads a dataset written by write_dataset.
RoleDeclaration roles_of(const Dataset& ds);

/// Divides every volume cause by TIV and drops the TIV column.
Dataset normalize_by_tiv(const Dataset& ds);

/// Per-column location and scale of causes and covariates.
struct Standardization {
  RowVector cause_location, cause_scale;
  RowVector covariate_location, covariate_scale;
  std::vector<std::string> warnings;

  Matrix apply_causes(const Matrix& raw) const;
  Matrix invert_causes(const Matrix& standardized) const;
  Matrix apply_covariates(const Matrix& raw) const;
  Matrix invert_covariates(const Matrix& standardized) const;
};

/// Centers and scales causes and covariates to sample mean 0, sample sd 1.
/// Constant columns keep scale 1 and produce a warning.
std::pair<Dataset, Standardization> standardize(const Dataset& ds);

struct HoldoutMask {
  BoolMatrix held;  // true = held out
  double hold_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct HoldoutSplit {
  MaskedMatrix observed;
  MaskedMatrix holdout;
  HoldoutMask mask;
};

/// Entry-wise random holdout. Exactly round(f * N * D) cells are held out and
/// every row keeps at least one observed cell.
HoldoutSplit split_holdout(const Matrix& causes, double hold_fraction, std::uint64_t seed);
HoldoutSplit split_holdout(const Dataset& ds, double hold_fraction, std::uint64_t seed);

/// Applies an existing mask to a matrix of the same shape.
HoldoutSplit apply_mask(const Matrix& causes, const HoldoutMask& mask);

}  // namespace deconf
