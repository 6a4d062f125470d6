#include "deconf/data.hpp"

#include "deconf/csv.hpp"
#include "deconf/random.hpp"
#include "deconf/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

namespace deconf {

Role parse_role(const std::string& name) {
  static const std::map<std::string, Role> table = {
      {"cause-volume", Role::CauseVolume}, {"cause-thickness", Role::CauseThickness},
      {"covariate", Role::Covariate},      {"outcome", Role::Outcome},
      {"tiv", Role::Tiv},                  {"age", Role::Age},
  };
  const auto it = table.find(name);
  if (it == table.end()) {
    throw UsageError("unknown column role '" + name +
                     "' (expected cause-volume, cause-thickness, covariate, outcome, tiv, age)");
  }
  return it->second;
}

std::string role_name(Role role) {
  switch (role) {
    case Role::CauseVolume: return "cause-volume";
    case Role::CauseThickness: return "cause-thickness";
    case Role::Covariate: return "covariate";
    case Role::Outcome: return "outcome";
    case Role::Tiv: return "tiv";
    case Role::Age: return "age";
  }
  return "?";
}

void Dataset::validate() const {
  const Index rows = causes.rows();
  if (rows < 1) throw DataError("dataset has no rows");
  if (causes.cols() < 1) throw DataError("dataset has no cause columns");
  if (covariates.rows() != rows || outcome.size() != rows || (tiv && tiv->size() != rows)) {
    throw DataError("dataset components disagree on the number of rows");
  }
  if (static_cast<Index>(cause_names.size()) != causes.cols() ||
      static_cast<Index>(cause_roles.size()) != causes.cols() ||
      static_cast<Index>(covariate_names.size()) != covariates.cols()) {
    throw DataError("dataset column names disagree with matrix widths");
  }
  if (age_index && (*age_index < 0 || *age_index >= covariates.cols())) {
    throw DataError("age column index out of range");
  }
  if (!causes.allFinite() || !covariates.allFinite() || !outcome.allFinite() ||
      (tiv && !tiv->allFinite())) {
    throw DataError("dataset contains non-finite values");
  }
}

Vector Dataset::age() const {
  if (!age_index) throw UsageError("no column was declared with role 'age'");
  return covariates.col(*age_index);
}

Dataset load_dataset(const std::filesystem::path& path, const RoleDeclaration& roles) {
  const csv::Table table = csv::read(path);
  const auto n = table.rows.size();

  Dataset ds;
  std::vector<Index> cause_cols, cov_cols;
  Index outcome_col = -1, tiv_col = -1;
  for (const auto& [name, role] : roles.columns) {
    const Index c = table.column(name);
    if (c < 0) throw DataError("declared column '" + name + "' not found in " + path.string());
    switch (role) {
      case Role::CauseVolume:
      case Role::CauseThickness:
        cause_cols.push_back(c);
        ds.cause_names.push_back(name);
        ds.cause_roles.push_back(role);
        break;
      case Role::Age:
        if (ds.age_index) throw DataError("more than one column has role 'age'");
        ds.age_index = static_cast<Index>(cov_cols.size());
        [[fallthrough]];
      case Role::Covariate:
        cov_cols.push_back(c);
        ds.covariate_names.push_back(name);
        break;
      case Role::Outcome:
        if (outcome_col >= 0) throw DataError("more than one column has role 'outcome'");
        outcome_col = c;
        ds.outcome_name = name;
        break;
      case Role::Tiv:
        if (tiv_col >= 0) throw DataError("more than one column has role 'tiv'");
        tiv_col = c;
        break;
    }
  }
  if (outcome_col < 0) throw DataError("no column has role 'outcome'");
  if (cause_cols.empty()) throw DataError("no cause columns declared");

  auto cell = [&](std::size_t i, Index c) {
    const auto& text = table.rows[i][static_cast<std::size_t>(c)];
    // Row numbers are 1-based data rows, matching what a spreadsheet shows
    // below the header.
    return csv::parse_number(text, i + 1, table.header[static_cast<std::size_t>(c)]);
  };

  const auto rows = static_cast<Index>(n);
  ds.causes.resize(rows, static_cast<Index>(cause_cols.size()));
  ds.covariates.resize(rows, static_cast<Index>(cov_cols.size()));
  ds.outcome.resize(rows);
  if (tiv_col >= 0) ds.tiv = Vector(rows);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Index>(i);
    for (std::size_t j = 0; j < cause_cols.size(); ++j) ds.causes(r, static_cast<Index>(j)) = cell(i, cause_cols[j]);
    for (std::size_t j = 0; j < cov_cols.size(); ++j) ds.covariates(r, static_cast<Index>(j)) = cell(i, cov_cols[j]);
    if (table.rows[i][static_cast<std::size_t>(outcome_col)].empty()) {
      throw DataError("missing outcome in row " + std::to_string(i + 1));
    }
    ds.outcome(r) = cell(i, outcome_col);
    if (tiv_col >= 0) (*ds.tiv)(r) = cell(i, tiv_col);
  }
  ds.validate();
  return ds;
}

void write_dataset(std::ostream& out, const Dataset& ds, const std::vector<std::string>& comments) {
  ds.validate();
  csv::write_comments(out, comments);
  std::vector<std::string> header = ds.covariate_names;
  header.insert(header.end(), ds.cause_names.begin(), ds.cause_names.end());
  header.push_back(ds.outcome_name);
  if (ds.tiv) header.push_back("tiv");
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (Index i = 0; i < ds.n(); ++i) {
    bool first = true;
    auto put = [&](double v) {
      out << (first ? "" : ",") << csv::format_double(v);
      first = false;
    };
    for (Index j = 0; j < ds.p(); ++j) put(ds.covariates(i, j));
    for (Index j = 0; j < ds.d(); ++j) put(ds.causes(i, j));
    put(ds.outcome(i));
    if (ds.tiv) put((*ds.tiv)(i));
    out << '\n';
  }
}

RoleDeclaration roles_of(const Dataset& ds) {
  RoleDeclaration roles;
  for (Index j = 0; j < ds.p(); ++j) {
    roles.add(ds.covariate_names[static_cast<std::size_t>(j)],
              ds.age_index && *ds.age_index == j ? Role::Age : Role::Covariate);
  }
  for (Index j = 0; j < ds.d(); ++j) {
    roles.add(ds.cause_names[static_cast<std::size_t>(j)], ds.cause_roles[static_cast<std::size_t>(j)]);
  }
  roles.add(ds.outcome_name, Role::Outcome);
  if (ds.tiv) roles.add("tiv", Role::Tiv);
  return roles;
}

Dataset normalize_by_tiv(const Dataset& ds) {
  if (!ds.tiv) throw DataError("normalize_by_tiv: dataset has no 'tiv' column");
  const Vector& tiv = *ds.tiv;
  for (Index i = 0; i < tiv.size(); ++i) {
    if (!(tiv(i) > 0.0)) {
      throw DataError("normalize_by_tiv: tiv must be positive, row " + std::to_string(i + 1) +
                      " has " + csv::format_double(tiv(i)));
    }
  }
  if (std::none_of(ds.cause_roles.begin(), ds.cause_roles.end(),
                   [](Role r) { return r == Role::CauseVolume; })) {
    throw DataError("normalize_by_tiv: no column has role 'cause-volume'");
  }
  Dataset out = ds;
  for (Index j = 0; j < out.d(); ++j) {
    if (out.cause_roles[static_cast<std::size_t>(j)] == Role::CauseVolume) {
      out.causes.col(j).array() /= tiv.array();
    }
  }
  out.tiv.reset();
  return out;
}

namespace {

void column_moments(const Matrix& m, const std::vector<std::string>& names, RowVector& loc,
                    RowVector& scale, std::vector<std::string>& warnings) {
  loc.resize(m.cols());
  scale.resize(m.cols());
  for (Index j = 0; j < m.cols(); ++j) {
    const Vector col = m.col(j);
    loc(j) = col.mean();
    const double sd = stats::sample_sd(col);
    if (sd > 0.0 && std::isfinite(sd)) {
      scale(j) = sd;
    } else {
      scale(j) = 1.0;
      warnings.push_back("column '" + names[static_cast<std::size_t>(j)] +
                         "' is constant; left with scale 1");
    }
  }
}

}  // namespace

Matrix Standardization::apply_causes(const Matrix& raw) const {
  return (raw.rowwise() - cause_location).array().rowwise() / cause_scale.array();
}
Matrix Standardization::invert_causes(const Matrix& s) const {
  return (s.array().rowwise() * cause_scale.array()).matrix().rowwise() + cause_location;
}
Matrix Standardization::apply_covariates(const Matrix& raw) const {
  return (raw.rowwise() - covariate_location).array().rowwise() / covariate_scale.array();
}
Matrix Standardization::invert_covariates(const Matrix& s) const {
  return (s.array().rowwise() * covariate_scale.array()).matrix().rowwise() + covariate_location;
}

std::pair<Dataset, Standardization> standardize(const Dataset& ds) {
  Standardization st;
  column_moments(ds.causes, ds.cause_names, st.cause_location, st.cause_scale, st.warnings);
  column_moments(ds.covariates, ds.covariate_names, st.covariate_location, st.covariate_scale,
                 st.warnings);
  Dataset out = ds;
  out.causes = st.apply_causes(ds.causes);
  out.covariates = st.apply_covariates(ds.covariates);
  return {std::move(out), std::move(st)};
}

HoldoutSplit apply_mask(const Matrix& causes, const HoldoutMask& mask) {
  if (mask.held.rows() != causes.rows() || mask.held.cols() != causes.cols()) {
    throw UsageError("holdout mask shape does not match the cause matrix");
  }
  HoldoutSplit split;
  split.mask = mask;
  split.observed.present = mask.held.unaryExpr([](bool h) { return !h; });
  split.holdout.present = mask.held;
  split.observed.values = split.observed.present.select(causes, Matrix::Zero(causes.rows(), causes.cols()));
  split.holdout.values = split.holdout.present.select(causes, Matrix::Zero(causes.rows(), causes.cols()));
  return split;
}

HoldoutSplit split_holdout(const Matrix& causes, double hold_fraction, std::uint64_t seed) {
  if (!(hold_fraction > 0.0 && hold_fraction < 0.5)) {
    throw UsageError("hold_fraction must lie strictly between 0 and 0.5, got " +
                     csv::format_double(hold_fraction));
  }
  const Index n = causes.rows();
  const Index d = causes.cols();
  if (d < 2) throw DataError("a substitute confounder needs at least two causes");
  if (n < 1) throw DataError("cannot split an empty cause matrix");

  const auto cells = static_cast<std::uint64_t>(n * d);
  const auto n_hold = static_cast<std::uint64_t>(std::llround(hold_fraction * static_cast<double>(cells)));
  Rng rng(seed);

  // Partial Fisher-Yates over cell indices (row-major).
  std::vector<std::uint64_t> idx(cells);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::uint64_t k = 0; k < n_hold; ++k) {
    const std::uint64_t pick = k + rng.below(cells - k);
    std::swap(idx[k], idx[pick]);
  }
  HoldoutMask mask{BoolMatrix::Constant(n, d, false), hold_fraction, seed};
  std::vector<Index> held_in_row(static_cast<std::size_t>(n), 0);
  for (std::uint64_t k = 0; k < n_hold; ++k) {
    const auto i = static_cast<Index>(idx[k] / static_cast<std::uint64_t>(d));
    const auto j = static_cast<Index>(idx[k] % static_cast<std::uint64_t>(d));
    mask.held(i, j) = true;
    ++held_in_row[static_cast<std::size_t>(i)];
  }

  // Rows with nothing observed give one held cell back and a random row with
  // at least two observed cells takes one instead, so the count stays exact.
  for (Index i = 0; i < n; ++i) {
    if (held_in_row[static_cast<std::size_t>(i)] < d) continue;
    const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(d)));
    mask.held(i, j) = false;
    --held_in_row[static_cast<std::size_t>(i)];
    bool moved = false;
    for (int attempt = 0; attempt < 10000 && !moved; ++attempt) {
      const auto r = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
      if (r == i || held_in_row[static_cast<std::size_t>(r)] + 2 > d) continue;
      const auto c = static_cast<Index>(rng.below(static_cast<std::uint64_t>(d)));
      if (mask.held(r, c)) continue;
      mask.held(r, c) = true;
      ++held_in_row[static_cast<std::size_t>(r)];
      moved = true;
    }
    // Only reachable for tiny matrices; the fraction then drops by one cell.
    (void)moved;
  }
  return apply_mask(causes, mask);
}

HoldoutSplit split_holdout(const Dataset& ds, double hold_fraction, std::uint64_t seed) {
  return split_holdout(ds.causes, hold_fraction, seed);
}

}  // namespace deconf
