#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace deconf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;
using BoolVector = Eigen::Matrix<bool, Eigen::Dynamic, 1>;

/// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorKind { Usage = 1, Data = 2, Numerical = 3, Gate = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Invalid arguments, violated preconditions, bad configuration.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

/// Non-finite values, failed factorizations, non-convergence.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::Numerical, what) {}
};

/// The posterior predictive check did not pass and no override was given.
class GateError : public Error {
 public:
  explicit GateError(const std::string& what) : Error(ErrorKind::Gate, what) {}
};

/// A real matrix with an explicit presence mask. Values in absent cells are
/// carried but never read by any consumer in this library.
struct MaskedMatrix {
  Matrix values;
  BoolMatrix present;

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }

  Index count_present() const { return present.count(); }
  Index count_present_in_row(Index i) const { return present.row(i).count(); }

  /// Fully observed wrapper around a dense matrix.
  static MaskedMatrix dense(const Matrix& m) {
    return MaskedMatrix{m, BoolMatrix::Constant(m.rows(), m.cols(), true)};
  }
};

}  // namespace deconf
