#pragma once

#include "deconf/common.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace deconf::csv {

/// Raw delimited text: a header plus string cells. Lines starting with '#'
/// are treated as comments and skipped.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  char delimiter = ',';

  /// Position of a header name, or -1.
  Index column(const std::string& name) const;
};

/// Reads a table. The delimiter is tab if the header line contains a tab and
/// no comma, otherwise comma. Ragged rows are a DataError.
Table read(const std::filesystem::path& path);
Table parse(std::istream& in, const std::string& source = "<stream>");

/// Strict numeric parse of a single cell; NaN, infinities, and trailing
/// characters are rejected with a message naming the cell.
double parse_number(const std::string& cell, std::size_t row, const std::string& column);

/// Shortest decimal rendering that round-trips to the identical double.
std::string format_double(double value);

/// Writes `# key=value` style comment lines, then a header, then rows.
void write_matrix(std::ostream& out, const std::vector<std::string>& comments,
                  const std::vector<std::string>& header, const Matrix& values);

void write_comments(std::ostream& out, const std::vector<std::string>& comments);

}  // namespace deconf::csv
