#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace specfair {

/// 17 significant digits ("%.17g"); NaN and infinities as nan/inf/-inf.
std::string format_number(double value);
/// Empty cell for nullopt.
std::string format_optional(const std::optional<double>& value);

/// Writes RFC-4180 rows; cells containing ',', '"' or newlines are quoted.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void row(const std::vector<std::string>& cells);
  void header(std::string_view line);
  void flush() { out_.flush(); }

 private:
  std::ostream& out_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws kIo when absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Parses a numeric cell; empty cells give nullopt.
std::optional<double> parse_number(std::string_view cell);

}  // namespace specfair
