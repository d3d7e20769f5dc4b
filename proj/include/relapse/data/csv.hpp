#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace relapse::data {

// Comma-separated fields; no quoting. A trailing '\r' is dropped.
std::vector<std::string> split_csv_line(std::string_view line);

// Reads non-empty lines, tracking 1-based line numbers for error messages.
class CsvReader {
 public:
  CsvReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  // Reads the header line and throws DataError unless it equals `expected`.
  void expect_header(std::string_view expected);
  std::optional<std::vector<std::string>> next();

  std::size_t line() const { return line_; }
  const std::string& source() const { return source_; }
  [[noreturn]] void fail(const std::string& what) const;

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_ = 0;
};

// Strict decimal parse; empty field -> nullopt; anything else non-numeric throws.
std::optional<double> parse_optional_number(const std::string& field, const CsvReader& reader,
                                            std::string_view column);
double parse_number(const std::string& field, const CsvReader& reader, std::string_view column);

}  // namespace relapse::data
