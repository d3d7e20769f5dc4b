#include "relapse/data/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>

#include "relapse/errors.hpp"

namespace relapse::data {

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

void CsvReader::fail(const std::string& what) const {
  throw DataError(source_ + ":" + std::to_string(line_) + ": " + what);
}

void CsvReader::expect_header(std::string_view expected) {
  std::string line;
  if (!std::getline(in_, line)) {
    line_ = 1;
    fail("missing header (expected '" + std::string(expected) + "')");
  }
  ++line_;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (line != expected) fail("bad header '" + line + "' (expected '" + std::string(expected) + "')");
}

std::optional<std::vector<std::string>> CsvReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    return split_csv_line(line);
  }
  return std::nullopt;
}

std::optional<double> parse_optional_number(const std::string& field, const CsvReader& reader,
                                            std::string_view column) {
  if (field.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (*first == '+') ++first;
  auto r = std::from_chars(first, last, v);
  if (r.ec != std::errc() || r.ptr != last || !std::isfinite(v)) {
    reader.fail("non-numeric value '" + field + "' in column " + std::string(column));
  }
  return v;
}

double parse_number(const std::string& field, const CsvReader& reader, std::string_view column) {
  auto v = parse_optional_number(field, reader, column);
  if (!v) reader.fail("missing value in column " + std::string(column));
  return *v;
}

}  // namespace relapse::data
