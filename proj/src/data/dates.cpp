#include <algorithm>
#include <charconv>
#include <cstdio>

#include "relapse/data/types.hpp"
#include "relapse/errors.hpp"

namespace relapse::data {

Date parse_date(std::string_view s) {
  auto bad = [&]() { return DataError("invalid date '" + std::string(s) + "' (expected YYYY-MM-DD)"); };
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw bad();
  int y = 0;
  unsigned m = 0, d = 0;
  auto num = [&](std::string_view part, auto& out) {
    auto r = std::from_chars(part.data(), part.data() + part.size(), out);
    if (r.ec != std::errc() || r.ptr != part.data() + part.size()) throw bad();
  };
  num(s.substr(0, 4), y);
  num(s.substr(5, 2), m);
  num(s.substr(8, 2), d);
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw bad();
  return Date{ymd};
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

Modality parse_modality(std::string_view name) {
  for (std::size_t k = 0; k < kModalities; ++k)
    if (kModalityNames[k] == name) return static_cast<Modality>(k);
  throw UsageError("unknown modality '" + std::string(name) + "'");
}

std::vector<std::size_t> modality_dims(const std::vector<Modality>& modalities) {
  if (modalities.empty()) throw UsageError("modality subset must not be empty");
  std::vector<std::size_t> dims;
  for (std::size_t h = 0; h < kHours; ++h)
    for (auto m : modalities) dims.push_back(day_index(h, m));
  std::sort(dims.begin(), dims.end());
  dims.erase(std::unique(dims.begin(), dims.end()), dims.end());
  return dims;
}

std::vector<Modality> all_modalities() {
  std::vector<Modality> v;
  for (std::size_t k = 0; k < kModalities; ++k) v.push_back(static_cast<Modality>(k));
  return v;
}

std::optional<std::size_t> Cohort::find(std::string_view patient_id) const {
  for (std::size_t i = 0; i < patients.size(); ++i)
    if (patients[i].patient_id == patient_id) return i;
  return std::nullopt;
}

std::vector<Date> Cohort::relapse_dates(std::string_view patient_id) const {
  std::vector<Date> out;
  for (const auto& r : relapses)
    if (r.patient_id == patient_id) out.push_back(r.relapse_date);
  std::sort(out.begin(), out.end());
  return out;
}

bool DayVector::fully_masked() const {
  return std::none_of(observed.begin(), observed.end(), [](bool b) { return b; });
}

}  // namespace relapse::data
