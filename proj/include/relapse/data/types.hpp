#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace relapse::data {

using Date = std::chrono::sys_days;

Date parse_date(std::string_view iso);  // YYYY-MM-DD, throws DataError
std::string format_date(Date d);
inline long day_number(Date d) { return d.time_since_epoch().count(); }

enum class Modality : std::size_t { light = 0, volume, conversation, distance, acc, screen };

inline constexpr std::size_t kModalities = 6;
inline constexpr std::size_t kHours = 24;
inline constexpr std::size_t kDayDim = kHours * kModalities;  // 144

inline constexpr std::array<std::string_view, kModalities> kModalityNames = {"light",    "volume", "conversation",
                                                                              "distance", "acc",    "screen"};

// Hour-major layout: hour 0 modalities 0..5, hour 1 modalities 0..5, ...
constexpr std::size_t day_index(std::size_t hour, Modality m) {
  return hour * kModalities + static_cast<std::size_t>(m);
}

Modality parse_modality(std::string_view name);
// Columns of the 144-vector belonging to the given modalities, ascending.
std::vector<std::size_t> modality_dims(const std::vector<Modality>& modalities);
std::vector<Modality> all_modalities();

struct PatientProfile {
  std::string patient_id;
  double age = 0.0;
  std::optional<double> bprs;
  std::optional<double> sfs;
  std::optional<double> cdss;
  std::optional<double> gpts;
};

struct HourlyRecord {
  std::size_t patient = 0;  // index into Cohort::patients
  Date date{};
  int hour = 0;
  std::array<std::optional<double>, kModalities> values{};
};

struct RelapseEvent {
  std::string patient_id;
  Date relapse_date{};
};

struct Cohort {
  std::vector<PatientProfile> patients;
  std::vector<HourlyRecord> records;  // unique (patient, date, hour), sorted
  std::vector<RelapseEvent> relapses;

  std::optional<std::size_t> find(std::string_view patient_id) const;
  std::vector<Date> relapse_dates(std::string_view patient_id) const;
};

struct DayVector {
  Date date{};
  std::array<double, kDayDim> values{};
  std::array<bool, kDayDim> observed{};

  bool fully_masked() const;
};

struct PatientDays {
  std::string patient_id;
  std::vector<DayVector> days;  // consecutive calendar days
};

}  // namespace relapse::data
