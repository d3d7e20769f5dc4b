#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "relapse/data/types.hpp"

namespace relapse::data {

// One PatientDays per cohort patient (same order), covering every calendar day
// from the patient's first to last observed date. Unobserved hours are masked.
std::vector<PatientDays> build_day_vectors(const Cohort& cohort);

// Per-dimension median over observed entries; `available` is false where no
// entry was observed.
struct DimMedians {
  std::array<double, kDayDim> value{};
  std::array<bool, kDayDim> available{};

  bool empty() const;
};

DimMedians patient_medians(const PatientDays& patient);

// Cohort-level fallback medians; must be computed from training-fold patients only.
DimMedians reference_stats(std::span<const PatientDays> training);
DimMedians reference_stats(std::span<const PatientDays* const> training);

// Masked entries take the patient's own (modality, hour) median; dimensions the
// patient never observed fall back to `reference`. Masks are left untouched.
PatientDays impute_missing(const PatientDays& patient, const DimMedians& reference);
PatientDays impute_missing(const PatientDays& patient, const DimMedians& own, const DimMedians& reference);

// Per-dimension min-max scaler fitted on training days.
struct Normalizer {
  std::vector<double> min;
  std::vector<double> max;
  std::string fitted_on;

  double apply(std::size_t dim, double x) const;
  void apply_in_place(std::span<double> values) const;
  std::string digest() const;
};

Normalizer fit_normalizer(std::span<const DayVector> training);
Normalizer fit_normalizer(std::span<const DayVector* const> training);
std::vector<DayVector> apply_normalizer(const Normalizer& n, std::span<const DayVector> days);

// FNV-1a 64-bit, hex encoded.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace relapse::data
