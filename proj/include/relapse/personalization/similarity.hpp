#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "relapse/data/types.hpp"

namespace relapse::personalization {

enum class Metric { age, bprs, sfs, cdss, gpts, combined };

Metric parse_metric(std::string_view name);
std::string_view to_string(Metric m);

// Raw scalar value of a single (non-combined) metric; throws DataError when absent.
double metric_value(const data::PatientProfile& p, Metric m);

// Mean of the five min-max scaled metrics over `cohort`; a metric that is
// constant across the cohort contributes 0.5.
double combined_metric(const data::PatientProfile& p, std::span<const data::PatientProfile> cohort);

// |a - b| on the chosen metric. `cohort` supplies the min-max range for `combined`.
double metric_distance(const data::PatientProfile& a, const data::PatientProfile& b, Metric m,
                       std::span<const data::PatientProfile> cohort = {});

struct RankedPatient {
  std::string patient_id;
  double distance = 0.0;
};

struct SimilarityRanking {
  std::string test_patient_id;
  Metric metric = Metric::sfs;
  std::vector<RankedPatient> ranked;  // ascending distance, ties by patient_id

  double distance_of(std::string_view patient_id) const;
};

// Combined-metric scaling uses test + candidates as the cohort.
SimilarityRanking rank_patients(const data::PatientProfile& test, std::span<const data::PatientProfile> candidates,
                                Metric metric);

}  // namespace relapse::personalization
