#pragma once

#include <cstdint>
#include <string>

namespace relapse::synth {

// Parameters of a synthetic cohort whose sociability signals depend on an
// SFS-like trait and which drift before injected relapses.
struct CohortSpec {
  std::size_t n_patients = 40;
  std::size_t days_per_patient = 182;
  double relapse_fraction = 0.3;
  std::size_t prodrome_days = 30;
  double trait_effect = 1.5;   // SFS-trait coupling of conversation/volume, in modality std units
  double drift_effect = 1.5;   // prodromal shift of conversation/volume/distance, in modality std units
  double missing_rate = 0.1;
  std::uint64_t seed = 1;
  // Patient-specific offsets unrelated to the trait, and day-to-day offsets,
  // both in modality std units.
  double heterogeneity = 0.3;
  double daily_noise = 0.3;

  void validate() const;
};

struct CohortCsv {
  std::string patients;
  std::string sensing;
  std::string relapses;
};

// Deterministic in `spec`. Exactly round(relapse_fraction * n) patients get one
// relapse, placed uniformly in [day 60, last day - 7].
CohortCsv generate_cohort(const CohortSpec& spec);

}  // namespace relapse::synth
