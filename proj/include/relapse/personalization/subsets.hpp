#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "relapse/data/windows.hpp"
#include "relapse/personalization/similarity.hpp"

namespace relapse::personalization {

class NoPositivesError : public std::runtime_error {
 public:
  NoPositivesError() : std::runtime_error("no positive instances") {}
};

class InsufficientDonorsError : public std::runtime_error {
 public:
  InsufficientDonorsError() : std::runtime_error("insufficient donors") {}
};

enum class SubsetKind { personalized, random, stratified, full };
enum class Stratum { closest, first_quartile, median };

std::string_view to_string(SubsetKind k);
std::string_view to_string(Stratum s);
Stratum parse_stratum(std::string_view name);

// Index of the first ranked candidate used as a donor for a stratum.
std::size_t stratum_start(Stratum s, std::size_t n_candidates);

// Indices refer to the training-window span the subset was built from.
struct TrainingSubset {
  std::vector<std::size_t> relapse;
  std::vector<std::size_t> nonrelapse;
  SubsetKind kind = SubsetKind::personalized;
  std::optional<Stratum> stratum;
  std::optional<Metric> metric;
  std::vector<std::string> pool_patients;   // ranking prefix walked to build the non-relapse pool
  std::vector<std::string> donor_patients;  // patients that contributed sampled non-relapse windows
  std::uint64_t seed = 0;

  std::vector<std::size_t> all() const;  // relapse then non-relapse indices
  bool balanced() const { return relapse.size() == nonrelapse.size(); }
};

// All relapse windows, plus exactly N_rel non-relapse windows sampled uniformly
// without replacement from the smallest ranking prefix whose pool covers N_rel.
TrainingSubset build_personalized_subset(std::span<const data::ObservationWindow> training,
                                         const SimilarityRanking& ranking, std::uint64_t seed);

// As above, but the donor walk starts at the stratum's rank and never wraps.
TrainingSubset distance_stratified_subset(std::span<const data::ObservationWindow> training,
                                          const SimilarityRanking& ranking, Stratum stratum, std::uint64_t seed);

// All relapse windows plus N_rel non-relapse windows sampled from every training patient.
TrainingSubset build_random_subset(std::span<const data::ObservationWindow> training, std::uint64_t seed);

// Every training window (the imbalanced "no personalization" condition).
TrainingSubset build_full_set(std::span<const data::ObservationWindow> training);

// Mean ranking distance of the subset's donor patients.
double mean_donor_distance(const TrainingSubset& subset, const SimilarityRanking& ranking);

}  // namespace relapse::personalization
