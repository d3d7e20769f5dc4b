#include "relapse/personalization/subsets.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "relapse/errors.hpp"
#include "relapse/rng.hpp"

namespace relapse::personalization {

std::string_view to_string(SubsetKind k) {
  switch (k) {
    case SubsetKind::personalized: return "personalized";
    case SubsetKind::random: return "random";
    case SubsetKind::stratified: return "stratified";
    case SubsetKind::full: return "full";
  }
  return "?";
}

std::string_view to_string(Stratum s) {
  switch (s) {
    case Stratum::closest: return "closest";
    case Stratum::first_quartile: return "first_quartile";
    case Stratum::median: return "median";
  }
  return "?";
}

Stratum parse_stratum(std::string_view name) {
  if (name == "closest") return Stratum::closest;
  if (name == "first_quartile") return Stratum::first_quartile;
  if (name == "median") return Stratum::median;
  throw UsageError("unknown stratum '" + std::string(name) + "'");
}

std::size_t stratum_start(Stratum s, std::size_t n) {
  switch (s) {
    case Stratum::closest: return 0;
    case Stratum::first_quartile: return n / 4;
    case Stratum::median: return n / 2;
  }
  return 0;
}

std::vector<std::size_t> TrainingSubset::all() const {
  std::vector<std::size_t> v(relapse);
  v.insert(v.end(), nonrelapse.begin(), nonrelapse.end());
  return v;
}

namespace {

std::vector<std::size_t> relapse_indices(std::span<const data::ObservationWindow> training) {
  std::vector<std::size_t> rel;
  for (std::size_t i = 0; i < training.size(); ++i)
    if (training[i].label == 1) rel.push_back(i);
  if (rel.empty()) throw NoPositivesError();
  return rel;
}

void require_no_test_patient(std::span<const data::ObservationWindow> training, const std::string& test_id) {
  for (const auto& w : training) {
    if (w.patient_id == test_id) throw LeakageError("training windows contain test patient '" + test_id + "'");
  }
}

void sample_pool(TrainingSubset& s, std::span<const data::ObservationWindow> training,
                 const std::vector<std::size_t>& pool) {
  Rng rng(s.seed);
  for (std::size_t k : sample_without_replacement(pool.size(), s.relapse.size(), rng)) s.nonrelapse.push_back(pool[k]);
  std::set<std::string> donors;
  for (std::size_t i : s.nonrelapse) donors.insert(training[i].patient_id);
  s.donor_patients.assign(donors.begin(), donors.end());
}

TrainingSubset walk_ranking(std::span<const data::ObservationWindow> training, const SimilarityRanking& ranking,
                            std::size_t start, std::uint64_t seed) {
  require_no_test_patient(training, ranking.test_patient_id);
  TrainingSubset s;
  s.seed = seed;
  s.metric = ranking.metric;
  s.relapse = relapse_indices(training);
  std::map<std::string, std::vector<std::size_t>> nonrel_by_patient;
  for (std::size_t i = 0; i < training.size(); ++i)
    if (training[i].label == 0) nonrel_by_patient[training[i].patient_id].push_back(i);
  std::vector<std::size_t> pool;
  for (std::size_t r = start; r < ranking.ranked.size() && pool.size() < s.relapse.size(); ++r) {
    const auto& id = ranking.ranked[r].patient_id;
    s.pool_patients.push_back(id);
    auto it = nonrel_by_patient.find(id);
    if (it != nonrel_by_patient.end()) pool.insert(pool.end(), it->second.begin(), it->second.end());
  }
  if (pool.size() < s.relapse.size()) throw InsufficientDonorsError();
  std::sort(pool.begin(), pool.end());
  sample_pool(s, training, pool);
  return s;
}

}  // namespace

TrainingSubset build_personalized_subset(std::span<const data::ObservationWindow> training,
                                         const SimilarityRanking& ranking, std::uint64_t seed) {
  auto s = walk_ranking(training, ranking, 0, seed);
  s.kind = SubsetKind::personalized;
  return s;
}

TrainingSubset distance_stratified_subset(std::span<const data::ObservationWindow> training,
                                          const SimilarityRanking& ranking, Stratum stratum, std::uint64_t seed) {
  if (ranking.ranked.empty()) throw std::invalid_argument("distance_stratified_subset: empty ranking");
  auto s = walk_ranking(training, ranking, stratum_start(stratum, ranking.ranked.size()), seed);
  s.kind = SubsetKind::stratified;
  s.stratum = stratum;
  return s;
}

TrainingSubset build_random_subset(std::span<const data::ObservationWindow> training, std::uint64_t seed) {
  TrainingSubset s;
  s.kind = SubsetKind::random;
  s.seed = seed;
  s.relapse = relapse_indices(training);
  std::vector<std::size_t> pool;
  std::set<std::string> patients;
  for (std::size_t i = 0; i < training.size(); ++i) {
    if (training[i].label == 0) {
      pool.push_back(i);
      patients.insert(training[i].patient_id);
    }
  }
  if (pool.size() < s.relapse.size()) throw InsufficientDonorsError();
  s.pool_patients.assign(patients.begin(), patients.end());
  sample_pool(s, training, pool);
  return s;
}

TrainingSubset build_full_set(std::span<const data::ObservationWindow> training) {
  TrainingSubset s;
  s.kind = SubsetKind::full;
  s.relapse = relapse_indices(training);
  std::set<std::string> patients;
  for (std::size_t i = 0; i < training.size(); ++i) {
    if (training[i].label == 0) {
      s.nonrelapse.push_back(i);
      patients.insert(training[i].patient_id);
    }
  }
  s.pool_patients.assign(patients.begin(), patients.end());
  s.donor_patients = s.pool_patients;
  return s;
}

double mean_donor_distance(const TrainingSubset& subset, const SimilarityRanking& ranking) {
  if (subset.donor_patients.empty()) throw std::invalid_argument("mean_donor_distance: subset has no donors");
  double total = 0.0;
  for (const auto& id : subset.donor_patients) total += ranking.distance_of(id);
  return total / static_cast<double>(subset.donor_patients.size());
}

}  // namespace relapse::personalization
