#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "relapse/data/types.hpp"

namespace relapse::eval {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  void add(bool prediction, int label);
  std::size_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  bool operator==(const ConfusionCounts&) const = default;
};

double precision(const ConfusionCounts& c);
double recall(const ConfusionCounts& c);
// 5PR / (4P + R), 0 when tp = 0.
double f2_score(const ConfusionCounts& c);

struct WeeklyPrediction {
  data::Date window_start{};
  data::Date week_start{};  // target week
  double probability = 0.0;
  bool prediction = false;
  int label = 0;
};

struct FoldResult {
  std::size_t fold = 0;
  std::string test_patient_id;
  std::size_t seed_index = 0;
  std::uint64_t seed = 0;
  std::vector<WeeklyPrediction> predictions;  // date order
  std::vector<std::string> donor_patients;
  std::vector<std::string> normalizer_patients;
  std::size_t training_windows = 0;
  std::size_t training_positives = 0;
  double mean_donor_distance = std::numeric_limits<double>::quiet_NaN();
  bool skipped = false;
  std::string skip_reason;
};

ConfusionCounts counts_of(const FoldResult& fold);
ConfusionCounts pooled_counts(std::span<const FoldResult> folds);

// A relapse patient is one whose held-out windows include a positive label.
bool is_relapse_patient(const FoldResult& fold);

// Unweighted mean of per-patient F2 over relapse patients. Throws
// std::invalid_argument when no fold belongs to a relapse patient.
double per_patient_f2(std::span<const FoldResult> folds);

// Keeps every positive window of relapse patients plus a seeded uniform sample
// of max(1, round(fraction * n_negative)) negative windows per relapse patient.
// Non-relapse patients are dropped.
std::vector<FoldResult> build_relapse_test_set(std::span<const FoldResult> folds, double fraction, std::uint64_t seed);

}  // namespace relapse::eval
