#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "relapse/eval/experiment.hpp"

namespace relapse::eval {

inline constexpr const char* kPredictionsHeader = "patient_id,week_start,probability,prediction,label,seed,fold";

struct PredictionRow {
  std::string patient_id;
  data::Date week_start{};
  double probability = 0.0;
  int prediction = 0;
  int label = 0;
  std::uint64_t seed = 0;
  std::size_t fold = 0;
};

std::vector<PredictionRow> prediction_rows(const std::vector<std::vector<FoldResult>>& by_seed);
void write_predictions_csv(std::ostream& out, const std::vector<PredictionRow>& rows);
std::vector<PredictionRow> read_predictions_csv(std::istream& in, const std::string& source);

// Regroups rows into [seed][fold] results (seeds in first-appearance order).
// Window starts are not stored in the CSV and come back as the week start.
std::vector<std::vector<FoldResult>> folds_from_rows(const std::vector<PredictionRow>& rows,
                                                     std::vector<std::uint64_t>& seeds);

nlohmann::ordered_json counts_to_json(const ConfusionCounts& c);
nlohmann::ordered_json report_to_json(const MetricsReport& report);

// Shortest round-trippable decimal form of a double.
std::string format_probability(double p);

struct EmbeddingRow {
  std::string window_id;
  int label = 0;
  std::vector<double> values;
};

void write_embeddings_csv(std::ostream& out, const std::vector<EmbeddingRow>& rows);
std::vector<EmbeddingRow> read_embeddings_csv(std::istream& in, const std::string& source);

}  // namespace relapse::eval
