#include "relapse/eval/report_io.hpp"

#include <charconv>
#include <istream>
#include <map>
#include <ostream>

#include "relapse/data/csv.hpp"
#include "relapse/errors.hpp"

namespace relapse::eval {

std::string format_probability(double p) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, p);
  return std::string(buf, res.ptr);
}

std::vector<PredictionRow> prediction_rows(const std::vector<std::vector<FoldResult>>& by_seed) {
  std::vector<PredictionRow> rows;
  for (const auto& seed_folds : by_seed) {
    for (const auto& f : seed_folds) {
      if (f.skipped) continue;
      for (const auto& p : f.predictions) {
        rows.push_back({f.test_patient_id, p.week_start, p.probability, p.prediction ? 1 : 0, p.label, f.seed, f.fold});
      }
    }
  }
  return rows;
}

void write_predictions_csv(std::ostream& out, const std::vector<PredictionRow>& rows) {
  out << kPredictionsHeader << "\n";
  for (const auto& r : rows) {
    out << r.patient_id << "," << data::format_date(r.week_start) << "," << format_probability(r.probability) << ","
        << r.prediction << "," << r.label << "," << r.seed << "," << r.fold << "\n";
  }
}

std::vector<PredictionRow> read_predictions_csv(std::istream& in, const std::string& source) {
  data::CsvReader reader(in, source);
  reader.expect_header(kPredictionsHeader);
  std::vector<PredictionRow> rows;
  while (auto line = reader.next()) {
    const auto& f = *line;
    if (f.size() != 7) reader.fail("expected 7 fields, got " + std::to_string(f.size()));
    PredictionRow r;
    r.patient_id = f[0];
    try {
      r.week_start = data::parse_date(f[1]);
    } catch (const DataError& e) {
      reader.fail(e.what());
    }
    r.probability = data::parse_number(f[2], reader, "probability");
    if (!(r.probability >= 0.0 && r.probability <= 1.0)) reader.fail("probability outside [0,1]");
    if (f[3] != "0" && f[3] != "1") reader.fail("prediction must be 0 or 1");
    if (f[4] != "0" && f[4] != "1") reader.fail("label must be 0 or 1");
    r.prediction = f[3] == "1";
    r.label = f[4] == "1";
    try {
      r.seed = std::stoull(f[5]);
      r.fold = std::stoul(f[6]);
    } catch (const std::exception&) {
      reader.fail("seed and fold must be non-negative integers");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<std::vector<FoldResult>> folds_from_rows(const std::vector<PredictionRow>& rows,
                                                     std::vector<std::uint64_t>& seeds) {
  std::map<std::uint64_t, std::size_t> seed_slot;
  for (std::uint64_t s : seeds) seed_slot.emplace(s, seed_slot.size());
  std::vector<std::map<std::size_t, FoldResult>> grouped(seeds.size());
  for (const auto& r : rows) {
    auto it = seed_slot.find(r.seed);
    if (it == seed_slot.end()) {
      it = seed_slot.emplace(r.seed, seeds.size()).first;
      seeds.push_back(r.seed);
      grouped.emplace_back();
    }
    auto& fold = grouped[it->second][r.fold];
    fold.fold = r.fold;
    fold.test_patient_id = r.patient_id;
    fold.seed = r.seed;
    fold.seed_index = it->second;
    fold.predictions.push_back({r.week_start, r.week_start, r.probability, r.prediction != 0, r.label});
  }
  std::vector<std::vector<FoldResult>> out;
  for (auto& g : grouped) {
    std::vector<FoldResult> v;
    for (auto& [k, f] : g) v.push_back(std::move(f));
    out.push_back(std::move(v));
  }
  return out;
}

nlohmann::ordered_json counts_to_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

nlohmann::ordered_json report_to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["n_seeds"] = report.per_seed.size();
  nlohmann::ordered_json pooled;
  pooled["f2_mean"] = report.mean_f2;
  pooled["f2_sd"] = report.sd_f2;
  pooled["precision_mean"] = report.mean_precision;
  pooled["recall_mean"] = report.mean_recall;
  pooled["per_patient_f2_mean"] =
      report.mean_per_patient_f2 ? nlohmann::ordered_json(*report.mean_per_patient_f2) : nlohmann::ordered_json();
  pooled["relapse_test_set_f2_mean"] = report.mean_relapse_test_f2;
  j["pooled"] = pooled;
  auto seeds = nlohmann::ordered_json::array();
  for (const auto& s : report.per_seed) {
    nlohmann::ordered_json e;
    e["seed"] = s.seed;
    e["counts"] = counts_to_json(s.counts);
    e["f2"] = s.f2;
    e["precision"] = s.precision;
    e["recall"] = s.recall;
    e["per_patient_f2"] = s.per_patient_f2 ? nlohmann::ordered_json(*s.per_patient_f2) : nlohmann::ordered_json();
    e["relapse_test_set"] = {{"counts", counts_to_json(s.relapse_test_counts)}, {"f2", s.relapse_test_f2}};
    e["evaluated_folds"] = s.evaluated_folds;
    seeds.push_back(e);
  }
  j["per_seed"] = seeds;
  auto skipped = nlohmann::ordered_json::array();
  for (const auto& s : report.skipped) {
    skipped.push_back({{"seed", s.seed}, {"fold", s.fold}, {"patient_id", s.patient_id}, {"reason", s.reason}});
  }
  j["skipped_folds"] = skipped;
  return j;
}

void write_embeddings_csv(std::ostream& out, const std::vector<EmbeddingRow>& rows) {
  const std::size_t width = rows.empty() ? 0 : rows.front().values.size();
  out << "window_id,label";
  for (std::size_t k = 0; k < width; ++k) out << ",e" << k;
  out << "\n";
  for (const auto& r : rows) {
    if (r.values.size() != width) throw ShapeError("write_embeddings_csv: ragged embedding rows");
    out << r.window_id << "," << r.label;
    for (double v : r.values) out << "," << format_probability(v);
    out << "\n";
  }
}

std::vector<EmbeddingRow> read_embeddings_csv(std::istream& in, const std::string& source) {
  data::CsvReader reader(in, source);
  const auto header_line = reader.next();
  if (!header_line || header_line->size() < 2 || (*header_line)[0] != "window_id" || (*header_line)[1] != "label") {
    throw DataError(source + ": bad embeddings header");
  }
  const auto& header = *header_line;
  std::vector<EmbeddingRow> rows;
  while (auto line = reader.next()) {
    const auto& f = *line;
    if (f.size() != header.size()) reader.fail("embedding row width mismatch");
    EmbeddingRow r;
    r.window_id = f[0];
    r.label = f[1] == "1";
    for (std::size_t k = 2; k < f.size(); ++k) r.values.push_back(data::parse_number(f[k], reader, header[k]));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace relapse::eval
