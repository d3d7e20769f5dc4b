#include "relapse/personalization/similarity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "relapse/errors.hpp"

namespace relapse::personalization {

namespace {
constexpr std::array<Metric, 5> kScalarMetrics = {Metric::age, Metric::bprs, Metric::sfs, Metric::cdss, Metric::gpts};
}

Metric parse_metric(std::string_view name) {
  if (name == "age") return Metric::age;
  if (name == "bprs") return Metric::bprs;
  if (name == "sfs") return Metric::sfs;
  if (name == "cdss") return Metric::cdss;
  if (name == "gpts") return Metric::gpts;
  if (name == "combined") return Metric::combined;
  throw UsageError("unknown personalization metric '" + std::string(name) + "'");
}

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::age: return "age";
    case Metric::bprs: return "bprs";
    case Metric::sfs: return "sfs";
    case Metric::cdss: return "cdss";
    case Metric::gpts: return "gpts";
    case Metric::combined: return "combined";
  }
  return "?";
}

double metric_value(const data::PatientProfile& p, Metric m) {
  const std::optional<double>* v = nullptr;
  switch (m) {
    case Metric::age: return p.age;
    case Metric::bprs: v = &p.bprs; break;
    case Metric::sfs: v = &p.sfs; break;
    case Metric::cdss: v = &p.cdss; break;
    case Metric::gpts: v = &p.gpts; break;
    case Metric::combined: throw std::invalid_argument("metric_value: combined metric needs a cohort");
  }
  if (!v->has_value()) {
    throw DataError("patient '" + p.patient_id + "' has no " + std::string(to_string(m)) + " score");
  }
  return **v;
}

double combined_metric(const data::PatientProfile& p, std::span<const data::PatientProfile> cohort) {
  if (cohort.size() < 2) throw std::invalid_argument("combined_metric: cohort needs at least 2 patients");
  double total = 0.0;
  for (Metric m : kScalarMetrics) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& q : cohort) {
      const double v = metric_value(q, m);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double v = metric_value(p, m);
    total += hi > lo ? (v - lo) / (hi - lo) : 0.5;
  }
  return total / static_cast<double>(kScalarMetrics.size());
}

double metric_distance(const data::PatientProfile& a, const data::PatientProfile& b, Metric m,
                       std::span<const data::PatientProfile> cohort) {
  if (m == Metric::combined) return std::abs(combined_metric(a, cohort) - combined_metric(b, cohort));
  return std::abs(metric_value(a, m) - metric_value(b, m));
}

double SimilarityRanking::distance_of(std::string_view patient_id) const {
  for (const auto& r : ranked)
    if (r.patient_id == patient_id) return r.distance;
  throw std::out_of_range("patient '" + std::string(patient_id) + "' not in ranking");
}

SimilarityRanking rank_patients(const data::PatientProfile& test, std::span<const data::PatientProfile> candidates,
                                Metric metric) {
  if (candidates.empty()) throw std::invalid_argument("rank_patients: no candidates");
  SimilarityRanking out{test.patient_id, metric, {}};
  std::vector<data::PatientProfile> cohort;
  if (metric == Metric::combined) {
    cohort.assign(candidates.begin(), candidates.end());
    cohort.push_back(test);
  }
  std::vector<double> combined(candidates.size());
  double test_combined = 0.0;
  if (metric == Metric::combined) test_combined = combined_metric(test, cohort);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].patient_id == test.patient_id) {
      throw std::invalid_argument("rank_patients: candidates include the test patient");
    }
    const double d = metric == Metric::combined ? std::abs(combined_metric(candidates[i], cohort) - test_combined)
                                                : metric_distance(test, candidates[i], metric);
    out.ranked.push_back({candidates[i].patient_id, d});
  }
  std::sort(out.ranked.begin(), out.ranked.end(), [](const RankedPatient& a, const RankedPatient& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.patient_id < b.patient_id;
  });
  return out;
}

}  // namespace relapse::personalization
