#include "relapse/eval/diagnostics.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "relapse/errors.hpp"
#include "relapse/rng.hpp"

namespace relapse::eval {

double euclidean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("euclidean: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

Points minmax_normalize(std::span<const std::vector<double>> rows) {
  Points out(rows.begin(), rows.end());
  if (rows.empty()) return out;
  const std::size_t d = rows.front().size();
  for (std::size_t k = 0; k < d; ++k) {
    double lo = rows.front()[k], hi = lo;
    for (const auto& r : rows) {
      if (r.size() != d) throw ShapeError("minmax_normalize: ragged rows");
      lo = std::min(lo, r[k]);
      hi = std::max(hi, r[k]);
    }
    for (auto& r : out) r[k] = hi > lo ? (r[k] - lo) / (hi - lo) : 0.5;
  }
  return out;
}

ClassDistances class_distance_distributions(std::span<const std::vector<double>> features, std::span<const int> labels) {
  if (features.size() != labels.size()) throw ShapeError("class_distance_distributions: length mismatch");
  const Points x = minmax_normalize(features);
  std::vector<std::size_t> neg, pos;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] != 0 ? pos : neg).push_back(i);
  if (neg.empty() || pos.empty()) throw std::invalid_argument("class_distance_distributions: a class is empty");
  ClassDistances out;
  for (std::size_t a = 0; a < neg.size(); ++a) {
    for (std::size_t b = a + 1; b < neg.size(); ++b) out.intra.push_back(euclidean(x[neg[a]], x[neg[b]]));
  }
  for (std::size_t a : neg) {
    for (std::size_t b : pos) out.inter.push_back(euclidean(x[a], x[b]));
  }
  return out;
}

double silhouette_coefficient(std::span<const std::vector<double>> points, std::span<const int> labels) {
  if (points.size() != labels.size()) throw ShapeError("silhouette_coefficient: length mismatch");
  std::map<int, std::size_t> sizes;
  for (int l : labels) ++sizes[l];
  if (sizes.size() < 2) throw std::invalid_argument("silhouette_coefficient: need at least two clusters");
  const std::size_t n = points.size();
  double total = 0.0;
  std::map<int, double> sums;
  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[labels[i]] == 1) continue;
    for (auto& [k, v] : sums) v = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sums[labels[j]] += euclidean(points[i], points[j]);
    }
    const double a = sums[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [k, v] : sums) {
      if (k != labels[i]) b = std::min(b, v / static_cast<double>(sizes[k]));
    }
    const double m = std::max(a, b);
    if (m > 0.0) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

double separability_index(std::span<const std::vector<double>> points, std::span<const int> labels) {
  if (points.size() != labels.size()) throw ShapeError("separability_index: length mismatch");
  const std::size_t n = points.size();
  if (n < 2) throw std::invalid_argument("separability_index: need at least 2 points");
  std::size_t same = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = n;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = euclidean(points[i], points[j]);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    same += labels[best] == labels[i];
  }
  return static_cast<double>(same) / static_cast<double>(n);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("pearson: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) throw NumericError("zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double permutation_p_value(std::span<const double> x, std::span<const double> y, std::size_t permutations,
                           std::uint64_t seed) {
  const double observed = std::abs(pearson(x, y));
  std::vector<double> shuffled(y.begin(), y.end());
  Rng rng(seed);
  std::size_t count = 0;
  for (std::size_t p = 0; p < permutations; ++p) {
    rng.shuffle(shuffled);
    if (std::abs(pearson(x, shuffled)) >= observed - 1e-12) ++count;
  }
  return static_cast<double>(count + 1) / static_cast<double>(permutations + 1);
}

namespace {

struct PatientMeans {
  double dist = 0.0;
  double f2 = 0.0;
  std::size_t n = 0;
};

std::map<std::string, PatientMeans> per_patient_means(const ExperimentResult& res) {
  std::map<std::string, PatientMeans> out;
  for (const auto& seed_folds : res.folds) {
    for (const auto& f : seed_folds) {
      if (f.skipped || std::isnan(f.mean_donor_distance)) continue;
      auto& m = out[f.test_patient_id];
      m.dist += f.mean_donor_distance;
      m.f2 += f2_score(counts_of(f));
      ++m.n;
    }
  }
  for (auto& [id, m] : out) {
    m.dist /= static_cast<double>(m.n);
    m.f2 /= static_cast<double>(m.n);
  }
  return out;
}

}  // namespace

DistanceAnalysis sfs_distance_analysis(const data::Cohort& cohort, ExperimentSettings settings,
                                       std::span<const personalization::Stratum> strata, std::size_t permutations) {
  settings.metric = personalization::Metric::sfs;
  const PreparedCohort prepared = prepare_cohort(cohort, settings);
  std::vector<std::string> relapse_ids;
  for (std::size_t p = 0; p < cohort.patients.size(); ++p) {
    for (std::size_t w : prepared.windows_by_patient[p]) {
      if (prepared.windows.windows[w].label != 0) {
        relapse_ids.push_back(cohort.patients[p].patient_id);
        break;
      }
    }
  }
  if (relapse_ids.size() < 3) throw std::invalid_argument("distance analysis needs at least 3 relapse patients");
  settings.test_patients = relapse_ids;

  DistanceAnalysis out;
  settings.personalization = PersonalizationMode::random;
  const auto baseline = per_patient_means(run_experiment(cohort, settings));
  settings.personalization = PersonalizationMode::stratified;
  for (auto stratum : strata) {
    settings.stratum = stratum;
    const auto res = per_patient_means(run_experiment(cohort, settings));
    for (const auto& id : relapse_ids) {
      auto b = baseline.find(id);
      auto s = res.find(id);
      if (b == baseline.end() || s == res.end()) {
        out.warnings.push_back("patient " + id + " skipped for stratum " +
                               std::string(personalization::to_string(stratum)));
        continue;
      }
      out.records.push_back({id, stratum, s->second.dist, b->second.dist, s->second.f2, b->second.f2});
    }
  }
  std::vector<double> dx, dy;
  for (const auto& r : out.records) {
    dx.push_back(r.delta_dist());
    dy.push_back(r.delta_f2());
  }
  out.permutations = permutations;
  out.r = pearson(dx, dy);
  out.p = permutation_p_value(dx, dy, permutations, derive_seed(settings.seeds.front(), {0x9E57}));
  return out;
}

}  // namespace relapse::eval
