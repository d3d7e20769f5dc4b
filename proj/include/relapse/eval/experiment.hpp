#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relapse/data/days.hpp"
#include "relapse/data/windows.hpp"
#include "relapse/eval/metrics.hpp"
#include "relapse/models/anomaly.hpp"
#include "relapse/models/autoencoder.hpp"
#include "relapse/models/forest.hpp"
#include "relapse/models/relapse_net.hpp"
#include "relapse/personalization/subsets.hpp"

namespace relapse::eval {

enum class ModelFamily { rpnet, autoenc, rf };
enum class PersonalizationMode { none, random, metric, stratified };

ModelFamily parse_model_family(const std::string& s);
std::string to_string(ModelFamily m);
PersonalizationMode parse_personalization(const std::string& s);
std::string to_string(PersonalizationMode p);

struct ExperimentSettings {
  ModelFamily model = ModelFamily::rpnet;
  PersonalizationMode personalization = PersonalizationMode::metric;
  personalization::Metric metric = personalization::Metric::sfs;
  personalization::Stratum stratum = personalization::Stratum::closest;
  std::vector<data::Modality> modalities = data::all_modalities();
  data::WindowConfig windows;
  models::RelapseNetConfig rpnet;
  models::AutoencoderConfig autoenc;
  models::WindowAggregation aggregation = models::WindowAggregation::mean;
  models::ForestConfig forest;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::size_t threads = 1;
  double relapse_test_fraction = 0.2;
  // Restrict evaluation to these held-out patients (empty = every patient).
  std::vector<std::string> test_patients;
  // When set, every trained model is written here.
  std::optional<std::string> model_dir;

  void validate() const;
};

struct Fold {
  std::size_t index = 0;
  std::size_t test_patient = 0;
  std::string test_patient_id;
  std::vector<std::size_t> train_patients;
};

// One fold per patient; throws std::invalid_argument for fewer than 2 patients.
std::vector<Fold> lopo_folds(const data::Cohort& cohort);

// Cohort-wide state shared read-only by every fold task.
struct PreparedCohort {
  const data::Cohort* cohort = nullptr;
  std::vector<data::PatientDays> raw_days;
  std::vector<data::DimMedians> own_medians;
  data::WindowSet windows;
  std::vector<std::vector<std::size_t>> windows_by_patient;  // indices into windows.windows
  std::vector<std::size_t> dims;                             // selected 144-vector columns

  std::size_t input_dim() const { return dims.size(); }
};

PreparedCohort prepare_cohort(const data::Cohort& cohort, const ExperimentSettings& settings);

// Everything a fold task builds before training, exposed for diagnostics and
// leakage checks.
struct FoldData {
  std::vector<data::ObservationWindow> training;  // all windows of training patients
  std::vector<data::ObservationWindow> test;      // held-out windows, date order
  personalization::TrainingSubset subset;
  personalization::SimilarityRanking ranking;
  data::Normalizer normalizer;
  std::vector<std::string> normalizer_patients;
  std::vector<std::optional<data::PatientDays>> normalized;  // indexed by cohort patient
};

// Raises LeakageError if any subset window or normalizer day belongs to the
// held-out patient. Throws personalization::NoPositivesError /
// InsufficientDonorsError when a subset cannot be built.
FoldData prepare_fold(const PreparedCohort& prepared, const Fold& fold, const ExperimentSettings& settings,
                      std::uint64_t subset_seed);

FoldResult run_fold(const PreparedCohort& prepared, const Fold& fold, const ExperimentSettings& settings,
                    std::size_t seed_index);

struct SkippedFold {
  std::uint64_t seed = 0;
  std::size_t fold = 0;
  std::string patient_id;
  std::string reason;
};

struct SeedMetrics {
  std::uint64_t seed = 0;
  ConfusionCounts counts;
  double f2 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::optional<double> per_patient_f2;
  ConfusionCounts relapse_test_counts;
  double relapse_test_f2 = 0.0;
  std::size_t evaluated_folds = 0;  // folds with at least one prediction
};

struct MetricsReport {
  std::vector<SeedMetrics> per_seed;
  double mean_f2 = 0.0;
  double sd_f2 = 0.0;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  std::optional<double> mean_per_patient_f2;
  double mean_relapse_test_f2 = 0.0;
  std::vector<SkippedFold> skipped;
};

// Derived purely from fold results; recomputing it from stored predictions
// yields the same numbers.
MetricsReport compute_report(const std::vector<std::vector<FoldResult>>& by_seed,
                             const std::vector<std::uint64_t>& seeds, double relapse_test_fraction);

struct ExperimentResult {
  std::vector<std::vector<FoldResult>> folds;  // [seed index][fold order]
  MetricsReport report;
};

// Runs every (seed, fold) task, optionally in parallel. Results are written to
// preallocated slots, so output is independent of the worker count.
ExperimentResult run_experiment(const data::Cohort& cohort, const ExperimentSettings& settings);

}  // namespace relapse::eval
