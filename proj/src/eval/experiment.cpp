#include "relapse/eval/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "relapse/errors.hpp"
#include "relapse/nn/param_io.hpp"
#include "relapse/rng.hpp"

namespace relapse::eval {

namespace {
constexpr std::uint64_t kSubsetPurpose = 1;
constexpr std::uint64_t kModelPurpose = 2;
constexpr std::uint64_t kRelapseTestPurpose = 3;
}  // namespace

ModelFamily parse_model_family(const std::string& s) {
  if (s == "rpnet") return ModelFamily::rpnet;
  if (s == "autoenc") return ModelFamily::autoenc;
  if (s == "rf") return ModelFamily::rf;
  throw UsageError("unknown model '" + s + "' (expected rpnet|autoenc|rf)");
}

std::string to_string(ModelFamily m) {
  switch (m) {
    case ModelFamily::rpnet: return "rpnet";
    case ModelFamily::autoenc: return "autoenc";
    case ModelFamily::rf: return "rf";
  }
  return "?";
}

PersonalizationMode parse_personalization(const std::string& s) {
  if (s == "none") return PersonalizationMode::none;
  if (s == "random") return PersonalizationMode::random;
  if (s == "metric") return PersonalizationMode::metric;
  if (s == "stratified") return PersonalizationMode::stratified;
  throw UsageError("unknown personalization '" + s + "' (expected none|random|metric|stratified)");
}

std::string to_string(PersonalizationMode p) {
  switch (p) {
    case PersonalizationMode::none: return "none";
    case PersonalizationMode::random: return "random";
    case PersonalizationMode::metric: return "metric";
    case PersonalizationMode::stratified: return "stratified";
  }
  return "?";
}

void ExperimentSettings::validate() const {
  if (seeds.empty()) throw UsageError("at least one seed is required");
  if (modalities.empty()) throw UsageError("modality subset must be non-empty");
  if (model != ModelFamily::rpnet && rpnet.loss == nn::LossKind::soft_f2) {
    throw UsageError("the F2 loss applies only to the rpnet model");
  }
  if (!(relapse_test_fraction > 0.0 && relapse_test_fraction <= 1.0)) {
    throw UsageError("relapse test fraction must be in (0,1]");
  }
  windows.validate();
  rpnet.validate();
  forest.validate();
}

std::vector<Fold> lopo_folds(const data::Cohort& cohort) {
  const std::size_t n = cohort.patients.size();
  if (n < 2) throw std::invalid_argument("leave-one-patient-out needs at least 2 patients");
  std::vector<Fold> folds(n);
  for (std::size_t i = 0; i < n; ++i) {
    folds[i].index = i;
    folds[i].test_patient = i;
    folds[i].test_patient_id = cohort.patients[i].patient_id;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) folds[i].train_patients.push_back(j);
    }
  }
  return folds;
}

PreparedCohort prepare_cohort(const data::Cohort& cohort, const ExperimentSettings& settings) {
  PreparedCohort p;
  p.cohort = &cohort;
  p.raw_days = data::build_day_vectors(cohort);
  for (const auto& d : p.raw_days) p.own_medians.push_back(data::patient_medians(d));
  p.windows = data::make_windows(p.raw_days, cohort, settings.windows);
  p.windows_by_patient.resize(cohort.patients.size());
  for (std::size_t i = 0; i < p.windows.windows.size(); ++i) {
    p.windows_by_patient[p.windows.windows[i].patient].push_back(i);
  }
  p.dims = data::modality_dims(settings.modalities);
  return p;
}

FoldData prepare_fold(const PreparedCohort& prepared, const Fold& fold, const ExperimentSettings& settings,
                      std::uint64_t subset_seed) {
  const data::Cohort& cohort = *prepared.cohort;
  FoldData fd;
  for (std::size_t p : fold.train_patients) {
    if (p == fold.test_patient) throw LeakageError("fold lists the test patient as a training patient");
    for (std::size_t w : prepared.windows_by_patient[p]) fd.training.push_back(prepared.windows.windows[w]);
  }
  for (std::size_t w : prepared.windows_by_patient[fold.test_patient]) fd.test.push_back(prepared.windows.windows[w]);

  std::vector<data::PatientProfile> candidates;
  for (std::size_t p : fold.train_patients) candidates.push_back(cohort.patients[p]);
  const auto& test_profile = cohort.patients[fold.test_patient];
  const bool needs_ranking = settings.personalization == PersonalizationMode::metric ||
                             settings.personalization == PersonalizationMode::stratified;
  try {
    fd.ranking = personalization::rank_patients(test_profile, candidates, settings.metric);
  } catch (const DataError&) {
    if (needs_ranking) throw;
  }

  switch (settings.personalization) {
    case PersonalizationMode::metric:
      fd.subset = personalization::build_personalized_subset(fd.training, fd.ranking, subset_seed);
      break;
    case PersonalizationMode::stratified:
      fd.subset = personalization::distance_stratified_subset(fd.training, fd.ranking, settings.stratum, subset_seed);
      break;
    case PersonalizationMode::random:
      fd.subset = personalization::build_random_subset(fd.training, subset_seed);
      break;
    case PersonalizationMode::none:
      fd.subset = personalization::build_full_set(fd.training);
      break;
  }

  // Structural leakage guard: every selected window and every normalizer day
  // must come from a training patient.
  const auto selected = fd.subset.all();
  std::set<std::size_t> patients;
  for (std::size_t i : selected) {
    const auto& w = fd.training.at(i);
    if (w.patient == fold.test_patient || w.patient_id == fold.test_patient_id) {
      throw LeakageError("training subset contains a window of test patient '" + fold.test_patient_id + "'");
    }
    patients.insert(w.patient);
  }

  std::vector<const data::PatientDays*> train_days;
  for (std::size_t p : fold.train_patients) train_days.push_back(&prepared.raw_days[p]);
  const data::DimMedians reference = data::reference_stats(train_days);

  std::vector<std::optional<data::PatientDays>> imputed(cohort.patients.size());
  for (std::size_t p : patients) {
    imputed[p] = data::impute_missing(prepared.raw_days[p], prepared.own_medians[p], reference);
  }
  imputed[fold.test_patient] =
      data::impute_missing(prepared.raw_days[fold.test_patient], prepared.own_medians[fold.test_patient], reference);

  std::set<std::pair<std::size_t, std::size_t>> day_keys;
  for (std::size_t i : selected) {
    const auto& w = fd.training[i];
    for (std::size_t d = 0; d < w.length; ++d) day_keys.insert({w.patient, w.first_day + d});
  }
  std::vector<const data::DayVector*> norm_days;
  std::set<std::string> norm_patients;
  for (const auto& [p, d] : day_keys) {
    if (p == fold.test_patient) throw LeakageError("normalizer fit includes test patient '" + fold.test_patient_id + "'");
    norm_days.push_back(&imputed[p]->days[d]);
    norm_patients.insert(cohort.patients[p].patient_id);
  }
  fd.normalizer = data::fit_normalizer(norm_days);
  fd.normalizer_patients.assign(norm_patients.begin(), norm_patients.end());
  fd.normalizer.fitted_on = std::to_string(norm_days.size()) + " days from " +
                            std::to_string(fd.normalizer_patients.size()) + " training patients";

  fd.normalized.resize(cohort.patients.size());
  for (std::size_t p = 0; p < imputed.size(); ++p) {
    if (!imputed[p]) continue;
    data::PatientDays out = std::move(*imputed[p]);
    for (auto& day : out.days) fd.normalizer.apply_in_place(day.values);
    fd.normalized[p] = std::move(out);
  }
  return fd;
}

namespace {

std::string model_path(const ExperimentSettings& s, std::uint64_t seed, std::size_t fold) {
  return (std::filesystem::path(*s.model_dir) /
          (to_string(s.model) + "_seed" + std::to_string(seed) + "_fold" + std::to_string(fold) + ".txt"))
      .string();
}

Matrix input_of(const FoldData& fd, const data::ObservationWindow& w, const std::vector<std::size_t>& dims) {
  return data::window_input(*fd.normalized[w.patient], w, dims);
}

}  // namespace

FoldResult run_fold(const PreparedCohort& prepared, const Fold& fold, const ExperimentSettings& settings,
                    std::size_t seed_index) {
  const std::uint64_t seed = settings.seeds.at(seed_index);
  FoldResult r;
  r.fold = fold.index;
  r.test_patient_id = fold.test_patient_id;
  r.seed_index = seed_index;
  r.seed = seed;

  FoldData fd;
  try {
    fd = prepare_fold(prepared, fold, settings, derive_seed(seed, {fold.index, kSubsetPurpose}));
  } catch (const personalization::NoPositivesError& e) {
    r.skipped = true;
    r.skip_reason = e.what();
    return r;
  } catch (const personalization::InsufficientDonorsError& e) {
    r.skipped = true;
    r.skip_reason = e.what();
    return r;
  }
  r.donor_patients = fd.subset.donor_patients;
  r.normalizer_patients = fd.normalizer_patients;
  const auto selected = fd.subset.all();
  r.training_windows = selected.size();
  r.training_positives = fd.subset.relapse.size();
  if (!fd.ranking.ranked.empty() && !fd.subset.donor_patients.empty()) {
    r.mean_donor_distance = personalization::mean_donor_distance(fd.subset, fd.ranking);
  }

  const auto& dims = prepared.dims;
  const std::uint64_t model_seed = derive_seed(seed, {fold.index, kModelPurpose});
  std::vector<double> probs;
  std::vector<bool> binary;

  switch (settings.model) {
    case ModelFamily::rpnet: {
      std::vector<Matrix> inputs;
      std::vector<double> labels;
      for (std::size_t i : selected) {
        inputs.push_back(input_of(fd, fd.training[i], dims));
        labels.push_back(fd.training[i].label);
      }
      auto cfg = settings.rpnet;
      cfg.seed = model_seed;
      auto model = models::train_relapseprednet(inputs, labels, cfg);
      model.normalizer = fd.normalizer;
      model.dims = dims;
      std::vector<Matrix> test_inputs;
      for (const auto& w : fd.test) test_inputs.push_back(input_of(fd, w, dims));
      probs = models::predict_windows(model, test_inputs);
      for (double p : probs) binary.push_back(model.predict_label(p));
      if (settings.model_dir) nn::save_param_file(model_path(settings, seed, fold.index), models::to_param_file(model));
      break;
    }
    case ModelFamily::autoenc: {
      std::set<std::pair<std::size_t, std::size_t>> healthy_keys;
      std::vector<Matrix> inputs;
      std::vector<int> labels;
      for (std::size_t i : selected) {
        const auto& w = fd.training[i];
        inputs.push_back(input_of(fd, w, dims));
        labels.push_back(w.label);
        if (w.label == 0) {
          for (std::size_t d = 0; d < w.length; ++d) healthy_keys.insert({w.patient, w.first_day + d});
        }
      }
      std::vector<std::vector<double>> healthy;
      for (const auto& [p, d] : healthy_keys) {
        const auto& v = fd.normalized[p]->days[d].values;
        std::vector<double> row(dims.size());
        for (std::size_t k = 0; k < dims.size(); ++k) row[k] = v[dims[k]];
        healthy.push_back(std::move(row));
      }
      auto cfg = settings.autoenc;
      cfg.input_dim = dims.size();
      cfg.seed = model_seed;
      auto ae = models::train_autoencoder(healthy, cfg);
      auto det = models::fit_anomaly_detector(std::move(ae), healthy, inputs, labels, settings.aggregation);
      for (const auto& w : fd.test) {
        const auto pred = det.predict(input_of(fd, w, dims));
        probs.push_back(pred.probability);
        binary.push_back(pred.binary);
      }
      if (settings.model_dir) {
        nn::ParamFile f;
        f.set_meta("family", "autoenc");
        f.set_meta("seed", std::to_string(model_seed));
        f.set_meta("normalizer_digest", fd.normalizer.digest());
        f.set_meta("threshold", nn::format_double(det.threshold.threshold));
        f.set_meta("scale", nn::format_double(det.scale));
        models::store_autoencoder(f, det.encoder);
        f.add_tensor("healthy.mean", Matrix::column(det.healthy.mean));
        f.add_tensor("healthy.cov_inverse", det.healthy.inverse);
        nn::save_param_file(model_path(settings, seed, fold.index), f);
      }
      break;
    }
    case ModelFamily::rf: {
      std::vector<std::vector<double>> x;
      std::vector<int> y;
      for (std::size_t i : selected) {
        x.push_back(data::window_time_mean(*fd.normalized[fd.training[i].patient], fd.training[i], dims));
        y.push_back(fd.training[i].label);
      }
      auto cfg = settings.forest;
      cfg.seed = model_seed;
      auto forest = models::train_forest(x, y, cfg);
      for (const auto& w : fd.test) {
        const double p = forest.predict_proba(data::window_time_mean(*fd.normalized[w.patient], w, dims));
        probs.push_back(p);
        binary.push_back(p > 0.5);
      }
      if (settings.model_dir) {
        std::ofstream out(model_path(settings, seed, fold.index));
        models::write_forest(out, forest, fd.normalizer.digest());
      }
      break;
    }
  }

  for (std::size_t i = 0; i < fd.test.size(); ++i) {
    WeeklyPrediction p;
    p.window_start = fd.test[i].window_start;
    p.week_start = fd.test[i].target_week_start;
    p.probability = probs[i];
    p.prediction = binary[i];
    p.label = fd.test[i].label;
    r.predictions.push_back(p);
  }
  return r;
}

MetricsReport compute_report(const std::vector<std::vector<FoldResult>>& by_seed,
                             const std::vector<std::uint64_t>& seeds, double relapse_test_fraction) {
  if (by_seed.size() != seeds.size()) throw std::invalid_argument("compute_report: seed list mismatch");
  MetricsReport rep;
  std::vector<double> f2s, pp;
  for (std::size_t s = 0; s < by_seed.size(); ++s) {
    SeedMetrics m;
    m.seed = seeds[s];
    for (const auto& f : by_seed[s]) {
      if (f.skipped) {
        rep.skipped.push_back({seeds[s], f.fold, f.test_patient_id, f.skip_reason});
      } else if (!f.predictions.empty()) {
        ++m.evaluated_folds;
      }
    }
    m.counts = pooled_counts(by_seed[s]);
    m.f2 = f2_score(m.counts);
    m.precision = precision(m.counts);
    m.recall = recall(m.counts);
    try {
      m.per_patient_f2 = per_patient_f2(by_seed[s]);
      pp.push_back(*m.per_patient_f2);
    } catch (const std::invalid_argument&) {
    }
    const auto rts = build_relapse_test_set(by_seed[s], relapse_test_fraction, derive_seed(seeds[s], {kRelapseTestPurpose}));
    m.relapse_test_counts = pooled_counts(rts);
    m.relapse_test_f2 = f2_score(m.relapse_test_counts);
    f2s.push_back(m.f2);
    rep.mean_precision += m.precision;
    rep.mean_recall += m.recall;
    rep.mean_relapse_test_f2 += m.relapse_test_f2;
    rep.per_seed.push_back(m);
  }
  const double n = static_cast<double>(by_seed.size());
  if (by_seed.empty()) return rep;
  for (double f : f2s) rep.mean_f2 += f;
  rep.mean_f2 /= n;
  for (double f : f2s) rep.sd_f2 += (f - rep.mean_f2) * (f - rep.mean_f2);
  rep.sd_f2 = f2s.size() > 1 ? std::sqrt(rep.sd_f2 / (n - 1.0)) : 0.0;
  rep.mean_precision /= n;
  rep.mean_recall /= n;
  rep.mean_relapse_test_f2 /= n;
  if (!pp.empty()) {
    double t = 0.0;
    for (double v : pp) t += v;
    rep.mean_per_patient_f2 = t / static_cast<double>(pp.size());
  }
  return rep;
}

ExperimentResult run_experiment(const data::Cohort& cohort, const ExperimentSettings& settings) {
  settings.validate();
  const PreparedCohort prepared = prepare_cohort(cohort, settings);
  std::vector<Fold> folds = lopo_folds(cohort);
  if (!settings.test_patients.empty()) {
    std::vector<Fold> kept;
    for (const auto& id : settings.test_patients) {
      auto it = std::find_if(folds.begin(), folds.end(), [&](const Fold& f) { return f.test_patient_id == id; });
      if (it == folds.end()) throw UsageError("unknown test patient '" + id + "'");
      kept.push_back(*it);
    }
    folds = std::move(kept);
  }
  if (settings.model_dir) std::filesystem::create_directories(*settings.model_dir);

  const std::size_t n_tasks = settings.seeds.size() * folds.size();
  ExperimentResult result;
  result.folds.assign(settings.seeds.size(), std::vector<FoldResult>(folds.size()));
  std::vector<std::exception_ptr> errors(n_tasks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < n_tasks; t = next++) {
      const std::size_t s = t / folds.size(), f = t % folds.size();
      try {
        result.folds[s][f] = run_fold(prepared, folds[f], settings, s);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(settings.threads, n_tasks));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  result.report = compute_report(result.folds, settings.seeds, settings.relapse_test_fraction);
  return result;
}

}  // namespace relapse::eval
