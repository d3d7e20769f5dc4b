#include "relapse/cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "relapse/data/days.hpp"
#include "relapse/errors.hpp"
#include "relapse/eval/diagnostics.hpp"
#include "relapse/eval/report_io.hpp"
#include "relapse/rng.hpp"

namespace relapse::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

int run_guarded(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return kExitOk;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

OutputFile write_output(const std::string& dir, const std::string& name, const std::string& content) {
  const fs::path path = fs::path(dir) / name;
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  out.close();
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
  return {name, data::fnv1a_hex(content), content.size()};
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

json headline(const eval::MetricsReport& rep, bool relapse_test_set) {
  return {{"evaluation_set", relapse_test_set ? "relapse_test_set" : "full"},
          {"f2", relapse_test_set ? rep.mean_relapse_test_f2 : rep.mean_f2}};
}

void print_summary(std::ostream& out, const eval::MetricsReport& rep) {
  out << std::fixed << std::setprecision(4);
  out << "seeds: " << rep.per_seed.size() << "  skipped folds: " << rep.skipped.size() << "\n";
  out << "pooled F2 " << rep.mean_f2 << " (sd " << rep.sd_f2 << ")  precision " << rep.mean_precision << "  recall "
      << rep.mean_recall << "\n";
  if (rep.mean_per_patient_f2) out << "per-patient F2 (relapse patients) " << *rep.mean_per_patient_f2 << "\n";
  out << "relapse test set F2 " << rep.mean_relapse_test_f2 << "\n";
  out << std::defaultfloat;
}

}  // namespace

void write_manifest(const std::string& dir, const std::string& command, const std::string& config_digest,
                    const std::vector<OutputFile>& files) {
  json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["command"] = command;
  j["config_digest"] = config_digest;
  j["created_utc"] = utc_now();
  auto arr = json::array();
  for (const auto& f : files) arr.push_back({{"name", f.name}, {"fnv1a64", f.digest}, {"bytes", f.bytes}});
  j["files"] = arr;
  write_output(dir, "manifest.json", j.dump(2) + "\n");
}

void cmd_synth(const synth::CohortSpec& spec, const std::string& out_dir, std::ostream& out) {
  const auto csv = synth::generate_cohort(spec);
  std::vector<OutputFile> files;
  files.push_back(write_output(out_dir, "patients.csv", csv.patients));
  files.push_back(write_output(out_dir, "sensing.csv", csv.sensing));
  files.push_back(write_output(out_dir, "relapses.csv", csv.relapses));
  ExperimentConfig cfg;
  cfg.synthetic = spec;
  write_manifest(out_dir, "synth", config_digest(cfg), files);
  out << "wrote synthetic cohort (" << spec.n_patients << " patients, seed " << spec.seed << ") to " << out_dir << "\n";
}

data::CohortSummary cmd_validate(const std::string& patients, const std::string& sensing, const std::string& relapses,
                                 std::ostream& out) {
  const auto cohort = data::ingest_cohort_files(patients, sensing, relapses);
  const auto s = data::summarize(cohort);
  out << "patients: " << s.patients << "\n";
  out << "relapse patients: " << s.relapse_patients << "\n";
  out << "relapse instances: " << s.relapse_instances << "\n";
  out << "sensing rows: " << s.sensing_rows << "\n";
  out << "coverage: " << std::fixed << std::setprecision(4) << s.coverage << std::defaultfloat << "\n";
  return s;
}

void cmd_evaluate(ExperimentConfig cfg, std::ostream& out) {
  cfg.finalize();
  cfg.settings.threads = worker_count_from_env();
  const auto loaded = load_cohort(cfg);
  const auto result = eval::run_experiment(loaded.cohort, cfg.settings);

  std::ostringstream preds;
  eval::write_predictions_csv(preds, eval::prediction_rows(result.folds));
  std::vector<OutputFile> files;
  files.push_back(write_output(cfg.output_dir, "predictions.csv", preds.str()));

  const auto prepared = eval::prepare_cohort(loaded.cohort, cfg.settings);
  std::size_t positives = 0;
  for (const auto& w : prepared.windows.windows) positives += w.label != 0;
  json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["config"] = config_to_json(cfg);
  j["config_digest"] = config_digest(cfg);
  j["data"] = {{"digest", loaded.digest},
               {"patients", loaded.cohort.patients.size()},
               {"windows", prepared.windows.windows.size()},
               {"positive_windows", positives},
               {"dropped_low_coverage", prepared.windows.dropped_low_coverage},
               {"input_dim", prepared.input_dim()}};
  j["headline"] = headline(result.report, cfg.relapse_test_set);
  j["metrics"] = eval::report_to_json(result.report);
  j["digests"] = {{"predictions.csv", files.back().digest}};
  files.push_back(write_output(cfg.output_dir, "metrics.json", j.dump(2) + "\n"));
  if (cfg.settings.model_dir) {
    for (const auto& e : fs::directory_iterator(*cfg.settings.model_dir)) {
      const auto name = "models/" + e.path().filename().string();
      const auto content = read_file(e.path().string());
      files.push_back({name, data::fnv1a_hex(content), content.size()});
    }
    std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  }
  write_manifest(cfg.output_dir, "evaluate", config_digest(cfg), files);
  for (const auto& s : result.report.skipped) {
    out << "warning: seed " << s.seed << " fold " << s.fold << " (" << s.patient_id << ") skipped: " << s.reason << "\n";
  }
  print_summary(out, result.report);
  out << "headline (" << j["headline"]["evaluation_set"].get<std::string>() << ") F2 "
      << j["headline"]["f2"].get<double>() << "\n";
}

void cmd_fuse(const std::string& predictions_a, const std::string& predictions_b, models::FusionScheme scheme,
              const std::string& out_dir, double relapse_test_fraction, std::ostream& out) {
  std::ifstream fa(predictions_a), fb(predictions_b);
  if (!fa) throw DataError(predictions_a + ": cannot open file");
  if (!fb) throw DataError(predictions_b + ": cannot open file");
  const auto a = eval::read_predictions_csv(fa, predictions_a);
  const auto b = eval::read_predictions_csv(fb, predictions_b);
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i <= n; ++i) {
    if (i == n) {
      if (a.size() != b.size()) {
        throw DataError("prediction files diverge at data row " + std::to_string(n + 1) + ": one file has " +
                        std::to_string(a.size()) + " rows, the other " + std::to_string(b.size()));
      }
      break;
    }
    const auto& x = a[i];
    const auto& y = b[i];
    if (x.patient_id != y.patient_id || x.week_start != y.week_start || x.seed != y.seed || x.fold != y.fold) {
      throw DataError("prediction files diverge at data row " + std::to_string(i + 1) + ": (" + x.patient_id + ", " +
                      data::format_date(x.week_start) + ", seed " + std::to_string(x.seed) + ") vs (" + y.patient_id +
                      ", " + data::format_date(y.week_start) + ", seed " + std::to_string(y.seed) + ")");
    }
    if (x.label != y.label) {
      throw DataError("prediction files disagree on the label at data row " + std::to_string(i + 1));
    }
  }
  std::vector<eval::PredictionRow> fused = a;
  for (std::size_t i = 0; i < fused.size(); ++i) {
    fused[i].probability = models::fuse_probabilities(a[i].probability, b[i].probability, scheme);
    fused[i].prediction = fused[i].probability > 0.5 ? 1 : 0;
  }
  std::ostringstream preds;
  eval::write_predictions_csv(preds, fused);
  std::vector<OutputFile> files;
  files.push_back(write_output(out_dir, "predictions.csv", preds.str()));
  std::vector<std::uint64_t> seeds;
  const auto folds = eval::folds_from_rows(fused, seeds);
  const auto rep = eval::compute_report(folds, seeds, relapse_test_fraction);
  json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["fusion"] = {{"scheme", models::to_string(scheme)},
                 {"inputs", {{{"path", predictions_a}, {"fnv1a64", data::fnv1a_hex(read_file(predictions_a))}},
                             {{"path", predictions_b}, {"fnv1a64", data::fnv1a_hex(read_file(predictions_b))}}}},
                 {"relapse_test_fraction", relapse_test_fraction}};
  j["headline"] = headline(rep, false);
  j["metrics"] = eval::report_to_json(rep);
  j["digests"] = {{"predictions.csv", files.back().digest}};
  files.push_back(write_output(out_dir, "metrics.json", j.dump(2) + "\n"));
  write_manifest(out_dir, "fuse", data::fnv1a_hex(j["fusion"].dump()), files);
  out << "fused " << fused.size() << " predictions with " << models::to_string(scheme) << "\n";
  print_summary(out, rep);
}

namespace {

struct DistanceSummary {
  std::vector<double> values;
  json to_json() const {
    json j;
    j["count"] = values.size();
    if (values.empty()) return j;
    std::vector<double> v = values;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    j["mean"] = mean;
    j["median"] = models::quantile(v, 0.5);
    j["min"] = *std::min_element(v.begin(), v.end());
    j["max"] = *std::max_element(v.begin(), v.end());
    return j;
  }
};

std::string window_id(const data::ObservationWindow& w) {
  return w.patient_id + "@" + data::format_date(w.window_start);
}

}  // namespace

void cmd_diagnose(ExperimentConfig cfg, std::ostream& out) {
  cfg.finalize();
  cfg.settings.threads = worker_count_from_env();
  const auto loaded = load_cohort(cfg);
  const auto& cohort = loaded.cohort;
  const auto prepared = eval::prepare_cohort(cohort, cfg.settings);
  const auto folds = eval::lopo_folds(cohort);
  const std::uint64_t seed0 = cfg.settings.seeds.front();

  std::vector<const eval::Fold*> relapse_folds;
  for (const auto& f : folds) {
    for (std::size_t w : prepared.windows_by_patient[f.test_patient]) {
      if (prepared.windows.windows[w].label != 0) {
        relapse_folds.push_back(&f);
        break;
      }
    }
  }
  if (relapse_folds.empty()) throw DataError("diagnose: cohort has no positive windows");

  json diag;
  diag["tool"] = kToolName;
  diag["version"] = kToolVersion;
  diag["config"] = config_to_json(cfg);
  diag["data_digest"] = loaded.digest;

  // Class-distance distributions under both subsampling modes, pooled over relapse-patient folds.
  std::ostringstream distances;
  distances << "mode,test_patient_id,kind,distance\n";
  json modes;
  for (auto mode : {eval::PersonalizationMode::metric, eval::PersonalizationMode::random}) {
    auto settings = cfg.settings;
    settings.personalization = mode;
    const std::string name = mode == eval::PersonalizationMode::metric ? "personalized" : "random";
    DistanceSummary intra, inter;
    for (const auto* f : relapse_folds) {
      eval::FoldData fd;
      try {
        fd = eval::prepare_fold(prepared, *f, settings, derive_seed(seed0, {f->index, 1}));
      } catch (const personalization::NoPositivesError&) {
        continue;
      } catch (const personalization::InsufficientDonorsError&) {
        continue;
      }
      std::vector<std::vector<double>> feats;
      std::vector<int> labels;
      for (std::size_t i : fd.subset.all()) {
        const auto& w = fd.training[i];
        feats.push_back(data::window_time_mean(*fd.normalized[w.patient], w, prepared.dims));
        labels.push_back(w.label);
      }
      const auto cd = eval::class_distance_distributions(feats, labels);
      for (double d : cd.intra) distances << name << "," << f->test_patient_id << ",intra," << eval::format_probability(d) << "\n";
      for (double d : cd.inter) distances << name << "," << f->test_patient_id << ",inter," << eval::format_probability(d) << "\n";
      intra.values.insert(intra.values.end(), cd.intra.begin(), cd.intra.end());
      inter.values.insert(inter.values.end(), cd.inter.begin(), cd.inter.end());
    }
    modes[name] = {{"nonrelapse_nonrelapse", intra.to_json()}, {"nonrelapse_relapse", inter.to_json()}};
  }
  diag["class_distances"] = modes;

  // Embeddings of one trained model: the first relapse patient's fold.
  const auto& ef = *relapse_folds.front();
  const auto fd = eval::prepare_fold(prepared, ef, cfg.settings, derive_seed(seed0, {ef.index, 1}));
  std::vector<Matrix> inputs;
  std::vector<double> labels;
  std::vector<eval::EmbeddingRow> rows;
  auto add_window = [&](const data::ObservationWindow& w) {
    inputs.push_back(data::window_input(*fd.normalized[w.patient], w, prepared.dims));
    labels.push_back(w.label);
    rows.push_back({window_id(w), w.label, {}});
  };
  for (std::size_t i : fd.subset.all()) add_window(fd.training[i]);
  const std::size_t n_train = inputs.size();
  auto rcfg = cfg.settings.rpnet;
  rcfg.seed = derive_seed(seed0, {ef.index, 2});
  const auto model = models::train_relapseprednet(std::span<const Matrix>(inputs.data(), n_train),
                                                  std::span<const double>(labels.data(), n_train), rcfg);
  for (const auto& w : fd.test) add_window(w);
  const Matrix emb = models::export_embeddings(model, inputs);
  std::vector<std::vector<double>> points;
  std::vector<int> point_labels;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = emb.row(i);
    rows[i].values.assign(r.begin(), r.end());
    points.push_back(rows[i].values);
    point_labels.push_back(rows[i].label);
  }
  std::ostringstream emb_csv;
  eval::write_embeddings_csv(emb_csv, rows);
  json ej;
  ej["test_patient_id"] = ef.test_patient_id;
  ej["seed"] = seed0;
  ej["rows"] = rows.size();
  ej["training_rows"] = n_train;
  ej["width"] = emb.cols;
  try {
    ej["silhouette"] = eval::silhouette_coefficient(points, point_labels);
    ej["separability_index"] = eval::separability_index(points, point_labels);
  } catch (const std::exception& e) {
    ej["error"] = e.what();
  }
  diag["embeddings"] = ej;

  json sj;
  try {
    const personalization::Stratum strata[] = {personalization::Stratum::closest,
                                               personalization::Stratum::first_quartile,
                                               personalization::Stratum::median};
    const auto analysis = eval::sfs_distance_analysis(cohort, cfg.settings, strata, cfg.permutations);
    auto recs = json::array();
    for (const auto& r : analysis.records) {
      recs.push_back({{"patient_id", r.patient_id},
                      {"stratum", std::string(personalization::to_string(r.stratum))},
                      {"dist", r.dist},
                      {"dist_rand", r.dist_rand},
                      {"f2", r.f2},
                      {"f2_rand", r.f2_rand},
                      {"delta_dist", r.delta_dist()},
                      {"delta_f2", r.delta_f2()}});
    }
    sj["records"] = recs;
    sj["pearson_r"] = analysis.r;
    sj["permutation_p"] = analysis.p;
    sj["permutations"] = analysis.permutations;
    sj["warnings"] = analysis.warnings;
  } catch (const std::exception& e) {
    sj["error"] = e.what();
    out << "warning: distance analysis unavailable: " << e.what() << "\n";
  }
  diag["sfs_distance_analysis"] = sj;

  std::vector<OutputFile> files;
  files.push_back(write_output(cfg.output_dir, "distances.csv", distances.str()));
  files.push_back(write_output(cfg.output_dir, "embeddings.csv", emb_csv.str()));
  files.push_back(write_output(cfg.output_dir, "diagnostics.json", diag.dump(2) + "\n"));
  write_manifest(cfg.output_dir, "diagnose", config_digest(cfg), files);
  out << "diagnostics written to " << cfg.output_dir << "\n";
  if (ej.contains("silhouette")) {
    out << "embedding silhouette " << ej["silhouette"].get<double>() << ", separability index "
        << ej["separability_index"].get<double>() << "\n";
  }
  if (sj.contains("pearson_r")) {
    out << "distance analysis r = " << sj["pearson_r"].get<double>() << ", p = " << sj["permutation_p"].get<double>()
        << "\n";
  }
}

void cmd_report(const std::string& dir, std::ostream& out) {
  const std::string metrics_path = (fs::path(dir) / "metrics.json").string();
  const std::string preds_path = (fs::path(dir) / "predictions.csv").string();
  json j;
  try {
    j = json::parse(read_file(metrics_path));
  } catch (const json::exception& e) {
    throw DataError(metrics_path + ": " + e.what());
  }
  std::ifstream in(preds_path);
  if (!in) throw DataError(preds_path + ": cannot open file");
  const auto rows = eval::read_predictions_csv(in, preds_path);

  std::vector<std::uint64_t> seeds;
  double fraction = 0.2;
  bool rts = false;
  if (j.contains("config")) {
    for (const auto& s : j["config"]["experiment"]["seeds"]) seeds.push_back(s.get<std::uint64_t>());
    fraction = j["config"]["experiment"]["relapse_test_fraction"].get<double>();
    rts = j["config"]["experiment"]["relapse_test_set"].get<bool>();
  } else if (j.contains("fusion")) {
    fraction = j["fusion"]["relapse_test_fraction"].get<double>();
  }
  auto folds = eval::folds_from_rows(rows, seeds);
  // Skipped folds have no prediction rows; carry them over from the stored report.
  std::vector<eval::SkippedFold> skipped;
  if (j.contains("metrics") && j["metrics"].contains("skipped_folds")) {
    for (const auto& s : j["metrics"]["skipped_folds"]) {
      skipped.push_back({s["seed"].get<std::uint64_t>(), s["fold"].get<std::size_t>(),
                         s["patient_id"].get<std::string>(), s["reason"].get<std::string>()});
    }
  }
  auto rep = eval::compute_report(folds, seeds, fraction);
  rep.skipped = skipped;
  j["headline"] = headline(rep, rts);
  j["metrics"] = eval::report_to_json(rep);
  j["digests"] = {{"predictions.csv", data::fnv1a_hex(read_file(preds_path))}};
  write_output(dir, "metrics.json", j.dump(2) + "\n");
  print_summary(out, rep);
}

}  // namespace relapse::cli
