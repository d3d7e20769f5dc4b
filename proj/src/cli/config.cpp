#include "relapse/cli/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "relapse/data/days.hpp"
#include "relapse/data/ingest.hpp"
#include "relapse/errors.hpp"
#include "relapse/nn/losses.hpp"

namespace relapse::cli {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string describe(const std::string& section, const std::string& key) { return "[" + section + "] " + key; }

double to_double(const std::string& section, const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw UsageError(describe(section, key) + ": expected a number, got '" + v + "'");
  }
}

std::uint64_t to_uint(const std::string& section, const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    if (v.empty() || v[0] == '-') throw std::invalid_argument("negative");
    const auto u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return u;
  } catch (const std::exception&) {
    throw UsageError(describe(section, key) + ": expected a non-negative integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& section, const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError(describe(section, key) + ": expected true|false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

IniFile IniFile::parse(std::istream& in, const std::string& source) {
  IniFile ini;
  std::string line, section;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw UsageError(source + ":" + std::to_string(n) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(source + ":" + std::to_string(n) + ": expected key = value");
    if (section.empty()) throw UsageError(source + ":" + std::to_string(n) + ": key outside of a section");
    ini.entries.emplace_back(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return ini;
}

IniFile IniFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  return parse(in, path);
}

std::vector<data::Modality> parse_modalities(const std::string& list) {
  if (trim(list) == "all") return data::all_modalities();
  std::vector<data::Modality> out;
  for (const auto& item : split_list(list)) {
    data::Modality m;
    try {
      m = data::parse_modality(item);
    } catch (const std::exception&) {
      throw UsageError("unknown modality '" + item + "'");
    }
    if (std::find(out.begin(), out.end(), m) != out.end()) throw UsageError("modality '" + item + "' listed twice");
    out.push_back(m);
  }
  if (out.empty()) throw UsageError("modality subset must be non-empty");
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& spec, std::uint64_t root) {
  std::vector<std::uint64_t> seeds;
  if (spec.find(',') == std::string::npos) {
    const auto n = to_uint("experiment", "seeds", trim(spec));
    if (n == 0) throw UsageError("seed count must be positive");
    for (std::uint64_t i = 0; i < n; ++i) seeds.push_back(root + i);
    return seeds;
  }
  for (const auto& item : split_list(spec)) seeds.push_back(to_uint("experiment", "seeds", item));
  if (seeds.empty()) throw UsageError("seed list is empty");
  return seeds;
}

void set_option(ExperimentConfig& cfg, const std::string& section, const std::string& key, const std::string& value) {
  auto& s = cfg.settings;
  auto num = [&] { return to_double(section, key, value); };
  auto uint = [&] { return to_uint(section, key, value); };
  auto flag = [&] { return to_bool(section, key, value); };
  auto unknown = [&] { throw UsageError("unknown option " + describe(section, key)); };
  if (section == "data") {
    if (key == "source") {
      if (value == "synthetic") cfg.source = DataSource::synthetic;
      else if (value == "csv") cfg.source = DataSource::csv;
      else throw UsageError("[data] source must be synthetic|csv");
    } else if (key == "patients") cfg.patients_csv = value;
    else if (key == "sensing") cfg.sensing_csv = value;
    else if (key == "relapses") cfg.relapses_csv = value;
    else if (key == "dir") {
      cfg.patients_csv = value + "/patients.csv";
      cfg.sensing_csv = value + "/sensing.csv";
      cfg.relapses_csv = value + "/relapses.csv";
      cfg.source = DataSource::csv;
    } else unknown();
  } else if (section == "synthetic") {
    auto& c = cfg.synthetic;
    if (key == "n_patients") c.n_patients = uint();
    else if (key == "days_per_patient") c.days_per_patient = uint();
    else if (key == "relapse_fraction") c.relapse_fraction = num();
    else if (key == "prodrome_days") c.prodrome_days = uint();
    else if (key == "trait_effect") c.trait_effect = num();
    else if (key == "drift_effect") c.drift_effect = num();
    else if (key == "missing_rate") c.missing_rate = num();
    else if (key == "heterogeneity") c.heterogeneity = num();
    else if (key == "daily_noise") c.daily_noise = num();
    else if (key == "seed") c.seed = uint();
    else unknown();
  } else if (section == "windows") {
    auto& w = s.windows;
    if (key == "input_days") w.input_days = static_cast<int>(uint());
    else if (key == "step_days") w.step_days = static_cast<int>(uint());
    else if (key == "horizon_days") w.horizon_days = static_cast<int>(uint());
    else if (key == "missing_day_fraction_limit") w.missing_day_fraction_limit = num();
    else if (key == "exclusion_days") w.exclusion_days = static_cast<int>(uint());
    else unknown();
  } else if (section == "experiment") {
    if (key == "model") s.model = eval::parse_model_family(value);
    else if (key == "personalization") s.personalization = eval::parse_personalization(value);
    else if (key == "metric") {
      try {
        s.metric = personalization::parse_metric(value);
      } catch (const std::exception&) {
        throw UsageError("unknown metric '" + value + "' (expected age|bprs|sfs|cdss|gpts|combined)");
      }
    } else if (key == "stratum") s.stratum = personalization::parse_stratum(value);
    else if (key == "modalities") s.modalities = parse_modalities(value);
    else if (key == "loss") {
      if (value != "bce" && value != "f2") throw UsageError("loss must be bce|f2");
      s.rpnet.loss = nn::parse_loss(value);
    } else if (key == "seeds") cfg.seeds_spec = value;
    else if (key == "root_seed") cfg.root_seed = uint();
    else if (key == "relapse_test_set") cfg.relapse_test_set = flag();
    else if (key == "relapse_test_fraction") s.relapse_test_fraction = num();
    else if (key == "output_dir") cfg.output_dir = value;
    else if (key == "save_models") cfg.save_models = flag();
    else if (key == "permutations") cfg.permutations = uint();
    else unknown();
  } else if (section == "rpnet") {
    auto& r = s.rpnet;
    if (key == "hidden_dim") r.hidden_dim = uint();
    else if (key == "fc1") r.fc1 = uint();
    else if (key == "fc2") r.fc2 = uint();
    else if (key == "dropout") r.dropout = num();
    else if (key == "learning_rate") r.learning_rate = num();
    else if (key == "batch_size") r.batch_size = uint();
    else if (key == "max_epochs") r.max_epochs = uint();
    else if (key == "patience") r.patience = uint();
    else if (key == "min_improvement") r.min_improvement = num();
    else if (key == "decision_threshold") r.decision_threshold = num();
    else unknown();
  } else if (section == "autoenc") {
    auto& a = s.autoenc;
    if (key == "encoder_sizes") {
      a.encoder_sizes.clear();
      for (const auto& item : split_list(value)) a.encoder_sizes.push_back(to_uint(section, key, item));
    } else if (key == "learning_rate") a.learning_rate = num();
    else if (key == "batch_size") a.batch_size = uint();
    else if (key == "epochs") a.epochs = uint();
    else if (key == "aggregation") s.aggregation = models::parse_aggregation(value);
    else unknown();
  } else if (section == "forest") {
    auto& f = s.forest;
    if (key == "n_trees") f.n_trees = uint();
    else if (key == "max_depth") f.max_depth = uint();
    else if (key == "min_samples_leaf") f.min_samples_leaf = uint();
    else if (key == "features_per_split") f.features_per_split = uint();
    else if (key == "bootstrap") f.bootstrap = flag();
    else unknown();
  } else {
    throw UsageError("unknown config section [" + section + "]");
  }
}

void apply_ini(ExperimentConfig& cfg, const IniFile& ini) {
  for (const auto& [section, key, value] : ini.entries) set_option(cfg, section, key, value);
}

void ExperimentConfig::finalize() {
  settings.seeds = parse_seeds(seeds_spec, root_seed);
  if (source == DataSource::csv && (patients_csv.empty() || sensing_csv.empty() || relapses_csv.empty())) {
    throw UsageError("csv data source needs patients, sensing and relapses paths");
  }
  if (source == DataSource::synthetic && (!patients_csv.empty() || !sensing_csv.empty() || !relapses_csv.empty())) {
    throw UsageError("exactly one data source: CSV paths given together with the synthetic source");
  }
  synthetic.validate();
  settings.validate();
  if (save_models) settings.model_dir = output_dir + "/models";
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
  const auto& s = cfg.settings;
  nlohmann::ordered_json j;
  if (cfg.source == DataSource::synthetic) {
    const auto& c = cfg.synthetic;
    j["data"] = {{"source", "synthetic"},
                 {"n_patients", c.n_patients},
                 {"days_per_patient", c.days_per_patient},
                 {"relapse_fraction", c.relapse_fraction},
                 {"prodrome_days", c.prodrome_days},
                 {"trait_effect", c.trait_effect},
                 {"drift_effect", c.drift_effect},
                 {"missing_rate", c.missing_rate},
                 {"heterogeneity", c.heterogeneity},
                 {"daily_noise", c.daily_noise},
                 {"seed", c.seed}};
  } else {
    j["data"] = {{"source", "csv"},
                 {"patients", cfg.patients_csv},
                 {"sensing", cfg.sensing_csv},
                 {"relapses", cfg.relapses_csv}};
  }
  j["windows"] = {{"input_days", s.windows.input_days},
                  {"step_days", s.windows.step_days},
                  {"horizon_days", s.windows.horizon_days},
                  {"missing_day_fraction_limit", s.windows.missing_day_fraction_limit},
                  {"exclusion_days", s.windows.exclusion_days}};
  std::vector<std::string> mods;
  for (auto m : s.modalities) mods.emplace_back(data::kModalityNames[static_cast<std::size_t>(m)]);
  j["experiment"] = {{"model", eval::to_string(s.model)},
                     {"personalization", eval::to_string(s.personalization)},
                     {"metric", std::string(personalization::to_string(s.metric))},
                     {"stratum", std::string(personalization::to_string(s.stratum))},
                     {"modalities", mods},
                     {"loss", s.rpnet.loss == nn::LossKind::bce ? "bce" : "f2"},
                     {"root_seed", cfg.root_seed},
                     {"seeds", s.seeds},
                     {"relapse_test_set", cfg.relapse_test_set},
                     {"relapse_test_fraction", s.relapse_test_fraction},
                     {"save_models", cfg.save_models}};
  const auto& r = s.rpnet;
  j["rpnet"] = {{"hidden_dim", r.hidden_dim},       {"fc1", r.fc1},
                {"fc2", r.fc2},                     {"dropout", r.dropout},
                {"learning_rate", r.learning_rate}, {"batch_size", r.batch_size},
                {"max_epochs", r.max_epochs},       {"patience", r.patience},
                {"min_improvement", r.min_improvement}, {"decision_threshold", r.decision_threshold}};
  const auto& a = s.autoenc;
  j["autoenc"] = {{"encoder_sizes", a.encoder_sizes},
                  {"learning_rate", a.learning_rate},
                  {"batch_size", a.batch_size},
                  {"epochs", a.epochs},
                  {"aggregation", s.aggregation == models::WindowAggregation::mean ? "mean" : "max"}};
  const auto& f = s.forest;
  j["forest"] = {{"n_trees", f.n_trees},
                 {"max_depth", f.max_depth},
                 {"min_samples_leaf", f.min_samples_leaf},
                 {"features_per_split", f.features_per_split},
                 {"bootstrap", f.bootstrap}};
  return j;
}

std::string config_digest(const ExperimentConfig& cfg) { return data::fnv1a_hex(config_to_json(cfg).dump()); }

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

LoadedCohort load_cohort(const ExperimentConfig& cfg) {
  synth::CohortCsv csv;
  std::string pn = "patients.csv", sn = "sensing.csv", rn = "relapses.csv";
  if (cfg.source == DataSource::csv) {
    csv = {slurp(cfg.patients_csv), slurp(cfg.sensing_csv), slurp(cfg.relapses_csv)};
    pn = cfg.patients_csv;
    sn = cfg.sensing_csv;
    rn = cfg.relapses_csv;
  } else {
    csv = synth::generate_cohort(cfg.synthetic);
  }
  std::istringstream p(csv.patients), s(csv.sensing), r(csv.relapses);
  LoadedCohort out;
  out.cohort = data::ingest_cohort(p, s, r, pn, sn, rn);
  out.digest = data::fnv1a_hex(csv.patients + '\x1f' + csv.sensing + '\x1f' + csv.relapses);
  return out;
}

std::size_t worker_count_from_env() {
  const char* env = std::getenv("RELAPSE_BENCH_THREADS");
  if (!env || !*env) return 1;
  const auto n = to_uint("env", "RELAPSE_BENCH_THREADS", env);
  if (n == 0) throw UsageError("RELAPSE_BENCH_THREADS must be positive");
  return static_cast<std::size_t>(n);
}

}  // namespace relapse::cli
