#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "relapse/data/types.hpp"
#include "relapse/eval/experiment.hpp"
#include "relapse/synth/generator.hpp"

namespace relapse::cli {

// `[section]` headers and `key = value` lines; `#` and `;` start comments.
struct IniFile {
  std::vector<std::tuple<std::string, std::string, std::string>> entries;  // section, key, value

  static IniFile parse(std::istream& in, const std::string& source);
  static IniFile load(const std::string& path);
};

enum class DataSource { synthetic, csv };

struct ExperimentConfig {
  DataSource source = DataSource::synthetic;
  synth::CohortSpec synthetic;
  std::string patients_csv;
  std::string sensing_csv;
  std::string relapses_csv;

  eval::ExperimentSettings settings;
  std::uint64_t root_seed = 1;
  std::string seeds_spec = "10";  // a count (root..root+n-1) or a comma list
  bool relapse_test_set = false;
  std::string output_dir = "out";
  bool save_models = false;
  std::size_t permutations = 10000;

  // Resolves seeds_spec and cross-field rules; throws UsageError.
  void finalize();
};

// Sets one option by (section, key); used for both file entries and flags.
void set_option(ExperimentConfig& cfg, const std::string& section, const std::string& key, const std::string& value);
void apply_ini(ExperimentConfig& cfg, const IniFile& ini);

// Every resolved option, defaults expanded. Runtime-only knobs (worker count,
// output directory) are left out so reports do not depend on them.
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
std::string config_digest(const ExperimentConfig& cfg);

struct LoadedCohort {
  data::Cohort cohort;
  std::string digest;  // FNV-1a over the three CSV payloads
};

// Reads the CSV trio or generates the synthetic cohort in memory.
LoadedCohort load_cohort(const ExperimentConfig& cfg);

std::vector<data::Modality> parse_modalities(const std::string& list);
std::vector<std::uint64_t> parse_seeds(const std::string& spec, std::uint64_t root);

// Worker count from RELAPSE_BENCH_THREADS (default 1).
std::size_t worker_count_from_env();

}  // namespace relapse::cli
