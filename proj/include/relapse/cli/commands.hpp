#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "relapse/cli/config.hpp"
#include "relapse/data/ingest.hpp"
#include "relapse/models/fusion.hpp"

namespace relapse::cli {

inline constexpr const char* kToolName = "relapse_bench";
inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitRuntime = 3 };

// Runs `body`, mapping exceptions to exit codes and printing them to `err`.
int run_guarded(const std::function<void()>& body, std::ostream& err);

struct OutputFile {
  std::string name;  // relative to the output directory
  std::string digest;
  std::size_t bytes = 0;
};

// Writes `content` to dir/name (creating directories) and returns its digest.
OutputFile write_output(const std::string& dir, const std::string& name, const std::string& content);

// manifest.json: tool, version, command, config digest, creation time and one
// digest per output file.
void write_manifest(const std::string& dir, const std::string& command, const std::string& config_digest,
                    const std::vector<OutputFile>& files);

void cmd_synth(const synth::CohortSpec& spec, const std::string& out_dir, std::ostream& out);
data::CohortSummary cmd_validate(const std::string& patients, const std::string& sensing, const std::string& relapses,
                                 std::ostream& out);
void cmd_evaluate(ExperimentConfig cfg, std::ostream& out);
void cmd_fuse(const std::string& predictions_a, const std::string& predictions_b, models::FusionScheme scheme,
              const std::string& out_dir, double relapse_test_fraction, std::ostream& out);
void cmd_diagnose(ExperimentConfig cfg, std::ostream& out);
// Rebuilds metrics.json in `dir` from its predictions.csv and stored config.
void cmd_report(const std::string& dir, std::ostream& out);

}  // namespace relapse::cli
