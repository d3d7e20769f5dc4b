// Command-line front end: synth, validate, evaluate, fuse, diagnose, report.
#include <CLI11.hpp>

#include <deque>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "relapse/cli/commands.hpp"
#include "relapse/cli/config.hpp"
#include "relapse/errors.hpp"

using namespace relapse;

namespace {

// A flag that, when given, is applied as config option (section, key).
struct Override {
  std::string section;
  std::string key;
  std::optional<std::string> value;
};

struct Overrides {
  std::deque<Override> items;  // deque: push_back keeps earlier elements in place

  void add(CLI::App* app, const std::string& flag, const std::string& section, const std::string& key,
           const std::string& help) {
    items.push_back({section, key, std::nullopt});
    app->add_option(flag, items.back().value, help);
  }
  void apply(cli::ExperimentConfig& cfg) const {
    for (const auto& o : items) {
      if (o.value) cli::set_option(cfg, o.section, o.key, *o.value);
    }
  }
};

void add_synthetic_flags(CLI::App* app, Overrides& o) {
  o.add(app, "--n-patients", "synthetic", "n_patients", "Synthetic cohort size");
  o.add(app, "--days", "synthetic", "days_per_patient", "Monitoring days per synthetic patient");
  o.add(app, "--relapse-fraction", "synthetic", "relapse_fraction", "Fraction of synthetic patients that relapse");
  o.add(app, "--prodrome-days", "synthetic", "prodrome_days", "Days of prodromal drift before a relapse");
  o.add(app, "--trait-effect", "synthetic", "trait_effect", "SFS trait coupling of sociability signals");
  o.add(app, "--drift-effect", "synthetic", "drift_effect", "Prodromal shift in modality std units");
  o.add(app, "--missing-rate", "synthetic", "missing_rate", "Probability an hourly value is missing");
  o.add(app, "--heterogeneity", "synthetic", "heterogeneity", "Trait-independent per-patient offsets");
  o.add(app, "--daily-noise", "synthetic", "daily_noise", "Day-to-day offsets");
}

void add_experiment_flags(CLI::App* app, Overrides& o) {
  o.add(app, "--data-dir", "data", "dir", "Directory holding patients.csv, sensing.csv, relapses.csv");
  o.add(app, "--patients", "data", "patients", "patients.csv path");
  o.add(app, "--sensing", "data", "sensing", "sensing.csv path");
  o.add(app, "--relapses", "data", "relapses", "relapses.csv path");
  o.add(app, "--synth-seed", "synthetic", "seed", "Seed of the in-memory synthetic cohort");
  add_synthetic_flags(app, o);
  o.add(app, "--out", "experiment", "output_dir", "Output directory");
  o.add(app, "--model", "experiment", "model", "rpnet|autoenc|rf");
  o.add(app, "--personalization", "experiment", "personalization", "none|random|metric|stratified");
  o.add(app, "--metric", "experiment", "metric", "age|bprs|sfs|cdss|gpts|combined");
  o.add(app, "--stratum", "experiment", "stratum", "closest|first_quartile|median (stratified mode)");
  o.add(app, "--modalities", "experiment", "modalities", "Comma list of modalities or 'all'");
  o.add(app, "--loss", "experiment", "loss", "bce|f2 (rpnet only)");
  o.add(app, "--seeds", "experiment", "seeds", "Seed count (root..root+n-1) or comma list");
  o.add(app, "--root-seed", "experiment", "root_seed", "First seed when --seeds is a count");
  o.add(app, "--relapse-test-fraction", "experiment", "relapse_test_fraction", "Negative fraction kept per patient");
  o.add(app, "--permutations", "experiment", "permutations", "Permutations for the distance analysis p-value");
  o.add(app, "--hidden-dim", "rpnet", "hidden_dim", "LSTM hidden width per direction");
  o.add(app, "--fc1", "rpnet", "fc1", "First dense layer width");
  o.add(app, "--fc2", "rpnet", "fc2", "Embedding layer width");
  o.add(app, "--dropout", "rpnet", "dropout", "Dropout rate");
  o.add(app, "--learning-rate", "rpnet", "learning_rate", "ADAM learning rate");
  o.add(app, "--batch-size", "rpnet", "batch_size", "Mini-batch size");
  o.add(app, "--max-epochs", "rpnet", "max_epochs", "Epoch budget");
  o.add(app, "--patience", "rpnet", "patience", "Early-stopping patience");
  o.add(app, "--threshold", "rpnet", "decision_threshold", "Probability threshold for a positive prediction");
  o.add(app, "--n-trees", "forest", "n_trees", "Random forest size");
  o.add(app, "--aggregation", "autoenc", "aggregation", "Anomaly window aggregation: mean|max");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Personalized relapse-prediction benchmark"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cli::kToolVersion);

  std::string config_path;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort as three CSV files");
  Overrides synth_o;
  std::string synth_out;
  std::string synth_seed;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--config", config_path, "INI config ([synthetic] section is used)");
  synth->add_option("--seed", synth_seed, "Generator seed");
  add_synthetic_flags(synth, synth_o);

  auto* validate = app.add_subcommand("validate", "Check a cohort's CSV files against the schema");
  std::string v_dir, v_patients, v_sensing, v_relapses;
  validate->add_option("--data-dir", v_dir, "Directory holding the three CSV files");
  validate->add_option("--patients", v_patients, "patients.csv path");
  validate->add_option("--sensing", v_sensing, "sensing.csv path");
  validate->add_option("--relapses", v_relapses, "relapses.csv path");

  auto* evaluate = app.add_subcommand("evaluate", "Leave-one-patient-out evaluation");
  Overrides eval_o;
  bool e_rts = false, e_save = false;
  evaluate->add_option("--config", config_path, "INI config file");
  evaluate->add_flag("--relapse-test-set", e_rts, "Report the relapse test set F2 as the headline");
  evaluate->add_flag("--save-models", e_save, "Write every trained model under <out>/models");
  add_experiment_flags(evaluate, eval_o);

  auto* fuse = app.add_subcommand("fuse", "Late fusion of two prediction files");
  std::string f_a, f_b, f_scheme, f_out;
  double f_fraction = 0.2;
  fuse->add_option("--a", f_a, "First predictions.csv")->required();
  fuse->add_option("--b", f_b, "Second predictions.csv")->required();
  fuse->add_option("--scheme", f_scheme, "mean|min|max")->required()->check(CLI::IsMember({"mean", "min", "max"}));
  fuse->add_option("--out", f_out, "Output directory")->required();
  fuse->add_option("--relapse-test-fraction", f_fraction, "Negative fraction kept per patient");

  auto* diagnose = app.add_subcommand("diagnose", "Class distances, embedding separability, distance analysis");
  Overrides diag_o;
  diagnose->add_option("--config", config_path, "INI config file");
  add_experiment_flags(diagnose, diag_o);

  auto* report = app.add_subcommand("report", "Recompute metrics.json from an output directory");
  std::string r_dir;
  report->add_option("--dir", r_dir, "Directory with predictions.csv and metrics.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kExitUsage;
  }

  auto load_config = [&](const Overrides& o) {
    cli::ExperimentConfig cfg;
    if (!config_path.empty()) cli::apply_ini(cfg, cli::IniFile::load(config_path));
    o.apply(cfg);
    return cfg;
  };

  return cli::run_guarded(
      [&] {
        if (synth->parsed()) {
          auto cfg = load_config(synth_o);
          if (!synth_seed.empty()) cli::set_option(cfg, "synthetic", "seed", synth_seed);
          cfg.synthetic.validate();
          cli::cmd_synth(cfg.synthetic, synth_out, std::cout);
        } else if (validate->parsed()) {
          if (!v_dir.empty()) {
            if (v_patients.empty()) v_patients = v_dir + "/patients.csv";
            if (v_sensing.empty()) v_sensing = v_dir + "/sensing.csv";
            if (v_relapses.empty()) v_relapses = v_dir + "/relapses.csv";
          }
          if (v_patients.empty() || v_sensing.empty() || v_relapses.empty()) {
            throw UsageError("validate needs --data-dir or all of --patients, --sensing, --relapses");
          }
          cli::cmd_validate(v_patients, v_sensing, v_relapses, std::cout);
        } else if (evaluate->parsed()) {
          auto cfg = load_config(eval_o);
          if (e_rts) cfg.relapse_test_set = true;
          if (e_save) cfg.save_models = true;
          cli::cmd_evaluate(cfg, std::cout);
        } else if (fuse->parsed()) {
          cli::cmd_fuse(f_a, f_b, models::parse_fusion(f_scheme), f_out, f_fraction, std::cout);
        } else if (diagnose->parsed()) {
          cli::cmd_diagnose(load_config(diag_o), std::cout);
        } else if (report->parsed()) {
          cli::cmd_report(r_dir, std::cout);
        }
      },
      std::cerr);
}
