#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lottery/audit.hpp"

namespace {

// Flags shared by every subcommand. Values stay as text so they can be
// layered over the config file through apply_setting().
struct SharedFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  bool no_timestamp = false;
};

void add_shared(CLI::App* cmd, SharedFlags& flags) {
  cmd->add_option("--config", flags.config_file, "key=value config file (flags take precedence)");
  const std::vector<std::pair<std::string, std::string>> options = {
      {"data", "local CSV dataset"},
      {"fetch", "remote dataset id (downloaded through --url-template)"},
      {"url-template", "download URL with {id} placeholder"},
      {"cache-dir", "download cache (LOTTERY_CACHE_DIR overrides)"},
      {"synthetic", "synthetic spec file or interaction|additive|multiplicative"},
      {"rows", "rows generated for a synthetic dataset"},
      {"label-col", "label column name"},
      {"seeds", "comma-separated seeds"},
      {"train-frac", "training fraction of each split"},
      {"tau", "comma-separated lottery thresholds"},
      {"kernel-samples", "KernelSHAP coalition samples"},
      {"background-rows", "background rows drawn from the training split"},
      {"max-instances", "cap on explained rows per seed (0 = all)"},
      {"topk", "comma-separated k for top-k disagreement"},
      {"resamples", "bootstrap resamples"},
      {"models", "comma-separated model presets"},
      {"out", "output directory"},
      {"jobs", "worker threads"},
  };
  for (const auto& [name, help] : options) {
    cmd->add_option("--" + name, flags.values[name], help);
  }
  cmd->add_flag("--no-timestamp", flags.no_timestamp, "omit generated_at from report.json");
}

lottery::RunConfig resolve(CLI::App* cmd, const SharedFlags& flags) {
  lottery::RunConfig config;
  if (!flags.config_file.empty()) lottery::apply_config_file(config, flags.config_file);
  for (const auto& [name, value] : flags.values) {
    if (cmd->count("--" + name) > 0) lottery::apply_setting(config, name, value);
  }
  if (flags.no_timestamp) config.timestamp = false;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explanation agreement audits for prediction-equivalent models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(lottery::kToolVersion));

  SharedFlags flags;
  auto* audit = app.add_subcommand("audit", "train a roster and audit explanation agreement");
  add_shared(audit, flags);

  std::string experiment;
  auto* synth = app.add_subcommand("synth", "run a synthetic validation experiment");
  synth->add_option("experiment", experiment,
                    "gap | persistence | density | lemma1 | lemma2 | stochasticity")
      ->required();
  add_shared(synth, flags);

  std::string instances;
  auto* reliability = app.add_subcommand("reliability", "score R(x) for rows of an instance file");
  reliability->add_option("instances", instances, "CSV of instances (header of feature names)")
      ->required();
  add_shared(reliability, flags);

  std::string fetch_id;
  auto* fetch = app.add_subcommand("fetch", "download a dataset into the cache");
  fetch->add_option("id", fetch_id, "dataset id")->required();
  add_shared(fetch, flags);

  std::string report_path;
  auto* report = app.add_subcommand("report", "render report.json as tables");
  report->add_option("report", report_path, "path to report.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : lottery::kExitInputError;
  }

  try {
    if (report->parsed()) return lottery::cmd_report(report_path, std::cout, std::cerr);
    CLI::App* cmd = app.get_subcommands().front();
    auto config = resolve(cmd, flags);
    if (audit->parsed()) return lottery::cmd_audit(config, std::cerr);
    if (synth->parsed()) return lottery::cmd_synth(experiment, config, std::cerr);
    if (reliability->parsed()) return lottery::cmd_reliability(config, instances, std::cerr);
    config.fetch_id = fetch_id;
    return lottery::cmd_fetch(config, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return lottery::kExitInputError;
  }
}
