#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lottery/data.hpp"
#include "lottery/error.hpp"

namespace lottery {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr std::string_view kToolVersion = "0.1.0";

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitEmptyEquivalence = 2;

// No test row on which the whole roster agrees.
class EmptyEquivalenceError : public InputError {
 public:
  using InputError::InputError;
};

struct RunConfig {
  std::string data_path;
  std::string fetch_id;
  std::string url_template = "https://www.openml.org/data/get_csv/{id}";
  std::filesystem::path cache_dir = ".lottery-cache";
  // Synthetic spec file, or one of the built-in names interaction,
  // additive, multiplicative.
  std::string synthetic;
  std::size_t synthetic_rows = 2000;
  std::string label_column = "label";
  std::vector<std::string> models = {"gbt", "gbt-deep", "gbt-l2", "forest", "logistic"};
  std::vector<std::uint64_t> seeds = {42, 123, 456};
  double train_fraction = 0.8;
  std::vector<double> taus = {0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  std::size_t kernel_samples = 1000;
  std::size_t background_rows = 100;
  std::size_t max_instances = 0;  // 0 = every equivalent test row
  std::vector<std::size_t> topk = {1, 3};
  std::size_t bootstrap_resamples = 2000;
  std::filesystem::path out = "lottery-out";
  std::size_t jobs = 1;
  bool timestamp = true;

  // Throws InputError naming the offending field.
  void validate() const;
  nlohmann::ordered_json to_json() const;
};

// Applies one key=value setting; keys match the long flag names
// (data, label-col, seeds, tau, ...). Lists are comma separated.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

// Flat key=value file; '#' starts a comment, blank lines are ignored.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

// Synthetic spec file: dim, beta (comma list), alpha ("1x2:2.0, ..." with
// 1-based feature indices), noise_sd, rows. Built-in names are accepted too.
struct SyntheticSource {
  SyntheticSpec spec;
  std::optional<std::size_t> rows;
};
SyntheticSource load_synthetic_spec(const std::string& path_or_name);

// Per-feature z-scoring fitted on one dataset. Constant columns are only
// centered (sd is stored as 1).
struct FeatureScaling {
  std::vector<double> mean;
  std::vector<double> sd;

  static FeatureScaling fit(const Dataset& train);
  Dataset apply(const Dataset& data) const;
  void apply_row(std::span<double> x) const;
};

// Z-scores every feature of `data` with the statistics of the rows that
// `split_spec` assigns to training.
Dataset standardize_by_train(const Dataset& data, const SplitSpec& split_spec);

// Output of cmd_audit, kept in memory until everything succeeded.
struct AuditOutputs {
  nlohmann::ordered_json report;
  std::string agreement_csv;
  std::string attributions_csv;
  std::string reliability_csv;
};

// Runs the full pipeline without touching the output directory.
AuditOutputs run_audit(const RunConfig& config, std::ostream& log);

// run_audit plus atomic writes of report.json and the three CSVs into
// config.out. Returns an exit code; errors are reported on `log`.
int cmd_audit(const RunConfig& config, std::ostream& log);

// Experiments: gap, persistence, density, lemma1, lemma2, stochasticity.
// Writes synth_<name>.csv and synth_<name>.json into config.out.
int cmd_synth(const std::string& name, const RunConfig& config, std::ostream& log);

// Trains the roster on the first seed's training split and scores each row
// of `instances_path`, writing reliability.csv into config.out.
int cmd_reliability(const RunConfig& config, const std::filesystem::path& instances_path,
                    std::ostream& log);

int cmd_fetch(const RunConfig& config, std::ostream& log);

// Renders report.json as plain-text tables.
std::string render_report(const nlohmann::ordered_json& report);
int cmd_report(const std::filesystem::path& report_path, std::ostream& out, std::ostream& log);

}  // namespace lottery
