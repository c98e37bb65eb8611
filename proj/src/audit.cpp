#include "lottery/audit.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "lottery/agreement.hpp"
#include "lottery/csv.hpp"
#include "lottery/models.hpp"
#include "lottery/reliability.hpp"
#include "lottery/rng.hpp"
#include "lottery/roster.hpp"
#include "lottery/stats.hpp"
#include "lottery/theoryval.hpp"

namespace lottery {

using nlohmann::ordered_json;

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s, char sep = ',') {
  std::vector<std::string_view> out;
  while (true) {
    const auto pos = s.find(sep);
    const auto item = trim(s.substr(0, pos));
    if (!item.empty()) out.push_back(item);
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return out;
}

double parse_real(std::string_view key, std::string_view text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw InputError(fmt::format("{}: '{}' is not a finite number", key, text));
  }
  return v;
}

std::uint64_t parse_count(std::string_view key, std::string_view text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw InputError(fmt::format("{}: '{}' is not a non-negative integer", key, text));
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw InputError(fmt::format("{}: '{}' is not a boolean", key, text));
}

template <typename T, typename Parse>
std::vector<T> parse_list(std::string_view key, std::string_view text, Parse parse) {
  std::vector<T> out;
  for (auto item : split_list(text)) out.push_back(static_cast<T>(parse(key, item)));
  if (out.empty()) throw InputError(fmt::format("{}: empty list", key));
  return out;
}

// Runs one pipeline stage, prefixing any error with the stage name.
template <typename Fn>
auto stage(std::string_view name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const EmptyEquivalenceError&) {
    throw;
  } catch (const std::exception& e) {
    throw InputError(fmt::format("{}: {}", name, e.what()));
  }
}

ordered_json real_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

ordered_json interval_json(const Interval& ci) {
  return {{"lo", real_or_null(ci.lo)},
          {"hi", real_or_null(ci.hi)},
          {"level", ci.level},
          {"resamples", ci.resamples}};
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(now));
}

Dataset load_source(const RunConfig& config) {
  if (!config.data_path.empty()) return load_csv(config.data_path, config.label_column);
  if (!config.fetch_id.empty()) {
    const auto path = fetch_remote(config.url_template, config.fetch_id,
                                   resolve_cache_dir(config.cache_dir));
    return load_csv(path, config.label_column);
  }
  const auto source = load_synthetic_spec(config.synthetic);
  // One fixed generation seed so every analysis seed sees the same rows.
  return generate_synthetic(source.spec, source.rows.value_or(config.synthetic_rows),
                            config.seeds.front());
}

void require_single_source(const RunConfig& config) {
  const int sources = static_cast<int>(!config.data_path.empty()) +
                      static_cast<int>(!config.fetch_id.empty()) +
                      static_cast<int>(!config.synthetic.empty());
  if (sources != 1) {
    throw InputError("config: give exactly one of data, fetch or synthetic");
  }
}

std::vector<ModelSpec> roster_specs(const RunConfig& config) {
  std::vector<ModelSpec> specs;
  for (const auto& name : config.models) specs.push_back(model_preset(name));
  return specs;
}

std::vector<double> sorted_taus(const RunConfig& config) {
  std::vector<double> taus = config.taus;
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  return taus;
}

struct SeedRun {
  std::uint64_t seed = 0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  RosterRun run;
  std::vector<double> accuracies;
};

SeedRun run_seed(const RunConfig& config, const Dataset& data, std::span<const ModelSpec> specs,
                 std::uint64_t seed) {
  SeedRun out;
  out.seed = seed;
  const SplitSpec split_spec{seed, config.train_fraction};
  const auto parts = stage("split", [&] {
    return split(standardize_by_train(data, split_spec), split_spec);
  });
  out.train_rows = parts.train.rows();
  out.test_rows = parts.test.rows();

  auto& run = out.run;
  run.seed = seed;
  run.models = stage("train", [&] { return train_roster(specs, parts.train, seed, config.jobs); });
  for (const auto& m : run.models) {
    run.entries.push_back({m.id, m.hypothesis_class});
    out.accuracies.push_back(accuracy(m, parts.test));
  }
  run.equivalent = stage("filter", [&] { return equivalence_filter(run.models, parts.test); });
  if (run.equivalent.instances.empty()) {
    throw EmptyEquivalenceError(fmt::format(
        "filter: seed {}: no test row on which all {} models agree", seed, run.models.size()));
  }
  run.explained = run.equivalent.instances;
  if (config.max_instances > 0 && run.explained.size() > config.max_instances) {
    run.explained.resize(config.max_instances);
  }
  RosterOptions options;
  options.explain.kernel.n_samples = config.kernel_samples;
  options.background_rows = config.background_rows;
  options.jobs = config.jobs;
  run.background = BackgroundSet::sample(parts.train, config.background_rows, seed);
  run.attributions = stage("attribute", [&] {
    return attribute_instances(run.models, parts.test, run.explained, run.background, options,
                               seed);
  });
  run.table = stage("agreement", [&] { return build_agreement_table(run.entries, run.attributions); });
  return out;
}

// Records of every seed, grouped by pair and then by seed order.
AgreementTable merge_tables(const std::vector<SeedRun>& runs) {
  AgreementTable merged;
  for (const auto& r : runs) {
    merged.records.insert(merged.records.end(), r.run.table.records.begin(),
                          r.run.table.records.end());
  }
  std::stable_sort(merged.records.begin(), merged.records.end(),
                   [](const AgreementRecord& a, const AgreementRecord& b) {
                     return std::tie(a.pair.model_a, a.pair.model_b) <
                            std::tie(b.pair.model_a, b.pair.model_b);
                   });
  merged.aggregate();
  return merged;
}

ordered_json pair_summaries(const AgreementTable& table) {
  struct Acc {
    PairClass pc;
    std::vector<double> rho;
    std::size_t undefined = 0;
  };
  std::map<std::pair<std::string, std::string>, Acc> by_pair;
  for (const auto& r : table.records) {
    auto& acc = by_pair.try_emplace({r.pair.model_a, r.pair.model_b}, Acc{r.pair.pair_class, {}, 0})
                    .first->second;
    if (r.rho) {
      acc.rho.push_back(*r.rho);
    } else {
      ++acc.undefined;
    }
  }
  ordered_json out = ordered_json::array();
  for (const auto& [key, acc] : by_pair) {
    out.push_back({{"model_a", key.first},
                   {"model_b", key.second},
                   {"pair_class", std::string(to_string(acc.pc))},
                   {"mean", acc.rho.empty() ? ordered_json(nullptr) : ordered_json(mean(acc.rho))},
                   {"count", acc.rho.size()},
                   {"undefined", acc.undefined}});
  }
  return out;
}

ordered_json class_summaries(const AgreementTable& table) {
  ordered_json out = ordered_json::array();
  for (auto pc : kAllPairClasses) {
    const auto it = table.by_class.find(pc);
    if (it == table.by_class.end()) continue;
    const auto& s = it->second;
    const bool any = s.count > 0;
    out.push_back({{"pair_class", std::string(to_string(pc))},
                   {"mean", any ? ordered_json(s.mean) : ordered_json(nullptr)},
                   {"median", any ? ordered_json(s.median) : ordered_json(nullptr)},
                   {"sd", s.count > 1 ? ordered_json(s.sd) : ordered_json(nullptr)},
                   {"count", s.count},
                   {"undefined", s.undefined}});
  }
  return out;
}

ordered_json gap_section(const AgreementTable& table, std::vector<std::string>& warnings) {
  const auto intra = rho_values(table, PairClass::kIntraTree);
  const auto inter = rho_values(table, PairClass::kCrossTreeLinear);
  if (intra.empty() || inter.empty()) {
    warnings.push_back("agreement gap skipped: roster lacks defined intra-tree or tree-linear pairs");
    return nullptr;
  }
  ordered_json gap;
  gap["intra"] = std::string(to_string(PairClass::kIntraTree));
  gap["inter"] = std::string(to_string(PairClass::kCrossTreeLinear));
  gap["rho_intra"] = mean(intra);
  gap["rho_inter"] = mean(inter);
  gap["delta"] = mean(intra) - mean(inter);
  gap["n_intra"] = intra.size();
  gap["n_inter"] = inter.size();
  const auto test = mann_whitney_u(intra, inter);
  gap["u_statistic"] = test.u_statistic;
  gap["p_value"] = test.p_value;
  gap["p_exact"] = test.exact;
  double d = std::numeric_limits<double>::quiet_NaN();
  if (intra.size() + inter.size() > 2) {
    try {
      d = cohens_d(intra, inter);
    } catch (const NumericError&) {
      warnings.push_back("cohens_d undefined: zero pooled variance");
    }
  }
  gap["cohens_d"] = real_or_null(d);
  gap["cles"] = cles(intra, inter);
  return gap;
}

ordered_json topk_section(const RunConfig& config, const std::vector<SeedRun>& runs,
                          std::size_t dim) {
  ordered_json out = ordered_json::array();
  for (std::size_t k : config.topk) {
    if (k >= dim) continue;  // every pair trivially shares all features
    std::size_t comparisons = 0;
    std::size_t partial = 0;
    std::size_t complete = 0;
    for (const auto& r : runs) {
      const auto& attrs = r.run.attributions;
      for (std::size_t a = 0; a < attrs.size(); ++a) {
        for (std::size_t b = a + 1; b < attrs.size(); ++b) {
          for (std::size_t i = 0; i < attrs[a].size(); ++i) {
            const auto t = topk_disagreement(attrs[a][i].phi, attrs[b][i].phi, k);
            ++comparisons;
            partial += t.partial ? 1 : 0;
            complete += t.complete ? 1 : 0;
          }
        }
      }
    }
    if (comparisons == 0) continue;
    const auto c = static_cast<double>(comparisons);
    out.push_back({{"k", k},
                   {"comparisons", comparisons},
                   {"partial_rate", static_cast<double>(partial) / c},
                   {"complete_rate", static_cast<double>(complete) / c}});
  }
  return out;
}

std::string agreement_csv(const AgreementTable& table) {
  std::string out = "model_a,model_b,pair_class,instance_id,rho,defined\n";
  for (const auto& r : table.records) {
    out += fmt::format("{},{},{},{},{},{}\n", csv_field(r.pair.model_a), csv_field(r.pair.model_b),
                       to_string(r.pair.pair_class), csv_field(r.instance_id),
                       r.rho ? format_real(*r.rho) : "", r.rho ? 1 : 0);
  }
  return out;
}

std::string attributions_csv(const std::vector<SeedRun>& runs, const Dataset& data) {
  std::string out = "instance_id,model_id";
  for (const auto& name : data.feature_names()) out += ",phi_" + csv_field(name);
  out += ",baseline,explained_value\n";
  for (const auto& r : runs) {
    const auto& attrs = r.run.attributions;
    if (attrs.empty()) continue;
    for (std::size_t i = 0; i < attrs.front().size(); ++i) {
      for (std::size_t m = 0; m < attrs.size(); ++m) {
        const auto& a = attrs[m][i];
        out += csv_field(a.instance_id) + "," + csv_field(a.model_id);
        for (double v : a.phi) out += "," + format_real(v);
        out += "," + format_real(a.baseline) + "," + format_real(a.explained_value) + "\n";
      }
    }
  }
  return out;
}

std::string reliability_header() { return "instance_id,r,zone,k,undefined_pairs\n"; }

std::string reliability_row(const ReliabilityResult& r) {
  return fmt::format("{},{},{},{},{}\n", csv_field(r.instance_id), format_real(r.r),
                     to_string(r.zone), r.k, r.undefined_pairs);
}

// attrs[m][i] -> per-instance column of k vectors.
std::vector<AttributionVector> instance_column(const std::vector<std::vector<AttributionVector>>& attrs,
                                               std::size_t i) {
  std::vector<AttributionVector> col;
  col.reserve(attrs.size());
  for (const auto& per_model : attrs) col.push_back(per_model[i]);
  return col;
}

ordered_json zone_counts_json(const std::array<std::size_t, 3>& counts) {
  return {{"high", counts[0]}, {"moderate", counts[1]}, {"low", counts[2]}};
}

ordered_json loo_json(const LooReport& loo) {
  ordered_json zones;
  for (Zone z : {Zone::kHigh, Zone::kModerate, Zone::kLow}) {
    const auto& o = loo.zone(z);
    zones[std::string(to_string(z))] = {
        {"trials", o.trials},
        {"agreements", o.agreements},
        {"agreement_probability",
         o.trials > 0 ? ordered_json(o.agreement_probability) : ordered_json(nullptr)}};
  }
  return {{"agreement_tau", loo.agreement_tau}, {"scored", loo.scored}, {"zones", zones}};
}

void add_loo(LooReport& total, const LooReport& part) {
  total.agreement_tau = part.agreement_tau;
  total.scored += part.scored;
  for (std::size_t z = 0; z < 3; ++z) {
    total.zones[z].trials += part.zones[z].trials;
    total.zones[z].agreements += part.zones[z].agreements;
  }
}

void finish_loo(LooReport& loo) {
  for (auto& z : loo.zones) {
    z.agreement_probability =
        z.trials > 0 ? static_cast<double>(z.agreements) / static_cast<double>(z.trials) : 0.0;
  }
}

std::string curve_csv(const SweepCurve& curve, std::string_view abscissa) {
  std::string out = fmt::format("{},rho_intra,rho_inter,delta,lottery_rate,p,d\n", abscissa);
  for (const auto& p : curve.points) {
    out += fmt::format("{},{},{},{},{},{},{}\n", format_real(p.abscissa),
                       format_real(p.mean_rho_intra), format_real(p.mean_rho_inter),
                       format_real(p.mean_delta), format_real(p.mean_lottery_rate),
                       format_real(p.mean_p_value), format_real(p.mean_cohens_d));
  }
  return out;
}

ordered_json curve_json(const SweepCurve& curve) {
  ordered_json points = ordered_json::array();
  for (const auto& p : curve.points) {
    ordered_json deltas = ordered_json::array();
    for (double d : p.deltas) deltas.push_back(d);
    points.push_back({{"abscissa", p.abscissa}, {"mean_delta", p.mean_delta}, {"deltas", deltas}});
  }
  return {{"points", points},
          {"trend", curve.trend ? ordered_json(*curve.trend) : ordered_json(nullptr)},
          {"verdict", curve.points.size() >= 2 || curve.trend ? ordered_json(curve.verdict)
                                                              : ordered_json(nullptr)}};
}

void write_outputs(const std::filesystem::path& dir,
                   const std::vector<std::pair<std::string, std::string>>& files) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, contents] : files) write_file_atomic(dir / name, contents);
}

int report_error(std::ostream& log, const std::exception& e) {
  log << "error: " << e.what() << "\n";
  return kExitInputError;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void RunConfig::validate() const {
  if (models.empty()) throw InputError("models: roster is empty");
  std::set<std::string> names;
  for (const auto& m : models) {
    model_preset(m);
    if (!names.insert(m).second) throw InputError(fmt::format("models: '{}' listed twice", m));
  }
  if (seeds.empty()) throw InputError("seeds: need at least one seed");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw InputError("seeds: duplicate seed");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InputError("train-frac: must lie in (0, 1)");
  }
  if (taus.empty()) throw InputError("tau: need at least one threshold");
  for (double t : taus) {
    if (!(t > -1.0 && t < 1.0)) throw InputError(fmt::format("tau: {} is outside (-1, 1)", t));
  }
  if (kernel_samples == 0) throw InputError("kernel-samples: must be >= 1");
  if (background_rows == 0) throw InputError("background-rows: must be >= 1");
  if (jobs == 0) throw InputError("jobs: must be >= 1");
  for (auto k : topk) {
    if (k == 0) throw InputError("topk: k must be >= 1");
  }
  if (bootstrap_resamples < 2) throw InputError("resamples: must be >= 2");
}

ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["data"] = data_path;
  j["fetch"] = fetch_id;
  j["synthetic"] = synthetic;
  j["rows"] = synthetic_rows;
  j["label_col"] = label_column;
  j["models"] = models;
  j["seeds"] = seeds;
  j["train_frac"] = train_fraction;
  j["tau"] = taus;
  j["kernel_samples"] = kernel_samples;
  j["background_rows"] = background_rows;
  j["max_instances"] = max_instances;
  j["topk"] = topk;
  j["resamples"] = bootstrap_resamples;
  return j;
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view raw) {
  const auto value = trim(raw);
  if (key == "data") {
    config.data_path = std::string(value);
  } else if (key == "fetch") {
    config.fetch_id = std::string(value);
  } else if (key == "url-template") {
    config.url_template = std::string(value);
  } else if (key == "cache-dir") {
    config.cache_dir = std::string(value);
  } else if (key == "synthetic") {
    config.synthetic = std::string(value);
  } else if (key == "rows") {
    config.synthetic_rows = parse_count(key, value);
  } else if (key == "label-col") {
    config.label_column = std::string(value);
  } else if (key == "models") {
    config.models.clear();
    for (auto m : split_list(value)) config.models.emplace_back(m);
  } else if (key == "seeds") {
    config.seeds = parse_list<std::uint64_t>(key, value, parse_count);
  } else if (key == "train-frac") {
    config.train_fraction = parse_real(key, value);
  } else if (key == "tau") {
    config.taus = parse_list<double>(key, value, parse_real);
  } else if (key == "kernel-samples") {
    config.kernel_samples = parse_count(key, value);
  } else if (key == "background-rows") {
    config.background_rows = parse_count(key, value);
  } else if (key == "max-instances") {
    config.max_instances = parse_count(key, value);
  } else if (key == "topk") {
    config.topk = parse_list<std::size_t>(key, value, parse_count);
  } else if (key == "resamples") {
    config.bootstrap_resamples = parse_count(key, value);
  } else if (key == "out") {
    config.out = std::string(value);
  } else if (key == "jobs") {
    config.jobs = parse_count(key, value);
  } else if (key == "no-timestamp") {
    config.timestamp = !parse_bool(key, value);
  } else if (key == "timestamp") {
    config.timestamp = parse_bool(key, value);
  } else {
    throw InputError(fmt::format("unknown setting '{}'", key));
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw InputError(fmt::format("{}:{}: expected key=value", path.string(), number));
    }
    try {
      apply_setting(config, trim(view.substr(0, eq)), view.substr(eq + 1));
    } catch (const InputError& e) {
      throw InputError(fmt::format("{}:{}: {}", path.string(), number, e.what()));
    }
  }
}

SyntheticSource load_synthetic_spec(const std::string& path_or_name) {
  SyntheticSource source;
  if (path_or_name == "interaction") {
    source.spec = interaction_dgp();
    return source;
  }
  if (path_or_name == "additive") {
    source.spec = additive_dgp();
    return source;
  }
  if (path_or_name == "multiplicative") {
    source.spec = multiplicative_dgp();
    return source;
  }
  std::ifstream in(path_or_name);
  if (!in) throw InputError("cannot open synthetic spec " + path_or_name);
  std::string line;
  std::size_t number = 0;
  bool has_dim = false;
  while (std::getline(in, line)) {
    ++number;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw InputError(fmt::format("{}:{}: expected key=value", path_or_name, number));
    }
    const auto key = trim(view.substr(0, eq));
    const auto value = trim(view.substr(eq + 1));
    try {
      if (key == "dim") {
        source.spec.dim = parse_count(key, value);
        has_dim = true;
      } else if (key == "beta") {
        source.spec.beta = parse_list<double>(key, value, parse_real);
      } else if (key == "alpha") {
        for (auto term : split_list(value)) {
          const auto x = term.find('x');
          const auto colon = term.find(':');
          if (x == std::string_view::npos || colon == std::string_view::npos || colon < x) {
            throw InputError(fmt::format("alpha: '{}' is not of the form IxJ:value", term));
          }
          const auto i = parse_count(key, trim(term.substr(0, x)));
          const auto j = parse_count(key, trim(term.substr(x + 1, colon - x - 1)));
          if (i == 0 || j == 0) throw InputError("alpha: feature indices are 1-based");
          FeaturePair pair{std::min(i, j) - 1, std::max(i, j) - 1};
          source.spec.alpha[pair] = parse_real(key, trim(term.substr(colon + 1)));
        }
      } else if (key == "noise_sd") {
        source.spec.noise_sd = parse_real(key, value);
      } else if (key == "rows") {
        source.rows = parse_count(key, value);
      } else {
        throw InputError(fmt::format("unknown key '{}'", key));
      }
    } catch (const InputError& e) {
      throw InputError(fmt::format("{}:{}: {}", path_or_name, number, e.what()));
    }
  }
  if (!has_dim) source.spec.dim = source.spec.beta.size();
  if (source.spec.beta.empty()) source.spec.beta.assign(source.spec.dim, 0.0);
  source.spec.validate();
  return source;
}

FeatureScaling FeatureScaling::fit(const Dataset& train) {
  FeatureScaling f;
  const std::size_t d = train.dim();
  f.mean = train.column_means();
  f.sd.assign(d, 0.0);
  for (std::size_t i = 0; i < train.rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = train.at(i, j) - f.mean[j];
      f.sd[j] += c * c;
    }
  }
  for (auto& s : f.sd) {
    s = train.rows() > 1 ? std::sqrt(s / static_cast<double>(train.rows() - 1)) : 0.0;
    if (!(s > 0.0)) s = 1.0;
  }
  return f;
}

void FeatureScaling::apply_row(std::span<double> x) const {
  if (x.size() != mean.size()) throw InputError("feature scaling: dimension mismatch");
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = (x[j] - mean[j]) / sd[j];
}

Dataset FeatureScaling::apply(const Dataset& data) const {
  std::vector<double> values(data.values());
  const std::size_t d = data.dim();
  for (std::size_t i = 0; i < data.rows(); ++i) {
    apply_row(std::span<double>(values.data() + i * d, d));
  }
  return Dataset(data.id(), data.feature_names(), std::move(values), data.labels());
}

Dataset standardize_by_train(const Dataset& data, const SplitSpec& split_spec) {
  return FeatureScaling::fit(split(data, split_spec).train).apply(data);
}

// ---------------------------------------------------------------------------
// Audit

AuditOutputs run_audit(const RunConfig& config, std::ostream& log) {
  stage("config", [&] {
    config.validate();
    require_single_source(config);
  });
  const auto data = stage("load", [&] { return load_source(config); });
  if (!data.nondegenerate()) throw InputError("load: labels contain a single class");
  const auto specs = stage("config", [&] { return roster_specs(config); });
  const auto taus = sorted_taus(config);
  std::vector<std::string> warnings;
  if (specs.size() < 2) warnings.push_back("roster has one model: agreement sections are empty");

  std::vector<SeedRun> runs;
  for (auto seed : config.seeds) {
    log << fmt::format("seed {}: training {} models\n", seed, specs.size());
    runs.push_back(run_seed(config, data, specs, seed));
    const auto& eq = runs.back().run.equivalent;
    log << fmt::format("seed {}: {} equivalent test rows (coverage {:.3f})\n", seed,
                       eq.instances.size(), eq.coverage_fraction);
  }
  const auto table = merge_tables(runs);

  AuditOutputs out;
  auto& report = out.report;
  report["schema_version"] = kReportSchemaVersion;
  report["tool"] = {{"name", "lottery"}, {"version", std::string(kToolVersion)}};
  if (config.timestamp) report["generated_at"] = utc_now();
  const auto config_json = config.to_json();
  report["config"] = config_json;
  report["config_digest"] = digest_hex(config_json.dump());
  report["dataset"] = {{"id", data.id()},
                       {"rows", data.rows()},
                       {"dim", data.dim()},
                       {"feature_names", data.feature_names()},
                       {"preprocessing", "train-split z-score"}};

  ordered_json models = ordered_json::array();
  for (const auto& m : runs.front().run.models) {
    models.push_back({{"id", m.id},
                      {"hypothesis_class", std::string(to_string(m.hypothesis_class))},
                      {"config_digest", m.config_digest}});
  }
  report["models"] = models;

  ordered_json seeds = ordered_json::array();
  for (const auto& r : runs) {
    ordered_json acc;
    for (std::size_t m = 0; m < r.run.models.size(); ++m) acc[r.run.models[m].id] = r.accuracies[m];
    seeds.push_back({{"seed", r.seed},
                     {"train_rows", r.train_rows},
                     {"test_rows", r.test_rows},
                     {"equivalent", r.run.equivalent.instances.size()},
                     {"coverage", r.run.equivalent.coverage_fraction},
                     {"explained", r.run.explained.size()},
                     {"test_accuracy", acc}});
  }
  report["seeds"] = seeds;

  report["pairs"] = pair_summaries(table);
  report["pair_classes"] = class_summaries(table);
  report["undefined_records"] = table.undefined_count;

  ordered_json lottery = ordered_json::array();
  if (!table.records.empty()) {
    for (double tau : taus) {
      const auto all = lottery_rate(table, tau, {}, config.bootstrap_resamples, config.seeds.front());
      const auto cross = lottery_rate(
          table, tau, [](const PairKey& k) { return is_cross(k.pair_class); },
          config.bootstrap_resamples, config.seeds.front());
      lottery.push_back({{"tau", tau},
                         {"rate", real_or_null(all.rate)},
                         {"ci", interval_json(all.ci)},
                         {"records", all.defined_records},
                         {"cross_rate", real_or_null(cross.rate)},
                         {"cross_ci", interval_json(cross.ci)},
                         {"cross_records", cross.defined_records}});
    }
  }
  report["lottery"] = lottery;
  report["gap"] = specs.size() < 2 ? ordered_json(nullptr) : gap_section(table, warnings);
  report["topk"] = topk_section(config, runs, data.dim());

  // Reliability per explained instance, plus leave-one-out validation.
  out.reliability_csv = reliability_header();
  std::array<std::size_t, 3> zone_counts{0, 0, 0};
  std::vector<double> r_values;
  LooReport loo;
  for (const auto& r : runs) {
    const auto& attrs = r.run.attributions;
    for (std::size_t i = 0; i < r.run.explained.size(); ++i) {
      const auto col = instance_column(attrs, i);
      const auto rel = reliability_score(col);
      out.reliability_csv += reliability_row(rel);
      ++zone_counts[static_cast<std::size_t>(rel.zone)];
      r_values.push_back(rel.r);
    }
    if (attrs.size() >= 3) add_loo(loo, loo_validate(attrs));
  }
  finish_loo(loo);
  ordered_json reliability;
  reliability["instances"] = r_values.size();
  reliability["mean_r"] = r_values.empty() ? ordered_json(nullptr) : ordered_json(mean(r_values));
  reliability["median_r"] =
      r_values.empty() ? ordered_json(nullptr) : ordered_json(median(r_values));
  reliability["zones"] = zone_counts_json(zone_counts);
  reliability["loo"] = specs.size() >= 3 ? loo_json(loo) : ordered_json(nullptr);
  if (specs.size() < 3) warnings.push_back("leave-one-out validation needs at least 3 models");
  report["reliability"] = reliability;
  report["warnings"] = warnings;

  out.agreement_csv = agreement_csv(table);
  out.attributions_csv = attributions_csv(runs, data);
  for (const auto& w : warnings) log << "warning: " << w << "\n";
  return out;
}

int cmd_audit(const RunConfig& config, std::ostream& log) {
  try {
    const auto outputs = run_audit(config, log);
    stage("write", [&] {
      write_outputs(config.out, {{"report.json", outputs.report.dump(2) + "\n"},
                                 {"agreement.csv", outputs.agreement_csv},
                                 {"attributions.csv", outputs.attributions_csv},
                                 {"reliability.csv", outputs.reliability_csv}});
    });
    log << "wrote " << (config.out / "report.json").string() << "\n";
    return kExitOk;
  } catch (const EmptyEquivalenceError& e) {
    log << "error: " << e.what() << "\n";
    return kExitEmptyEquivalence;
  } catch (const std::exception& e) {
    return report_error(log, e);
  }
}

// ---------------------------------------------------------------------------
// Synthetic experiments

int cmd_synth(const std::string& name, const RunConfig& config, std::ostream& log) {
  static const std::set<std::string> known = {"gap",    "persistence", "density",
                                              "lemma1", "lemma2",      "stochasticity"};
  if (!known.count(name)) {
    log << fmt::format("error: unknown experiment '{}' (expected gap, persistence, density, "
                       "lemma1, lemma2 or stochasticity)\n",
                       name);
    return kExitInputError;
  }
  try {
    config.validate();
    const auto dgp =
        config.synthetic.empty() ? interaction_dgp() : load_synthetic_spec(config.synthetic).spec;
    auto base = default_gap_spec(dgp, config.seeds.front());
    base.train_fraction = config.train_fraction;
    base.options.explain.kernel.n_samples = config.kernel_samples;
    base.options.jobs = config.jobs;
    base.options.max_instances = config.max_instances;
    const std::vector<std::uint64_t> seeds = config.seeds;

    ordered_json verdict;
    verdict["experiment"] = name;
    verdict["seeds"] = seeds;
    std::string csv;
    if (name == "gap") {
      csv = "seed,coverage,rho_intra,rho_inter,delta,lottery_rate,p,d\n";
      ordered_json rows = ordered_json::array();
      bool pass = true;
      for (auto seed : seeds) {
        auto spec = base;
        spec.seed = seed;
        const auto r = run_gap_experiment(spec);
        csv += fmt::format("{},{},{},{},{},{},{},{}\n", seed, format_real(r.equivalence_coverage),
                           format_real(r.rho_intra), format_real(r.rho_inter),
                           format_real(r.delta), format_real(r.lottery_rate_cross),
                           format_real(r.p_value), format_real(r.cohens_d));
        const bool ok = r.delta >= 0.2 && r.p_value < 0.001;
        pass = pass && ok;
        rows.push_back({{"seed", seed}, {"delta", r.delta}, {"p_value", r.p_value}, {"pass", ok}});
      }
      verdict["runs"] = rows;
      verdict["criterion"] = "delta >= 0.2 and p < 0.001 on every seed";
      verdict["verdict"] = pass;
    } else if (name == "persistence") {
      const std::vector<std::size_t> grid = {500, 1000, 2000, 4000};
      const auto curve = run_persistence_sweep(base, grid, seeds);
      csv = curve_csv(curve, "n");
      verdict["curve"] = curve_json(curve);
      verdict["criterion"] = "last mean delta >= 0.5 * max mean delta";
      verdict["verdict"] = curve.verdict;
    } else if (name == "density") {
      const std::vector<double> grid = {0.0, 0.5, 1.0, 2.0};
      const auto curve = run_density_sweep(base, grid, seeds);
      csv = curve_csv(curve, "interaction_density");
      verdict["curve"] = curve_json(curve);
      verdict["criterion"] = "Spearman(interaction density, mean delta) >= 0.9";
      verdict["verdict"] = curve.verdict;
    } else if (name == "lemma1") {
      const auto data = generate_synthetic(dgp, 500, seeds.front());
      const auto check = verify_linear_collapse(data, 1e-9);
      csv = fmt::format("max_diff,tol,pass\n{},{},{}\n", format_real(check.max_diff), "1e-09",
                        check.pass ? 1 : 0);
      verdict["max_diff"] = check.max_diff;
      verdict["tol"] = 1e-9;
      verdict["verdict"] = check.pass;
    } else if (name == "lemma2") {
      const auto data = generate_synthetic(dgp, 1000, seeds.front());
      const auto check = verify_tree_interaction(data);
      csv = fmt::format("tree_max_diff,linear_max_diff,pass\n{},{},{}\n",
                        format_real(check.tree_max_diff), format_real(check.linear_max_diff),
                        check.pass ? 1 : 0);
      verdict["tree_max_diff"] = check.tree_max_diff;
      verdict["linear_max_diff"] = check.linear_max_diff;
      verdict["verdict"] = check.pass;
    } else {
      const auto data = generate_synthetic(dgp, base.n, seeds.front());
      const auto parts = split(data, {seeds.front(), base.train_fraction});
      const auto run = run_roster(base.roster, parts, seeds.front(), base.options);
      std::vector<std::size_t> positions(run.explained.begin(),
                                         run.explained.begin() +
                                             static_cast<std::ptrdiff_t>(std::min<std::size_t>(
                                                 20, run.explained.size())));
      if (positions.empty()) throw EmptyEquivalenceError("stochasticity: empty equivalence set");
      std::vector<TrainedModel> trees;
      for (const auto& m : run.models) {
        if (m.hypothesis_class == HypothesisClass::kTree) trees.push_back(m);
      }
      const auto report =
          stochasticity_control(run.models, parts.test, positions, run.background, 10);
      const auto tree_only = stochasticity_control(trees, parts.test, positions, run.background, 10);
      csv = fmt::format("within_tree,within_kernel,cross,ratio\n{},{},{},{}\n",
                        format_real(tree_only.within_tree), format_real(report.within_kernel),
                        format_real(report.cross), format_real(report.ratio));
      verdict["within_tree"] = tree_only.within_tree;
      verdict["within_kernel"] = report.within_kernel;
      verdict["cross"] = report.cross;
      verdict["ratio"] = report.ratio;
      verdict["criterion"] = "TreeSHAP within-model variance is 0 and cross-model variance exceeds it";
      verdict["verdict"] = tree_only.within_tree == 0.0 && report.cross > tree_only.within_tree;
    }
    write_outputs(config.out, {{"synth_" + name + ".csv", csv},
                               {"synth_" + name + ".json", verdict.dump(2) + "\n"}});
    log << fmt::format("{}: {}\n", name, verdict["verdict"].get<bool>() ? "pass" : "fail");
    return kExitOk;
  } catch (const EmptyEquivalenceError& e) {
    log << "error: " << e.what() << "\n";
    return kExitEmptyEquivalence;
  } catch (const std::exception& e) {
    return report_error(log, e);
  }
}

// ---------------------------------------------------------------------------
// Reliability scoring of user-supplied instances

int cmd_reliability(const RunConfig& config, const std::filesystem::path& instances_path,
                    std::ostream& log) {
  try {
    stage("config", [&] {
      config.validate();
      require_single_source(config);
    });
    const auto data = stage("load", [&] { return load_source(config); });
    const auto specs = stage("config", [&] { return roster_specs(config); });
    const auto seed = config.seeds.front();
    const SplitSpec split_spec{seed, config.train_fraction};
    // Instances arrive in raw units and get the audit's train-split z-scoring.
    const auto scaling =
        stage("split", [&] { return FeatureScaling::fit(split(data, split_spec).train); });
    const auto z_parts = split(scaling.apply(data), split_spec);
    const auto models = stage("train", [&] { return train_roster(specs, z_parts.train, seed, config.jobs); });

    std::ifstream in(instances_path);
    if (!in) throw InputError("instances: cannot open " + instances_path.string());
    const auto rows = stage("instances", [&] { return read_csv(in); });
    if (rows.empty()) throw InputError("instances: file is empty");
    const auto& header = rows.front();
    const bool has_id = !header.empty() && header.front() == "instance_id";
    const std::size_t offset = has_id ? 1 : 0;
    if (header.size() - offset != data.dim()) {
      throw InputError(fmt::format("instances: header has {} feature columns, expected {}",
                                   header.size() - offset, data.dim()));
    }
    RosterOptions options;
    options.explain.kernel.n_samples = config.kernel_samples;
    const auto background = BackgroundSet::sample(z_parts.train, config.background_rows, seed);

    std::string csv = reliability_header();
    std::array<std::size_t, 3> counts{0, 0, 0};
    std::vector<double> x(data.dim());
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (row.size() != header.size()) {
        throw InputError(fmt::format("instances: row {} has {} fields, expected {}", r,
                                     row.size(), header.size()));
      }
      for (std::size_t j = 0; j < data.dim(); ++j) {
        const auto& cell = row[j + offset];
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
          throw InputError(fmt::format("instances: row {} column '{}' is not numeric", r,
                                       header[j + offset]));
        }
        x[j] = v;
      }
      scaling.apply_row(x);
      const std::string id = has_id ? row.front() : std::to_string(r);
      std::vector<AttributionVector> attrs;
      for (const auto& m : models) {
        ExplainOptions explain = options.explain;
        explain.kernel.seed = Rng::mix(seed ^ Rng::mix(r));
        auto a = lottery::explain(m, x, background, explain);
        a.instance_id = id;
        attrs.push_back(std::move(a));
      }
      const auto rel = reliability_score(attrs);
      ++counts[static_cast<std::size_t>(rel.zone)];
      csv += reliability_row(rel);
    }
    write_outputs(config.out, {{"reliability.csv", csv}});
    log << fmt::format("scored {} instances: high {}, moderate {}, low {}\n", rows.size() - 1,
                       counts[0], counts[1], counts[2]);
    return kExitOk;
  } catch (const std::exception& e) {
    return report_error(log, e);
  }
}

int cmd_fetch(const RunConfig& config, std::ostream& log) {
  try {
    if (config.fetch_id.empty()) throw InputError("fetch: no dataset id given");
    const auto path =
        fetch_remote(config.url_template, config.fetch_id, resolve_cache_dir(config.cache_dir));
    log << path.string() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    return report_error(log, e);
  }
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string cell(const ordered_json& v, int precision = 3) {
  if (v.is_null()) return "-";
  if (v.is_number_float()) return fmt::format("{:.{}f}", v.get<double>(), precision);
  if (v.is_number()) return v.dump();
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace

std::string render_report(const ordered_json& report) {
  std::string out;
  const auto& ds = report.at("dataset");
  out += fmt::format("dataset {} ({} rows, {} features)\n", cell(ds.at("id")), cell(ds.at("rows")),
                     cell(ds.at("dim")));
  out += "\nseed      coverage  explained\n";
  for (const auto& s : report.at("seeds")) {
    out += fmt::format("{:<9} {:<9} {}\n", cell(s.at("seed")), cell(s.at("coverage")),
                       cell(s.at("explained")));
  }
  out += "\nLottery rate by threshold\n";
  out += fmt::format("{:<6} {:<8} {:<17} {:<8} {}\n", "tau", "rate", "95% CI", "cross", "records");
  for (const auto& row : report.at("lottery")) {
    const auto& ci = row.at("ci");
    out += fmt::format("{:<6} {:<8} {:<17} {:<8} {}\n", cell(row.at("tau"), 1),
                       cell(row.at("rate")),
                       fmt::format("[{}, {}]", cell(ci.at("lo")), cell(ci.at("hi"))),
                       cell(row.at("cross_rate")), cell(row.at("records")));
  }
  out += "\nMean agreement by model pair\n";
  out += fmt::format("{:<32} {:<18} {:<8} {}\n", "pair", "class", "mean rho", "n");
  for (const auto& p : report.at("pairs")) {
    out += fmt::format("{:<32} {:<18} {:<8} {}\n",
                       cell(p.at("model_a")) + " / " + cell(p.at("model_b")),
                       cell(p.at("pair_class")), cell(p.at("mean")), cell(p.at("count")));
  }
  out += "\nMean agreement by pair class\n";
  for (const auto& c : report.at("pair_classes")) {
    out += fmt::format("{:<18} mean {}  median {}  sd {}  n {}\n", cell(c.at("pair_class")),
                       cell(c.at("mean")), cell(c.at("median")), cell(c.at("sd")),
                       cell(c.at("count")));
  }
  const auto& gap = report.at("gap");
  if (!gap.is_null()) {
    out += fmt::format("\nagreement gap {} - {}: delta {} (p {}, d {}, CLES {})\n",
                       cell(gap.at("intra")), cell(gap.at("inter")), cell(gap.at("delta")),
                       fmt::format("{:.3g}", gap.at("p_value").get<double>()),
                       cell(gap.at("cohens_d")), cell(gap.at("cles")));
  }
  for (const auto& t : report.at("topk")) {
    out += fmt::format("top-{} disagreement: partial {}, complete {}\n", cell(t.at("k")),
                       cell(t.at("partial_rate")), cell(t.at("complete_rate")));
  }
  const auto& rel = report.at("reliability");
  const auto& zones = rel.at("zones");
  out += fmt::format("\nreliability: mean R {} over {} instances; high {}, moderate {}, low {}\n",
                     cell(rel.at("mean_r")), cell(rel.at("instances")), cell(zones.at("high")),
                     cell(zones.at("moderate")), cell(zones.at("low")));
  if (!rel.at("loo").is_null()) {
    const auto& loo = rel.at("loo").at("zones");
    out += fmt::format("held-out agreement: high {}, moderate {}, low {}\n",
                       cell(loo.at("high").at("agreement_probability")),
                       cell(loo.at("moderate").at("agreement_probability")),
                       cell(loo.at("low").at("agreement_probability")));
  }
  return out;
}

int cmd_report(const std::filesystem::path& report_path, std::ostream& out, std::ostream& log) {
  try {
    std::ifstream in(report_path);
    if (!in) throw InputError("cannot open report " + report_path.string());
    ordered_json report;
    try {
      report = ordered_json::parse(in);
      out << render_report(report);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(fmt::format("{}: malformed report: {}", report_path.string(), e.what()));
    }
    return kExitOk;
  } catch (const std::exception& e) {
    return report_error(log, e);
  }
}

}  // namespace lottery
