#include "lottery/theoryval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "lottery/attribution.hpp"
#include "lottery/error.hpp"
#include "lottery/stats.hpp"

namespace lottery {

SyntheticSpec interaction_dgp() {
  SyntheticSpec spec;
  spec.dim = 6;
  spec.beta = {0.3, 0.3, 0.24, 0.18, 0.12, 0.06};
  spec.alpha = {{{0, 1}, 2.0}};
  spec.noise_sd = 0.0;
  return spec;
}

SyntheticSpec additive_dgp() {
  auto spec = interaction_dgp();
  spec.alpha.clear();
  return spec;
}

SyntheticSpec multiplicative_dgp() {
  SyntheticSpec spec;
  spec.dim = 6;
  spec.beta.assign(6, 0.0);
  spec.alpha = {{{0, 1}, 1.0}};
  return spec;
}

std::vector<ModelSpec> default_gap_roster() {
  return {model_preset("gbt"),  model_preset("gbt@1"),    model_preset("forest"),
          model_preset("cart"), model_preset("logistic"), model_preset("ridge")};
}

std::vector<ModelSpec> three_class_roster() {
  auto roster = default_gap_roster();
  roster.push_back(model_preset("mlp"));
  roster.push_back(model_preset("mlp@1"));
  return roster;
}

ExperimentSpec default_gap_spec(const SyntheticSpec& dgp, std::uint64_t seed) {
  ExperimentSpec spec;
  spec.dgp = dgp;
  spec.roster = default_gap_roster();
  spec.seed = seed;
  return spec;
}

void ExperimentSpec::validate() const {
  dgp.validate();
  if (roster.empty()) throw InputError("experiment roster is empty");
  bool has_intra = false;
  bool has_inter = false;
  for (std::size_t a = 0; a < roster.size(); ++a) {
    for (std::size_t b = a + 1; b < roster.size(); ++b) {
      const auto pc = pair_class_of(roster[a].hypothesis_class(), roster[b].hypothesis_class());
      has_intra = has_intra || pc == intra;
      has_inter = has_inter || pc == inter;
    }
  }
  if (!has_intra || !has_inter) {
    throw InputError(fmt::format("roster lacks a {} or {} pair", to_string(intra),
                                 to_string(inter)));
  }
}

GapResult run_gap_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const auto data = generate_synthetic(spec.dgp, spec.n, spec.seed);
  const auto parts = split(data, {spec.seed, spec.train_fraction});
  GapResult result;
  result.run = run_roster(spec.roster, parts, spec.seed, spec.options);
  result.equivalence_coverage = result.run.equivalent.coverage_fraction;
  if (result.run.explained.empty()) {
    throw InputError(fmt::format("seed {}: no test instance where the whole roster agrees",
                                 spec.seed));
  }
  const auto& table = result.run.table;
  const auto intra = rho_values(table, spec.intra);
  const auto inter = rho_values(table, spec.inter);
  if (intra.empty() || inter.empty()) {
    throw InputError("gap experiment produced no defined records on one side");
  }
  result.n_intra = intra.size();
  result.n_inter = inter.size();
  result.rho_intra = mean(intra);
  result.rho_inter = mean(inter);
  result.delta = result.rho_intra - result.rho_inter;
  const auto test = mann_whitney_u(intra, inter);
  result.p_value = test.p_value;
  result.cles = cles(intra, inter);
  if (intra.size() + inter.size() > 2) {
    try {
      result.cohens_d = cohens_d(intra, inter);
    } catch (const NumericError&) {
      result.cohens_d = std::numeric_limits<double>::infinity();
    }
  }
  const PairClass intra_class = spec.intra;
  const PairClass inter_class = spec.inter;
  result.lottery_rate_cross =
      lottery_rate(table, spec.tau,
                   [&](const PairKey& k) { return k.pair_class == inter_class; }, 200, spec.seed)
          .rate;
  result.lottery_rate_intra =
      lottery_rate(table, spec.tau,
                   [&](const PairKey& k) { return k.pair_class == intra_class; }, 200, spec.seed)
          .rate;
  return result;
}

namespace {

SweepPoint summarize(double abscissa, const std::vector<GapResult>& runs) {
  SweepPoint p;
  p.abscissa = abscissa;
  const auto count = static_cast<double>(runs.size());
  for (const auto& r : runs) {
    p.deltas.push_back(r.delta);
    p.mean_delta += r.delta / count;
    p.mean_rho_intra += r.rho_intra / count;
    p.mean_rho_inter += r.rho_inter / count;
    p.mean_lottery_rate += r.lottery_rate_cross / count;
    p.mean_p_value += r.p_value / count;
    p.mean_cohens_d += r.cohens_d / count;
  }
  return p;
}

std::vector<GapResult> run_seeds(ExperimentSpec spec, std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw InputError("sweep needs at least one seed");
  std::vector<GapResult> runs;
  for (auto seed : seeds) {
    spec.seed = seed;
    auto r = run_gap_experiment(spec);
    r.run = {};  // keep sweeps light; only the summary numbers are reported
    runs.push_back(std::move(r));
  }
  return runs;
}

}  // namespace

SweepCurve run_persistence_sweep(const ExperimentSpec& spec, std::span<const std::size_t> n_grid,
                                 std::span<const std::uint64_t> seeds) {
  std::vector<std::size_t> grid(n_grid.begin(), n_grid.end());
  std::sort(grid.begin(), grid.end());
  if (grid.empty()) throw InputError("persistence sweep needs a nonempty n grid");
  if (std::adjacent_find(grid.begin(), grid.end()) != grid.end()) {
    throw InputError("persistence sweep grid has duplicate sizes");
  }
  SweepCurve curve;
  for (std::size_t n : grid) {
    ExperimentSpec point = spec;
    point.n = n;
    curve.points.push_back(summarize(static_cast<double>(n), run_seeds(point, seeds)));
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& p : curve.points) best = std::max(best, p.mean_delta);
  curve.verdict = curve.points.back().mean_delta >= 0.5 * best;
  return curve;
}

SweepCurve run_density_sweep(const ExperimentSpec& spec, std::span<const double> alpha_grid,
                             std::span<const std::uint64_t> seeds) {
  std::vector<double> grid(alpha_grid.begin(), alpha_grid.end());
  std::sort(grid.begin(), grid.end());
  if (grid.empty()) throw InputError("density sweep needs a nonempty alpha grid");
  if (std::adjacent_find(grid.begin(), grid.end()) != grid.end()) {
    throw InputError("density sweep grid has duplicate scales");
  }
  if (grid.front() < 0.0) throw InputError("density sweep scales must be >= 0");
  SweepCurve curve;
  std::vector<double> densities;
  std::vector<double> deltas;
  for (double scale : grid) {
    ExperimentSpec point = spec;
    point.dgp = spec.dgp.scaled_interactions(scale);
    const double density = point.dgp.interaction_density();
    curve.points.push_back(summarize(density, run_seeds(point, seeds)));
    densities.push_back(density);
    deltas.push_back(curve.points.back().mean_delta);
  }
  if (grid.size() >= 2) {
    curve.trend = spearman(densities, deltas);
    curve.verdict = curve.trend.has_value() && *curve.trend >= 0.9;
  }
  return curve;
}

CollapseCheck verify_linear_collapse(const Dataset& train, double tol, bool use_kernel,
                                     std::size_t probes) {
  if (train.dim() > 12) throw InputError("verify_linear_collapse: d must be <= 12");
  const auto model = train_logistic(train, LogisticConfig{}, 0);
  BackgroundSet means;
  means.dim = train.dim();
  means.rows = model.train_feature_means;
  means.feature_means = model.train_feature_means;
  const MarginFunction f = [&](std::span<const double> z) { return model.margin(z); };

  CollapseCheck check;
  const std::size_t count = std::min(probes, train.rows());
  for (std::size_t i = 0; i < count; ++i) {
    const auto x = train.row(i);
    const auto closed = linear_shap(model, x);
    AttributionVector other;
    if (use_kernel) {
      other = kernel_shap(f, x, means, KernelShapOptions{});
    } else {
      other = exact_shapley(
          [&](const Coalition& s) { return value_interventional(f, x, s, means); }, train.dim());
    }
    for (std::size_t j = 0; j < train.dim(); ++j) {
      check.max_diff = std::max(check.max_diff, std::abs(closed.phi[j] - other.phi[j]));
    }
  }
  check.pass = check.max_diff <= tol;
  return check;
}

InteractionCheck verify_tree_interaction(const Dataset& train, const GbtConfig& config,
                                         std::size_t probes) {
  if (train.dim() < 2) throw InputError("verify_tree_interaction: need d >= 2");
  const auto trees = train_gbt(train, config, 0);
  const auto linear = train_logistic(train, LogisticConfig{}, 0);
  InteractionCheck check;
  const std::size_t count = std::min(probes, train.rows());
  std::vector<double> hi;
  std::vector<double> lo;
  for (std::size_t i = 0; i < count; ++i) {
    const auto x = train.row(i);
    hi.assign(x.begin(), x.end());
    lo.assign(x.begin(), x.end());
    hi[1] = 1.0;
    lo[1] = -1.0;
    check.tree_max_diff = std::max(
        check.tree_max_diff, std::abs(tree_shap(trees, hi).phi[0] - tree_shap(trees, lo).phi[0]));
    check.linear_max_diff =
        std::max(check.linear_max_diff,
                 std::abs(linear_shap(linear, hi).phi[0] - linear_shap(linear, lo).phi[0]));
  }
  check.pass = check.tree_max_diff > 1e-3 && check.linear_max_diff <= 1e-9;
  return check;
}

namespace {

// Mean over features of the population variance of the rows of `samples`.
double mean_feature_variance(const std::vector<std::vector<double>>& samples) {
  const std::size_t r = samples.size();
  const std::size_t d = samples.front().size();
  double total = 0.0;
  // Shifted by the first sample so identical repeats give exactly zero.
  for (std::size_t j = 0; j < d; ++j) {
    const double shift = samples.front()[j];
    double m = 0.0;
    for (const auto& s : samples) m += s[j] - shift;
    m /= static_cast<double>(r);
    double v = 0.0;
    for (const auto& s : samples) v += (s[j] - shift - m) * (s[j] - shift - m);
    total += v / static_cast<double>(r);
  }
  return total / static_cast<double>(d);
}

}  // namespace

StochasticityReport stochasticity_control(std::span<const TrainedModel> models,
                                          const Dataset& test,
                                          std::span<const std::size_t> positions,
                                          const BackgroundSet& background, std::size_t repeats,
                                          const KernelShapOptions& kernel) {
  if (models.empty() || positions.empty()) {
    throw InputError("stochasticity_control: need models and instances");
  }
  if (repeats < 2) throw InputError("stochasticity_control: need at least 2 repeats");
  StochasticityReport report;
  std::size_t tree_cells = 0;
  std::size_t kernel_cells = 0;
  for (std::size_t pos : positions) {
    const auto x = test.row(pos);
    std::vector<std::vector<double>> across;
    for (const auto& model : models) {
      std::vector<std::vector<double>> repeated;
      const bool is_tree = std::holds_alternative<TreeEnsemble>(model.payload);
      for (std::size_t k = 0; k < repeats; ++k) {
        ExplainOptions options;
        options.kernel = kernel;
        options.kernel.seed = kernel.seed + k;
        repeated.push_back(explain(model, x, background, options).phi);
      }
      if (is_tree) {
        report.within_tree += mean_feature_variance(repeated);
        ++tree_cells;
      } else {
        report.within_kernel += mean_feature_variance(repeated);
        ++kernel_cells;
      }
      across.push_back(repeated.front());
    }
    if (across.size() >= 2) report.cross += mean_feature_variance(across);
  }
  if (tree_cells > 0) report.within_tree /= static_cast<double>(tree_cells);
  if (kernel_cells > 0) report.within_kernel /= static_cast<double>(kernel_cells);
  report.cross /= static_cast<double>(positions.size());
  const double within = std::max(report.within_tree, report.within_kernel);
  report.ratio = within > 0.0 ? report.cross / within : 0.0;
  return report;
}

}  // namespace lottery
