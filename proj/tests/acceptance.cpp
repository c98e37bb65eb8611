// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "lottery/audit.hpp"
#include "lottery/reliability.hpp"
#include "lottery/stats.hpp"
#include "lottery/theoryval.hpp"
#include "test_support.hpp"

using namespace lottery;
using testing_support::random_point;
using testing_support::random_tree;

namespace {

const std::vector<std::uint64_t> kSeeds = {42, 123, 456, 7, 99};
const std::vector<double> kTaus = {0.3, 0.4, 0.5, 0.6, 0.7, 0.8};

struct Outcome {
  bool pass = false;
  std::string detail;
};

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
  return m;
}

BackgroundSet gaussian_background(std::size_t m, std::size_t d, Rng& rng) {
  BackgroundSet bg;
  bg.dim = d;
  bg.rows.resize(m * d);
  for (auto& v : bg.rows) v = rng.normal();
  bg.feature_means.assign(d, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) bg.feature_means[j] += bg.rows[i * d + j] / m;
  }
  return bg;
}

TreeEnsemble random_ensemble(std::size_t d, std::size_t depth, Rng& rng) {
  TreeEnsemble e;
  e.dim = d;
  e.trees.push_back(random_tree(d, depth, rng));
  return e;
}

LinearModel random_linear(std::size_t d, const BackgroundSet& bg, Rng& rng) {
  LinearModel m;
  m.weights = random_point(d, rng);
  m.bias = rng.normal();
  m.train_feature_means = bg.feature_means;
  return m;
}

Outcome criterion1() {
  Rng rng(1001);
  double tree_worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = 2 + rng.below(9);
    const auto e = random_ensemble(d, 1 + rng.below(4), rng);
    const auto x = random_point(d, rng);
    const auto exact =
        exact_shapley([&](const Coalition& s) { return tree_path_value(e, x, s); }, d);
    tree_worst = std::max(tree_worst, max_abs_diff(tree_shap(e, x).phi, exact.phi));
  }
  double linear_worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = 2 + rng.below(7);
    const auto bg = gaussian_background(30, d, rng);
    const auto m = random_linear(d, bg, rng);
    const MarginFunction f = [&](std::span<const double> z) { return m.margin(z); };
    const auto x = random_point(d, rng);
    const auto exact = exact_shapley(
        [&](const Coalition& s) { return value_interventional(f, x, s, bg); }, d);
    linear_worst = std::max(linear_worst, max_abs_diff(linear_shap(m, x).phi, exact.phi));
  }
  return {tree_worst <= 1e-9 && linear_worst <= 1e-9,
          fmt::format("tree max|diff| {:.2e}, linear max|diff| {:.2e}", tree_worst, linear_worst)};
}

Outcome criterion2() {
  Rng rng(1002);
  double eff_exact = 0.0;
  double eff_kernel = 0.0;
  double dummy_exact = 0.0;
  double dummy_kernel = 0.0;
  double symmetry = 0.0;
  for (int t = 0; t < 100; ++t) {
    // Efficiency: TreeSHAP, linear closed form, brute-force game, KernelSHAP.
    const std::size_t d = 3 + rng.below(6);
    const auto e = random_ensemble(d, 1 + rng.below(4), rng);
    const auto x = random_point(d, rng);
    eff_exact = std::max(eff_exact, tree_shap(e, x).efficiency_gap());
    const auto bg = gaussian_background(40, d, rng);
    const auto lm = random_linear(d, bg, rng);
    eff_exact = std::max(eff_exact, linear_shap(lm, x).efficiency_gap());
    std::vector<double> table(1u << d);
    for (auto& v : table) v = rng.normal();
    const auto game = exact_shapley(
        [&](const Coalition& s) {
          std::size_t mask = 0;
          for (std::size_t j = 0; j < d; ++j) mask |= s.contains(j) ? (1u << j) : 0u;
          return table[mask];
        },
        d);
    eff_exact = std::max(eff_exact, game.efficiency_gap());
    const MarginFunction f = [&](std::span<const double> z) { return e.margin(z); };
    eff_kernel = std::max(eff_kernel, kernel_shap(f, x, bg, {1000, 1e-6, 42 + static_cast<std::uint64_t>(t)}).efficiency_gap());

    // Dummy: a model that never reads the last feature.
    const std::size_t used = d - 1;
    TreeEnsemble partial;
    partial.dim = d;
    partial.trees.push_back(random_tree(used, 3, rng));
    dummy_exact = std::max(dummy_exact, std::abs(tree_shap(partial, x).phi[used]));
    auto lm_dummy = lm;
    lm_dummy.weights[used] = 0.0;
    dummy_exact = std::max(dummy_exact, std::abs(linear_shap(lm_dummy, x).phi[used]));
    const MarginFunction g = [&](std::span<const double> z) { return partial.margin(z); };
    dummy_kernel = std::max(dummy_kernel, std::abs(kernel_shap(g, x, bg, {1000, 1e-6, 7}).phi[used]));

    // Symmetry: features 0 and 1 enter through their sum and are equal at x.
    const double a = rng.normal();
    const double b = rng.normal();
    auto xs = x;
    xs[1] = xs[0];
    const auto sym = exact_shapley(
        [&](const Coalition& s) {
          const double s01 = (s.contains(0) ? xs[0] : 0.0) + (s.contains(1) ? xs[1] : 0.0);
          return a * s01 * s01 + b * (s.contains(2) ? xs[2] : 0.0);
        },
        d);
    symmetry = std::max(symmetry, std::abs(sym.phi[0] - sym.phi[1]));
    LinearModel twin = lm;
    twin.weights[1] = twin.weights[0];
    twin.train_feature_means[1] = twin.train_feature_means[0];
    const auto lin_sym = linear_shap(twin, xs);
    symmetry = std::max(symmetry, std::abs(lin_sym.phi[0] - lin_sym.phi[1]));
  }
  const bool pass = eff_exact <= 1e-9 && eff_kernel <= 1e-9 && dummy_exact == 0.0 &&
                    dummy_kernel <= 0.02 && symmetry <= 1e-9;
  return {pass, fmt::format("efficiency exact {:.1e} kernel {:.1e}; dummy exact {:.1e} kernel "
                            "{:.3f}; symmetry {:.1e}",
                            eff_exact, eff_kernel, dummy_exact, dummy_kernel, symmetry)};
}

Outcome criterion3() {
  // Ten features put KernelSHAP (1000 samples) in its sampled regime.
  const std::size_t d = 10;
  Rng rng(1003);
  const auto raw = testing_support::random_dataset(500, d, 1003);
  const auto parts = split(FeatureScaling::fit(raw).apply(raw), {42, 0.8});
  const auto bg = BackgroundSet::from_dataset(parts.train);
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    const auto m = random_linear(d, bg, rng);
    const MarginFunction f = [&](std::span<const double> z) { return m.margin(z); };
    for (std::size_t i = 0; i < 5; ++i) {
      const auto x = parts.test.row(i);
      const auto a = kernel_shap(f, x, bg, {1000, 1e-6, 100 + static_cast<std::uint64_t>(t)});
      worst = std::max(worst, max_abs_diff(a.phi, linear_shap(m, x).phi));
    }
  }
  return {worst <= 0.02, fmt::format("max componentwise deviation {:.4f}", worst)};
}

struct GapRuns {
  std::vector<GapResult> interaction;
  std::vector<GapResult> additive;
};

bool gbt_pair_exact(const GapResult& r) {
  std::size_t n = 0;
  for (const auto& rec : r.run.table.records) {
    if (rec.pair.model_a != "gbt" || rec.pair.model_b != "gbt@1") continue;
    if (!rec.rho || *rec.rho != 1.0) return false;
    ++n;
  }
  return n == r.run.explained.size() && n > 0;
}

Outcome criterion4(const GapRuns& runs) {
  bool pass = true;
  std::string detail;
  for (const auto& r : runs.interaction) {
    const bool ok = gbt_pair_exact(r) && r.delta >= 0.2 && r.p_value < 1e-3 && r.cohens_d >= 0.5 &&
                    r.lottery_rate_cross > r.lottery_rate_intra;
    pass = pass && ok;
    detail += fmt::format("[seed {} delta {:.3f} p {:.1e} d {:.2f} L {:.2f}>{:.2f}{}] ", r.run.seed,
                          r.delta, r.p_value, r.cohens_d, r.lottery_rate_cross,
                          r.lottery_rate_intra, ok ? "" : " FAIL");
  }
  return {pass, detail};
}

Outcome criterion5(const GapRuns& runs) {
  int within = 0;
  std::string detail;
  for (const auto& r : runs.additive) {
    within += std::abs(r.delta) <= 0.05 ? 1 : 0;
    detail += fmt::format("{:+.3f} ", r.delta);
  }
  return {within >= 4, fmt::format("{}/5 seeds within 0.05: {}", within, detail)};
}

Outcome criterion6() {
  const auto spec = default_gap_spec(interaction_dgp(), kSeeds.front());
  const std::vector<double> grid = {0.0, 0.5, 1.0, 2.0};
  const auto curve = run_density_sweep(spec, grid, kSeeds);
  std::string detail;
  for (const auto& p : curve.points) detail += fmt::format("I={:.1f}:{:.3f} ", p.abscissa, p.mean_delta);
  const double trend = curve.trend.value_or(std::nan(""));
  return {curve.trend && *curve.trend >= 0.9, fmt::format("Spearman {:.2f}; {}", trend, detail)};
}

Outcome criterion7() {
  const auto spec = default_gap_spec(interaction_dgp(), kSeeds.front());
  const std::vector<std::size_t> grid = {500, 1000, 2000, 4000};
  const auto curve = run_persistence_sweep(spec, grid, kSeeds);
  double max_delta = -1.0;
  std::string detail;
  for (const auto& p : curve.points) {
    max_delta = std::max(max_delta, p.mean_delta);
    detail += fmt::format("n={}:{:.3f} ", p.abscissa, p.mean_delta);
  }
  const double last = curve.points.back().mean_delta;
  return {last >= 0.5 * max_delta && last >= 0.1, detail};
}

Outcome criterion8() {
  // Mixed corpus: strong, absent, pure and weakened interactions.
  const std::vector<SyntheticSpec> corpus = {interaction_dgp(), additive_dgp(),
                                             multiplicative_dgp(),
                                             interaction_dgp().scaled_interactions(0.5)};
  std::vector<ModelSpec> roster;
  for (const char* name : {"gbt", "forest", "cart", "logistic", "ridge", "mlp"}) {
    roster.push_back(model_preset(name));
  }
  std::vector<std::vector<AttributionVector>> all(roster.size());
  std::uint64_t seed = 42;
  for (const auto& dgp : corpus) {
    const auto data = generate_synthetic(dgp, 1000, seed);
    const auto run = run_roster(roster, split(data, {seed, 0.8}), seed, RosterOptions{});
    for (std::size_t m = 0; m < roster.size(); ++m) {
      all[m].insert(all[m].end(), run.attributions[m].begin(), run.attributions[m].end());
    }
    ++seed;
  }
  const auto loo = loo_validate(all, 0.5);
  const auto& high = loo.zone(Zone::kHigh);
  const auto& low = loo.zone(Zone::kLow);
  const std::string detail =
      fmt::format("high {:.3f} ({} trials), moderate {:.3f} ({}), low {:.3f} ({} trials)",
                  high.agreement_probability, high.trials,
                  loo.zone(Zone::kModerate).agreement_probability,
                  loo.zone(Zone::kModerate).trials, low.agreement_probability, low.trials);
  if (high.trials < 30 || low.trials < 30) return {false, "a zone holds fewer than 30 trials: " + detail};
  return {high.agreement_probability - low.agreement_probability >= 0.2, detail};
}

Outcome criterion9() {
  const std::vector<double> a = {4, 5, 6};
  const std::vector<double> b = {1, 2, 3};
  double brute = 0.0;
  for (double x : a) {
    for (double y : b) brute += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  }
  const auto u = mann_whitney_u(a, b);
  const double d_hand = 1.0;  // (0,2) vs (0,0): mean gap 1, pooled SD sqrt((2 + 0) / 2) = 1
  const std::vector<double> trim = {0, 1, 2, 100};
  const double checks[] = {
      std::abs(u.u_statistic - brute),
      std::abs(u.u_statistic - 9.0),
      std::abs(mann_whitney_u(std::vector<double>{1}, std::vector<double>{2}).u_statistic),
      std::abs(cohens_d(std::vector<double>{0, 2}, std::vector<double>{0, 0}) - d_hand),
      std::abs(cohens_d(a, a)),
      std::abs(cles(a, b) - u.u_statistic / 9.0),
      std::abs(cles(a, a) - 0.5),
      std::abs(trimmed_mean(trim, 0.25) - 1.5),
      std::abs(trimmed_mean(trim, 0.0) - 25.75),
  };
  double worst = 0.0;
  for (double c : checks) worst = std::max(worst, c);
  const double threshold = bonferroni_threshold(0.001, 24);
  return {worst <= 1e-12 && threshold == 0.001 / 24,
          fmt::format("max deviation {:.1e}; Bonferroni threshold {:.3e}", worst, threshold)};
}

Outcome criterion10(const GapRuns& runs) {
  bool pass = true;
  std::string detail;
  for (const auto& r : runs.interaction) {
    const auto data = generate_synthetic(interaction_dgp(), 2000, r.run.seed);
    const auto parts = split(data, {r.run.seed, 0.8});
    const std::size_t count = std::min<std::size_t>(20, r.run.explained.size());
    const std::vector<std::size_t> positions(r.run.explained.begin(),
                                             r.run.explained.begin() + count);
    const auto report =
        stochasticity_control(r.run.models, parts.test, positions, r.run.background, 10);
    const bool ok = report.within_tree == 0.0 && report.cross > report.within_tree;
    pass = pass && ok;
    detail += fmt::format("[seed {} within {} cross {:.4f}] ", r.run.seed, report.within_tree,
                          report.cross);
  }
  return {pass, detail};
}

std::string slurp(const std::filesystem::path& p) { return testing_support::read_text(p); }

struct AuditCheck {
  Outcome determinism;
  std::vector<double> rates;
};

AuditCheck criterion11() {
  testing_support::TempDir dir("acceptance");
  const auto ds = generate_synthetic(interaction_dgp(), 1000, 2024);
  std::string text;
  for (const auto& name : ds.feature_names()) text += name + ",";
  text += "label\n";
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    for (std::size_t j = 0; j < ds.dim(); ++j) text += fmt::format("{},", ds.at(i, j));
    text += std::to_string(ds.label(i)) + "\n";
  }
  testing_support::write_text(dir.path() / "data.csv", text);

  RunConfig config;
  config.data_path = (dir.path() / "data.csv").string();
  config.timestamp = false;
  std::ostringstream log;
  AuditCheck check;
  for (const char* out : {"first", "second"}) {
    config.out = dir.path() / out;
    if (cmd_audit(config, log) != kExitOk) {
      check.determinism = {false, "cmd_audit failed: " + log.str()};
      return check;
    }
  }
  bool same = true;
  std::string detail;
  for (const char* f : {"report.json", "agreement.csv", "attributions.csv", "reliability.csv"}) {
    const auto a = slurp(dir.path() / "first" / f);
    const auto b = slurp(dir.path() / "second" / f);
    const bool eq = !a.empty() && a == b;
    same = same && eq;
    detail += fmt::format("{} {} bytes {}; ", f, a.size(), eq ? "identical" : "DIFFER");
  }
  check.determinism = {same, detail};
  const auto report = nlohmann::ordered_json::parse(slurp(dir.path() / "first" / "report.json"));
  for (const auto& row : report.at("lottery")) check.rates.push_back(row.at("rate").get<double>());
  return check;
}

bool non_decreasing(const std::vector<double>& v) {
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] < v[k - 1]) return false;
  }
  return true;
}

Outcome criterion12(const GapRuns& runs, const std::vector<double>& audit_rates) {
  bool pass = !audit_rates.empty() && non_decreasing(audit_rates);
  std::size_t checked = 1;
  for (const auto* set : {&runs.interaction, &runs.additive}) {
    for (const auto& r : *set) {
      std::vector<double> rates;
      for (double tau : kTaus) rates.push_back(lottery_rate(r.run.table, tau, {}, 200, 1).rate);
      pass = pass && non_decreasing(rates);
      ++checked;
    }
  }
  std::string curve;
  for (double r : audit_rates) curve += fmt::format("{:.3f} ", r);
  return {pass, fmt::format("{} runs checked; audit L(tau): {}", checked, curve)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += o.pass ? 0 : 1;
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  };

  GapRuns runs;
  for (auto seed : kSeeds) {
    runs.interaction.push_back(run_gap_experiment(default_gap_spec(interaction_dgp(), seed)));
    runs.additive.push_back(run_gap_experiment(default_gap_spec(additive_dgp(), seed)));
  }
  AuditCheck audit;

  report(1, "Shapley oracle equivalence", criterion1);
  report(2, "Shapley axioms", criterion2);
  report(3, "KernelSHAP convergence", criterion3);
  report(4, "same-split structural gap", [&] { return criterion4(runs); });
  report(5, "additive escape", [&] { return criterion5(runs); });
  report(6, "density monotonicity", criterion6);
  report(7, "persistence", criterion7);
  report(8, "reliability separation", criterion8);
  report(9, "statistics oracle", criterion9);
  report(10, "stochasticity control", [&] { return criterion10(runs); });
  report(11, "end-to-end determinism", [&] {
    audit = criterion11();
    return audit.determinism;
  });
  report(12, "lottery-rate monotonicity", [&] { return criterion12(runs, audit.rates); });

  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
