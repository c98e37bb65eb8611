#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lottery/agreement.hpp"
#include "lottery/data.hpp"
#include "lottery/models.hpp"
#include "lottery/roster.hpp"

namespace lottery {

struct ExperimentSpec {
  SyntheticSpec dgp;
  std::vector<ModelSpec> roster;
  std::uint64_t seed = 42;  // drives data generation, the split and training
  std::size_t n = 2000;
  double tau = 0.5;
  double train_fraction = 0.8;
  PairClass intra = PairClass::kIntraTree;
  PairClass inter = PairClass::kCrossTreeLinear;
  RosterOptions options;

  // Throws InputError unless the roster yields both compared pair classes.
  void validate() const;
};

// Interaction DGP used by the gap experiments: d = 6, alpha_12 = 2, additive
// terms on every feature, noiseless labels.
SyntheticSpec interaction_dgp();
// interaction_dgp() with the interaction removed.
SyntheticSpec additive_dgp();
// Pure product x1 * x2 in d = 6 with no additive part.
SyntheticSpec multiplicative_dgp();

// {gbt, gbt@1, forest, cart, logistic, ridge}
std::vector<ModelSpec> default_gap_roster();
// default_gap_roster() plus two seeded MLPs.
std::vector<ModelSpec> three_class_roster();

ExperimentSpec default_gap_spec(const SyntheticSpec& dgp, std::uint64_t seed);

struct GapResult {
  double rho_intra = 0.0;
  double rho_inter = 0.0;
  double delta = 0.0;
  double lottery_rate_cross = 0.0;
  double lottery_rate_intra = 0.0;
  double p_value = 1.0;
  double cohens_d = 0.0;
  double cles = 0.5;
  double equivalence_coverage = 0.0;
  std::size_t n_intra = 0;
  std::size_t n_inter = 0;
  RosterRun run;
};

// Same-split gap experiment. Throws InputError when the equivalence set is empty.
GapResult run_gap_experiment(const ExperimentSpec& spec);

struct SweepPoint {
  double abscissa = 0.0;
  std::vector<double> deltas;  // one per seed
  double mean_delta = 0.0;
  double mean_rho_intra = 0.0;
  double mean_rho_inter = 0.0;
  double mean_lottery_rate = 0.0;
  double mean_p_value = 0.0;
  double mean_cohens_d = 0.0;
};

struct SweepCurve {
  std::vector<SweepPoint> points;  // abscissa strictly increasing
  std::optional<double> trend;     // Spearman(abscissa, mean delta); density sweep only
  bool verdict = false;
};

// Gap experiment at every n in `n_grid` for every seed. Verdict: last mean
// delta >= 0.5 * max mean delta.
SweepCurve run_persistence_sweep(const ExperimentSpec& spec, std::span<const std::size_t> n_grid,
                                 std::span<const std::uint64_t> seeds);

// Scales every alpha_ij by each grid value; abscissa is the interaction
// density. Verdict: Spearman(density, mean delta) >= 0.9 (undefined with
// fewer than two grid points).
SweepCurve run_density_sweep(const ExperimentSpec& spec, std::span<const double> alpha_grid,
                             std::span<const std::uint64_t> seeds);

struct CollapseCheck {
  double max_diff = 0.0;
  bool pass = false;
};

// Logistic fit on `train`; compares exact interventional Shapley values
// (feature-mean background) or KernelSHAP with the closed form on up to
// `probes` training rows.
CollapseCheck verify_linear_collapse(const Dataset& train, double tol, bool use_kernel = false,
                                     std::size_t probes = 20);

struct InteractionCheck {
  double tree_max_diff = 0.0;
  double linear_max_diff = 0.0;
  bool pass = false;
};

// Probes phi_1 at input pairs that differ only in x_2 (x_2 = +1 vs -1).
// Passes when the boosted model's difference exceeds 1e-3 and the logistic
// model's stays <= 1e-9.
InteractionCheck verify_tree_interaction(const Dataset& train, const GbtConfig& config = {},
                                         std::size_t probes = 50);

struct StochasticityReport {
  double within_tree = 0.0;    // TreeSHAP repeated on identical inputs
  double within_kernel = 0.0;  // KernelSHAP repeated with different seeds
  double cross = 0.0;          // across roster models
  double ratio = 0.0;          // cross / max(within_kernel, within_tree), 0 when undefined
};

// Variances are per (instance, feature) and averaged.
StochasticityReport stochasticity_control(std::span<const TrainedModel> models,
                                          const Dataset& test,
                                          std::span<const std::size_t> positions,
                                          const BackgroundSet& background, std::size_t repeats,
                                          const KernelShapOptions& kernel = {});

}  // namespace lottery
