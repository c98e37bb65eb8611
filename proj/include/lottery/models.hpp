#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lottery/data.hpp"

namespace lottery {

enum class HypothesisClass { kTree, kLinear, kNeural };

std::string_view to_string(HypothesisClass cls);
HypothesisClass hypothesis_class_from_string(std::string_view name);

double sigmoid(double margin);
// log(p / (1 - p)) with p clipped to [1e-12, 1 - 1e-12].
double log_odds(double p);

// ---------------------------------------------------------------------------
// Linear models

enum class LinearLoss { kLogistic, kSquared };

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  // Training-split feature means, the reference point of linear attributions.
  std::vector<double> train_feature_means;
  LinearLoss loss = LinearLoss::kLogistic;
  bool converged = true;
  std::size_t iterations = 0;

  double margin(std::span<const double> x) const;
};

struct LogisticConfig {
  double l2 = 1.0;
  std::size_t max_iter = 200;
  double tol = 1e-8;
};

// Mean logistic loss plus l2 / (2n) * ||w||^2 (the bias is not penalized).
double logistic_objective(const Dataset& train, std::span<const double> weights, double bias,
                          double l2);

// Damped Newton iterations on the regularized logistic objective until the
// largest gradient component is <= tol. Throws NumericError on a non-finite
// objective.
LinearModel train_logistic(const Dataset& train, const LogisticConfig& config,
                           std::uint64_t seed);

struct RidgeConfig {
  double lambda = 1.0;
};

// Closed-form ridge regression on {-1, +1} targets with an unpenalized bias.
LinearModel train_ridge(const Dataset& train, double lambda, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Trees

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;   // rows with x[feature] <= threshold
  int right = -1;  // rows with x[feature] > threshold
  double value = 0.0;
  double cover = 0.0;

  bool is_leaf() const { return feature < 0; }
};

// Flat node array; node 0 is the root.
struct Tree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const;
  std::size_t depth() const;
  std::size_t leaf_count() const;
};

enum class Aggregation { kSum, kMean };

struct TreeEnsemble {
  std::vector<Tree> trees;
  double base_score = 0.0;
  Aggregation aggregation = Aggregation::kSum;
  std::size_t dim = 0;

  // base_score + sum of tree outputs (kSum) or mean of tree outputs (kMean).
  double margin(std::span<const double> x) const;
};

struct CartConfig {
  std::size_t max_depth = 5;
  std::size_t min_leaf = 5;
};

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 8;
  std::size_t min_leaf = 1;
  // Fraction of features drawn (without replacement) at every split; at least one.
  double feature_subsample = 0.5;
  bool bootstrap = true;
};

struct GbtConfig {
  std::size_t n_rounds = 100;
  std::size_t depth = 3;
  double learning_rate = 0.1;
  double l2_leaf = 1.0;
  double row_subsample = 1.0;
  std::size_t min_leaf = 1;
  double min_child_hessian = 1.0;
};

// Single greedy variance-reduction tree; leaf values are class-1 fractions.
TreeEnsemble train_cart(const Dataset& train, const CartConfig& config, std::uint64_t seed);

TreeEnsemble train_random_forest(const Dataset& train, const ForestConfig& config,
                                 std::uint64_t seed);

// Newton-boosted regression trees on the logistic loss.
TreeEnsemble train_gbt(const Dataset& train, const GbtConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Multilayer perceptron: one rectified hidden layer, logistic output.

struct MlpModel {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  std::vector<double> hidden_weights;  // hidden x input_dim, row-major
  std::vector<double> hidden_bias;     // hidden
  std::vector<double> output_weights;  // hidden
  double output_bias = 0.0;

  double margin(std::span<const double> x) const;
};

struct MlpConfig {
  std::size_t hidden_width = 16;
  std::size_t epochs = 1000;
  double step_size = 0.5;
};

MlpModel train_mlp(const Dataset& train, const MlpConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------

struct TrainedModel {
  std::string id;
  HypothesisClass hypothesis_class = HypothesisClass::kLinear;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::variant<LinearModel, TreeEnsemble, MlpModel> payload;

  std::size_t dim() const;
  // Throws InputError when the tag disagrees with the payload.
  void check_consistent() const;
};

// Pre-link score: log-odds for logistic / boosted / MLP, mean leaf value for
// bagged trees, w.x + b for ridge.
double margin(const TrainedModel& model, std::span<const double> x);
double predict_proba(const TrainedModel& model, std::span<const double> x);
int predict_label(const TrainedModel& model, std::span<const double> x);
double accuracy(const TrainedModel& model, const Dataset& data);

// ---------------------------------------------------------------------------
// Named trainer configurations ("presets") used by rosters.

struct ModelSpec {
  std::string name;
  std::variant<LogisticConfig, RidgeConfig, CartConfig, ForestConfig, GbtConfig, MlpConfig> config;
  // Added to the run seed so two copies of one preset can differ in seed.
  std::uint64_t seed_offset = 0;

  HypothesisClass hypothesis_class() const;
  // Canonical text of the configuration (stable across runs).
  std::string describe() const;
};

// Known presets: logistic, ridge, ridge-0.1, ridge-10, cart, forest, gbt,
// gbt-deep, gbt-l2, mlp. A "name@k" suffix adds k to the seed offset.
ModelSpec model_preset(std::string_view name);

TrainedModel train_model(const ModelSpec& spec, const Dataset& train, std::uint64_t seed);

// 64-bit FNV-1a of `text`, hex encoded.
std::string digest_hex(std::string_view text);

}  // namespace lottery
