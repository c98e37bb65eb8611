#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <gtest/gtest.h>

#include "lottery/error.hpp"
#include "lottery/models.hpp"
#include "lottery/theoryval.hpp"
#include "test_support.hpp"

using namespace lottery;
using testing_support::make_dataset;
using testing_support::random_dataset;
using testing_support::wrap;

namespace {

double norm2(const std::vector<double>& w) {
  return std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
}

bool same_structure(const Tree& a, const Tree& b) {
  if (a.nodes.size() != b.nodes.size()) return false;
  for (std::size_t k = 0; k < a.nodes.size(); ++k) {
    const auto& x = a.nodes[k];
    const auto& y = b.nodes[k];
    if (x.feature != y.feature || x.threshold != y.threshold || x.left != y.left ||
        x.right != y.right || x.value != y.value || x.cover != y.cover) {
      return false;
    }
  }
  return true;
}

bool same_ensemble(const TreeEnsemble& a, const TreeEnsemble& b) {
  if (a.trees.size() != b.trees.size() || a.base_score != b.base_score) return false;
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    if (!same_structure(a.trees[t], b.trees[t])) return false;
  }
  return true;
}

double leaf_cover_sum(const Tree& t) {
  double s = 0.0;
  for (const auto& n : t.nodes) s += n.is_leaf() ? n.cover : 0.0;
  return s;
}

double model_accuracy(const TreeEnsemble& e, const Dataset& test) {
  return accuracy(wrap(e), test);
}

}  // namespace

TEST(Logistic, SeparationDirection) {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = -10; i <= 10; ++i) {
    if (i == 0) continue;
    rows.push_back({i / 10.0});
    labels.push_back(i > 0 ? 1 : 0);
  }
  const auto model = train_logistic(make_dataset(rows, labels), {}, 0);
  EXPECT_GT(model.weights[0], 0.0);
}

TEST(Logistic, NormShrinksWithL2) {
  const auto data = random_dataset(300, 4, 5);
  double last = std::numeric_limits<double>::infinity();
  for (double l2 : {0.1, 1.0, 10.0}) {
    const auto model = train_logistic(data, {l2, 200, 1e-8}, 0);
    const double n = norm2(model.weights);
    EXPECT_LE(n, last);
    last = n;
  }
}

TEST(Logistic, FiniteDifferenceGradientVanishesAtOptimum) {
  const auto data = random_dataset(400, 5, 11);
  const LogisticConfig config{1.0, 200, 1e-8};
  const auto model = train_logistic(data, config, 0);
  EXPECT_TRUE(model.converged);
  std::vector<double> theta = model.weights;
  theta.push_back(model.bias);
  const double h = 1e-5;
  auto objective = [&](const std::vector<double>& t) {
    return logistic_objective(data, std::span<const double>(t.data(), 5), t[5], config.l2);
  };
  for (std::size_t k = 0; k < theta.size(); ++k) {
    auto up = theta;
    auto down = theta;
    up[k] += h;
    down[k] -= h;
    const double g = (objective(up) - objective(down)) / (2 * h);
    EXPECT_LE(std::abs(g), 10 * config.tol) << "component " << k;
  }
  for (std::size_t j = 0; j < 5; ++j) {
    double m = 0;
    for (std::size_t i = 0; i < data.rows(); ++i) m += data.at(i, j);
    EXPECT_NEAR(model.train_feature_means[j], m / data.rows(), 1e-12);
  }
}

TEST(Logistic, RejectsDegenerateLabels) {
  const auto data = make_dataset({{1.0}, {2.0}}, {1, 1});
  EXPECT_THROW(train_logistic(data, {}, 0), InputError);
}

TEST(Ridge, ShrinkageOnOrthogonalDesign) {
  // Centered, orthogonal columns: X'X = 4I, so w = X'y_c / (4 + lambda).
  const auto data = make_dataset({{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}, {1, 1, 0, 1});
  const double y_mean = (1 + 1 - 1 + 1) / 4.0;
  const double yc[4] = {1 - y_mean, 1 - y_mean, -1 - y_mean, 1 - y_mean};
  const double xty0 = yc[0] + yc[1] - yc[2] - yc[3];
  const double xty1 = yc[0] - yc[1] + yc[2] - yc[3];
  const auto model = train_ridge(data, 1.0, 0);
  EXPECT_NEAR(model.weights[0], xty0 / 5.0, 1e-12);
  EXPECT_NEAR(model.weights[1], xty1 / 5.0, 1e-12);
  EXPECT_NEAR(model.bias, y_mean, 1e-12);
}

TEST(Ridge, LargeLambdaSendsWeightsToZero) {
  const auto data = random_dataset(200, 3, 3);
  const auto small = train_ridge(data, 1.0, 0);
  const auto large = train_ridge(data, 1e9, 0);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_LT(std::abs(large.weights[j]), 1e-6);
    EXPECT_LT(std::abs(large.weights[j]), std::abs(small.weights[j]));
  }
  EXPECT_THROW(train_ridge(data, 0.0, 0), InputError);
}

TEST(Ridge, Deterministic) {
  const auto data = random_dataset(200, 3, 3);
  EXPECT_EQ(train_ridge(data, 1.0, 1).weights, train_ridge(data, 1.0, 2).weights);
}

TEST(Cart, ConstantLabelsGiveOneLeaf) {
  const auto data = make_dataset({{1}, {2}, {3}, {4}}, {1, 1, 1, 1});
  const auto tree = train_cart(data, {}, 0);
  ASSERT_EQ(tree.trees.size(), 1u);
  ASSERT_EQ(tree.trees[0].nodes.size(), 1u);
  EXPECT_DOUBLE_EQ(tree.trees[0].nodes[0].value, 1.0);
}

TEST(Cart, RootSplitMatchesExhaustiveScan) {
  Rng rng(3);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 20; ++i) {
    rows.push_back({rng.uniform(), rng.uniform()});
    labels.push_back(rows.back()[0] > 0.5 ? 1 : 0);
  }
  const auto data = make_dataset(rows, labels);
  // Oracle: best SSE reduction over every (feature, cut between sorted values).
  double best = -1;
  int best_f = -1;
  double lo = 0;
  double hi = 0;
  for (int f = 0; f < 2; ++f) {
    std::vector<std::pair<double, int>> col;
    for (int i = 0; i < 20; ++i) col.push_back({rows[i][f], labels[i]});
    std::sort(col.begin(), col.end());
    const double total = std::accumulate(labels.begin(), labels.end(), 0.0);
    double left = 0;
    for (int k = 1; k < 20; ++k) {
      left += col[k - 1].second;
      const double right = total - left;
      const double gain = left * left / k + right * right / (20 - k) - total * total / 20;
      if (gain > best + 1e-12) {
        best = gain;
        best_f = f;
        lo = col[k - 1].first;
        hi = col[k].first;
      }
    }
  }
  const auto tree = train_cart(data, {1, 1}, 0);
  const auto& root = tree.trees[0].nodes[0];
  EXPECT_EQ(root.feature, best_f);
  EXPECT_EQ(best_f, 0);
  EXPECT_GE(root.threshold, lo);
  EXPECT_LT(root.threshold, hi);
  EXPECT_EQ(accuracy(wrap(tree), data), 1.0);
}

TEST(Cart, MinLeafEqualToRowsGivesOneLeaf) {
  const auto data = random_dataset(30, 2, 1);
  EXPECT_EQ(train_cart(data, {5, 30}, 0).trees[0].nodes.size(), 1u);
}

TEST(Cart, LeafCoversSumToRows) {
  const auto data = random_dataset(200, 3, 8);
  const auto tree = train_cart(data, {}, 0);
  EXPECT_DOUBLE_EQ(leaf_cover_sum(tree.trees[0]), 200.0);
}

TEST(Forest, DegenerateConfigEqualsCart) {
  const auto data = random_dataset(150, 4, 2);
  ForestConfig config;
  config.n_trees = 1;
  config.max_depth = 5;
  config.min_leaf = 5;
  config.feature_subsample = 1.0;
  config.bootstrap = false;
  const auto forest = train_random_forest(data, config, 9);
  const auto cart = train_cart(data, {5, 5}, 0);
  EXPECT_TRUE(same_ensemble(forest, cart));
}

TEST(Forest, SeededAndBootstrapCovers) {
  const auto data = random_dataset(150, 4, 2);
  ForestConfig config;
  config.n_trees = 10;
  const auto a = train_random_forest(data, config, 7);
  const auto b = train_random_forest(data, config, 7);
  const auto c = train_random_forest(data, config, 8);
  EXPECT_TRUE(same_ensemble(a, b));
  EXPECT_FALSE(same_ensemble(a, c));
  // Bootstrap multiplicities sum to n for every tree.
  for (const auto& t : a.trees) EXPECT_DOUBLE_EQ(leaf_cover_sum(t), 150.0);
  config.n_trees = 0;
  EXPECT_THROW(train_random_forest(data, config, 7), InputError);
}

TEST(Forest, LearnsTheInteractionDgp) {
  const auto data = generate_synthetic(interaction_dgp(), 2000, 42);
  const auto parts = split(data, {42, 0.8});
  const auto forest = train_random_forest(parts.train, {}, 42);
  EXPECT_GT(model_accuracy(forest, parts.test), 0.85);
}

TEST(Gbt, ConstantLabels) {
  const auto data = make_dataset({{1}, {2}, {3}}, {0, 0, 0});
  const auto model = train_gbt(data, {}, 0);
  EXPECT_DOUBLE_EQ(model.base_score, log_odds(0.0));
  for (const auto& t : model.trees) {
    for (const auto& n : t.nodes) {
      EXPECT_TRUE(n.is_leaf());
      EXPECT_EQ(n.value, 0.0);
    }
  }
}

TEST(Gbt, XorNeedsTrees) {
  const auto data = generate_synthetic(multiplicative_dgp(), 2000, 42);
  const auto parts = split(data, {42, 0.8});
  const auto gbt = train_gbt(parts.train, {}, 0);
  const auto logistic = train_logistic(parts.train, {}, 0);
  EXPECT_GE(model_accuracy(gbt, parts.test), 0.9);
  EXPECT_LE(accuracy(wrap(logistic), parts.test), 0.6);
  const auto ridge = train_ridge(parts.train, 1.0, 0);
  EXPECT_LE(accuracy(wrap(ridge), parts.test), 0.6);
}

TEST(Gbt, DeterministicWithoutSubsampling) {
  const auto data = random_dataset(300, 4, 4);
  EXPECT_TRUE(same_ensemble(train_gbt(data, {}, 42), train_gbt(data, {}, 123)));
  GbtConfig sub;
  sub.row_subsample = 0.5;
  EXPECT_FALSE(same_ensemble(train_gbt(data, sub, 42), train_gbt(data, sub, 123)));
  EXPECT_TRUE(same_ensemble(train_gbt(data, sub, 42), train_gbt(data, sub, 42)));
  sub.row_subsample = 1.5;
  EXPECT_THROW(train_gbt(data, sub, 0), InputError);
}

TEST(Gbt, MarginIsBasePlusTreeSum) {
  const auto data = random_dataset(300, 4, 4);
  const auto model = train_gbt(data, {}, 0);
  for (std::size_t i = 0; i < 20; ++i) {
    double s = model.base_score;
    for (const auto& t : model.trees) s += t.predict(data.row(i));
    EXPECT_NEAR(model.margin(data.row(i)), s, 1e-12);
    for (const auto& t : model.trees) EXPECT_DOUBLE_EQ(leaf_cover_sum(t), 300.0);
  }
}

TEST(Mlp, ZeroEpochsStaysAtInitialization) {
  const auto data = random_dataset(400, 3, 6);
  MlpConfig config;
  config.epochs = 0;
  const auto a = train_mlp(data, config, 42);
  config.epochs = 1;
  const auto b = train_mlp(data, config, 42);
  EXPECT_NE(a.output_weights, b.output_weights);
  TrainedModel m;
  m.hypothesis_class = HypothesisClass::kNeural;
  m.payload = a;
  const double acc = accuracy(m, data);
  EXPECT_GT(acc, 0.2);
  EXPECT_LT(acc, 0.8);
}

TEST(Mlp, SeparableDataIsLearned) {
  Rng rng(1);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) {
    const double a = rng.normal();
    const double b = rng.normal();
    const int y = a + b > 0 ? 1 : 0;
    // Keep a margin so the problem is cleanly separable.
    rows.push_back({a + (y ? 0.5 : -0.5), b});
    labels.push_back(y);
  }
  const auto data = make_dataset(rows, labels);
  TrainedModel m;
  m.hypothesis_class = HypothesisClass::kNeural;
  m.payload = train_mlp(data, {}, 42);
  EXPECT_GE(accuracy(m, data), 0.95);
}

TEST(Mlp, SeedsGiveDifferentParameters) {
  const auto data = random_dataset(100, 3, 6);
  MlpConfig config;
  config.epochs = 10;
  const auto a = train_mlp(data, config, 42);
  const auto b = train_mlp(data, config, 123);
  EXPECT_NE(a.hidden_weights, b.hidden_weights);
  EXPECT_EQ(a.hidden_weights, train_mlp(data, config, 42).hidden_weights);
}

TEST(Prediction, LinearMargin) {
  LinearModel lm;
  lm.weights = {2, -1};
  lm.train_feature_means = {0, 0};
  const std::vector<double> x = {1, 1};
  EXPECT_DOUBLE_EQ(margin(wrap(lm), x), 1.0);
}

TEST(Prediction, MeanAggregationLeafIsProbability) {
  TreeEnsemble e;
  e.aggregation = Aggregation::kMean;
  e.dim = 2;
  Tree t;
  t.nodes.push_back({});
  t.nodes[0].value = 0.3;
  t.nodes[0].cover = 1;
  e.trees.push_back(t);
  const auto m = wrap(e);
  EXPECT_DOUBLE_EQ(predict_proba(m, std::vector<double>{5, -5}), 0.3);
  EXPECT_EQ(predict_label(m, std::vector<double>{0, 0}), 0);
}

TEST(Prediction, ProbaMonotoneInMargin) {
  LinearModel lm;
  lm.weights = {1.0};
  lm.train_feature_means = {0};
  const auto m = wrap(lm);
  double last = -1;
  for (double v = -40; v <= 40; v += 0.5) {
    const double p = predict_proba(m, std::vector<double>{v});
    EXPECT_GE(p, last);
    last = p;
  }
  EXPECT_EQ(predict_label(m, std::vector<double>{0.0}), 1);
}

TEST(Prediction, LogOddsClipping) {
  EXPECT_TRUE(std::isfinite(log_odds(0.0)));
  EXPECT_TRUE(std::isfinite(log_odds(1.0)));
  EXPECT_NEAR(log_odds(0.0), std::log(1e-12 / (1 - 1e-12)), 1e-9);
  EXPECT_DOUBLE_EQ(log_odds(0.5), 0.0);
}

TEST(Presets, NamesAndSeedOffsets) {
  EXPECT_EQ(model_preset("gbt@3").seed_offset, 3u);
  EXPECT_EQ(model_preset("ridge-10").hypothesis_class(), HypothesisClass::kLinear);
  EXPECT_EQ(model_preset("mlp").hypothesis_class(), HypothesisClass::kNeural);
  EXPECT_THROW(model_preset("xgboost"), InputError);
  EXPECT_THROW(model_preset("gbt@x"), InputError);
  const auto data = random_dataset(100, 3, 1);
  const auto a = train_model(model_preset("forest"), data, 1);
  const auto b = train_model(model_preset("forest@1"), data, 0);
  EXPECT_EQ(a.seed, b.seed);
  EXPECT_TRUE(same_ensemble(std::get<TreeEnsemble>(a.payload), std::get<TreeEnsemble>(b.payload)));
  EXPECT_NE(model_preset("gbt").describe(), model_preset("gbt-deep").describe());
}

TEST(TrainedModelTag, InconsistentTagIsRejected) {
  auto m = wrap(LinearModel{});
  m.hypothesis_class = HypothesisClass::kTree;
  EXPECT_THROW(m.check_consistent(), InputError);
}
