#include "lottery/models.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>

#include <fmt/format.h>

#include "lottery/csv.hpp"
#include "lottery/error.hpp"
#include "lottery/rng.hpp"
#include "tree_builder.hpp"

namespace lottery {

std::string_view to_string(HypothesisClass cls) {
  switch (cls) {
    case HypothesisClass::kTree:
      return "tree";
    case HypothesisClass::kLinear:
      return "linear";
    case HypothesisClass::kNeural:
      return "neural";
  }
  return "unknown";
}

HypothesisClass hypothesis_class_from_string(std::string_view name) {
  if (name == "tree") return HypothesisClass::kTree;
  if (name == "linear") return HypothesisClass::kLinear;
  if (name == "neural") return HypothesisClass::kNeural;
  throw InputError(fmt::format("unknown hypothesis class '{}'", name));
}

double sigmoid(double margin) {
  if (margin >= 0.0) return 1.0 / (1.0 + std::exp(-margin));
  const double e = std::exp(margin);
  return e / (1.0 + e);
}

double log_odds(double p) {
  constexpr double kEps = 1e-12;
  p = std::clamp(p, kEps, 1.0 - kEps);
  return std::log(p / (1.0 - p));
}

namespace {

// log(1 + exp(m)) without overflow.
double softplus(double m) { return m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m)); }

void require_trainable(const Dataset& train, std::string_view what) {
  if (train.rows() == 0) throw InputError(fmt::format("{}: empty training set", what));
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear

double LinearModel::margin(std::span<const double> x) const {
  double m = bias;
  for (std::size_t j = 0; j < weights.size(); ++j) m += weights[j] * x[j];
  return m;
}

double logistic_objective(const Dataset& train, std::span<const double> weights, double bias,
                          double l2) {
  const auto n = static_cast<double>(train.rows());
  double loss = 0.0;
  for (std::size_t i = 0; i < train.rows(); ++i) {
    const auto x = train.row(i);
    double m = bias;
    for (std::size_t j = 0; j < weights.size(); ++j) m += weights[j] * x[j];
    loss += softplus(m) - train.label(i) * m;
  }
  double penalty = 0.0;
  for (double w : weights) penalty += w * w;
  return loss / n + 0.5 * l2 / n * penalty;
}

LinearModel train_logistic(const Dataset& train, const LogisticConfig& config,
                           std::uint64_t /*seed*/) {
  require_trainable(train, "logistic");
  if (!train.nondegenerate()) throw InputError("logistic: training labels contain one class");
  if (config.l2 < 0.0) throw InputError("logistic: l2 must be >= 0");
  const std::size_t n = train.rows();
  const std::size_t d = train.dim();
  const std::size_t p = d + 1;  // weights then bias
  const auto nn = static_cast<double>(n);

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  auto objective = [&](const Eigen::VectorXd& t) {
    return logistic_objective(train, std::span<const double>(t.data(), d), t[static_cast<Eigen::Index>(d)],
                              config.l2);
  };

  LinearModel model;
  model.loss = LinearLoss::kLogistic;
  model.converged = false;
  double f = objective(theta);
  for (std::size_t iter = 0; iter < config.max_iter; ++iter) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p),
                                                 static_cast<Eigen::Index>(p));
    Eigen::VectorXd z(static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = train.row(i);
      for (std::size_t j = 0; j < d; ++j) z[static_cast<Eigen::Index>(j)] = x[j];
      z[static_cast<Eigen::Index>(d)] = 1.0;
      const double prob = sigmoid(z.dot(theta));
      grad.noalias() += (prob - train.label(i)) * z;
      hess.selfadjointView<Eigen::Lower>().rankUpdate(z, prob * (1.0 - prob));
    }
    hess = hess.selfadjointView<Eigen::Lower>();
    grad /= nn;
    hess /= nn;
    for (std::size_t j = 0; j < d; ++j) {
      const auto k = static_cast<Eigen::Index>(j);
      grad[k] += config.l2 / nn * theta[k];
      hess(k, k) += config.l2 / nn;
    }
    model.iterations = iter;
    if (grad.cwiseAbs().maxCoeff() <= config.tol) {
      model.converged = true;
      break;
    }
    // Small jitter keeps the system solvable on separable, unregularized data.
    hess.diagonal().array() += 1e-12;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    double t = 1.0;
    const double slope = grad.dot(step);
    Eigen::VectorXd candidate = theta - step;
    double f_new = objective(candidate);
    while (!(f_new <= f - 1e-4 * t * slope) && t > 1e-10) {
      t *= 0.5;
      candidate = theta - t * step;
      f_new = objective(candidate);
    }
    if (!std::isfinite(f_new)) throw NumericError("logistic: objective became non-finite");
    if (!(f_new <= f)) {
      // Line search stalled at machine precision; take the gradient verdict as final.
      model.iterations = iter + 1;
      break;
    }
    theta = candidate;
    f = f_new;
  }
  if (!std::isfinite(f)) throw NumericError("logistic: objective is non-finite");
  model.weights.assign(theta.data(), theta.data() + d);
  model.bias = theta[static_cast<Eigen::Index>(d)];
  model.train_feature_means = train.column_means();
  return model;
}

LinearModel train_ridge(const Dataset& train, double lambda, std::uint64_t /*seed*/) {
  require_trainable(train, "ridge");
  if (!(lambda > 0.0)) throw InputError("ridge: lambda must be > 0");
  const std::size_t n = train.rows();
  const std::size_t d = train.dim();
  const auto means = train.column_means();
  double y_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) y_mean += train.label(i) == 1 ? 1.0 : -1.0;
  y_mean /= static_cast<double>(n);

  const auto dd = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dd, dd);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dd);
  Eigen::VectorXd xc(dd);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = train.row(i);
    for (std::size_t j = 0; j < d; ++j) xc[static_cast<Eigen::Index>(j)] = x[j] - means[j];
    const double yc = (train.label(i) == 1 ? 1.0 : -1.0) - y_mean;
    gram.selfadjointView<Eigen::Lower>().rankUpdate(xc);
    rhs.noalias() += yc * xc;
  }
  gram = gram.selfadjointView<Eigen::Lower>();
  gram.diagonal().array() += lambda;
  const Eigen::VectorXd w = gram.ldlt().solve(rhs);
  if (!w.allFinite()) throw NumericError("ridge: normal equations produced non-finite weights");

  LinearModel model;
  model.loss = LinearLoss::kSquared;
  model.weights.assign(w.data(), w.data() + d);
  model.bias = y_mean;
  for (std::size_t j = 0; j < d; ++j) model.bias -= model.weights[j] * means[j];
  model.train_feature_means = means;
  return model;
}

// ---------------------------------------------------------------------------
// Trees

double Tree::predict(std::span<const double> x) const {
  std::size_t k = 0;
  while (!nodes[k].is_leaf()) {
    const auto& node = nodes[k];
    k = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold
                                     ? node.left
                                     : node.right);
  }
  return nodes[k].value;
}

std::size_t Tree::depth() const {
  std::function<std::size_t(std::size_t)> rec = [&](std::size_t k) -> std::size_t {
    const auto& node = nodes[k];
    if (node.is_leaf()) return 0;
    return 1 + std::max(rec(static_cast<std::size_t>(node.left)),
                        rec(static_cast<std::size_t>(node.right)));
  };
  return nodes.empty() ? 0 : rec(0);
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

double TreeEnsemble::margin(std::span<const double> x) const {
  double total = 0.0;
  for (const auto& tree : trees) total += tree.predict(x);
  if (aggregation == Aggregation::kMean) {
    return trees.empty() ? base_score : total / static_cast<double>(trees.size());
  }
  return base_score + total;
}

namespace {

// Variance-reduction tree over weighted rows: gradient -count*y, hessian count.
Tree grow_class_tree(const Dataset& train, const detail::SortedColumns& sorted,
                     std::span<const double> counts, std::size_t max_depth, std::size_t min_leaf,
                     double feature_fraction, Rng& rng) {
  std::vector<double> grad(train.rows());
  for (std::size_t i = 0; i < train.rows(); ++i) grad[i] = -counts[i] * train.label(i);
  detail::GrowParams params;
  params.max_depth = max_depth;
  params.min_leaf_cover = static_cast<double>(std::max<std::size_t>(min_leaf, 1));
  params.feature_fraction = feature_fraction;
  return detail::grow_tree(train, sorted, counts, grad, counts, params, rng);
}

}  // namespace

TreeEnsemble train_cart(const Dataset& train, const CartConfig& config, std::uint64_t seed) {
  require_trainable(train, "cart");
  if (config.max_depth < 1) throw InputError("cart: max_depth must be >= 1");
  const detail::SortedColumns sorted(train);
  const std::vector<double> counts(train.rows(), 1.0);
  Rng rng(seed);
  TreeEnsemble ensemble;
  ensemble.aggregation = Aggregation::kMean;
  ensemble.dim = train.dim();
  ensemble.trees.push_back(
      grow_class_tree(train, sorted, counts, config.max_depth, config.min_leaf, 1.0, rng));
  return ensemble;
}

TreeEnsemble train_random_forest(const Dataset& train, const ForestConfig& config,
                                 std::uint64_t seed) {
  require_trainable(train, "forest");
  if (config.n_trees < 1) throw InputError("forest: n_trees must be >= 1");
  if (config.max_depth < 1) throw InputError("forest: max_depth must be >= 1");
  if (!(config.feature_subsample > 0.0 && config.feature_subsample <= 1.0)) {
    throw InputError("forest: feature_subsample must lie in (0, 1]");
  }
  const detail::SortedColumns sorted(train);
  const std::size_t n = train.rows();
  TreeEnsemble ensemble;
  ensemble.aggregation = Aggregation::kMean;
  ensemble.dim = train.dim();
  for (std::size_t t = 0; t < config.n_trees; ++t) {
    Rng rng = Rng::stream(seed, t);
    std::vector<double> counts(n, config.bootstrap ? 0.0 : 1.0);
    if (config.bootstrap) {
      for (std::size_t k = 0; k < n; ++k) counts[static_cast<std::size_t>(rng.below(n))] += 1.0;
    }
    ensemble.trees.push_back(grow_class_tree(train, sorted, counts, config.max_depth,
                                             config.min_leaf, config.feature_subsample, rng));
  }
  return ensemble;
}

TreeEnsemble train_gbt(const Dataset& train, const GbtConfig& config, std::uint64_t seed) {
  require_trainable(train, "gbt");
  if (!(config.learning_rate > 0.0 && config.learning_rate <= 1.0)) {
    throw InputError("gbt: learning_rate must lie in (0, 1]");
  }
  if (!(config.row_subsample > 0.0 && config.row_subsample <= 1.0)) {
    throw InputError("gbt: row_subsample must lie in (0, 1]");
  }
  if (config.l2_leaf < 0.0) throw InputError("gbt: l2_leaf must be >= 0");
  if (config.depth < 1) throw InputError("gbt: depth must be >= 1");
  const std::size_t n = train.rows();
  TreeEnsemble ensemble;
  ensemble.aggregation = Aggregation::kSum;
  ensemble.dim = train.dim();
  const double positives =
      static_cast<double>(std::count(train.labels().begin(), train.labels().end(), 1));
  ensemble.base_score = log_odds(positives / static_cast<double>(n));

  if (!train.nondegenerate()) {
    // Nothing to fit: every round is a zero-valued leaf covering all rows.
    for (std::size_t r = 0; r < config.n_rounds; ++r) {
      Tree tree;
      tree.nodes.push_back({.cover = static_cast<double>(n)});
      ensemble.trees.push_back(std::move(tree));
    }
    return ensemble;
  }

  const detail::SortedColumns sorted(train);
  detail::GrowParams params;
  params.max_depth = config.depth;
  params.min_leaf_cover = static_cast<double>(std::max<std::size_t>(config.min_leaf, 1));
  params.min_child_hessian = config.min_child_hessian;
  params.l2 = config.l2_leaf;
  params.leaf_scale = config.learning_rate;

  std::vector<double> scores(n, ensemble.base_score);
  std::vector<double> grad(n);
  std::vector<double> hess(n);
  std::vector<double> counts(n, 1.0);
  Rng rng(seed);
  for (std::size_t r = 0; r < config.n_rounds; ++r) {
    if (config.row_subsample < 1.0) {
      for (auto& c : counts) c = rng.uniform() < config.row_subsample ? 1.0 : 0.0;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(scores[i]);
      grad[i] = counts[i] * (p - train.label(i));
      hess[i] = counts[i] * std::max(p * (1.0 - p), 1e-16);
    }
    Tree tree = detail::grow_tree(train, sorted, counts, grad, hess, params, rng);
    for (std::size_t i = 0; i < n; ++i) scores[i] += tree.predict(train.row(i));
    ensemble.trees.push_back(std::move(tree));
  }
  return ensemble;
}

// ---------------------------------------------------------------------------
// MLP

double MlpModel::margin(std::span<const double> x) const {
  double out = output_bias;
  for (std::size_t h = 0; h < hidden; ++h) {
    double a = hidden_bias[h];
    const double* w = hidden_weights.data() + h * input_dim;
    for (std::size_t j = 0; j < input_dim; ++j) a += w[j] * x[j];
    if (a > 0.0) out += output_weights[h] * a;
  }
  return out;
}

MlpModel train_mlp(const Dataset& train, const MlpConfig& config, std::uint64_t seed) {
  require_trainable(train, "mlp");
  if (config.hidden_width < 1) throw InputError("mlp: hidden_width must be >= 1");
  if (!(config.step_size > 0.0)) throw InputError("mlp: step_size must be > 0");
  const std::size_t n = train.rows();
  const std::size_t d = train.dim();
  const std::size_t width = config.hidden_width;

  MlpModel model;
  model.input_dim = d;
  model.hidden = width;
  model.hidden_weights.resize(width * d);
  model.hidden_bias.assign(width, 0.0);
  model.output_weights.resize(width);
  Rng rng(seed);
  const double in_scale = std::sqrt(2.0 / static_cast<double>(d));
  const double out_scale = std::sqrt(1.0 / static_cast<double>(width));
  for (double& w : model.hidden_weights) w = in_scale * rng.normal();
  for (double& w : model.output_weights) w = out_scale * rng.normal();

  std::vector<double> activation(width);
  std::vector<double> g_hidden_w(width * d);
  std::vector<double> g_hidden_b(width);
  std::vector<double> g_out_w(width);
  const auto nn = static_cast<double>(n);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::fill(g_hidden_w.begin(), g_hidden_w.end(), 0.0);
    std::fill(g_hidden_b.begin(), g_hidden_b.end(), 0.0);
    std::fill(g_out_w.begin(), g_out_w.end(), 0.0);
    double g_out_b = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = train.row(i);
      double out = model.output_bias;
      for (std::size_t h = 0; h < width; ++h) {
        double a = model.hidden_bias[h];
        const double* w = model.hidden_weights.data() + h * d;
        for (std::size_t j = 0; j < d; ++j) a += w[j] * x[j];
        activation[h] = a > 0.0 ? a : 0.0;
        out += model.output_weights[h] * activation[h];
      }
      loss += softplus(out) - train.label(i) * out;
      const double delta = sigmoid(out) - train.label(i);
      g_out_b += delta;
      for (std::size_t h = 0; h < width; ++h) {
        g_out_w[h] += delta * activation[h];
        if (activation[h] <= 0.0) continue;
        const double back = delta * model.output_weights[h];
        g_hidden_b[h] += back;
        double* gw = g_hidden_w.data() + h * d;
        for (std::size_t j = 0; j < d; ++j) gw[j] += back * x[j];
      }
    }
    if (!std::isfinite(loss)) {
      throw NumericError(fmt::format("mlp: loss diverged at epoch {}", epoch));
    }
    const double step = config.step_size / nn;
    for (std::size_t k = 0; k < g_hidden_w.size(); ++k) model.hidden_weights[k] -= step * g_hidden_w[k];
    for (std::size_t h = 0; h < width; ++h) {
      model.hidden_bias[h] -= step * g_hidden_b[h];
      model.output_weights[h] -= step * g_out_w[h];
    }
    model.output_bias -= step * g_out_b;
  }
  return model;
}

// ---------------------------------------------------------------------------

std::size_t TrainedModel::dim() const {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) return m.weights.size();
        if constexpr (std::is_same_v<T, TreeEnsemble>) return m.dim;
        if constexpr (std::is_same_v<T, MlpModel>) return m.input_dim;
      },
      payload);
}

void TrainedModel::check_consistent() const {
  const HypothesisClass expected = std::visit(
      [](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) return HypothesisClass::kLinear;
        if constexpr (std::is_same_v<T, TreeEnsemble>) return HypothesisClass::kTree;
        return HypothesisClass::kNeural;
      },
      payload);
  if (expected != hypothesis_class) {
    throw InputError(fmt::format("model '{}' is tagged {} but holds a {} payload", id,
                                 to_string(hypothesis_class), to_string(expected)));
  }
}

double margin(const TrainedModel& model, std::span<const double> x) {
  return std::visit([&](const auto& m) { return m.margin(x); }, model.payload);
}

double predict_proba(const TrainedModel& model, std::span<const double> x) {
  if (const auto* trees = std::get_if<TreeEnsemble>(&model.payload);
      trees != nullptr && trees->aggregation == Aggregation::kMean) {
    return std::clamp(trees->margin(x), 0.0, 1.0);
  }
  return sigmoid(margin(model, x));
}

int predict_label(const TrainedModel& model, std::span<const double> x) {
  return predict_proba(model, x) >= 0.5 ? 1 : 0;
}

double accuracy(const TrainedModel& model, const Dataset& data) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    hits += predict_label(model, data.row(i)) == data.label(i) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(data.rows());
}

// ---------------------------------------------------------------------------
// Presets

HypothesisClass ModelSpec::hypothesis_class() const {
  return std::visit(
      [](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, LogisticConfig> || std::is_same_v<T, RidgeConfig>) {
          return HypothesisClass::kLinear;
        } else if constexpr (std::is_same_v<T, MlpConfig>) {
          return HypothesisClass::kNeural;
        } else {
          return HypothesisClass::kTree;
        }
      },
      config);
}

std::string ModelSpec::describe() const {
  const std::string body = std::visit(
      [](const auto& c) -> std::string {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, LogisticConfig>) {
          return fmt::format("logistic l2={} max_iter={} tol={}", format_real(c.l2), c.max_iter,
                             format_real(c.tol));
        } else if constexpr (std::is_same_v<T, RidgeConfig>) {
          return fmt::format("ridge lambda={}", format_real(c.lambda));
        } else if constexpr (std::is_same_v<T, CartConfig>) {
          return fmt::format("cart max_depth={} min_leaf={}", c.max_depth, c.min_leaf);
        } else if constexpr (std::is_same_v<T, ForestConfig>) {
          return fmt::format("forest n_trees={} max_depth={} min_leaf={} feature_subsample={} bootstrap={}",
                             c.n_trees, c.max_depth, c.min_leaf, format_real(c.feature_subsample),
                             c.bootstrap);
        } else if constexpr (std::is_same_v<T, GbtConfig>) {
          return fmt::format(
              "gbt n_rounds={} depth={} learning_rate={} l2_leaf={} row_subsample={} min_leaf={} "
              "min_child_hessian={}",
              c.n_rounds, c.depth, format_real(c.learning_rate), format_real(c.l2_leaf),
              format_real(c.row_subsample), c.min_leaf, format_real(c.min_child_hessian));
        } else {
          return fmt::format("mlp hidden_width={} epochs={} step_size={}", c.hidden_width,
                             c.epochs, format_real(c.step_size));
        }
      },
      config);
  return fmt::format("{} seed_offset={}", body, seed_offset);
}

ModelSpec model_preset(std::string_view name) {
  ModelSpec spec;
  spec.name = std::string(name);
  std::string_view base = name;
  if (const auto at = name.find('@'); at != std::string_view::npos) {
    base = name.substr(0, at);
    const auto suffix = name.substr(at + 1);
    std::uint64_t offset = 0;
    const auto [ptr, ec] = std::from_chars(suffix.data(), suffix.data() + suffix.size(), offset);
    if (ec != std::errc() || ptr != suffix.data() + suffix.size()) {
      throw InputError(fmt::format("bad seed offset in model name '{}'", name));
    }
    spec.seed_offset = offset;
  }

  if (base == "logistic") {
    spec.config = LogisticConfig{};
  } else if (base == "ridge") {
    spec.config = RidgeConfig{1.0};
  } else if (base == "ridge-0.1") {
    spec.config = RidgeConfig{0.1};
  } else if (base == "ridge-10") {
    spec.config = RidgeConfig{10.0};
  } else if (base == "cart") {
    spec.config = CartConfig{};
  } else if (base == "forest") {
    spec.config = ForestConfig{};
  } else if (base == "gbt") {
    spec.config = GbtConfig{};
  } else if (base == "gbt-deep") {
    // Deeper trees with a minimum leaf size and no leaf penalty.
    spec.config = GbtConfig{.n_rounds = 100,
                            .depth = 6,
                            .learning_rate = 0.1,
                            .l2_leaf = 0.0,
                            .row_subsample = 1.0,
                            .min_leaf = 20,
                            .min_child_hessian = 1e-3};
  } else if (base == "gbt-l2") {
    // Deeper trees with a heavier leaf penalty.
    spec.config = GbtConfig{.n_rounds = 100,
                            .depth = 6,
                            .learning_rate = 0.1,
                            .l2_leaf = 3.0,
                            .row_subsample = 1.0,
                            .min_leaf = 1,
                            .min_child_hessian = 1.0};
  } else if (base == "mlp") {
    spec.config = MlpConfig{};
  } else {
    throw InputError(fmt::format("unknown model preset '{}'", name));
  }
  return spec;
}

TrainedModel train_model(const ModelSpec& spec, const Dataset& train, std::uint64_t seed) {
  TrainedModel model;
  model.id = spec.name;
  model.seed = seed + spec.seed_offset;
  model.hypothesis_class = spec.hypothesis_class();
  model.config_digest = digest_hex(spec.describe());
  const auto s = model.seed;
  model.payload = std::visit(
      [&](const auto& c) -> std::variant<LinearModel, TreeEnsemble, MlpModel> {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, LogisticConfig>) return train_logistic(train, c, s);
        if constexpr (std::is_same_v<T, RidgeConfig>) return train_ridge(train, c.lambda, s);
        if constexpr (std::is_same_v<T, CartConfig>) return train_cart(train, c, s);
        if constexpr (std::is_same_v<T, ForestConfig>) return train_random_forest(train, c, s);
        if constexpr (std::is_same_v<T, GbtConfig>) return train_gbt(train, c, s);
        if constexpr (std::is_same_v<T, MlpConfig>) return train_mlp(train, c, s);
      },
      spec.config);
  return model;
}

std::string digest_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace lottery
