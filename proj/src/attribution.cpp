#include "lottery/attribution.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "lottery/error.hpp"
#include "lottery/rng.hpp"

namespace lottery {

double AttributionVector::efficiency_gap() const {
  double total = 0.0;
  for (double p : phi) total += p;
  return std::abs(total - (explained_value - baseline));
}

BackgroundSet BackgroundSet::from_dataset(const Dataset& source) {
  BackgroundSet bg;
  bg.dim = source.dim();
  bg.rows = source.values();
  bg.feature_means = source.column_means();
  return bg;
}

BackgroundSet BackgroundSet::sample(const Dataset& source, std::size_t max_rows,
                                    std::uint64_t seed) {
  if (max_rows == 0) throw InputError("background needs at least one row");
  if (source.rows() <= max_rows) return from_dataset(source);
  Rng rng(seed);
  auto order = rng.permutation(source.rows());
  order.resize(max_rows);
  std::sort(order.begin(), order.end());
  return from_dataset(source.subset(order, source.id() + "/background"));
}

Coalition Coalition::from_mask(std::uint64_t mask, std::size_t dim) {
  Coalition c(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    if ((mask >> j) & 1U) c.insert(j);
  }
  return c;
}

Coalition Coalition::full(std::size_t dim) {
  Coalition c(dim);
  for (std::size_t j = 0; j < dim; ++j) c.insert(j);
  return c;
}

std::size_t Coalition::count() const {
  return static_cast<std::size_t>(std::count(members_.begin(), members_.end(), true));
}

// ---------------------------------------------------------------------------

AttributionVector linear_shap(const LinearModel& model, std::span<const double> x) {
  const std::size_t d = model.weights.size();
  if (x.size() != d || model.train_feature_means.size() != d) {
    throw InputError(fmt::format("linear_shap: instance has {} features, model has {}", x.size(), d));
  }
  AttributionVector out;
  out.phi.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    out.phi[j] = model.weights[j] * (x[j] - model.train_feature_means[j]);
  }
  out.baseline = model.margin(model.train_feature_means);
  out.explained_value = model.margin(x);
  return out;
}

// ---------------------------------------------------------------------------
// TreeSHAP

namespace {

// One entry of the unique-feature path. `weight` is the permutation weight of
// subsets with i features "on" when this element sits at position i.
struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double weight = 0.0;
};

void extend_path(std::vector<PathElement>& path, std::size_t depth, double zero_fraction,
                 double one_fraction, int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  const auto denom = static_cast<double>(depth + 1);
  for (std::size_t k = depth; k-- > 0;) {
    path[k + 1].weight += one_fraction * path[k].weight * static_cast<double>(k + 1) / denom;
    path[k].weight = zero_fraction * path[k].weight * static_cast<double>(depth - k) / denom;
  }
}

void unwind_path(std::vector<PathElement>& path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next_one = path[depth].weight;
  const auto denom = static_cast<double>(depth + 1);
  for (std::size_t k = depth; k-- > 0;) {
    if (one != 0.0) {
      const double tmp = path[k].weight;
      path[k].weight = next_one * denom / (static_cast<double>(k + 1) * one);
      next_one = tmp - path[k].weight * zero * static_cast<double>(depth - k) / denom;
    } else {
      path[k].weight = path[k].weight * denom / (zero * static_cast<double>(depth - k));
    }
  }
  for (std::size_t k = index; k < depth; ++k) {
    path[k].feature = path[k + 1].feature;
    path[k].zero_fraction = path[k + 1].zero_fraction;
    path[k].one_fraction = path[k + 1].one_fraction;
  }
}

double unwound_path_sum(const std::vector<PathElement>& path, std::size_t depth,
                        std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next_one = path[depth].weight;
  double total = 0.0;
  const auto denom = static_cast<double>(depth + 1);
  for (std::size_t k = depth; k-- > 0;) {
    if (one != 0.0) {
      const double tmp = next_one * denom / (static_cast<double>(k + 1) * one);
      total += tmp;
      next_one = path[k].weight - tmp * zero * static_cast<double>(depth - k) / denom;
    } else if (zero != 0.0) {
      total += path[k].weight / zero / (static_cast<double>(depth - k) / denom);
    }
  }
  return total;
}

class TreeShapRecursion {
 public:
  TreeShapRecursion(const Tree& tree, std::span<const double> x, std::span<double> phi)
      : tree_(tree), x_(x), phi_(phi) {}

  void run() {
    const std::size_t max_depth = tree_.depth() + 2;
    std::vector<PathElement> path(max_depth + 1);
    recurse(0, 0, path, 1.0, 1.0, -1);
  }

 private:
  void recurse(std::size_t node_index, std::size_t depth, std::vector<PathElement> path,
               double zero_fraction, double one_fraction, int feature) {
    const TreeNode& node = tree_.nodes[node_index];
    extend_path(path, depth, zero_fraction, one_fraction, feature);

    if (node.is_leaf()) {
      for (std::size_t k = 1; k <= depth; ++k) {
        const double w = unwound_path_sum(path, depth, k);
        const auto& el = path[k];
        phi_[static_cast<std::size_t>(el.feature)] +=
            w * (el.one_fraction - el.zero_fraction) * node.value;
      }
      return;
    }

    const auto split = static_cast<std::size_t>(node.feature);
    const int hot = x_[split] <= node.threshold ? node.left : node.right;
    const int cold = hot == node.left ? node.right : node.left;
    const double hot_zero = tree_.nodes[static_cast<std::size_t>(hot)].cover / node.cover;
    const double cold_zero = tree_.nodes[static_cast<std::size_t>(cold)].cover / node.cover;
    double incoming_zero = 1.0;
    double incoming_one = 1.0;

    // A feature seen higher on the path is unwound and re-extended here.
    std::size_t k = 0;
    for (; k <= depth; ++k) {
      if (path[k].feature == node.feature) break;
    }
    if (k != depth + 1) {
      incoming_zero = path[k].zero_fraction;
      incoming_one = path[k].one_fraction;
      unwind_path(path, depth, k);
      depth -= 1;
    }

    recurse(static_cast<std::size_t>(hot), depth + 1, path, hot_zero * incoming_zero,
            incoming_one, node.feature);
    recurse(static_cast<std::size_t>(cold), depth + 1, path, cold_zero * incoming_zero, 0.0,
            node.feature);
  }

  const Tree& tree_;
  std::span<const double> x_;
  std::span<double> phi_;
};

void check_covers(const Tree& tree) {
  for (const auto& node : tree.nodes) {
    if (!(node.cover > 0.0)) throw InputError("malformed tree: node with zero cover");
    if (!node.is_leaf()) {
      const auto& l = tree.nodes[static_cast<std::size_t>(node.left)];
      const auto& r = tree.nodes[static_cast<std::size_t>(node.right)];
      if (!(l.cover > 0.0) || !(r.cover > 0.0)) {
        throw InputError("malformed tree: child with zero cover");
      }
    }
  }
}

double expected_value(const Tree& tree) {
  double total = 0.0;
  const double root = tree.nodes.front().cover;
  for (const auto& node : tree.nodes) {
    if (node.is_leaf()) total += node.value * node.cover / root;
  }
  return total;
}

double path_value(const Tree& tree, std::size_t k, std::span<const double> x,
                  const Coalition& coalition) {
  const TreeNode& node = tree.nodes[k];
  if (node.is_leaf()) return node.value;
  const auto f = static_cast<std::size_t>(node.feature);
  const auto left = static_cast<std::size_t>(node.left);
  const auto right = static_cast<std::size_t>(node.right);
  if (coalition.contains(f)) {
    return path_value(tree, x[f] <= node.threshold ? left : right, x, coalition);
  }
  return (tree.nodes[left].cover * path_value(tree, left, x, coalition) +
          tree.nodes[right].cover * path_value(tree, right, x, coalition)) /
         node.cover;
}

}  // namespace

AttributionVector tree_shap(const TreeEnsemble& ensemble, std::span<const double> x) {
  if (x.size() != ensemble.dim) {
    throw InputError(fmt::format("tree_shap: instance has {} features, model has {}", x.size(),
                                 ensemble.dim));
  }
  if (ensemble.trees.empty()) throw InputError("tree_shap: empty ensemble");
  AttributionVector out;
  out.phi.assign(ensemble.dim, 0.0);
  double expected = 0.0;
  for (const auto& tree : ensemble.trees) {
    check_covers(tree);
    TreeShapRecursion(tree, x, out.phi).run();
    expected += expected_value(tree);
  }
  if (ensemble.aggregation == Aggregation::kMean) {
    const auto t = static_cast<double>(ensemble.trees.size());
    for (double& p : out.phi) p /= t;
    out.baseline = expected / t;
  } else {
    out.baseline = ensemble.base_score + expected;
  }
  out.explained_value = ensemble.margin(x);
  return out;
}

double tree_path_value(const TreeEnsemble& ensemble, std::span<const double> x,
                       const Coalition& coalition) {
  double total = 0.0;
  for (const auto& tree : ensemble.trees) total += path_value(tree, 0, x, coalition);
  if (ensemble.aggregation == Aggregation::kMean) {
    return total / static_cast<double>(ensemble.trees.size());
  }
  return ensemble.base_score + total;
}

double value_interventional(const MarginFunction& f, std::span<const double> x,
                            const Coalition& coalition, const BackgroundSet& background) {
  if (background.size() == 0) throw InputError("empty background set");
  if (x.size() != background.dim || coalition.dim() != background.dim) {
    throw InputError("value_interventional: dimension mismatch");
  }
  std::vector<double> z(x.size());
  double total = 0.0;
  for (std::size_t r = 0; r < background.size(); ++r) {
    const auto b = background.row(r);
    for (std::size_t j = 0; j < z.size(); ++j) z[j] = coalition.contains(j) ? x[j] : b[j];
    total += f(z);
  }
  return total / static_cast<double>(background.size());
}

// ---------------------------------------------------------------------------
// KernelSHAP

namespace {

double log_choose(std::size_t n, std::size_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

}  // namespace

AttributionVector kernel_shap(const MarginFunction& f, std::span<const double> x,
                              const BackgroundSet& background, const KernelShapOptions& options) {
  const std::size_t d = x.size();
  if (d != background.dim) {
    throw InputError(fmt::format("kernel_shap: instance has {} features, background has {}", d,
                                 background.dim));
  }
  if (background.size() == 0) throw InputError("kernel_shap: empty background set");
  if (options.n_samples < d + 2) {
    throw InputError(fmt::format("kernel_shap: n_samples must be >= d + 2 = {}", d + 2));
  }
  if (options.ridge_reg < 0.0) throw InputError("kernel_shap: ridge_reg must be >= 0");

  AttributionVector out;
  out.explained_value = f(x);
  out.baseline = value_interventional(f, x, Coalition(d), background);
  const double total = out.explained_value - out.baseline;
  if (d == 1) {
    out.phi = {total};
    return out;
  }

  // Coalition membership -> accumulated regression weight.
  std::map<std::vector<char>, double> weights;
  const bool enumerate = d < 63 && (std::uint64_t{1} << d) <= options.n_samples;
  if (enumerate) {
    const std::uint64_t limit = std::uint64_t{1} << d;
    for (std::uint64_t mask = 1; mask + 1 < limit; ++mask) {
      std::vector<char> z(d);
      std::size_t s = 0;
      for (std::size_t j = 0; j < d; ++j) {
        z[j] = static_cast<char>((mask >> j) & 1U);
        s += static_cast<std::size_t>(z[j]);
      }
      const double w = std::exp(std::log(static_cast<double>(d - 1)) - log_choose(d, s) -
                                std::log(static_cast<double>(s * (d - s))));
      weights[std::move(z)] += w;
    }
  } else {
    // Size s ~ (d-1) / (s (d-s)); members uniform given s; each draw is
    // paired with its complement.
    std::vector<double> cumulative(d - 1);
    double acc = 0.0;
    for (std::size_t s = 1; s < d; ++s) {
      acc += static_cast<double>(d - 1) / static_cast<double>(s * (d - s));
      cumulative[s - 1] = acc;
    }
    Rng rng(options.seed);
    const std::size_t pairs = options.n_samples / 2;
    std::vector<std::size_t> idx(d);
    for (std::size_t p = 0; p < pairs; ++p) {
      const double u = rng.uniform() * acc;
      const auto s = static_cast<std::size_t>(
                         std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                         cumulative.begin()) +
                     1;
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::vector<char> z(d, 0);
      for (std::size_t k = 0; k < std::min(s, d - 1); ++k) {
        const auto pick = k + static_cast<std::size_t>(rng.below(d - k));
        std::swap(idx[k], idx[pick]);
        z[idx[k]] = 1;
      }
      std::vector<char> complement(d);
      for (std::size_t j = 0; j < d; ++j) complement[j] = static_cast<char>(1 - z[j]);
      weights[std::move(z)] += 1.0;
      weights[std::move(complement)] += 1.0;
    }
  }

  double weight_sum = 0.0;
  for (const auto& [z, w] : weights) weight_sum += w;

  const auto dd = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(dd, dd);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dd);
  Eigen::VectorXd zvec(dd);
  Coalition coalition(d);
  for (const auto& [z, w_raw] : weights) {
    for (std::size_t j = 0; j < d; ++j) {
      zvec[static_cast<Eigen::Index>(j)] = z[j];
      if (z[j] != 0) {
        coalition.insert(j);
      } else {
        coalition.erase(j);
      }
    }
    const double w = w_raw / weight_sum;
    const double target = value_interventional(f, x, coalition, background) - out.baseline;
    normal.selfadjointView<Eigen::Lower>().rankUpdate(zvec, w);
    rhs.noalias() += w * target * zvec;
  }
  normal = normal.selfadjointView<Eigen::Lower>();
  normal.diagonal().array() += options.ridge_reg;

  // minimize (y - Z phi)' W (y - Z phi) + ridge |phi|^2  s.t.  1' phi = total
  const Eigen::LLT<Eigen::MatrixXd> llt(normal);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) {
    throw NumericError(
        "kernel_shap: singular regression system; raise n_samples or ridge_reg");
  }
  const Eigen::VectorXd u = llt.solve(rhs);
  const Eigen::VectorXd q = llt.solve(Eigen::VectorXd::Ones(dd));
  const double mu = (u.sum() - total) / q.sum();
  const Eigen::VectorXd phi = u - mu * q;
  if (!phi.allFinite()) throw NumericError("kernel_shap: non-finite solution");
  out.phi.assign(phi.data(), phi.data() + d);
  return out;
}

// ---------------------------------------------------------------------------

AttributionVector exact_shapley(const ValueFunction& value, std::size_t dim) {
  if (dim == 0) throw InputError("exact_shapley: dim must be >= 1");
  if (dim > 12) {
    throw InputError(fmt::format("exact_shapley: d = {} exceeds the 2^12 enumeration limit", dim));
  }
  const std::size_t count = std::size_t{1} << dim;
  std::vector<double> v(count);
  for (std::size_t mask = 0; mask < count; ++mask) v[mask] = value(Coalition::from_mask(mask, dim));

  // weight[s] = s! (d - s - 1)! / d!
  std::vector<double> weight(dim);
  for (std::size_t s = 0; s < dim; ++s) {
    weight[s] = std::exp(std::lgamma(static_cast<double>(s) + 1.0) +
                         std::lgamma(static_cast<double>(dim - s)) -
                         std::lgamma(static_cast<double>(dim) + 1.0));
  }
  AttributionVector out;
  out.phi.assign(dim, 0.0);
  for (std::size_t j = 0; j < dim; ++j) {
    const std::size_t bit = std::size_t{1} << j;
    for (std::size_t mask = 0; mask < count; ++mask) {
      if ((mask & bit) != 0) continue;
      const auto s = static_cast<std::size_t>(std::popcount(mask));
      out.phi[j] += weight[s] * (v[mask | bit] - v[mask]);
    }
  }
  out.baseline = v.front();
  out.explained_value = v.back();
  return out;
}

AttributionVector explain(const TrainedModel& model, std::span<const double> x,
                          const BackgroundSet& background, const ExplainOptions& options) {
  AttributionVector out;
  if (options.scale == AttributionScale::kProbability) {
    out = kernel_shap([&](std::span<const double> z) { return predict_proba(model, z); }, x,
                      background, options.kernel);
  } else if (const auto* trees = std::get_if<TreeEnsemble>(&model.payload)) {
    out = tree_shap(*trees, x);
  } else if (const auto* linear = std::get_if<LinearModel>(&model.payload);
             linear != nullptr && options.exact_linear) {
    out = linear_shap(*linear, x);
  } else {
    out = kernel_shap([&](std::span<const double> z) { return margin(model, z); }, x, background,
                      options.kernel);
  }
  out.model_id = model.id;
  out.scale = options.scale;
  return out;
}

}  // namespace lottery
