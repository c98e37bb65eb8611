#include "tree_builder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lottery::detail {

SortedColumns::SortedColumns(const Dataset& data) : order_(data.dim()) {
  for (std::size_t j = 0; j < data.dim(); ++j) {
    auto& idx = order_[j];
    idx.resize(data.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return data.at(a, j) < data.at(b, j); });
  }
}

namespace {

constexpr double kMinGain = 1e-10;
constexpr double kTieTolerance = 1e-12;

struct NodeStats {
  double grad = 0.0;
  double hess = 0.0;
  double cover = 0.0;
};

struct SplitSearch {
  NodeStats total;
  NodeStats left;
  double last_value = 0.0;
  bool seen = false;
  double best_gain = 0.0;
  int best_feature = -1;
  double best_threshold = 0.0;
  std::vector<char> allowed;  // per feature; empty means all
};

double score(const NodeStats& s, double l2) { return s.grad * s.grad / (s.hess + l2); }

}  // namespace

Tree grow_tree(const Dataset& data, const SortedColumns& sorted, std::span<const double> counts,
               std::span<const double> grad, std::span<const double> hess,
               const GrowParams& params, Rng& rng) {
  const std::size_t n = data.rows();
  const std::size_t d = data.dim();
  Tree tree;
  std::vector<int> node_of(n, -1);

  TreeNode root;
  NodeStats root_stats;
  for (std::size_t i = 0; i < n; ++i) {
    if (counts[i] <= 0.0) continue;
    node_of[i] = 0;
    root_stats.grad += grad[i];
    root_stats.hess += hess[i];
    root_stats.cover += counts[i];
  }
  root.cover = root_stats.cover;
  tree.nodes.push_back(root);
  std::vector<NodeStats> stats{root_stats};

  std::vector<int> frontier{0};
  const std::size_t subset_size = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(params.feature_fraction * static_cast<double>(d))), 1, d);

  for (std::size_t depth = 0; depth < params.max_depth && !frontier.empty(); ++depth) {
    // slot_of[node] indexes into `search` for nodes on the current frontier.
    std::vector<int> slot_of(tree.nodes.size(), -1);
    std::vector<SplitSearch> search(frontier.size());
    for (std::size_t s = 0; s < frontier.size(); ++s) {
      const int node = frontier[s];
      slot_of[static_cast<std::size_t>(node)] = static_cast<int>(s);
      search[s].total = stats[static_cast<std::size_t>(node)];
      if (subset_size < d) {
        search[s].allowed.assign(d, 0);
        auto perm = rng.permutation(d);
        for (std::size_t k = 0; k < subset_size; ++k) search[s].allowed[perm[k]] = 1;
      }
    }

    for (std::size_t j = 0; j < d; ++j) {
      for (auto& s : search) {
        s.left = {};
        s.seen = false;
      }
      for (std::size_t row : sorted.column(j)) {
        const int node = node_of[row];
        if (node < 0) continue;
        const int slot = slot_of[static_cast<std::size_t>(node)];
        if (slot < 0) continue;
        auto& s = search[static_cast<std::size_t>(slot)];
        if (!s.allowed.empty() && s.allowed[j] == 0) continue;
        const double v = data.at(row, j);
        if (s.seen && v > s.last_value) {
          const NodeStats right{s.total.grad - s.left.grad, s.total.hess - s.left.hess,
                                s.total.cover - s.left.cover};
          if (s.left.cover >= params.min_leaf_cover && right.cover >= params.min_leaf_cover &&
              s.left.hess >= params.min_child_hessian && right.hess >= params.min_child_hessian) {
            const double gain = score(s.left, params.l2) + score(right, params.l2) -
                                score(s.total, params.l2);
            const double bar = s.best_gain + kTieTolerance * std::max(1.0, std::abs(s.best_gain));
            if (gain > kMinGain && (s.best_feature < 0 || gain > bar)) {
              double threshold = 0.5 * (s.last_value + v);
              if (!(threshold < v)) threshold = s.last_value;
              s.best_gain = gain;
              s.best_feature = static_cast<int>(j);
              s.best_threshold = threshold;
            }
          }
        }
        s.left.grad += grad[row];
        s.left.hess += hess[row];
        s.left.cover += counts[row];
        s.last_value = v;
        s.seen = true;
      }
    }

    std::vector<int> next;
    for (std::size_t s = 0; s < frontier.size(); ++s) {
      if (search[s].best_feature < 0) continue;
      const auto node = static_cast<std::size_t>(frontier[s]);
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      tree.nodes.push_back({});
      stats.push_back({});
      stats.push_back({});
      auto& parent = tree.nodes[node];
      parent.feature = search[s].best_feature;
      parent.threshold = search[s].best_threshold;
      parent.left = left;
      parent.right = left + 1;
      next.push_back(left);
      next.push_back(left + 1);
    }
    if (next.empty()) break;
    for (std::size_t i = 0; i < n; ++i) {
      const int node = node_of[i];
      if (node < 0) continue;
      const auto& parent = tree.nodes[static_cast<std::size_t>(node)];
      if (parent.is_leaf()) continue;
      const int child = data.at(i, static_cast<std::size_t>(parent.feature)) <= parent.threshold
                            ? parent.left
                            : parent.right;
      node_of[i] = child;
      auto& cs = stats[static_cast<std::size_t>(child)];
      cs.grad += grad[i];
      cs.hess += hess[i];
      cs.cover += counts[i];
    }
    for (int child : next) tree.nodes[static_cast<std::size_t>(child)].cover =
        stats[static_cast<std::size_t>(child)].cover;
    frontier = std::move(next);
  }

  for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
    auto& node = tree.nodes[k];
    if (!node.is_leaf()) continue;
    const auto& s = stats[k];
    const double denom = s.hess + params.l2;
    node.value = denom > 0.0 ? -s.grad / denom * params.leaf_scale : 0.0;
  }
  return tree;
}

}  // namespace lottery::detail
