#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lottery/data.hpp"
#include "lottery/models.hpp"
#include "lottery/rng.hpp"

namespace lottery::detail {

// Row indices of each feature column in ascending value order (ties by row).
class SortedColumns {
 public:
  explicit SortedColumns(const Dataset& data);
  std::span<const std::size_t> column(std::size_t j) const { return order_[j]; }

 private:
  std::vector<std::vector<std::size_t>> order_;
};

struct GrowParams {
  std::size_t max_depth = 3;
  double min_leaf_cover = 1.0;
  double min_child_hessian = 0.0;
  double l2 = 0.0;
  double feature_fraction = 1.0;  // < 1 draws a feature subset per node
  double leaf_scale = 1.0;        // multiplies every leaf value (learning rate)
};

// Grows one tree level by level with second-order split gain
//   G_L^2/(H_L+l2) + G_R^2/(H_R+l2) - G^2/(H+l2)
// and leaf value -G/(H+l2). Rows with zero count are ignored; a node's cover
// is the sum of its row counts. Ties keep the lowest feature index, then the
// lowest threshold.
Tree grow_tree(const Dataset& data, const SortedColumns& sorted, std::span<const double> counts,
               std::span<const double> grad, std::span<const double> hess,
               const GrowParams& params, Rng& rng);

}  // namespace lottery::detail
