#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lottery/data.hpp"
#include "lottery/models.hpp"

namespace lottery {

enum class AttributionScale { kMargin, kProbability };

struct AttributionVector {
  std::vector<double> phi;
  std::string model_id;
  std::string instance_id;
  double baseline = 0.0;         // expected model output
  double explained_value = 0.0;  // model output at the instance
  AttributionScale scale = AttributionScale::kMargin;

  // |sum(phi) - (explained_value - baseline)|
  double efficiency_gap() const;
};

// Reference sample that stands in for "feature absent".
struct BackgroundSet {
  std::vector<double> feature_means;
  std::vector<double> rows;  // m x d, row-major
  std::size_t dim = 0;

  std::size_t size() const { return dim == 0 ? 0 : rows.size() / dim; }
  std::span<const double> row(std::size_t i) const { return {rows.data() + i * dim, dim}; }

  // All rows of `source`.
  static BackgroundSet from_dataset(const Dataset& source);
  // Up to max_rows rows drawn without replacement (seeded); all rows when
  // the source is smaller. Means are over the drawn rows.
  static BackgroundSet sample(const Dataset& source, std::size_t max_rows, std::uint64_t seed);
};

// Feature subset over d features.
class Coalition {
 public:
  explicit Coalition(std::size_t dim) : members_(dim, false) {}
  static Coalition from_mask(std::uint64_t mask, std::size_t dim);
  static Coalition full(std::size_t dim);

  std::size_t dim() const { return members_.size(); }
  bool contains(std::size_t j) const { return members_[j]; }
  void insert(std::size_t j) { members_[j] = true; }
  void erase(std::size_t j) { members_[j] = false; }
  std::size_t count() const;

 private:
  std::vector<bool> members_;
};

using ValueFunction = std::function<double(const Coalition&)>;
using MarginFunction = std::function<double(std::span<const double>)>;

// phi_j = w_j * (x_j - mean_j) with the model's training means.
AttributionVector linear_shap(const LinearModel& model, std::span<const double> x);

// Path-dependent TreeSHAP, summed over ensemble members (divided by the tree
// count under mean aggregation). Throws InputError on a zero-cover node.
AttributionVector tree_shap(const TreeEnsemble& ensemble, std::span<const double> x);

// Cover-weighted path-dependent value of coalition S: features in S follow x,
// the others average over both children by cover.
double tree_path_value(const TreeEnsemble& ensemble, std::span<const double> x,
                       const Coalition& coalition);

// Mean over background rows of f(x on S, background row elsewhere).
double value_interventional(const MarginFunction& f, std::span<const double> x,
                            const Coalition& coalition, const BackgroundSet& background);

struct KernelShapOptions {
  std::size_t n_samples = 1000;
  double ridge_reg = 1e-6;
  std::uint64_t seed = 42;
};

// Shapley-kernel weighted regression with efficiency as an equality
// constraint. All 2^d - 2 proper coalitions are enumerated when 2^d <=
// n_samples; otherwise coalitions are drawn from the kernel distribution in
// complementary pairs. Throws NumericError when the system is singular.
AttributionVector kernel_shap(const MarginFunction& f, std::span<const double> x,
                              const BackgroundSet& background, const KernelShapOptions& options);

// Exact Shapley values by enumerating all 2^d coalitions (d <= 12).
// `baseline` is v(empty) and `explained_value` is v(full).
AttributionVector exact_shapley(const ValueFunction& value, std::size_t dim);

// Dispatches on the model payload: tree_shap for trees, linear_shap for
// linear models when `exact_linear`, kernel_shap otherwise.
struct ExplainOptions {
  bool exact_linear = false;
  AttributionScale scale = AttributionScale::kMargin;
  KernelShapOptions kernel;
};

AttributionVector explain(const TrainedModel& model, std::span<const double> x,
                          const BackgroundSet& background, const ExplainOptions& options);

}  // namespace lottery
