#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lottery {

// Row-major n x d feature matrix with binary labels.
class Dataset {
 public:
  Dataset() = default;
  // Validates shape, finiteness and name uniqueness; throws InputError.
  Dataset(std::string id, std::vector<std::string> feature_names, std::vector<double> features,
          std::vector<int> labels);

  const std::string& id() const { return id_; }
  std::size_t rows() const { return labels_.size(); }
  std::size_t dim() const { return names_.size(); }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * dim(), dim()};
  }
  double at(std::size_t i, std::size_t j) const { return values_[i * dim() + j]; }
  int label(std::size_t i) const { return labels_[i]; }

  const std::vector<int>& labels() const { return labels_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<std::string>& feature_names() const { return names_; }

  // True when both classes are present.
  bool nondegenerate() const;
  std::vector<double> column_means() const;

  // Rows in the given order; ids keep the source row indices.
  Dataset subset(std::span<const std::size_t> indices, std::string id) const;

  // Original row identifiers (defaults to 0..n-1, preserved by subset()).
  const std::vector<std::size_t>& row_ids() const { return row_ids_; }

 private:
  std::string id_;
  std::vector<std::string> names_;
  std::vector<double> values_;
  std::vector<int> labels_;
  std::vector<std::size_t> row_ids_;
};

struct SplitSpec {
  std::uint64_t seed = 42;
  double train_fraction = 0.8;
};

struct Split {
  Dataset train;
  Dataset test;
};

// Unordered feature pair, stored with first < second.
using FeaturePair = std::pair<std::size_t, std::size_t>;

struct SyntheticSpec {
  std::size_t dim = 0;
  std::vector<double> beta;
  std::map<FeaturePair, double> alpha;
  double noise_sd = 0.0;

  // Sum of |alpha_ij| over the interaction terms.
  double interaction_density() const;
  // Copy with every interaction coefficient multiplied by `factor`.
  SyntheticSpec scaled_interactions(double factor) const;
  // Throws InputError on a malformed spec.
  void validate() const;
  // Score without noise: beta.x + sum alpha_ij x_i x_j.
  double score(std::span<const double> x) const;
};

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column);

Split split(const Dataset& ds, const SplitSpec& spec);

// Features i.i.d. N(0,1); label = 1 iff score + N(0, noise_sd^2) > 0.
Dataset generate_synthetic(const SyntheticSpec& spec, std::size_t n, std::uint64_t seed);

// Resolves the cache directory: LOTTERY_CACHE_DIR if set, else `fallback`.
std::filesystem::path resolve_cache_dir(const std::filesystem::path& fallback);

// Downloads url_template with "{id}" replaced by dataset_id into
// cache_dir/<id>.csv. A cache hit returns without touching the network.
std::filesystem::path fetch_remote(const std::string& url_template, const std::string& dataset_id,
                                   const std::filesystem::path& cache_dir);

}  // namespace lottery
