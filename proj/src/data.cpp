#include "lottery/data.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "lottery/csv.hpp"
#include "lottery/error.hpp"
#include "lottery/rng.hpp"

namespace lottery {

Dataset::Dataset(std::string id, std::vector<std::string> feature_names,
                 std::vector<double> features, std::vector<int> labels)
    : id_(std::move(id)),
      names_(std::move(feature_names)),
      values_(std::move(features)),
      labels_(std::move(labels)) {
  if (names_.empty()) throw InputError("dataset has no feature columns");
  if (labels_.empty()) throw InputError("dataset has no rows");
  if (values_.size() != labels_.size() * names_.size()) {
    throw InputError(fmt::format("feature matrix has {} values, expected {} x {}", values_.size(),
                                 labels_.size(), names_.size()));
  }
  std::set<std::string> seen;
  for (const auto& name : names_) {
    if (!seen.insert(name).second) throw InputError("duplicate feature name '" + name + "'");
  }
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) {
      throw InputError(fmt::format("non-finite feature value at row {}, column '{}'",
                                   k / names_.size(), names_[k % names_.size()]));
    }
  }
  for (int y : labels_) {
    if (y != 0 && y != 1) throw InputError(fmt::format("label {} is not in {{0,1}}", y));
  }
  row_ids_.resize(labels_.size());
  for (std::size_t i = 0; i < row_ids_.size(); ++i) row_ids_[i] = i;
}

bool Dataset::nondegenerate() const {
  const auto ones = std::count(labels_.begin(), labels_.end(), 1);
  return ones > 0 && static_cast<std::size_t>(ones) < labels_.size();
}

std::vector<double> Dataset::column_means() const {
  std::vector<double> means(dim(), 0.0);
  for (std::size_t i = 0; i < rows(); ++i) {
    for (std::size_t j = 0; j < dim(); ++j) means[j] += at(i, j);
  }
  for (double& m : means) m /= static_cast<double>(rows());
  return means;
}

Dataset Dataset::subset(std::span<const std::size_t> indices, std::string id) const {
  std::vector<double> values;
  values.reserve(indices.size() * dim());
  std::vector<int> labels;
  labels.reserve(indices.size());
  std::vector<std::size_t> ids;
  ids.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= rows()) throw InputError(fmt::format("row index {} out of range", i));
    const auto r = row(i);
    values.insert(values.end(), r.begin(), r.end());
    labels.push_back(labels_[i]);
    ids.push_back(row_ids_[i]);
  }
  Dataset out(std::move(id), names_, std::move(values), std::move(labels));
  out.row_ids_ = std::move(ids);
  return out;
}

double SyntheticSpec::interaction_density() const {
  double total = 0.0;
  for (const auto& [pair, a] : alpha) total += std::abs(a);
  return total;
}

SyntheticSpec SyntheticSpec::scaled_interactions(double factor) const {
  SyntheticSpec out = *this;
  for (auto& [pair, a] : out.alpha) a *= factor;
  return out;
}

void SyntheticSpec::validate() const {
  if (dim == 0) throw InputError("synthetic spec needs dim >= 1");
  if (beta.size() != dim) {
    throw InputError(fmt::format("beta has {} entries, expected {}", beta.size(), dim));
  }
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
    throw InputError("noise_sd must be finite and >= 0");
  }
  for (const auto& [pair, a] : alpha) {
    if (pair.first >= pair.second || pair.second >= dim) {
      throw InputError(fmt::format("invalid interaction key ({}, {})", pair.first, pair.second));
    }
    if (!std::isfinite(a)) throw InputError("non-finite interaction coefficient");
  }
  for (double b : beta) {
    if (!std::isfinite(b)) throw InputError("non-finite additive coefficient");
  }
}

double SyntheticSpec::score(std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t j = 0; j < dim; ++j) s += beta[j] * x[j];
  for (const auto& [pair, a] : alpha) s += a * x[pair.first] * x[pair.second];
  return s;
}

namespace {

bool parse_double(std::string_view text, double& out) {
  // Trim surrounding blanks; from_chars rejects leading '+'.
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  const auto table = read_csv(in);
  if (table.empty()) throw InputError("'" + path.string() + "' is empty");
  const auto& header = table.front();
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) {
    throw InputError("label column '" + label_column + "' not found in header");
  }
  const auto label_col = static_cast<std::size_t>(label_it - header.begin());
  if (table.size() < 2) throw InputError("'" + path.string() + "' has a header but no rows");

  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != label_col) names.push_back(header[c]);
  }

  std::vector<double> values;
  values.reserve((table.size() - 1) * names.size());
  std::vector<std::string> raw_labels;
  for (std::size_t r = 1; r < table.size(); ++r) {
    const auto& fields = table[r];
    if (fields.size() != header.size()) {
      throw InputError(fmt::format("row {} has {} fields, header has {}", r, fields.size(),
                                   header.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (c == label_col) {
        raw_labels.push_back(fields[c]);
        continue;
      }
      double v = 0.0;
      if (!parse_double(fields[c], v)) {
        throw InputError(fmt::format("non-numeric cell '{}' at row {}, column '{}'", fields[c], r,
                                     header[c]));
      }
      values.push_back(v);
    }
  }

  // Two distinct label values map to {0,1}: numerically ordered when both
  // parse as numbers, lexicographically otherwise.
  std::vector<std::string> distinct(raw_labels.begin(), raw_labels.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) throw InputError("label column has fewer than 2 distinct values");
  if (distinct.size() > 2) {
    throw InputError(fmt::format("label column has {} distinct values; binary labels required",
                                 distinct.size()));
  }
  double a = 0.0;
  double b = 0.0;
  if (parse_double(distinct[0], a) && parse_double(distinct[1], b) && b < a) {
    std::swap(distinct[0], distinct[1]);
  }
  std::vector<int> labels;
  labels.reserve(raw_labels.size());
  for (const auto& l : raw_labels) labels.push_back(l == distinct[1] ? 1 : 0);

  return Dataset(path.stem().string(), std::move(names), std::move(values), std::move(labels));
}

Split split(const Dataset& ds, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw InputError("train_fraction must lie in (0, 1)");
  }
  const auto n = ds.rows();
  const auto n_train =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.train_fraction));
  if (n_train < 1 || n_train > n - 1) {
    throw InputError(fmt::format("train_fraction {} leaves an empty partition for n = {}",
                                 spec.train_fraction, n));
  }
  Rng rng(spec.seed);
  const auto order = rng.permutation(n);
  const std::span<const std::size_t> all(order);
  return {ds.subset(all.first(n_train), ds.id() + "/train"),
          ds.subset(all.subspan(n_train), ds.id() + "/test")};
}

Dataset generate_synthetic(const SyntheticSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw InputError("synthetic sample size must be >= 1");
  Rng rng(seed);
  std::vector<double> values(n * spec.dim);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<double> x(values.data() + i * spec.dim, spec.dim);
    for (double& v : x) v = rng.normal();
    double s = spec.score(x);
    if (spec.noise_sd > 0.0) s += spec.noise_sd * rng.normal();
    labels[i] = s > 0.0 ? 1 : 0;
  }
  std::vector<std::string> names;
  for (std::size_t j = 0; j < spec.dim; ++j) names.push_back(fmt::format("x{}", j + 1));
  return Dataset(fmt::format("synthetic-{}", seed), std::move(names), std::move(values),
                 std::move(labels));
}

std::filesystem::path resolve_cache_dir(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("LOTTERY_CACHE_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return fallback;
}

namespace {

std::mutex& lock_for(const std::string& id) {
  static std::mutex registry_mutex;
  static std::unordered_map<std::string, std::unique_ptr<std::mutex>> locks;
  std::lock_guard guard(registry_mutex);
  auto& slot = locks[id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::string cache_file_name(const std::string& id) {
  std::string name;
  for (char c : id) {
    const bool safe = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    name.push_back(safe ? c : '_');
  }
  return name + ".csv";
}

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InputError("URL has no scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::filesystem::path fetch_remote(const std::string& url_template, const std::string& dataset_id,
                                   const std::filesystem::path& cache_dir) {
  if (dataset_id.empty()) throw InputError("dataset id is empty");
  const auto target = cache_dir / cache_file_name(dataset_id);
  std::lock_guard guard(lock_for(dataset_id));
  if (std::filesystem::exists(target)) return target;

  std::string url = url_template;
  for (auto pos = url.find("{id}"); pos != std::string::npos; pos = url.find("{id}")) {
    url.replace(pos, 4, dataset_id);
  }
  const auto parsed = parse_url(url);
  httplib::Client client(parsed.origin);
  client.set_connection_timeout(10);
  client.set_read_timeout(60);
  client.set_follow_location(true);
  auto response = client.Get(parsed.path);
  if (!response) {
    throw TransportError(fmt::format("GET {} failed: {}", url, httplib::to_string(response.error())));
  }
  if (response->status < 200 || response->status >= 300) {
    throw TransportError(fmt::format("GET {} returned HTTP {}", url, response->status));
  }

  std::filesystem::create_directories(cache_dir);
  auto tmp = target;
  tmp += ".part";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write cache file " + tmp.string());
    out.write(response->body.data(), static_cast<std::streamsize>(response->body.size()));
    if (!out) throw InputError("short write to cache file " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
  return target;
}

}  // namespace lottery
