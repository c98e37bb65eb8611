#include "lottery/model_io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "lottery/csv.hpp"
#include "lottery/error.hpp"

namespace lottery {

using nlohmann::ordered_json;

namespace {

ordered_json tree_to_json(const Tree& tree) {
  ordered_json nodes = ordered_json::array();
  for (const auto& n : tree.nodes) {
    if (n.is_leaf()) {
      nodes.push_back({{"value", n.value}, {"cover", n.cover}});
    } else {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"cover", n.cover}});
    }
  }
  return nodes;
}

Tree tree_from_json(const ordered_json& nodes) {
  Tree tree;
  for (const auto& j : nodes) {
    TreeNode n;
    n.cover = j.at("cover").get<double>();
    if (j.contains("feature")) {
      n.feature = j.at("feature").get<int>();
      n.threshold = j.at("threshold").get<double>();
      n.left = j.at("left").get<int>();
      n.right = j.at("right").get<int>();
    } else {
      n.value = j.at("value").get<double>();
    }
    tree.nodes.push_back(n);
  }
  const auto size = static_cast<int>(tree.nodes.size());
  if (size == 0) throw InputError("tree has no nodes");
  for (const auto& n : tree.nodes) {
    if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size)) {
      throw InputError("tree node references a child out of range");
    }
  }
  return tree;
}

}  // namespace

ordered_json model_to_json(const TrainedModel& model) {
  ordered_json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["id"] = model.id;
  doc["hypothesis_class"] = std::string(to_string(model.hypothesis_class));
  doc["seed"] = model.seed;
  doc["config_digest"] = model.config_digest;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          doc["kind"] = "linear";
          doc["loss"] = m.loss == LinearLoss::kLogistic ? "logistic" : "squared";
          doc["weights"] = m.weights;
          doc["bias"] = m.bias;
          doc["train_feature_means"] = m.train_feature_means;
          doc["converged"] = m.converged;
          doc["iterations"] = m.iterations;
        } else if constexpr (std::is_same_v<T, TreeEnsemble>) {
          doc["kind"] = "tree_ensemble";
          doc["aggregation"] = m.aggregation == Aggregation::kSum ? "sum" : "mean";
          doc["base_score"] = m.base_score;
          doc["dim"] = m.dim;
          ordered_json trees = ordered_json::array();
          for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
          doc["trees"] = std::move(trees);
        } else {
          doc["kind"] = "mlp";
          doc["activation"] = "relu";
          doc["input_dim"] = m.input_dim;
          doc["hidden"] = m.hidden;
          doc["hidden_weights"] = m.hidden_weights;
          doc["hidden_bias"] = m.hidden_bias;
          doc["output_weights"] = m.output_weights;
          doc["output_bias"] = m.output_bias;
        }
      },
      model.payload);
  return doc;
}

TrainedModel model_from_json(const ordered_json& doc) {
  try {
    if (doc.at("format_version").get<int>() != kModelFormatVersion) {
      throw InputError("unsupported model format version");
    }
    TrainedModel model;
    model.id = doc.at("id").get<std::string>();
    model.hypothesis_class =
        hypothesis_class_from_string(doc.at("hypothesis_class").get<std::string>());
    model.seed = doc.at("seed").get<std::uint64_t>();
    model.config_digest = doc.at("config_digest").get<std::string>();
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "linear") {
      LinearModel m;
      m.loss = doc.at("loss").get<std::string>() == "logistic" ? LinearLoss::kLogistic
                                                               : LinearLoss::kSquared;
      m.weights = doc.at("weights").get<std::vector<double>>();
      m.bias = doc.at("bias").get<double>();
      m.train_feature_means = doc.at("train_feature_means").get<std::vector<double>>();
      m.converged = doc.at("converged").get<bool>();
      m.iterations = doc.at("iterations").get<std::size_t>();
      if (m.train_feature_means.size() != m.weights.size()) {
        throw InputError("linear model means and weights differ in length");
      }
      model.payload = std::move(m);
    } else if (kind == "tree_ensemble") {
      TreeEnsemble m;
      m.aggregation = doc.at("aggregation").get<std::string>() == "sum" ? Aggregation::kSum
                                                                         : Aggregation::kMean;
      m.base_score = doc.at("base_score").get<double>();
      m.dim = doc.at("dim").get<std::size_t>();
      for (const auto& t : doc.at("trees")) m.trees.push_back(tree_from_json(t));
      if (m.trees.empty()) throw InputError("tree ensemble has no trees");
      for (const auto& t : m.trees) {
        for (const auto& n : t.nodes) {
          if (!n.is_leaf() && static_cast<std::size_t>(n.feature) >= m.dim) {
            throw InputError("split feature exceeds ensemble dimension");
          }
        }
      }
      model.payload = std::move(m);
    } else if (kind == "mlp") {
      MlpModel m;
      m.input_dim = doc.at("input_dim").get<std::size_t>();
      m.hidden = doc.at("hidden").get<std::size_t>();
      m.hidden_weights = doc.at("hidden_weights").get<std::vector<double>>();
      m.hidden_bias = doc.at("hidden_bias").get<std::vector<double>>();
      m.output_weights = doc.at("output_weights").get<std::vector<double>>();
      m.output_bias = doc.at("output_bias").get<double>();
      if (m.hidden_weights.size() != m.hidden * m.input_dim || m.hidden_bias.size() != m.hidden ||
          m.output_weights.size() != m.hidden) {
        throw InputError("mlp layer dimensions do not compose");
      }
      model.payload = std::move(m);
    } else {
      throw InputError("unknown model kind '" + kind + "'");
    }
    model.check_consistent();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("malformed model document: {}", e.what()));
  }
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, model_to_json(model).dump(2) + "\n");
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file " + path.string());
  try {
    return model_from_json(ordered_json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace lottery
