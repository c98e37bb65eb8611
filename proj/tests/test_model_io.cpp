#include <gtest/gtest.h>

#include "lottery/error.hpp"
#include "lottery/model_io.hpp"
#include "test_support.hpp"

using namespace lottery;
using testing_support::TempDir;

namespace {

void expect_same_predictions(const TrainedModel& a, const TrainedModel& b, const Dataset& data) {
  for (std::size_t i = 0; i < data.rows(); ++i) {
    EXPECT_EQ(margin(a, data.row(i)), margin(b, data.row(i)));
  }
}

}  // namespace

TEST(ModelIo, RoundTripEveryPresetBitExact) {
  const auto data = testing_support::random_dataset(120, 3, 4);
  TempDir dir("modelio");
  for (const char* name : {"logistic", "ridge", "cart", "forest", "gbt", "mlp"}) {
    const auto model = train_model(model_preset(name), data, 11);
    const auto path = dir.path() / (std::string(name) + ".json");
    save_model(model, path);
    const auto loaded = load_model(path);
    EXPECT_EQ(loaded.id, model.id);
    EXPECT_EQ(loaded.seed, model.seed);
    EXPECT_EQ(loaded.config_digest, model.config_digest);
    EXPECT_EQ(loaded.hypothesis_class, model.hypothesis_class);
    expect_same_predictions(model, loaded, data);
    EXPECT_EQ(model_to_json(loaded).dump(), model_to_json(model).dump());
  }
}

TEST(ModelIo, RejectsMalformedDocuments) {
  const auto data = testing_support::random_dataset(60, 2, 4);
  auto doc = model_to_json(train_model(model_preset("logistic"), data, 1));
  auto wrong_tag = doc;
  wrong_tag["hypothesis_class"] = "tree";
  EXPECT_THROW(model_from_json(wrong_tag), InputError);
  auto wrong_version = doc;
  wrong_version["format_version"] = 99;
  EXPECT_THROW(model_from_json(wrong_version), InputError);
  EXPECT_THROW(model_from_json(nlohmann::ordered_json::object()), InputError);
  TempDir dir("modelio-bad");
  testing_support::write_text(dir.path() / "bad.json", "{not json");
  EXPECT_THROW(load_model(dir.path() / "bad.json"), InputError);
  EXPECT_THROW(load_model(dir.path() / "absent.json"), InputError);
}
