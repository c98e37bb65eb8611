#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "lottery/models.hpp"

namespace lottery {

inline constexpr int kModelFormatVersion = 1;

// Self-describing JSON form: format version, id, class tag, seed, config
// digest and the payload parameters. Reals survive a round trip bit-exactly.
nlohmann::ordered_json model_to_json(const TrainedModel& model);
// Throws InputError on a malformed document or inconsistent class tag.
TrainedModel model_from_json(const nlohmann::ordered_json& doc);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace lottery
