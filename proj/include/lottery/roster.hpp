#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lottery/agreement.hpp"
#include "lottery/attribution.hpp"
#include "lottery/data.hpp"
#include "lottery/models.hpp"

namespace lottery {

struct RosterOptions {
  ExplainOptions explain;
  std::size_t background_rows = 100;
  // Cap on explained instances (first rows of the equivalent set); 0 = all.
  std::size_t max_instances = 0;
  std::size_t jobs = 1;
};

// One seed's pass through train -> filter -> attribute -> agree.
struct RosterRun {
  std::uint64_t seed = 0;
  std::vector<TrainedModel> models;
  std::vector<RosterEntry> entries;
  EquivalentSet equivalent;
  BackgroundSet background;
  std::vector<std::size_t> explained;  // test-row positions that were explained
  std::vector<std::vector<AttributionVector>> attributions;  // [model][instance]
  AgreementTable table;
};

std::vector<TrainedModel> train_roster(std::span<const ModelSpec> specs, const Dataset& train,
                                       std::uint64_t seed, std::size_t jobs = 1);

// Explains every explained instance with every model. Instance ids are
// "<seed>:<source row id>". KernelSHAP seeds derive from (seed, row id).
std::vector<std::vector<AttributionVector>> attribute_instances(
    std::span<const TrainedModel> models, const Dataset& test,
    std::span<const std::size_t> positions, const BackgroundSet& background,
    const RosterOptions& options, std::uint64_t seed);

std::string instance_id(std::uint64_t seed, std::size_t row_id);

RosterRun run_roster(std::span<const ModelSpec> specs, const Split& split, std::uint64_t seed,
                     const RosterOptions& options);

}  // namespace lottery
