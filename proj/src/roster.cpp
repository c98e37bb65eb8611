#include "lottery/roster.hpp"

#include <fmt/format.h>

#include "lottery/error.hpp"
#include "lottery/parallel.hpp"
#include "lottery/rng.hpp"

namespace lottery {

std::vector<TrainedModel> train_roster(std::span<const ModelSpec> specs, const Dataset& train,
                                       std::uint64_t seed, std::size_t jobs) {
  std::vector<TrainedModel> models(specs.size());
  parallel_for(specs.size(), jobs, [&](std::size_t m) {
    try {
      models[m] = train_model(specs[m], train, seed);
    } catch (const std::exception& e) {
      throw InputError(fmt::format("training '{}' failed: {}", specs[m].name, e.what()));
    }
  });
  return models;
}

std::string instance_id(std::uint64_t seed, std::size_t row_id) {
  return fmt::format("{}:{}", seed, row_id);
}

std::vector<std::vector<AttributionVector>> attribute_instances(
    std::span<const TrainedModel> models, const Dataset& test,
    std::span<const std::size_t> positions, const BackgroundSet& background,
    const RosterOptions& options, std::uint64_t seed) {
  std::vector<std::vector<AttributionVector>> out(models.size(),
                                                  std::vector<AttributionVector>(positions.size()));
  const std::size_t items = models.size() * positions.size();
  parallel_for(items, options.jobs, [&](std::size_t item) {
    const std::size_t m = item / positions.size();
    const std::size_t i = item % positions.size();
    const std::size_t row = positions[i];
    const std::size_t row_id = test.row_ids()[row];
    ExplainOptions explain = options.explain;
    explain.kernel.seed = Rng::mix(seed ^ Rng::mix(row_id));
    auto attr = lottery::explain(models[m], test.row(row), background, explain);
    attr.instance_id = instance_id(seed, row_id);
    out[m][i] = std::move(attr);
  });
  return out;
}

RosterRun run_roster(std::span<const ModelSpec> specs, const Split& split, std::uint64_t seed,
                     const RosterOptions& options) {
  if (specs.empty()) throw InputError("roster is empty");
  RosterRun run;
  run.seed = seed;
  run.models = train_roster(specs, split.train, seed, options.jobs);
  for (const auto& m : run.models) run.entries.push_back({m.id, m.hypothesis_class});
  run.equivalent = equivalence_filter(run.models, split.test);
  run.background = BackgroundSet::sample(split.train, options.background_rows, seed);
  run.explained = run.equivalent.instances;
  if (options.max_instances > 0 && run.explained.size() > options.max_instances) {
    run.explained.resize(options.max_instances);
  }
  run.attributions =
      attribute_instances(run.models, split.test, run.explained, run.background, options, seed);
  run.table = build_agreement_table(run.entries, run.attributions);
  return run;
}

}  // namespace lottery
