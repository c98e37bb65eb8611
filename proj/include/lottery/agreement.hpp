#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lottery/attribution.hpp"
#include "lottery/data.hpp"
#include "lottery/models.hpp"
#include "lottery/stats.hpp"

namespace lottery {

// Spearman rank correlation with average ranks for ties. std::nullopt when
// either side has zero rank variance. Throws InputError on a length mismatch
// or fewer than two entries.
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

// Average (1-based) ranks; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

struct EquivalentSet {
  std::vector<std::size_t> instances;  // row positions in the test set
  double coverage_fraction = 0.0;
};

// Test rows on which every model emits the same label.
EquivalentSet equivalence_filter(std::span<const TrainedModel> models, const Dataset& test);

enum class PairClass {
  kIntraTree,
  kIntraLinear,
  kIntraNeural,
  kCrossTreeLinear,
  kCrossTreeNeural,
  kCrossLinearNeural,
};

inline constexpr PairClass kAllPairClasses[] = {
    PairClass::kIntraTree,       PairClass::kIntraLinear,     PairClass::kIntraNeural,
    PairClass::kCrossTreeLinear, PairClass::kCrossTreeNeural, PairClass::kCrossLinearNeural,
};

std::string_view to_string(PairClass pc);
PairClass pair_class_of(HypothesisClass a, HypothesisClass b);
bool is_cross(PairClass pc);

// Roster member as seen by the agreement layer.
struct RosterEntry {
  std::string id;
  HypothesisClass hypothesis_class = HypothesisClass::kTree;
};

struct PairKey {
  std::string model_a;  // model_a < model_b
  std::string model_b;
  PairClass pair_class = PairClass::kIntraTree;
};

struct AgreementRecord {
  PairKey pair;
  std::string instance_id;
  std::optional<double> rho;  // nullopt = undefined (zero rank variance)
};

struct PairClassSummary {
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
  std::size_t count = 0;  // defined records
  std::size_t undefined = 0;
};

struct AgreementTable {
  std::vector<AgreementRecord> records;  // sorted by (model_a, model_b, instance order)
  std::map<PairClass, PairClassSummary> by_class;
  std::size_t undefined_count = 0;

  // Recomputes `by_class` and `undefined_count` from `records`.
  void aggregate();
};

// attributions[m][i] belongs to roster[m] and instance i; instance ids are
// taken from the vectors of the first model.
AgreementTable build_agreement_table(std::span<const RosterEntry> roster,
                                     const std::vector<std::vector<AttributionVector>>& attributions);

using PairFilter = std::function<bool(const PairKey&)>;

struct LotteryRate {
  double rate = 0.0;
  Interval ci;
  std::size_t defined_records = 0;
};

// Fraction of defined records (passing `filter`, all when empty) with rho < tau.
// The interval bootstraps per-instance mean indicators.
LotteryRate lottery_rate(const AgreementTable& table, double tau, const PairFilter& filter = {},
                         std::size_t resamples = 10000, std::uint64_t seed = 42);

// Mean rho over `intra` records minus mean rho over `inter` records.
// Throws InputError when either side has no defined records.
double agreement_gap(const AgreementTable& table, PairClass intra, PairClass inter);

// Defined rho values of one pair class, in table order.
std::vector<double> rho_values(const AgreementTable& table, PairClass pc);

struct TopKDisagreement {
  bool partial = false;   // top-k sets differ
  bool complete = false;  // top-k sets are disjoint
};

// Ranks features by |phi| descending, ties by lower feature index.
TopKDisagreement topk_disagreement(std::span<const double> a, std::span<const double> b,
                                   std::size_t k);

}  // namespace lottery
