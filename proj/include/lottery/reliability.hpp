#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lottery/attribution.hpp"

namespace lottery {

enum class Zone { kHigh, kModerate, kLow };

inline constexpr double kHighReliability = 0.7;
inline constexpr double kLowReliability = 0.5;

std::string_view to_string(Zone zone);

// high: r > 0.7; moderate: 0.5 <= r <= 0.7; low: r < 0.5.
Zone classify_zone(double r);

struct ReliabilityResult {
  std::string instance_id;
  double r = 1.0;
  Zone zone = Zone::kHigh;
  std::size_t k = 0;
  std::size_t undefined_pairs = 0;
};

// Mean pairwise Spearman correlation of the attributions for one instance.
// k < 2 gives r = 1. Pairs with an undefined correlation are excluded and
// counted; when every pair is undefined r is 1 (all rankings are flat).
ReliabilityResult reliability_score(std::span<const AttributionVector> attrs);

struct ZoneOutcome {
  std::size_t trials = 0;
  std::size_t agreements = 0;
  double agreement_probability = 0.0;
};

struct LooReport {
  std::array<ZoneOutcome, 3> zones;  // indexed by Zone
  double agreement_tau = 0.5;
  std::size_t scored = 0;  // (held-out model, instance) trials

  const ZoneOutcome& zone(Zone z) const { return zones[static_cast<std::size_t>(z)]; }
};

// attributions[m][i]: model m, instance i. Every model is held out in turn:
// r comes from the other k - 1 models, and the held-out model "agrees" when
// its mean Spearman correlation with them is >= agreement_tau. Needs k >= 3.
LooReport loo_validate(const std::vector<std::vector<AttributionVector>>& attributions,
                       double agreement_tau = 0.5);

}  // namespace lottery
