#include "lottery/reliability.hpp"

#include <fmt/format.h>

#include "lottery/agreement.hpp"
#include "lottery/error.hpp"

namespace lottery {

std::string_view to_string(Zone zone) {
  switch (zone) {
    case Zone::kHigh:
      return "high";
    case Zone::kModerate:
      return "moderate";
    case Zone::kLow:
      return "low";
  }
  return "unknown";
}

Zone classify_zone(double r) {
  if (r > kHighReliability) return Zone::kHigh;
  if (r >= kLowReliability) return Zone::kModerate;
  return Zone::kLow;
}

ReliabilityResult reliability_score(std::span<const AttributionVector> attrs) {
  ReliabilityResult out;
  out.k = attrs.size();
  if (!attrs.empty()) out.instance_id = attrs.front().instance_id;
  for (const auto& a : attrs) {
    if (a.phi.size() != attrs.front().phi.size()) {
      throw InputError(fmt::format("reliability_score: dimension mismatch ({} vs {})",
                                   a.phi.size(), attrs.front().phi.size()));
    }
    if (a.instance_id != out.instance_id) {
      throw InputError("reliability_score: attributions belong to different instances");
    }
  }
  if (attrs.size() < 2) {
    out.r = 1.0;
    out.zone = classify_zone(out.r);
    return out;
  }
  double total = 0.0;
  std::size_t defined = 0;
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    for (std::size_t j = i + 1; j < attrs.size(); ++j) {
      if (const auto rho = spearman(attrs[i].phi, attrs[j].phi)) {
        total += *rho;
        ++defined;
      } else {
        ++out.undefined_pairs;
      }
    }
  }
  out.r = defined == 0 ? 1.0 : total / static_cast<double>(defined);
  out.zone = classify_zone(out.r);
  return out;
}

LooReport loo_validate(const std::vector<std::vector<AttributionVector>>& attributions,
                       double agreement_tau) {
  const std::size_t k = attributions.size();
  if (k < 3) throw InputError(fmt::format("loo_validate: need k >= 3 models, got {}", k));
  const std::size_t n = attributions.front().size();
  for (const auto& per_model : attributions) {
    if (per_model.size() != n) throw InputError("loo_validate: ragged attribution sets");
  }
  LooReport report;
  report.agreement_tau = agreement_tau;
  std::vector<AttributionVector> others;
  for (std::size_t held = 0; held < k; ++held) {
    for (std::size_t i = 0; i < n; ++i) {
      others.clear();
      for (std::size_t m = 0; m < k; ++m) {
        if (m != held) others.push_back(attributions[m][i]);
      }
      const auto score = reliability_score(others);
      double total = 0.0;
      std::size_t defined = 0;
      for (const auto& o : others) {
        if (const auto rho = spearman(attributions[held][i].phi, o.phi)) {
          total += *rho;
          ++defined;
        }
      }
      // A held-out ranking that is flat against every other model carries no
      // ordering to agree with; it counts as disagreement.
      const bool agrees = defined > 0 && total / static_cast<double>(defined) >= agreement_tau;
      auto& zone = report.zones[static_cast<std::size_t>(score.zone)];
      ++zone.trials;
      zone.agreements += agrees ? 1 : 0;
      ++report.scored;
    }
  }
  for (auto& zone : report.zones) {
    zone.agreement_probability =
        zone.trials == 0 ? 0.0
                         : static_cast<double>(zone.agreements) / static_cast<double>(zone.trials);
  }
  return report;
}

}  // namespace lottery
