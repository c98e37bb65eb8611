#include "lottery/agreement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>

#include "lottery/error.hpp"

namespace lottery {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start + 1;
    while (end < n && values[order[end]] == values[order[start]]) ++end;
    const double mid = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) ranks[order[k]] = mid;
    start = end;
  }
  return ranks;
}

std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InputError(fmt::format("spearman: lengths differ ({} vs {})", a.size(), b.size()));
  }
  if (a.size() < 2) throw InputError("spearman: need at least 2 entries");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  // Average ranks always have mean (n + 1) / 2.
  const double centre = 0.5 * static_cast<double>(a.size() + 1);
  double cov = 0.0;
  double va = 0.0;
  double vb = 0.0;
  for (std::size_t k = 0; k < ra.size(); ++k) {
    const double da = ra[k] - centre;
    const double db = rb[k] - centre;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return std::nullopt;
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

EquivalentSet equivalence_filter(std::span<const TrainedModel> models, const Dataset& test) {
  if (models.empty()) throw InputError("equivalence_filter: empty roster");
  EquivalentSet out;
  for (std::size_t i = 0; i < test.rows(); ++i) {
    const auto x = test.row(i);
    const int first = predict_label(models.front(), x);
    const bool agree = std::all_of(models.begin() + 1, models.end(), [&](const TrainedModel& m) {
      return predict_label(m, x) == first;
    });
    if (agree) out.instances.push_back(i);
  }
  out.coverage_fraction =
      static_cast<double>(out.instances.size()) / static_cast<double>(test.rows());
  return out;
}

std::string_view to_string(PairClass pc) {
  switch (pc) {
    case PairClass::kIntraTree:
      return "intra-tree";
    case PairClass::kIntraLinear:
      return "intra-linear";
    case PairClass::kIntraNeural:
      return "intra-neural";
    case PairClass::kCrossTreeLinear:
      return "cross-tree-linear";
    case PairClass::kCrossTreeNeural:
      return "cross-tree-neural";
    case PairClass::kCrossLinearNeural:
      return "cross-linear-neural";
  }
  return "unknown";
}

PairClass pair_class_of(HypothesisClass a, HypothesisClass b) {
  if (a > b) std::swap(a, b);
  using H = HypothesisClass;
  if (a == b) {
    switch (a) {
      case H::kTree:
        return PairClass::kIntraTree;
      case H::kLinear:
        return PairClass::kIntraLinear;
      case H::kNeural:
        return PairClass::kIntraNeural;
    }
  }
  if (a == H::kTree && b == H::kLinear) return PairClass::kCrossTreeLinear;
  if (a == H::kTree && b == H::kNeural) return PairClass::kCrossTreeNeural;
  return PairClass::kCrossLinearNeural;
}

bool is_cross(PairClass pc) {
  return pc == PairClass::kCrossTreeLinear || pc == PairClass::kCrossTreeNeural ||
         pc == PairClass::kCrossLinearNeural;
}

void AgreementTable::aggregate() {
  by_class.clear();
  undefined_count = 0;
  std::map<PairClass, std::vector<double>> values;
  for (const auto& r : records) {
    auto& summary = by_class[r.pair.pair_class];
    if (!r.rho) {
      ++summary.undefined;
      ++undefined_count;
      continue;
    }
    values[r.pair.pair_class].push_back(*r.rho);
  }
  for (auto& [pc, summary] : by_class) {
    const auto& v = values[pc];
    summary.count = v.size();
    if (v.empty()) continue;
    summary.mean = mean(v);
    summary.median = median(v);
    summary.sd = stddev(v);
  }
}

AgreementTable build_agreement_table(
    std::span<const RosterEntry> roster,
    const std::vector<std::vector<AttributionVector>>& attributions) {
  if (attributions.size() != roster.size()) {
    throw InputError(fmt::format("{} attribution sets for a roster of {}", attributions.size(),
                                 roster.size()));
  }
  AgreementTable table;
  if (roster.empty()) return table;
  const std::size_t n_instances = attributions.front().size();
  for (const auto& per_model : attributions) {
    if (per_model.size() != n_instances) {
      throw InputError("attribution sets cover different numbers of instances");
    }
  }
  std::vector<std::size_t> order(roster.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return roster[a].id < roster[b].id; });
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (roster[order[k]].id == roster[order[k - 1]].id) {
      throw InputError("duplicate model id '" + roster[order[k]].id + "' in roster");
    }
  }

  for (std::size_t p = 0; p < order.size(); ++p) {
    for (std::size_t q = p + 1; q < order.size(); ++q) {
      const auto ma = order[p];
      const auto mb = order[q];
      PairKey key{roster[ma].id, roster[mb].id,
                  pair_class_of(roster[ma].hypothesis_class, roster[mb].hypothesis_class)};
      for (std::size_t i = 0; i < n_instances; ++i) {
        const auto& va = attributions[ma][i];
        const auto& vb = attributions[mb][i];
        if (va.instance_id != vb.instance_id) {
          throw InputError(fmt::format("instance mismatch '{}' vs '{}'", va.instance_id,
                                       vb.instance_id));
        }
        table.records.push_back({key, va.instance_id, spearman(va.phi, vb.phi)});
      }
    }
  }
  table.aggregate();
  return table;
}

LotteryRate lottery_rate(const AgreementTable& table, double tau, const PairFilter& filter,
                         std::size_t resamples, std::uint64_t seed) {
  LotteryRate out;
  std::size_t below = 0;
  // Per-instance indicator sums, in order of first appearance.
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<double> hits;
  std::vector<double> counts;
  for (const auto& r : table.records) {
    if (!r.rho) continue;
    if (filter && !filter(r.pair)) continue;
    const bool lottery = *r.rho < tau;
    ++out.defined_records;
    below += lottery ? 1 : 0;
    auto [it, inserted] = slot.try_emplace(r.instance_id, hits.size());
    if (inserted) {
      hits.push_back(0.0);
      counts.push_back(0.0);
    }
    hits[it->second] += lottery ? 1.0 : 0.0;
    counts[it->second] += 1.0;
  }
  if (out.defined_records == 0) {
    out.rate = std::numeric_limits<double>::quiet_NaN();
    out.ci = {out.rate, out.rate, 0.95, 0};
    return out;
  }
  out.rate = static_cast<double>(below) / static_cast<double>(out.defined_records);
  std::vector<double> per_instance(hits.size());
  for (std::size_t k = 0; k < hits.size(); ++k) per_instance[k] = hits[k] / counts[k];
  if (per_instance.size() < 2) {
    out.ci = {out.rate, out.rate, 0.95, 0};
  } else {
    out.ci = bootstrap_ci(per_instance, [](std::span<const double> s) { return mean(s); }, 0.95,
                          resamples, seed);
  }
  return out;
}

std::vector<double> rho_values(const AgreementTable& table, PairClass pc) {
  std::vector<double> out;
  for (const auto& r : table.records) {
    if (r.rho && r.pair.pair_class == pc) out.push_back(*r.rho);
  }
  return out;
}

double agreement_gap(const AgreementTable& table, PairClass intra, PairClass inter) {
  const auto a = rho_values(table, intra);
  const auto b = rho_values(table, inter);
  if (a.empty()) {
    throw InputError(fmt::format("agreement_gap: no defined {} records", to_string(intra)));
  }
  if (b.empty()) {
    throw InputError(fmt::format("agreement_gap: no defined {} records", to_string(inter)));
  }
  return mean(a) - mean(b);
}

namespace {

std::vector<std::size_t> top_features(std::span<const double> phi, std::size_t k) {
  std::vector<std::size_t> idx(phi.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
    return std::abs(phi[i]) > std::abs(phi[j]);
  });
  idx.resize(std::min(k, idx.size()));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

TopKDisagreement topk_disagreement(std::span<const double> a, std::span<const double> b,
                                   std::size_t k) {
  if (a.size() != b.size()) throw InputError("topk_disagreement: length mismatch");
  if (k == 0) throw InputError("topk_disagreement: k must be >= 1");
  const auto ta = top_features(a, k);
  const auto tb = top_features(b, k);
  std::vector<std::size_t> shared;
  std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(shared));
  return {ta != tb, shared.empty()};
}

}  // namespace lottery
