#include "lottery/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "lottery/error.hpp"
#include "lottery/rng.hpp"

namespace lottery {

double mean(std::span<const double> samples) {
  if (samples.empty()) throw InputError("mean of an empty sample");
  double total = 0.0;
  for (double v : samples) total += v;
  return total / static_cast<double>(samples.size());
}

double median(std::span<const double> samples) {
  if (samples.empty()) throw InputError("median of an empty sample");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

double stddev(std::span<const double> samples) {
  if (samples.size() < 2) return 0.0;
  const double m = mean(samples);
  double ss = 0.0;
  for (double v : samples) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(samples.size() - 1));
}

namespace {

struct RankedPool {
  std::vector<double> ranks;  // mid-ranks, a's entries first
  std::vector<std::size_t> tie_sizes;
};

RankedPool rank_pool(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size() + b.size();
  std::vector<double> pool(a.begin(), a.end());
  pool.insert(pool.end(), b.begin(), b.end());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return pool[i] < pool[j]; });
  RankedPool out;
  out.ranks.resize(n);
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start + 1;
    while (end < n && pool[order[end]] == pool[order[start]]) ++end;
    const double mid = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) out.ranks[order[k]] = mid;
    out.tie_sizes.push_back(end - start);
    start = end;
  }
  return out;
}

// Two-sided exact p under random assignment of the pooled mid-ranks.
double exact_p(const RankedPool& pool, std::size_t n1, std::size_t n2, double u) {
  const std::size_t n = n1 + n2;
  std::vector<std::size_t> doubled(n);
  std::size_t max_sum = 0;
  for (std::size_t k = 0; k < n; ++k) {
    doubled[k] = static_cast<std::size_t>(std::lround(2.0 * pool.ranks[k]));
    max_sum += doubled[k];
  }
  // ways[c][s]: subsets of size c with doubled rank sum s.
  std::vector<std::vector<double>> ways(n1 + 1, std::vector<double>(max_sum + 1, 0.0));
  ways[0][0] = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t c = std::min(k + 1, n1); c >= 1; --c) {
      auto& dst = ways[c];
      const auto& src = ways[c - 1];
      for (std::size_t s = max_sum + 1; s-- > doubled[k];) dst[s] += src[s - doubled[k]];
    }
  }
  const double offset = static_cast<double>(n1 * (n1 + 1));  // 2 * n1(n1+1)/2
  const double centre = static_cast<double>(n1 * n2);        // 2 * mean(U)
  const double observed = std::abs(2.0 * u - centre);
  double extreme = 0.0;
  double total = 0.0;
  for (std::size_t s = 0; s <= max_sum; ++s) {
    const double w = ways[n1][s];
    if (w == 0.0) continue;
    total += w;
    if (std::abs(static_cast<double>(s) - offset - centre) >= observed - 1e-9) extreme += w;
  }
  return std::min(1.0, extreme / total);
}

}  // namespace

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InputError("mann_whitney_u: empty sample");
  const std::size_t n1 = a.size();
  const std::size_t n2 = b.size();
  const auto pool = rank_pool(a, b);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n1; ++i) rank_sum += pool.ranks[i];

  TestResult out;
  out.n1 = n1;
  out.n2 = n2;
  out.u_statistic = rank_sum - 0.5 * static_cast<double>(n1 * (n1 + 1));
  if (n1 * n2 <= 400) {
    out.exact = true;
    out.p_value = exact_p(pool, n1, n2, out.u_statistic);
    return out;
  }
  const auto nn = static_cast<double>(n1 + n2);
  double tie_term = 0.0;
  for (std::size_t t : pool.tie_sizes) {
    const auto tt = static_cast<double>(t);
    tie_term += tt * tt * tt - tt;
  }
  const double var = static_cast<double>(n1) * static_cast<double>(n2) / 12.0 *
                     ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (!(var > 0.0)) {
    out.p_value = 1.0;
    return out;
  }
  const double centre = 0.5 * static_cast<double>(n1) * static_cast<double>(n2);
  const double z = std::max(0.0, std::abs(out.u_statistic - centre) - 0.5) / std::sqrt(var);
  out.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return out;
}

double cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty() || a.size() + b.size() <= 2) {
    throw InputError("cohens_d: need n1 + n2 > 2 with both samples nonempty");
  }
  const double ma = mean(a);
  const double mb = mean(b);
  double ssa = 0.0;
  for (double v : a) ssa += (v - ma) * (v - ma);
  double ssb = 0.0;
  for (double v : b) ssb += (v - mb) * (v - mb);
  const double pooled =
      std::sqrt((ssa + ssb) / static_cast<double>(a.size() + b.size() - 2));
  if (pooled == 0.0) {
    if (ma == mb) return 0.0;
    throw NumericError("cohens_d: zero pooled standard deviation with unequal means");
  }
  return (ma - mb) / pooled;
}

double cles(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InputError("cles: empty sample");
  std::vector<double> sorted_b(b.begin(), b.end());
  std::sort(sorted_b.begin(), sorted_b.end());
  double wins = 0.0;
  for (double v : a) {
    const auto lo = std::lower_bound(sorted_b.begin(), sorted_b.end(), v);
    const auto hi = std::upper_bound(lo, sorted_b.end(), v);
    wins += static_cast<double>(lo - sorted_b.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

EffectSizes effect_sizes(std::span<const double> a, std::span<const double> b) {
  return {cohens_d(a, b), cles(a, b)};
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

Interval bootstrap_ci(std::span<const double> samples, const Statistic& statistic, double level,
                      std::size_t resamples, std::uint64_t seed) {
  if (samples.size() < 2) throw InputError("bootstrap_ci: need at least 2 samples");
  if (!(level > 0.0 && level < 1.0)) throw InputError("bootstrap_ci: level must lie in (0, 1)");
  if (resamples < 1) throw InputError("bootstrap_ci: resamples must be >= 1");
  const std::size_t n = samples.size();
  std::vector<double> stats(resamples);
  std::vector<double> draw(n);
  for (std::size_t r = 0; r < resamples; ++r) {
    Rng rng = Rng::stream(seed, r);
    for (auto& v : draw) v = samples[static_cast<std::size_t>(rng.below(n))];
    stats[r] = statistic(draw);
  }
  std::sort(stats.begin(), stats.end());
  const double tail = 0.5 * (1.0 - level);
  Interval out;
  out.lo = quantile_sorted(stats, tail);
  out.hi = quantile_sorted(stats, 1.0 - tail);
  out.level = level;
  out.resamples = resamples;
  return out;
}

double bonferroni_threshold(double alpha, std::size_t m) {
  if (m == 0) throw InputError("bonferroni: no comparisons");
  return alpha / static_cast<double>(m);
}

std::vector<bool> bonferroni(std::span<const double> p_values, double alpha) {
  std::vector<bool> flags;
  if (p_values.empty()) return flags;
  const double threshold = bonferroni_threshold(alpha, p_values.size());
  flags.reserve(p_values.size());
  for (double p : p_values) flags.push_back(p < threshold);
  return flags;
}

double trimmed_mean(std::span<const double> samples, double trim_fraction) {
  if (samples.empty()) throw InputError("trimmed_mean: empty sample");
  if (!(trim_fraction >= 0.0 && trim_fraction < 0.5)) {
    throw InputError("trimmed_mean: trim_fraction must lie in [0, 0.5)");
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const auto cut =
      static_cast<std::size_t>(std::floor(trim_fraction * static_cast<double>(sorted.size())));
  double total = 0.0;
  for (std::size_t k = cut; k < sorted.size() - cut; ++k) total += sorted[k];
  return total / static_cast<double>(sorted.size() - 2 * cut);
}

}  // namespace lottery
