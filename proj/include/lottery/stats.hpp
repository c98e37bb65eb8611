#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace lottery {

struct TestResult {
  double u_statistic = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  bool exact = false;  // p from the exact permutation distribution
};

struct EffectSizes {
  double cohens_d = 0.0;
  double cles = 0.5;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;
  std::size_t resamples = 0;
};

// U = #{a_i > b_j} + 0.5 #{a_i = b_j}; two-sided p. Exact when n1*n2 <= 400,
// otherwise the tie-corrected normal approximation with continuity
// correction. Throws InputError on an empty sample.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

// (mean(a) - mean(b)) / pooled SD with n-1 variances. Needs n1 + n2 > 2.
double cohens_d(std::span<const double> a, std::span<const double> b);

// P(A > B) + 0.5 P(A = B) over all cross pairs.
double cles(std::span<const double> a, std::span<const double> b);

EffectSizes effect_sizes(std::span<const double> a, std::span<const double> b);

using Statistic = std::function<double(std::span<const double>)>;

// Percentile interval over `resamples` bootstrap replicates. Replicate r draws
// from its own stream derived from (seed, r), so results do not depend on
// evaluation order. Throws InputError with fewer than 2 samples.
Interval bootstrap_ci(std::span<const double> samples, const Statistic& statistic, double level,
                      std::size_t resamples = 10000, std::uint64_t seed = 42);

double bonferroni_threshold(double alpha, std::size_t m);
// flag_i = p_i < alpha / m.
std::vector<bool> bonferroni(std::span<const double> p_values, double alpha);

// Mean after dropping floor(trim * n) values from each tail.
double trimmed_mean(std::span<const double> samples, double trim_fraction);

double mean(std::span<const double> samples);
double median(std::span<const double> samples);
// Sample standard deviation (n - 1); 0 for fewer than 2 values.
double stddev(std::span<const double> samples);

}  // namespace lottery
