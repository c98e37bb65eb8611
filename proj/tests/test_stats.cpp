#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "lottery/error.hpp"
#include "lottery/rng.hpp"
#include "lottery/stats.hpp"

using namespace lottery;

namespace {

double brute_u(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0.0;
  for (double x : a) {
    for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  }
  return u;
}

// Exact two-sided p by enumerating every split of the pooled sample.
double brute_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size();
  const double center = a.size() * b.size() / 2.0;
  const double observed = std::abs(brute_u(a, b) - center);
  std::size_t extreme = 0;
  std::size_t total = 0;
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcountll(mask)) != a.size()) continue;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < n; ++i) ((mask >> i) & 1 ? x : y).push_back(pooled[i]);
    ++total;
    if (std::abs(brute_u(x, y) - center) >= observed - 1e-12) ++extreme;
  }
  return static_cast<double>(extreme) / total;
}

}  // namespace

TEST(MannWhitney, Examples) {
  const std::vector<double> a = {4, 5, 6};
  const std::vector<double> b = {1, 2, 3};
  const auto r = mann_whitney_u(a, b);
  EXPECT_DOUBLE_EQ(r.u_statistic, 9.0);
  EXPECT_EQ(r.n1, 3u);
  EXPECT_TRUE(r.exact);
  EXPECT_NEAR(r.p_value, brute_p(a, b), 1e-12);
  EXPECT_DOUBLE_EQ(mann_whitney_u(std::vector<double>{1}, std::vector<double>{2}).u_statistic, 0.0);
  const auto same = mann_whitney_u(a, a);
  EXPECT_DOUBLE_EQ(same.u_statistic, 4.5);
  EXPECT_NEAR(same.p_value, 1.0, 1e-12);
  EXPECT_THROW(mann_whitney_u(std::vector<double>{}, b), InputError);
}

TEST(MannWhitney, ExactPMatchesEnumerationWithTies) {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> a(2 + rng.below(5)), b(2 + rng.below(5));
    for (auto& v : a) v = std::floor(rng.uniform(0, 5));
    for (auto& v : b) v = std::floor(rng.uniform(0, 5));
    const auto r = mann_whitney_u(a, b);
    EXPECT_NEAR(r.u_statistic, brute_u(a, b), 1e-12);
    EXPECT_NEAR(r.p_value, brute_p(a, b), 1e-12) << "trial " << trial;
  }
}

TEST(MannWhitney, AntisymmetryAndRankInvariance) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(30), b(25);
    for (auto& v : a) v = rng.normal() + 0.3;
    for (auto& v : b) v = rng.normal();
    const auto ab = mann_whitney_u(a, b);
    const auto ba = mann_whitney_u(b, a);
    EXPECT_FALSE(ab.exact);
    EXPECT_NEAR(ab.u_statistic + ba.u_statistic, 30.0 * 25.0, 1e-9);
    EXPECT_GE(ab.u_statistic, 0.0);
    EXPECT_LE(ab.u_statistic, 750.0);
    auto ta = a;
    auto tb = b;
    for (auto& v : ta) v = std::exp(v);
    for (auto& v : tb) v = std::exp(v);
    EXPECT_NEAR(mann_whitney_u(ta, tb).p_value, ab.p_value, 1e-12);
    EXPECT_NEAR(ab.p_value, ba.p_value, 1e-12);
  }
}

TEST(MannWhitney, NormalApproximationIsCalibrated) {
  // Under the null, p < 0.05 should occur about 5% of the time.
  Rng rng(3);
  int rejections = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> a(40), b(40);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    rejections += mann_whitney_u(a, b).p_value < 0.05 ? 1 : 0;
  }
  EXPECT_NEAR(rejections / 1000.0, 0.05, 0.025);
}

TEST(CohensD, Examples) {
  const std::vector<double> a = {1, 2, 3};
  EXPECT_DOUBLE_EQ(cohens_d(a, a), 0.0);
  // Both samples have variance 1, so pooled SD is 1 and the mean shift is 1.
  EXPECT_NEAR(cohens_d(std::vector<double>{2, 3, 4}, a), 1.0, 1e-12);
  // a = (0, 2): var 2; b = (0, 0): var 0; pooled = sqrt((1*2 + 1*0) / 2) = 1.
  EXPECT_NEAR(cohens_d(std::vector<double>{0, 2}, std::vector<double>{0, 0}), 1.0, 1e-12);
  const std::vector<double> b = {0.5, 2.5, 1.0, 4.0};
  EXPECT_NEAR(cohens_d(a, b), -cohens_d(b, a), 1e-12);
}

TEST(Cles, ExamplesAndConsistency) {
  const std::vector<double> a = {4, 5, 6};
  const std::vector<double> b = {1, 2, 3};
  EXPECT_DOUBLE_EQ(cles(a, a), 0.5);
  EXPECT_DOUBLE_EQ(cles(a, b), 1.0);
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(10), y(15);
    for (auto& v : x) v = std::round(rng.normal() * 2);
    for (auto& v : y) v = std::round(rng.normal() * 2);
    EXPECT_NEAR(cles(x, y), mann_whitney_u(x, y).u_statistic / 150.0, 1e-12);
    const auto e = effect_sizes(x, y);
    EXPECT_NEAR(e.cles, cles(x, y), 1e-12);
    EXPECT_NEAR(e.cohens_d, cohens_d(x, y), 1e-12);
  }
}

TEST(Bootstrap, DegenerateAndDeterministic) {
  const std::vector<double> c(20, 3.5);
  const auto ci = bootstrap_ci(c, mean, 0.95, 500, 1);
  EXPECT_DOUBLE_EQ(ci.lo, 3.5);
  EXPECT_DOUBLE_EQ(ci.hi, 3.5);
  Rng rng(5);
  std::vector<double> s(40);
  for (auto& v : s) v = rng.normal();
  const auto a = bootstrap_ci(s, mean, 0.95, 1000, 9);
  const auto b = bootstrap_ci(s, mean, 0.95, 1000, 9);
  EXPECT_EQ(a.lo, b.lo);
  EXPECT_EQ(a.hi, b.hi);
  EXPECT_LE(a.lo, a.hi);
  EXPECT_GE(a.lo, *std::min_element(s.begin(), s.end()));
  EXPECT_LE(a.hi, *std::max_element(s.begin(), s.end()));
  EXPECT_THROW(bootstrap_ci(std::vector<double>{1.0}, mean, 0.95, 10, 1), InputError);
}

TEST(Bootstrap, CoverageCalibration) {
  Rng rng(6);
  int covered = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(50);
    for (auto& v : s) v = rng.normal();
    const auto ci = bootstrap_ci(s, mean, 0.95, 1000, 100 + trial);
    covered += ci.lo <= 0.0 && 0.0 <= ci.hi ? 1 : 0;
  }
  EXPECT_GE(covered, 180);
}

TEST(Bonferroni, Threshold) {
  EXPECT_DOUBLE_EQ(bonferroni_threshold(0.001, 24), 0.001 / 24);
  EXPECT_NEAR(bonferroni_threshold(0.001, 24), 4.2e-5, 0.05e-5);
  EXPECT_EQ(bonferroni(std::vector<double>{0.01}, 0.05), std::vector<bool>{true});
  EXPECT_EQ(bonferroni(std::vector<double>{1, 1, 1}, 0.05), (std::vector<bool>{false, false, false}));
  EXPECT_EQ(bonferroni(std::vector<double>{0.01, 0.03}, 0.05), (std::vector<bool>{true, false}));
}

TEST(TrimmedMean, Examples) {
  const std::vector<double> s = {0, 1, 2, 100};
  EXPECT_DOUBLE_EQ(trimmed_mean(s, 0.0), 103.0 / 4.0);
  EXPECT_DOUBLE_EQ(trimmed_mean(s, 0.25), 1.5);
  Rng rng(7);
  std::vector<double> sym(10000);
  for (auto& v : sym) v = rng.normal();
  EXPECT_NEAR(trimmed_mean(sym, 0.1), mean(sym), 0.02);
}

TEST(Descriptive, MedianAndSd) {
  EXPECT_DOUBLE_EQ(median(std::vector<double>{3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(median(std::vector<double>{4, 1, 2, 3}), 2.5);
  EXPECT_DOUBLE_EQ(stddev(std::vector<double>{1.0}), 0.0);
  EXPECT_NEAR(stddev(std::vector<double>{1, 2, 3, 4}), std::sqrt(5.0 / 3.0), 1e-12);
}
