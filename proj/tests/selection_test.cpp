#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <vector>

#include "slotmax/pipelines.hpp"
#include "slotmax/selection.hpp"
#include "support/oracles.hpp"

namespace slotmax {
namespace {

using testing::dense_influence;
using testing::random_micro;
using testing::two_slot_model;

std::vector<SlotIndex> iota_set(std::size_t n) {
  std::vector<SlotIndex> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

void expect_consistent(const testing::Micro& m, const SelectionResult& r,
                       std::size_t k, std::size_t n) {
  ASSERT_EQ(r.chosen.size(), std::min(k, n));
  EXPECT_EQ(r.short_result, k > n);
  EXPECT_EQ(std::set<SlotIndex>(r.chosen.begin(), r.chosen.end()).size(),
            r.chosen.size());
  EXPECT_NEAR(r.influence, dense_influence(m.p, r.chosen), 1e-9);
  ASSERT_EQ(r.per_step_gains.size(), r.chosen.size());
  const double sum = std::accumulate(r.per_step_gains.begin(), r.per_step_gains.end(), 0.0);
  EXPECT_NEAR(sum, r.influence, 1e-9);
}

TEST(Greedy, TwoSlotExample) {
  const auto m = two_slot_model();
  const auto ground = iota_set(2);
  const auto r = greedy(m, ground, 1);
  ASSERT_EQ(r.chosen, std::vector<SlotIndex>{1});
  EXPECT_NEAR(r.influence, 0.9, 1e-12);
  const auto all = greedy(m, ground, 2);
  EXPECT_NEAR(all.influence, 1.15, 1e-12);
  EXPECT_FALSE(all.short_result);
}

TEST(Greedy, ShortResultAndErrors) {
  const auto m = two_slot_model();
  const auto ground = iota_set(2);
  const auto r = greedy(m, ground, 5);
  EXPECT_TRUE(r.short_result);
  EXPECT_EQ(r.chosen.size(), 2u);
  EXPECT_THROW(greedy(m, ground, 0), std::invalid_argument);
  EXPECT_THROW(greedy(m, std::vector<SlotIndex>{}, 1), std::invalid_argument);
  EXPECT_THROW(greedy(m, std::vector<SlotIndex>{9}, 1), std::out_of_range);
}

TEST(Greedy, TiesGoToSmallestIndex) {
  const ExposureModel m(3, {{{0, 0.5}}, {{1, 0.5}}, {{2, 0.5}}, {}});
  const auto r = greedy(m, iota_set(4), 4);
  EXPECT_EQ(r.chosen, (std::vector<SlotIndex>{0, 1, 2, 3}));
  EXPECT_TRUE(r.stalled);
}

TEST(Greedy, ZeroUsersStalls) {
  const ExposureModel m(0, {{}, {}, {}});
  const auto r = greedy(m, iota_set(3), 2);
  EXPECT_TRUE(r.stalled);
  EXPECT_EQ(r.influence, 0.0);
}

TEST(Greedy, Properties) {
  Rng rng(9);
  for (int trial = 0; trial < 500; ++trial) {
    const auto m = random_micro(rng);
    const std::size_t n = m.p.size();
    const std::size_t k = 1 + rng.below(n + 1);
    const auto r = greedy(m.model, iota_set(n), k);
    expect_consistent(m, r, k, n);
    for (std::size_t i = 1; i < r.per_step_gains.size(); ++i) {
      EXPECT_LE(r.per_step_gains[i], r.per_step_gains[i - 1] + 1e-12);
    }
    EXPECT_EQ(r.chosen.front(), top_k(m.model, iota_set(n), 1).chosen.front());
    if (k >= n) {
      EXPECT_NEAR(r.influence, dense_influence(m.p, iota_set(n)), 1e-9);
    }
  }
}

TEST(Greedy, ApproximationBound) {
  Rng rng(31);
  const double factor = 1.0 - 1.0 / std::numbers::e;
  for (int trial = 0; trial < 300; ++trial) {
    const auto m = random_micro(rng);
    const std::size_t n = m.p.size();
    const std::size_t k = 1 + rng.below(std::min<std::size_t>(3, n));
    const double opt = testing::dense_opt(m.p, k);
    const auto g = greedy(m.model, iota_set(n), k);
    const auto bf = brute_force_opt(m.model, iota_set(n), k);
    ASSERT_GE(g.influence, factor * opt - 1e-9);
    ASSERT_NEAR(bf.influence, opt, 1e-9);
    ASSERT_GE(bf.influence, g.influence - 1e-9);
  }
}

TEST(RandomK, DeterministicAndSized) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = random_micro(rng);
    const std::size_t n = m.p.size();
    const std::size_t k = 1 + rng.below(n + 2);
    const auto a = random_k(m.model, iota_set(n), k, 99);
    const auto b = random_k(m.model, iota_set(n), k, 99);
    EXPECT_EQ(a.chosen, b.chosen);
    expect_consistent(m, a, k, n);
    if (k >= n) {
      auto sorted = a.chosen;
      std::sort(sorted.begin(), sorted.end());
      EXPECT_EQ(sorted, iota_set(n));
    }
  }
}

TEST(RandomK, RoughlyUniform) {
  const ExposureModel m(1, std::vector<std::vector<Exposure>>(10));
  std::vector<int> hits(10, 0);
  for (std::uint64_t seed = 0; seed < 5000; ++seed) {
    for (SlotIndex s : random_k(m, iota_set(10), 3, seed).chosen) ++hits[s];
  }
  for (int h : hits) EXPECT_NEAR(h, 1500, 150);
}

TEST(TopK, Examples) {
  const auto m = two_slot_model();
  EXPECT_EQ(top_k(m, iota_set(2), 2).chosen, (std::vector<SlotIndex>{1, 0}));
  const ExposureModel zero(1, std::vector<std::vector<Exposure>>(5));
  EXPECT_EQ(top_k(zero, iota_set(5), 3).chosen, (std::vector<SlotIndex>{0, 1, 2}));
}

TEST(BruteForce, Examples) {
  const auto m = two_slot_model();
  const auto r = brute_force_opt(m, iota_set(2), 1);
  EXPECT_EQ(r.chosen, std::vector<SlotIndex>{1});
  EXPECT_NEAR(r.influence, 0.9, 1e-12);
  EXPECT_EQ(brute_force_opt(m, iota_set(2), 2).chosen, (std::vector<SlotIndex>{0, 1}));
  // Ties: lexicographically smallest subset.
  const ExposureModel tie(2, {{{0, 0.5}}, {{1, 0.5}}, {{0, 0.5}}});
  EXPECT_EQ(brute_force_opt(tie, iota_set(3), 1).chosen, std::vector<SlotIndex>{0});
}

TEST(BruteForce, Guard) {
  const ExposureModel big(1, std::vector<std::vector<Exposure>>(60));
  EXPECT_THROW(brute_force_opt(big, iota_set(60), 5), ValidationError);
  EXPECT_EQ(binomial_capped(60, 5, kBruteForceLimit), kBruteForceLimit + 1);
  EXPECT_EQ(binomial_capped(12, 3, kBruteForceLimit), 220u);
  EXPECT_EQ(binomial_capped(20, 10, kBruteForceLimit), 184756u);
  EXPECT_EQ(binomial_capped(3, 5, kBruteForceLimit), 0u);
}

TEST(MaxCoverage, CountsRecords) {
  // Billboard a is passed by three records, billboard c by one.
  const std::vector<Billboard> b{{"a", 0, 0, 1, 1}, {"c", 1, 1, 9, 1}};
  const std::vector<TrajectoryRecord> t{
      {"u1", 0, 0, 0, 5}, {"u1", 0, 0, 6, 8}, {"u2", 0, 0, 1, 2}, {"u3", 1, 1, 0, 9}};
  const auto slots = enumerate_slots(b, 0, 10, 10);
  const auto model = build_exposure_model(b, t, slots, 50);
  const auto r = max_coverage(model, t, iota_set(2), 1);
  EXPECT_EQ(r.chosen, std::vector<SlotIndex>{0});
  EXPECT_NEAR(r.influence, naive_influence(model, r.chosen), 1e-12);
  // top_k prefers the bigger panel.
  EXPECT_EQ(top_k(model, iota_set(2), 1).chosen, std::vector<SlotIndex>{1});

  const std::vector<TrajectoryRecord> none;
  const auto zero = max_coverage(model, none, iota_set(2), 2);
  EXPECT_EQ(zero.chosen, (std::vector<SlotIndex>{0, 1}));
}

}  // namespace
}  // namespace slotmax
