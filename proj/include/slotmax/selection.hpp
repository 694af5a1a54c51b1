// Copyright 2026 The slotmax Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "slotmax/corpus.hpp"
#include "slotmax/error.hpp"
#include "slotmax/influence.hpp"
#include "slotmax/rng.hpp"

namespace slotmax {

struct SelectionResult {
  std::vector<SlotIndex> chosen;
  double influence = 0.0;
  // Marginal gain of each pick, in pick order.
  std::vector<double> per_step_gains;
  double elapsed_ms = 0.0;
  // k exceeded the ground set, so everything was taken.
  bool short_result = false;
  // Some pick added nothing (every remaining candidate had zero gain).
  bool stalled = false;
};

/// What a selector returns when a reduction left no candidates.
inline SelectionResult nothing_to_pick(std::size_t k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  SelectionResult empty;
  empty.short_result = true;
  empty.stalled = true;
  return empty;
}

/// Exhaustive search refuses instances with more subsets than this.
inline constexpr std::uint64_t kBruteForceLimit = 1000000;

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline std::vector<SlotIndex> checked_ground_set(
    const ExposureModel& model, std::span<const SlotIndex> ground_set,
    std::size_t k) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  auto set = normalize_slot_set(model, ground_set);
  if (set.empty()) throw std::invalid_argument("empty ground set");
  return set;
}

// Commits `order` in sequence and records the gains.
inline SelectionResult score_in_order(const ExposureModel& model,
                                      std::vector<SlotIndex> order,
                                      bool short_result) {
  SelectionResult result;
  ResidualState state(model);
  for (SlotIndex s : order) {
    const double gain = state.commit(s);
    result.per_step_gains.push_back(gain);
    if (gain <= 0.0) result.stalled = true;
  }
  result.chosen = std::move(order);
  result.influence = state.total_influence();
  result.short_result = short_result;
  return result;
}

// First k of `ground` after a stable sort by descending score; ties keep the
// smaller slot index first.
template <typename Score>
std::vector<SlotIndex> top_by_score(std::vector<SlotIndex> ground,
                                    std::size_t k, Score&& score) {
  std::stable_sort(ground.begin(), ground.end(),
                   [&](SlotIndex a, SlotIndex b) { return score(a) > score(b); });
  ground.resize(std::min(k, ground.size()));
  return ground;
}

}  // namespace detail

/// Incremental greedy: k rounds, each committing the candidate with the
/// largest marginal gain (ties to the smallest slot index).
inline SelectionResult greedy(const ExposureModel& model,
                              std::span<const SlotIndex> ground_set,
                              std::size_t k) {
  const auto ground = detail::checked_ground_set(model, ground_set, k);
  detail::Stopwatch clock;
  SelectionResult result;
  result.short_result = k > ground.size();
  const std::size_t rounds = std::min(k, ground.size());

  ResidualState state(model);
  std::vector<char> taken(ground.size(), 0);
  for (std::size_t round = 0; round < rounds; ++round) {
    std::size_t best = ground.size();
    double best_gain = -1.0;
    for (std::size_t i = 0; i < ground.size(); ++i) {
      if (taken[i]) continue;
      const double gain = state.gain_unchecked(ground[i]);
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    taken[best] = 1;
    const double gain = state.commit(ground[best]);
    result.chosen.push_back(ground[best]);
    result.per_step_gains.push_back(gain);
    if (gain <= 0.0) result.stalled = true;
  }
  result.influence = state.total_influence();
  result.elapsed_ms = clock.elapsed_ms();
  return result;
}

/// k slots drawn uniformly without replacement. The draw runs over the sorted
/// ground set, so the result depends only on the set and the seed.
inline SelectionResult random_k(const ExposureModel& model,
                                std::span<const SlotIndex> ground_set,
                                std::size_t k, std::uint64_t seed) {
  auto ground = detail::checked_ground_set(model, ground_set, k);
  detail::Stopwatch clock;
  const bool short_result = k > ground.size();
  const std::size_t take = std::min(k, ground.size());
  Rng rng(seed);
  rng.sample_front(std::span<SlotIndex>(ground), take);
  ground.resize(take);
  auto result = detail::score_in_order(model, std::move(ground), short_result);
  result.elapsed_ms = clock.elapsed_ms();
  return result;
}

/// The k slots with the largest individual influence.
inline SelectionResult top_k(const ExposureModel& model,
                             std::span<const SlotIndex> ground_set,
                             std::size_t k) {
  auto ground = detail::checked_ground_set(model, ground_set, k);
  detail::Stopwatch clock;
  const bool short_result = k > ground.size();
  auto order = detail::top_by_score(std::move(ground), k, [&](SlotIndex s) {
    return model.singleton_influence(s);
  });
  auto result = detail::score_in_order(model, std::move(order), short_result);
  result.elapsed_ms = clock.elapsed_ms();
  return result;
}

/// The k slots covering the most trajectory records (probabilities ignored);
/// the reported influence is still the influence function of the pick.
inline SelectionResult max_coverage(const ExposureModel& model,
                                    std::span<const TrajectoryRecord> trajectories,
                                    std::span<const SlotIndex> ground_set,
                                    std::size_t k) {
  auto ground = detail::checked_ground_set(model, ground_set, k);
  detail::Stopwatch clock;
  const bool short_result = k > ground.size();
  const auto counts = coverage_counts(model, trajectories);
  auto order = detail::top_by_score(std::move(ground), k,
                                    [&](SlotIndex s) { return counts[s]; });
  auto result = detail::score_in_order(model, std::move(order), short_result);
  result.elapsed_ms = clock.elapsed_ms();
  return result;
}

/// C(n, k), saturating at limit + 1.
inline std::uint64_t binomial_capped(std::uint64_t n, std::uint64_t k,
                                     std::uint64_t limit) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t value = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    // value * (n - k + i) / i stays integral at every step.
    const unsigned __int128 next =
        static_cast<unsigned __int128>(value) * (n - k + i) / i;
    if (next > limit) return limit + 1;
    value = static_cast<std::uint64_t>(next);
  }
  return value;
}

/// Exact maximizer over all k-subsets, scored with naive_influence. Among
/// ties the lexicographically smallest subset wins.
inline SelectionResult brute_force_opt(const ExposureModel& model,
                                       std::span<const SlotIndex> ground_set,
                                       std::size_t k) {
  const auto ground = detail::checked_ground_set(model, ground_set, k);
  const std::size_t n = ground.size();
  const std::size_t take = std::min(k, n);
  if (binomial_capped(n, take, kBruteForceLimit) > kBruteForceLimit) {
    throw ValidationError(
        "exhaustive search over C(" + std::to_string(n) + ", " +
        std::to_string(take) + ") subsets exceeds the limit of " +
        std::to_string(kBruteForceLimit) +
        "; verify on a smaller ground set or by sampled subsets instead");
  }
  detail::Stopwatch clock;

  std::vector<std::size_t> pick(take);
  std::iota(pick.begin(), pick.end(), 0);
  std::vector<SlotIndex> subset(take);
  std::vector<SlotIndex> best;
  double best_value = -1.0;
  while (true) {
    for (std::size_t i = 0; i < take; ++i) subset[i] = ground[pick[i]];
    const double value = naive_influence(model, subset);
    if (value > best_value + 1e-12) {
      best_value = value;
      best = subset;
    }
    // Next combination in lexicographic order.
    std::size_t i = take;
    while (i > 0 && pick[i - 1] == n - take + i - 1) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t j = i; j < take; ++j) pick[j] = pick[j - 1] + 1;
  }

  auto result = detail::score_in_order(model, std::move(best), k > n);
  result.elapsed_ms = clock.elapsed_ms();
  return result;
}

}  // namespace slotmax
