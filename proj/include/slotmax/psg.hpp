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

// Ground-set reduction over the pruned submodularity graph.
//
// The graph has an edge x -> y for every ordered pair of slots, weighted
//
//   W(x -> y) = I(y | x) - I(x | G \ {x})
//
// and the divergence of y from a probe set U is min_{x in U} W(x -> y). Each
// round samples probes, keeps them, and discards the remaining slots that
// diverge least. Only probe-incident weights are ever read, so the graph is
// never materialized (psg_edge_weights builds it densely for small checks).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "slotmax/corpus.hpp"
#include "slotmax/influence.hpp"
#include "slotmax/rng.hpp"
#include "slotmax/selection.hpp"

namespace slotmax {

struct PsgParams {
  double h = 8.0;    // probes per round = ceil(h * log2 n)
  double ell = 8.0;  // each round drops a (1 - 1/sqrt(ell)) fraction
  std::uint64_t seed = 0;

  void validate() const {
    if (!(h > 0.0)) throw std::invalid_argument("h must be positive");
    if (!(ell > 1.0)) throw std::invalid_argument("ell must exceed 1");
  }
  double removal_fraction() const { return 1.0 - 1.0 / std::sqrt(ell); }
};

struct PsgReduction {
  std::vector<SlotIndex> reduced;  // sorted: survivors plus every probe
  std::size_t rounds = 0;
  std::vector<std::size_t> removed_per_round;
  std::vector<std::vector<SlotIndex>> probes_per_round;
  std::size_t zero_removed = 0;
  std::size_t nonzero_count = 0;  // n, the size after the zero filter
};

/// min over probes u of I(d | u) - I(u | G \ {u}), where `ground_state` holds
/// the current ground set G (which must contain every probe).
inline double divergence(const ExposureModel& model,
                         const ResidualState& ground_state, SlotIndex d,
                         std::span<const SlotIndex> probes) {
  if (probes.empty()) throw std::invalid_argument("empty probe set");
  double best = std::numeric_limits<double>::infinity();
  for (SlotIndex u : probes) {
    if (u == d) throw std::invalid_argument("d must not be a probe");
    best = std::min(best, pair_conditional(model, d, u) -
                              ground_state.deletion_marginal(u));
  }
  return best;
}

/// divergence() for every candidate at once.
///
/// I(d | u) = I(d) - sum_{j exposed to both} p(d, j) p(u, j), so for each probe
/// only the candidates sharing a user with it need a correction; all others
/// sit at I(d) - I(u | G \ {u}). The shared sums come from walking the
/// user -> slot index out of each probe.
inline std::vector<double> divergences(const ExposureModel& model,
                                       const ResidualState& ground_state,
                                       std::span<const SlotIndex> candidates,
                                       std::span<const SlotIndex> probes) {
  if (probes.empty()) throw std::invalid_argument("empty probe set");
  std::vector<std::int64_t> position(model.slot_count(), -1);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    position[candidates[i]] = static_cast<std::int64_t>(i);
  }
  std::vector<double> deletion(probes.size());
  double max_deletion = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < probes.size(); ++p) {
    if (position[probes[p]] >= 0) {
      throw std::invalid_argument("a probe is also a candidate");
    }
    deletion[p] = ground_state.deletion_marginal(probes[p]);
    max_deletion = std::max(max_deletion, deletion[p]);
  }

  std::vector<double> result(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    result[i] = model.singleton_influence(candidates[i]) - max_deletion;
  }

  std::vector<double> shared(candidates.size(), 0.0);
  std::vector<char> seen(candidates.size(), 0);
  std::vector<std::size_t> touched;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    for (const Exposure& e : model.exposures(probes[p])) {
      for (const SlotExposure& se : model.user_exposures(e.user)) {
        const std::int64_t pos = position[se.slot];
        if (pos < 0) continue;
        const auto i = static_cast<std::size_t>(pos);
        if (!seen[i]) {
          seen[i] = 1;
          touched.push_back(i);
        }
        shared[i] += se.prob * e.prob;
      }
    }
    for (std::size_t i : touched) {
      const double value =
          model.singleton_influence(candidates[i]) - shared[i] - deletion[p];
      result[i] = std::min(result[i], value);
      shared[i] = 0.0;
      seen[i] = 0;
    }
    touched.clear();
  }
  return result;
}

/// Reduces `ground_set`:
///  1. drop slots with zero individual influence;
///  2. while more than h*log2(n) slots remain, move ceil(h*log2(n)) random
///     probes to the kept pool, score the rest by divergence against them
///     (with G = the remaining set at round start), and drop the
///     floor((1 - 1/sqrt(ell)) * |rest|) lowest scorers, at least one;
///  3. return survivors plus the kept pool.
/// n is fixed after step 1. Score ties drop the smaller slot index first.
inline PsgReduction prune(const ExposureModel& model,
                          std::span<const SlotIndex> ground_set,
                          const PsgParams& params) {
  params.validate();
  const auto ground = normalize_slot_set(model, ground_set);
  if (ground.empty()) throw std::invalid_argument("empty ground set");

  PsgReduction out;
  std::vector<SlotIndex> remaining;
  for (SlotIndex s : ground) {
    if (model.singleton_influence(s) > 0.0) remaining.push_back(s);
  }
  out.zero_removed = ground.size() - remaining.size();
  const std::size_t n = remaining.size();
  out.nonzero_count = n;

  std::vector<SlotIndex> kept;
  if (n >= 2) {
    const double threshold = params.h * std::log2(static_cast<double>(n));
    const auto probe_count =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(threshold)));
    const double fraction = params.removal_fraction();
    Rng rng(params.seed);

    while (static_cast<double>(remaining.size()) > threshold) {
      const ResidualState ground_state = state_over(model, remaining);

      std::vector<SlotIndex> shuffled = remaining;
      const std::size_t take = std::min(probe_count, shuffled.size());
      rng.sample_front(std::span<SlotIndex>(shuffled), take);
      std::vector<SlotIndex> probes(shuffled.begin(), shuffled.begin() + take);
      std::sort(probes.begin(), probes.end());
      kept.insert(kept.end(), probes.begin(), probes.end());

      std::vector<SlotIndex> rest;
      rest.reserve(remaining.size() - take);
      std::set_difference(remaining.begin(), remaining.end(), probes.begin(),
                          probes.end(), std::back_inserter(rest));
      out.probes_per_round.push_back(std::move(probes));
      ++out.rounds;

      if (rest.empty()) {
        out.removed_per_round.push_back(0);
        remaining.clear();
        break;
      }

      const auto scores =
          divergences(model, ground_state, rest, out.probes_per_round.back());
      std::size_t remove = static_cast<std::size_t>(
          std::floor(fraction * static_cast<double>(rest.size())));
      remove = std::clamp<std::size_t>(remove, 1, rest.size());

      std::vector<std::size_t> order(rest.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      // rest is sorted, so comparing positions breaks ties by slot index.
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) {
                         return scores[a] < scores[b];
                       });
      std::vector<char> drop(rest.size(), 0);
      for (std::size_t i = 0; i < remove; ++i) drop[order[i]] = 1;
      remaining.clear();
      for (std::size_t i = 0; i < rest.size(); ++i) {
        if (!drop[i]) remaining.push_back(rest[i]);
      }
      out.removed_per_round.push_back(remove);
    }
  }

  out.reduced = std::move(remaining);
  out.reduced.insert(out.reduced.end(), kept.begin(), kept.end());
  std::sort(out.reduced.begin(), out.reduced.end());
  return out;
}

/// Baseline: prune, then draw k of the survivors at random.
inline SelectionResult psg_random_k(const ExposureModel& model,
                                    std::span<const SlotIndex> ground_set,
                                    const PsgParams& params, std::size_t k,
                                    std::uint64_t seed) {
  detail::Stopwatch clock;
  const auto reduction = prune(model, ground_set, params);
  auto result = reduction.reduced.empty()
                     ? nothing_to_pick(k)
                     : random_k(model, reduction.reduced, k, seed);
  result.elapsed_ms = clock.elapsed_ms();
  return result;
}

/// Dense W(x -> y) matrix (row x, column y; diagonal zero) for debugging and
/// verification on small ground sets. Rows and columns follow the sorted set.
inline std::vector<std::vector<double>> psg_edge_weights(
    const ExposureModel& model, std::span<const SlotIndex> ground_set) {
  const auto ground = normalize_slot_set(model, ground_set);
  if (ground.size() > 200) {
    throw std::invalid_argument("dense graph limited to 200 slots");
  }
  const ResidualState state = state_over(model, ground);
  std::vector<std::vector<double>> weights(
      ground.size(), std::vector<double>(ground.size(), 0.0));
  for (std::size_t x = 0; x < ground.size(); ++x) {
    const double loss = state.deletion_marginal(ground[x]);
    for (std::size_t y = 0; y < ground.size(); ++y) {
      if (x == y) continue;
      weights[x][y] = pair_conditional(model, ground[y], ground[x]) - loss;
    }
  }
  return weights;
}

}  // namespace slotmax
