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

// The influence function
//
//   I(C) = sum_u [ 1 - prod_{b in C} (1 - p(b, u)) ]
//
// evaluated two ways: directly from the formula (naive_influence, the
// reference), and incrementally through per-user residual products
// r_u = prod_{b in C} (1 - p(b, u)) held by ResidualState.

#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "slotmax/corpus.hpp"

namespace slotmax {

namespace detail {

inline void check_slot(const ExposureModel& model, SlotIndex slot) {
  if (!model.valid_slot(slot)) {
    throw std::out_of_range("slot index " + std::to_string(slot) +
                            " out of range (" +
                            std::to_string(model.slot_count()) + " slots)");
  }
}

}  // namespace detail

/// Sorted, duplicate-free copy of `slots`, with every index validated.
inline std::vector<SlotIndex> normalize_slot_set(const ExposureModel& model,
                                                 std::span<const SlotIndex> slots) {
  std::vector<SlotIndex> out(slots.begin(), slots.end());
  for (SlotIndex s : out) detail::check_slot(model, s);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Evaluates the influence formula term by term, with no incremental state.
/// This is the reference every other evaluator is checked against.
inline double naive_influence(const ExposureModel& model,
                              std::span<const SlotIndex> slots) {
  const auto set = normalize_slot_set(model, slots);
  double total = 0.0;
  for (UserIndex u = 0; u < model.user_count(); ++u) {
    double product = 1.0;
    for (SlotIndex b : set) product *= 1.0 - model.probability(b, u);
    total += 1.0 - product;
  }
  return total;
}

/// I(d | {u}) = I({d, u}) - I({u}): d's influence once u is already shown.
inline double pair_conditional(const ExposureModel& model, SlotIndex d,
                               SlotIndex u) {
  detail::check_slot(model, d);
  detail::check_slot(model, u);
  if (d == u) throw std::invalid_argument("pair_conditional needs d != u");
  const auto ed = model.exposures(d);
  const auto eu = model.exposures(u);
  double total = 0.0;
  auto it = eu.begin();
  for (const Exposure& e : ed) {
    while (it != eu.end() && it->user < e.user) ++it;
    const double other = (it != eu.end() && it->user == e.user) ? it->prob : 0.0;
    total += e.prob * (1.0 - other);
  }
  return total;
}

/// I(u | G \ {u}) recomputed without division: for each user exposed to u,
/// p(u, j) times the residual product over G skipping u.
inline double deletion_marginal_direct(const ExposureModel& model,
                                       std::span<const SlotIndex> ground,
                                       SlotIndex u) {
  const auto set = normalize_slot_set(model, ground);
  if (!std::binary_search(set.begin(), set.end(), u)) {
    throw std::invalid_argument("slot " + std::to_string(u) +
                                " is not in the ground set");
  }
  double total = 0.0;
  for (const Exposure& e : model.exposures(u)) {
    double rest = 1.0;
    for (SlotIndex b : set) {
      if (b != u) rest *= 1.0 - model.probability(b, e.user);
    }
    total += e.prob * rest;
  }
  return total;
}

/// Running selection with per-user residual products.
///
/// Gain queries are const and may run concurrently between commits; commit
/// needs exclusive access. Residuals stay strictly positive because
/// probabilities are capped at kMaxProbability (barring underflow after very
/// many near-certain exposures of one user).
class ResidualState {
 public:
  explicit ResidualState(const ExposureModel& model)
      : model_(&model),
        in_selected_(model.slot_count(), 0),
        residual_(model.user_count(), 1.0) {}

  const ExposureModel& model() const { return *model_; }
  std::span<const SlotIndex> selected() const { return selected_; }
  std::span<const double> residuals() const { return residual_; }
  double total_influence() const { return total_; }

  bool contains(SlotIndex slot) const {
    detail::check_slot(*model_, slot);
    return in_selected_[slot] != 0;
  }

  /// I(C + b) - I(C) = sum over users exposed to b of p(b, u) * r_u.
  double marginal_gain(SlotIndex b) const {
    if (contains(b)) {
      throw std::invalid_argument("slot " + std::to_string(b) +
                                  " is already selected");
    }
    return gain_unchecked(b);
  }

  /// Adds b to the selection and returns its marginal gain.
  double commit(SlotIndex b) {
    const double gain = marginal_gain(b);
    for (const Exposure& e : model_->exposures(b)) {
      residual_[e.user] *= 1.0 - e.prob;
    }
    in_selected_[b] = 1;
    selected_.push_back(b);
    total_ += gain;
    return gain;
  }

  /// I(u | C \ {u}) for a selected u: sum of p(u, j) * r_j / (1 - p(u, j)).
  double deletion_marginal(SlotIndex u) const {
    if (!contains(u)) {
      throw std::invalid_argument("slot " + std::to_string(u) +
                                  " is not in the selection");
    }
    double total = 0.0;
    for (const Exposure& e : model_->exposures(u)) {
      total += e.prob * residual_[e.user] / (1.0 - e.prob);
    }
    return total;
  }

  // For hot loops whose caller already guarantees b is valid and unselected.
  double gain_unchecked(SlotIndex b) const {
    double gain = 0.0;
    for (const Exposure& e : model_->exposures(b)) {
      gain += e.prob * residual_[e.user];
    }
    return gain;
  }

 private:
  const ExposureModel* model_;
  std::vector<SlotIndex> selected_;
  std::vector<char> in_selected_;
  std::vector<double> residual_;
  double total_ = 0.0;
};

/// Empty selection: every residual 1, total influence 0.
inline ResidualState init_state(const ExposureModel& model) {
  return ResidualState(model);
}

/// State with every slot of `ground` committed, e.g. for deletion marginals.
inline ResidualState state_over(const ExposureModel& model,
                                std::span<const SlotIndex> ground) {
  ResidualState state(model);
  for (SlotIndex s : normalize_slot_set(model, ground)) state.commit(s);
  return state;
}

}  // namespace slotmax
