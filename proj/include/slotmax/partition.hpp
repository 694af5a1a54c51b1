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

// Influence-overlap clustering of slots (approximate theta-partition) and
// pruning of clusters whose influence falls below the mean.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "slotmax/corpus.hpp"
#include "slotmax/error.hpp"
#include "slotmax/influence.hpp"

namespace slotmax {

struct Cluster {
  std::uint32_t id = 0;
  std::vector<SlotIndex> members;  // sorted
  double influence = 0.0;          // I(members)
};

struct Partition {
  std::vector<Cluster> clusters;
  double theta = 0.0;
  std::size_t sweeps = 0;
  bool converged = false;
};

struct ClusterPruning {
  std::vector<Cluster> kept;
  double gamma = 0.0;
};

/// Sparse per-user residual products of one slot set: (user, r_u) for every
/// user the set reaches, with r_u = prod_{b in set} (1 - p(b, u)) < 1.
class InfluenceProfile {
 public:
  InfluenceProfile() = default;

  InfluenceProfile(const ExposureModel& model, std::span<const SlotIndex> slots) {
    for (SlotIndex s : slots) {
      InfluenceProfile single;
      for (const Exposure& e : model.exposures(s)) {
        single.entries_.emplace_back(e.user, 1.0 - e.prob);
      }
      *this = combine(*this, single);
    }
  }

  /// Profile of the union of two disjoint slot sets.
  static InfluenceProfile combine(const InfluenceProfile& a,
                                  const InfluenceProfile& b) {
    InfluenceProfile out;
    out.entries_.reserve(a.entries_.size() + b.entries_.size());
    auto i = a.entries_.begin();
    auto j = b.entries_.begin();
    while (i != a.entries_.end() || j != b.entries_.end()) {
      if (j == b.entries_.end() || (i != a.entries_.end() && i->first < j->first)) {
        out.entries_.push_back(*i++);
      } else if (i == a.entries_.end() || j->first < i->first) {
        out.entries_.push_back(*j++);
      } else {
        out.entries_.emplace_back(i->first, i->second * j->second);
        ++i;
        ++j;
      }
    }
    return out;
  }

  /// I(set) = sum_u (1 - r_u).
  double influence() const {
    double total = 0.0;
    for (const auto& [user, r] : entries_) total += 1.0 - r;
    return total;
  }

  /// sigma(A | B) = I(A) + I(B) - I(A u B) = sum over shared users of
  /// (1 - r_A)(1 - r_B).
  static double overlap(const InfluenceProfile& a, const InfluenceProfile& b) {
    double total = 0.0;
    auto i = a.entries_.begin();
    auto j = b.entries_.begin();
    while (i != a.entries_.end() && j != b.entries_.end()) {
      if (i->first < j->first) {
        ++i;
      } else if (j->first < i->first) {
        ++j;
      } else {
        total += (1.0 - i->second) * (1.0 - j->second);
        ++i;
        ++j;
      }
    }
    return total;
  }

  std::span<const std::pair<UserIndex, double>> entries() const {
    return entries_;
  }

 private:
  std::vector<std::pair<UserIndex, double>> entries_;
};

namespace detail {

inline void check_disjoint(std::span<const SlotIndex> a,
                           std::span<const SlotIndex> b) {
  std::vector<SlotIndex> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(common));
  if (!common.empty()) {
    throw std::invalid_argument("slot sets overlap at slot " +
                                std::to_string(common.front()));
  }
}

inline double ratio_from(double overlap, double influence) {
  if (!(influence > 0.0)) return 0.0;
  return std::clamp(overlap / influence, 0.0, 1.0);
}

}  // namespace detail

/// sigma(A | B) = I(A) + I(B) - I(A u B) for disjoint A, B.
inline double influence_overlap(const ExposureModel& model,
                                std::span<const SlotIndex> a,
                                std::span<const SlotIndex> b) {
  const auto sa = normalize_slot_set(model, a);
  const auto sb = normalize_slot_set(model, b);
  detail::check_disjoint(sa, sb);
  return InfluenceProfile::overlap(InfluenceProfile(model, sa),
                                   InfluenceProfile(model, sb));
}

/// Whole-cluster overlap ratio with respect to `a`: sigma(A | B) / I(A),
/// or 0 when I(A) = 0. This is the S_x = K_x member of the subset family
/// the exact ratio maximizes over.
inline double overlap_ratio(const ExposureModel& model, const Cluster& a,
                            const Cluster& b) {
  const auto sa = normalize_slot_set(model, a.members);
  const auto sb = normalize_slot_set(model, b.members);
  detail::check_disjoint(sa, sb);
  const InfluenceProfile pa(model, sa);
  return detail::ratio_from(InfluenceProfile::overlap(pa, InfluenceProfile(model, sb)),
                            pa.influence());
}

/// Approximate theta-partition by pairwise merging.
///
/// Starts from singleton clusters (ids follow the sorted ground set) and
/// sweeps pairs (i, j), i < j, in id order. A pair merges into the smaller id
/// when max(ratio(i, j), ratio(j, i)) >= theta and the clusters overlap at
/// all; the merged cluster keeps testing later ids within the same sweep.
/// Stops after a sweep with no merge or after `max_sweeps` sweeps. Output
/// clusters are renumbered 0.. in order of their smallest member.
///
/// Pairs that share no user have zero overlap and can never merge, so only
/// clusters reachable through the user -> slot index are tested.
inline Partition theta_partition(const ExposureModel& model,
                                 std::span<const SlotIndex> ground_set,
                                 double theta, std::size_t max_sweeps = 50) {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw std::invalid_argument("theta must lie in [0, 1]");
  }
  if (max_sweeps < 1) throw std::invalid_argument("max_sweeps must be >= 1");
  const auto ground = normalize_slot_set(model, ground_set);

  constexpr std::uint32_t kNone = UINT32_MAX;
  struct Working {
    std::vector<SlotIndex> members;
    InfluenceProfile profile;
    double influence = 0.0;
    bool alive = true;
  };
  std::vector<Working> clusters(ground.size());
  std::vector<std::uint32_t> cluster_of(model.slot_count(), kNone);
  for (std::uint32_t c = 0; c < ground.size(); ++c) {
    const SlotIndex s = ground[c];
    clusters[c].members = {s};
    clusters[c].profile = InfluenceProfile(model, clusters[c].members);
    clusters[c].influence = clusters[c].profile.influence();
    cluster_of[s] = c;
  }

  // Alive clusters with id > floor sharing a user with `profile`.
  const auto neighbours = [&](const InfluenceProfile& profile,
                              std::uint32_t floor, std::uint32_t self,
                              std::set<std::uint32_t>& into) {
    for (const auto& [user, r] : profile.entries()) {
      for (const SlotExposure& se : model.user_exposures(user)) {
        const std::uint32_t c = cluster_of[se.slot];
        if (c != kNone && c > floor && c != self && clusters[c].alive) {
          into.insert(c);
        }
      }
    }
  };

  Partition out;
  out.theta = theta;
  while (out.sweeps < max_sweeps) {
    ++out.sweeps;
    bool merged_any = false;
    for (std::uint32_t i = 0; i < clusters.size(); ++i) {
      if (!clusters[i].alive) continue;
      std::set<std::uint32_t> candidates;
      neighbours(clusters[i].profile, i, i, candidates);
      while (!candidates.empty()) {
        const std::uint32_t j = *candidates.begin();
        candidates.erase(candidates.begin());
        if (!clusters[j].alive) continue;
        Working& a = clusters[i];
        Working& b = clusters[j];
        const double shared = InfluenceProfile::overlap(a.profile, b.profile);
        const double ratio = std::max(detail::ratio_from(shared, a.influence),
                                      detail::ratio_from(shared, b.influence));
        if (!(ratio >= theta && ratio > 0.0)) continue;

        // Clusters reached only through b's users become candidates too.
        neighbours(b.profile, j, i, candidates);
        std::vector<SlotIndex> members;
        std::merge(a.members.begin(), a.members.end(), b.members.begin(),
                   b.members.end(), std::back_inserter(members));
        for (SlotIndex s : b.members) cluster_of[s] = i;
        a.members = std::move(members);
        a.profile = InfluenceProfile::combine(a.profile, b.profile);
        a.influence = a.profile.influence();
        b.alive = false;
        b.members.clear();
        b.profile = InfluenceProfile();
        merged_any = true;
      }
    }
    if (!merged_any) {
      out.converged = true;
      break;
    }
  }

  for (auto& c : clusters) {
    if (!c.alive) continue;
    out.clusters.push_back(Cluster{static_cast<std::uint32_t>(out.clusters.size()),
                                   std::move(c.members), c.influence});
  }
  return out;
}

/// Drops every cluster whose influence is strictly below the mean cluster
/// influence gamma. The comparison allows a 1e-12 relative slack so that
/// clusters equal to the mean up to rounding are kept.
inline ClusterPruning prune_clusters(const Partition& partition) {
  if (partition.clusters.empty()) {
    throw std::invalid_argument("cannot prune an empty partition");
  }
  double sum = 0.0;
  for (const auto& c : partition.clusters) sum += c.influence;
  ClusterPruning out;
  out.gamma = sum / static_cast<double>(partition.clusters.size());
  const double cutoff = out.gamma - 1e-12 * std::max(1.0, std::abs(out.gamma));
  for (const auto& c : partition.clusters) {
    if (c.influence >= cutoff) out.kept.push_back(c);
  }
  return out;
}

/// Disjoint union of the kept clusters' members, sorted.
inline std::vector<SlotIndex> merge_members(std::span<const Cluster> kept) {
  std::vector<SlotIndex> out;
  for (const auto& c : kept) {
    out.insert(out.end(), c.members.begin(), c.members.end());
  }
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) {
    throw InvariantError("kept clusters share a slot");
  }
  return out;
}

/// Partition dump: `cluster_id,slot_index` rows.
inline void write_partition_members(std::ostream& out,
                                    const Partition& partition) {
  out << "cluster_id,slot_index\n";
  for (const auto& c : partition.clusters) {
    for (SlotIndex s : c.members) out << c.id << ',' << s << '\n';
  }
}

/// Partition summary: `cluster_id,size,influence` rows.
inline void write_partition_summary(std::ostream& out,
                                    const Partition& partition) {
  out << "cluster_id,size,influence\n";
  for (const auto& c : partition.clusters) {
    out << c.id << ',' << c.members.size() << ','
        << detail::format_double(c.influence) << '\n';
  }
}

}  // namespace slotmax
