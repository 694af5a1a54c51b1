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

// Billboard and trajectory tables, slot enumeration, and the sparse
// slot -> (user, probability) exposure model every selector reads.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "slotmax/error.hpp"

namespace slotmax {

using SlotIndex = std::uint32_t;
using UserIndex = std::uint32_t;
using Minutes = std::int64_t;

inline constexpr double kEarthRadiusM = 6371000.0;

/// Probabilities are capped just below one so that every residual factor
/// (1 - p) stays strictly positive.
inline constexpr double kMaxProbability = 1.0 - 1e-12;

inline constexpr std::string_view kBillboardHeader =
    "billboard_id,lat,lon,panel_size,cost";
inline constexpr std::string_view kTrajectoryHeader =
    "user_id,lat,lon,t_start,t_end";

struct Billboard {
  std::string id;
  double latitude = 0.0;
  double longitude = 0.0;
  double panel_size = 0.0;
  // Retained for completeness; no selector reads it.
  double cost = 0.0;

  friend bool operator==(const Billboard&, const Billboard&) = default;
};

struct TrajectoryRecord {
  std::string user_id;
  double latitude = 0.0;
  double longitude = 0.0;
  Minutes t_start = 0;
  Minutes t_end = 0;

  friend bool operator==(const TrajectoryRecord&,
                         const TrajectoryRecord&) = default;
};

/// One billboard over one closed window [window_start, window_end].
struct Slot {
  SlotIndex slot_index = 0;
  std::string billboard_id;
  Minutes window_start = 0;
  Minutes window_end = 0;

  friend bool operator==(const Slot&, const Slot&) = default;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

template <typename T>
T parse_number(std::string_view field, std::string_view column,
               std::size_t line) {
  T value{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw ParseError("non-numeric " + std::string(column) + " '" +
                         std::string(field) + "'",
                     line);
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) {
      throw ParseError("non-finite " + std::string(column), line);
    }
  }
  return value;
}

inline std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

inline void check_coordinates(double lat, double lon, std::size_t line) {
  if (lat < -90.0 || lat > 90.0) {
    throw ValidationError("line " + std::to_string(line) +
                          ": latitude out of range [-90, 90]");
  }
  if (lon < -180.0 || lon > 180.0) {
    throw ValidationError("line " + std::to_string(line) +
                          ": longitude out of range [-180, 180]");
  }
}

// Yields (line_number, content) for non-empty data lines after checking the
// header. CR before LF is tolerated.
template <typename RowFn>
void for_each_row(std::istream& in, std::string_view header, RowFn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!saw_header) {
      if (line != header) {
        throw ParseError("expected header '" + std::string(header) + "'",
                         line_no);
      }
      saw_header = true;
      continue;
    }
    if (line.empty()) continue;
    fn(line_no, std::string_view(line));
  }
  if (!saw_header) throw ParseError("missing header", 1);
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return in;
}

}  // namespace detail

inline std::vector<Billboard> parse_billboards(std::istream& in) {
  std::vector<Billboard> out;
  std::unordered_set<std::string> seen;
  detail::for_each_row(in, kBillboardHeader, [&](std::size_t line_no,
                                                 std::string_view line) {
    const auto f = detail::split_fields(line);
    if (f.size() != 5) {
      throw ParseError("expected 5 columns, found " + std::to_string(f.size()),
                       line_no);
    }
    Billboard b;
    b.id = std::string(f[0]);
    if (b.id.empty()) throw ParseError("empty billboard_id", line_no);
    b.latitude = detail::parse_number<double>(f[1], "lat", line_no);
    b.longitude = detail::parse_number<double>(f[2], "lon", line_no);
    b.panel_size = detail::parse_number<double>(f[3], "panel_size", line_no);
    b.cost = detail::parse_number<double>(f[4], "cost", line_no);
    detail::check_coordinates(b.latitude, b.longitude, line_no);
    if (!(b.panel_size > 0.0)) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": panel_size must be positive");
    }
    if (b.cost < 0.0) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": cost must be non-negative");
    }
    if (!seen.insert(b.id).second) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": duplicate billboard_id '" + b.id + "'");
    }
    out.push_back(std::move(b));
  });
  return out;
}

inline std::vector<Billboard> parse_billboards(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_billboards(in);
}

inline std::vector<TrajectoryRecord> parse_trajectories(std::istream& in) {
  std::vector<TrajectoryRecord> out;
  detail::for_each_row(in, kTrajectoryHeader, [&](std::size_t line_no,
                                                  std::string_view line) {
    const auto f = detail::split_fields(line);
    if (f.size() != 5) {
      throw ParseError("expected 5 columns, found " + std::to_string(f.size()),
                       line_no);
    }
    TrajectoryRecord r;
    r.user_id = std::string(f[0]);
    if (r.user_id.empty()) throw ParseError("empty user_id", line_no);
    r.latitude = detail::parse_number<double>(f[1], "lat", line_no);
    r.longitude = detail::parse_number<double>(f[2], "lon", line_no);
    r.t_start = detail::parse_number<Minutes>(f[3], "t_start", line_no);
    r.t_end = detail::parse_number<Minutes>(f[4], "t_end", line_no);
    detail::check_coordinates(r.latitude, r.longitude, line_no);
    if (r.t_start > r.t_end) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": t_start exceeds t_end");
    }
    out.push_back(std::move(r));
  });
  return out;
}

inline std::vector<TrajectoryRecord> parse_trajectories(
    const std::string& path) {
  auto in = detail::open_input(path);
  return parse_trajectories(in);
}

// Doubles are written in shortest round-trip form, so write -> parse is exact.
inline void write_billboards(std::ostream& out,
                             std::span<const Billboard> billboards) {
  out << kBillboardHeader << '\n';
  for (const auto& b : billboards) {
    out << b.id << ',' << detail::format_double(b.latitude) << ','
        << detail::format_double(b.longitude) << ','
        << detail::format_double(b.panel_size) << ','
        << detail::format_double(b.cost) << '\n';
  }
}

inline void write_trajectories(std::ostream& out,
                               std::span<const TrajectoryRecord> records) {
  out << kTrajectoryHeader << '\n';
  for (const auto& r : records) {
    out << r.user_id << ',' << detail::format_double(r.latitude) << ','
        << detail::format_double(r.longitude) << ',' << r.t_start << ','
        << r.t_end << '\n';
  }
}

/// Tiles [t1, t2] with windows of length `delta` for every billboard.
/// Slots are ordered by (billboard, window_start) and indexed densely, so
/// billboard i window w has index i * (t2 - t1) / delta + w.
inline std::vector<Slot> enumerate_slots(std::span<const Billboard> billboards,
                                         Minutes t1, Minutes t2,
                                         Minutes delta) {
  if (delta <= 0) throw ValidationError("slot length delta must be positive");
  if (t2 < t1) throw ValidationError("horizon end precedes horizon start");
  if ((t2 - t1) % delta != 0) {
    throw ValidationError("horizon length " + std::to_string(t2 - t1) +
                          " is not divisible by delta " +
                          std::to_string(delta));
  }
  const Minutes windows = (t2 - t1) / delta;
  std::vector<Slot> slots;
  slots.reserve(billboards.size() * static_cast<std::size_t>(windows));
  for (const auto& b : billboards) {
    for (Minutes w = 0; w < windows; ++w) {
      const Minutes start = t1 + w * delta;
      slots.push_back(Slot{static_cast<SlotIndex>(slots.size()), b.id, start,
                           start + delta});
    }
  }
  return slots;
}

/// Great-circle distance in meters on a sphere of radius kEarthRadiusM.
inline double haversine_m(double lat1, double lon1, double lat2, double lon2) {
  constexpr double kRad = std::numbers::pi / 180.0;
  const double dlat = (lat2 - lat1) * kRad;
  const double dlon = (lon2 - lon1) * kRad;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  const double a =
      s1 * s1 + std::cos(lat1 * kRad) * std::cos(lat2 * kRad) * s2 * s2;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(a)));
}

/// The geo/time exposure predicate: the record lies within `lambda_m` of the
/// billboard and the closed intervals [window] and [t_start, t_end] meet.
inline bool covers(const Billboard& billboard, const Slot& slot,
                   const TrajectoryRecord& record, double lambda_m) {
  if (record.t_end < slot.window_start || record.t_start > slot.window_end) {
    return false;
  }
  return haversine_m(billboard.latitude, billboard.longitude, record.latitude,
                     record.longitude) <= lambda_m;
}

struct Exposure {
  UserIndex user = 0;
  double prob = 0.0;
};

struct SlotExposure {
  SlotIndex slot = 0;
  double prob = 0.0;
};

/// Sparse exposure matrix in compressed-row form, with the transposed
/// (user -> slots) index alongside. Immutable once built.
///
/// Entries with probability 0 are dropped; the rest are clamped to
/// [0, kMaxProbability]. Per-slot lists are strictly increasing in user.
class ExposureModel {
 public:
  ExposureModel() = default;

  ExposureModel(std::size_t user_count,
                std::vector<std::vector<Exposure>> per_slot)
      : user_count_(user_count) {
    offsets_.reserve(per_slot.size() + 1);
    singleton_.reserve(per_slot.size());
    for (std::size_t s = 0; s < per_slot.size(); ++s) {
      double sum = 0.0;
      long long prev = -1;
      for (const Exposure& e : per_slot[s]) {
        if (e.user >= user_count) {
          throw ValidationError("slot " + std::to_string(s) +
                                ": user index out of range");
        }
        if (static_cast<long long>(e.user) <= prev) {
          throw ValidationError("slot " + std::to_string(s) +
                                ": exposure list not strictly increasing");
        }
        prev = e.user;
        if (!(e.prob >= 0.0 && e.prob <= 1.0)) {
          throw ValidationError("slot " + std::to_string(s) +
                                ": probability outside [0, 1]");
        }
        if (e.prob == 0.0) continue;
        const double p = std::min(e.prob, kMaxProbability);
        entries_.push_back(Exposure{e.user, p});
        sum += p;
      }
      offsets_.push_back(entries_.size());
      singleton_.push_back(sum);
    }
    build_transpose();
  }

  std::size_t slot_count() const { return singleton_.size(); }
  std::size_t user_count() const { return user_count_; }
  std::size_t nonzero_count() const { return entries_.size(); }

  std::span<const Exposure> exposures(SlotIndex slot) const {
    return {entries_.data() + offsets_[slot],
            entries_.data() + offsets_[slot + 1]};
  }

  std::span<const SlotExposure> user_exposures(UserIndex user) const {
    return {user_entries_.data() + user_offsets_[user],
            user_entries_.data() + user_offsets_[user + 1]};
  }

  /// p(slot, user), or 0 when the pair is absent.
  double probability(SlotIndex slot, UserIndex user) const {
    const auto list = exposures(slot);
    const auto it = std::lower_bound(
        list.begin(), list.end(), user,
        [](const Exposure& e, UserIndex u) { return e.user < u; });
    return (it != list.end() && it->user == user) ? it->prob : 0.0;
  }

  /// I({slot}) = sum of the slot's probabilities.
  double singleton_influence(SlotIndex slot) const { return singleton_[slot]; }

  bool valid_slot(SlotIndex slot) const { return slot < slot_count(); }

  // Provenance, populated when built from tables.
  std::span<const Slot> slots() const { return slots_; }
  std::span<const Billboard> billboards() const { return billboards_; }
  std::span<const std::string> user_ids() const { return user_ids_; }
  double lambda_m() const { return lambda_m_; }
  bool has_provenance() const { return !slots_.empty(); }

  /// Billboard behind a slot; requires provenance.
  const Billboard& billboard_of(SlotIndex slot) const {
    return billboards_[slot_billboard_[slot]];
  }

 private:
  friend ExposureModel build_exposure_model(std::span<const Billboard>,
                                            std::span<const TrajectoryRecord>,
                                            std::span<const Slot>, double);

  void build_transpose() {
    user_offsets_.assign(user_count_ + 1, 0);
    for (const Exposure& e : entries_) ++user_offsets_[e.user + 1];
    for (std::size_t u = 0; u < user_count_; ++u) {
      user_offsets_[u + 1] += user_offsets_[u];
    }
    user_entries_.resize(entries_.size());
    std::vector<std::size_t> cursor(user_offsets_.begin(),
                                    user_offsets_.end() - 1);
    for (std::size_t s = 0; s < slot_count(); ++s) {
      for (const Exposure& e : exposures(static_cast<SlotIndex>(s))) {
        user_entries_[cursor[e.user]++] =
            SlotExposure{static_cast<SlotIndex>(s), e.prob};
      }
    }
  }

  std::size_t user_count_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<Exposure> entries_;
  std::vector<double> singleton_;
  std::vector<std::size_t> user_offsets_{0};
  std::vector<SlotExposure> user_entries_;

  std::vector<Slot> slots_;
  std::vector<Billboard> billboards_;
  std::vector<std::uint32_t> slot_billboard_;
  std::vector<std::string> user_ids_;
  double lambda_m_ = 0.0;
};

namespace detail {

// Per-billboard slot windows sorted by start, for interval lookups.
struct BillboardWindows {
  std::vector<std::pair<Minutes, Minutes>> windows;
  std::vector<SlotIndex> slot_of;
};

inline std::vector<BillboardWindows> index_windows(
    std::span<const Billboard> billboards, std::span<const Slot> slots,
    std::vector<std::uint32_t>* slot_billboard) {
  std::unordered_map<std::string, std::uint32_t> by_id;
  for (std::uint32_t i = 0; i < billboards.size(); ++i) {
    by_id.emplace(billboards[i].id, i);
  }
  std::vector<std::vector<std::pair<Minutes, SlotIndex>>> order(
      billboards.size());
  if (slot_billboard) slot_billboard->assign(slots.size(), 0);
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (slots[s].slot_index != s) {
      throw ValidationError("slot indices must be dense and in order");
    }
    const auto it = by_id.find(slots[s].billboard_id);
    if (it == by_id.end()) {
      throw ValidationError("slot refers to unknown billboard '" +
                            slots[s].billboard_id + "'");
    }
    order[it->second].emplace_back(slots[s].window_start,
                                   static_cast<SlotIndex>(s));
    if (slot_billboard) (*slot_billboard)[s] = it->second;
  }
  std::vector<BillboardWindows> out(billboards.size());
  for (std::size_t b = 0; b < billboards.size(); ++b) {
    std::sort(order[b].begin(), order[b].end());
    for (const auto& [start, s] : order[b]) {
      out[b].windows.emplace_back(start, slots[s].window_end);
      out[b].slot_of.push_back(s);
    }
  }
  return out;
}

// Calls fn(slot) for each window of `w` whose closed interval meets
// [t_start, t_end]. Windows of one billboard are disjoint up to endpoints,
// so their ends are sorted along with their starts.
template <typename Fn>
void for_each_window_meeting(const BillboardWindows& w, Minutes t_start,
                             Minutes t_end, Fn&& fn) {
  auto it = std::lower_bound(
      w.windows.begin(), w.windows.end(), t_start,
      [](const std::pair<Minutes, Minutes>& win, Minutes t) {
        return win.second < t;
      });
  for (; it != w.windows.end() && it->first <= t_end; ++it) {
    fn(w.slot_of[static_cast<std::size_t>(it - w.windows.begin())]);
  }
}

}  // namespace detail

/// Builds p(slot, user) = panel_size / max panel_size for every pair where
/// some record of the user passes within `lambda_m` of the slot's billboard
/// during the slot window. Repeat exposures of one pair count once. Users are
/// indexed in order of first appearance in `trajectories`.
inline ExposureModel build_exposure_model(
    std::span<const Billboard> billboards,
    std::span<const TrajectoryRecord> trajectories, std::span<const Slot> slots,
    double lambda_m) {
  if (lambda_m < 0.0) throw ValidationError("lambda must be non-negative");
  double max_panel = 0.0;
  for (const auto& b : billboards) max_panel = std::max(max_panel, b.panel_size);
  if (!billboards.empty() && !(max_panel > 0.0)) {
    throw ValidationError("maximum panel size must be positive");
  }

  std::vector<std::uint32_t> slot_billboard;
  const auto windows = detail::index_windows(billboards, slots, &slot_billboard);

  std::unordered_map<std::string, UserIndex> user_of;
  std::vector<std::string> user_ids;
  std::vector<UserIndex> record_user(trajectories.size());
  for (std::size_t r = 0; r < trajectories.size(); ++r) {
    const auto [it, inserted] = user_of.emplace(
        trajectories[r].user_id, static_cast<UserIndex>(user_ids.size()));
    if (inserted) user_ids.push_back(trajectories[r].user_id);
    record_user[r] = it->second;
  }

  std::vector<std::vector<Exposure>> per_slot(slots.size());
  for (std::size_t b = 0; b < billboards.size(); ++b) {
    const double p = billboards[b].panel_size / max_panel;
    for (std::size_t r = 0; r < trajectories.size(); ++r) {
      const auto& rec = trajectories[r];
      if (haversine_m(billboards[b].latitude, billboards[b].longitude,
                      rec.latitude, rec.longitude) > lambda_m) {
        continue;
      }
      detail::for_each_window_meeting(
          windows[b], rec.t_start, rec.t_end, [&](SlotIndex s) {
            per_slot[s].push_back(Exposure{record_user[r], p});
          });
    }
  }
  for (auto& list : per_slot) {
    std::sort(list.begin(), list.end(),
              [](const Exposure& a, const Exposure& b) { return a.user < b.user; });
    list.erase(std::unique(list.begin(), list.end(),
                           [](const Exposure& a, const Exposure& b) {
                             return a.user == b.user;
                           }),
               list.end());
  }

  ExposureModel model(user_ids.size(), std::move(per_slot));
  model.slots_.assign(slots.begin(), slots.end());
  model.billboards_.assign(billboards.begin(), billboards.end());
  model.slot_billboard_ = std::move(slot_billboard);
  model.user_ids_ = std::move(user_ids);
  model.lambda_m_ = lambda_m;
  return model;
}

/// Number of trajectory records each slot covers under `covers`, ignoring
/// probabilities. Requires a model built from tables.
inline std::vector<std::size_t> coverage_counts(
    const ExposureModel& model, std::span<const TrajectoryRecord> trajectories) {
  if (!model.has_provenance()) {
    throw std::invalid_argument("coverage needs a model built from tables");
  }
  const auto billboards = model.billboards();
  const auto windows = detail::index_windows(billboards, model.slots(), nullptr);
  std::vector<std::size_t> counts(model.slot_count(), 0);
  for (std::size_t b = 0; b < billboards.size(); ++b) {
    for (const auto& rec : trajectories) {
      if (haversine_m(billboards[b].latitude, billboards[b].longitude,
                      rec.latitude, rec.longitude) > model.lambda_m()) {
        continue;
      }
      detail::for_each_window_meeting(windows[b], rec.t_start, rec.t_end,
                                      [&](SlotIndex s) { ++counts[s]; });
    }
  }
  return counts;
}

}  // namespace slotmax
