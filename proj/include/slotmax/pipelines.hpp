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

// End-to-end selection pipelines, the synthetic instance generator, and the
// experiment sweep harness behind the `slotmax` tool.

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "slotmax/corpus.hpp"
#include "slotmax/error.hpp"
#include "slotmax/influence.hpp"
#include "slotmax/partition.hpp"
#include "slotmax/psg.hpp"
#include "slotmax/rng.hpp"
#include "slotmax/selection.hpp"

namespace slotmax {

enum class Algorithm {
  kGreedy,
  kPsgGreedy,
  kPartGreedy,
  kPartPsgGreedy,
  kRandom,
  kTopK,
  kMaxCoverage,
  kPsgRandom,
  kBruteForce,
};

inline constexpr std::array<std::pair<Algorithm, std::string_view>, 9>
    kAlgorithmNames{{
        {Algorithm::kGreedy, "greedy"},
        {Algorithm::kPsgGreedy, "psg_greedy"},
        {Algorithm::kPartGreedy, "part_greedy"},
        {Algorithm::kPartPsgGreedy, "part_psg_greedy"},
        {Algorithm::kRandom, "random"},
        {Algorithm::kTopK, "top_k"},
        {Algorithm::kMaxCoverage, "max_coverage"},
        {Algorithm::kPsgRandom, "psg_random"},
        {Algorithm::kBruteForce, "brute_force"},
    }};

inline std::string_view algorithm_name(Algorithm a) {
  for (const auto& [alg, name] : kAlgorithmNames) {
    if (alg == a) return name;
  }
  return "unknown";
}

inline Algorithm parse_algorithm(std::string_view name) {
  for (const auto& [alg, n] : kAlgorithmNames) {
    if (n == name) return alg;
  }
  throw ValidationError("unknown algorithm '" + std::string(name) + "'");
}

/// Algorithms whose output depends on the seed.
inline bool is_randomized(Algorithm a) {
  return a == Algorithm::kPsgGreedy || a == Algorithm::kPartPsgGreedy ||
         a == Algorithm::kRandom || a == Algorithm::kPsgRandom;
}

struct RunConfig {
  Algorithm algorithm = Algorithm::kGreedy;
  std::size_t k = 10;
  double theta = 0.2;
  double lambda_m = 100.0;
  Minutes delta_minutes = 5;
  Minutes t1 = 0;
  Minutes t2 = 1440;
  double h = 8.0;
  double ell = 8.0;
  std::uint64_t seed = 0;
  std::size_t reps = 3;
  std::size_t max_sweeps = 50;
  std::string billboards_path;
  std::string trajectories_path;
  std::string out_path;
};

/// Parsed input tables.
struct Dataset {
  std::vector<Billboard> billboards;
  std::vector<TrajectoryRecord> trajectories;
};

/// Tables plus the slots and exposure model built from them for one lambda.
struct Instance {
  const Dataset* data = nullptr;
  std::vector<Slot> slots;
  ExposureModel model;
};

inline Dataset load_dataset(const RunConfig& config) {
  return Dataset{parse_billboards(config.billboards_path),
                 parse_trajectories(config.trajectories_path)};
}

inline Instance make_instance(const Dataset& data, const RunConfig& config) {
  Instance inst;
  inst.data = &data;
  inst.slots = enumerate_slots(data.billboards, config.t1, config.t2,
                               config.delta_minutes);
  inst.model = build_exposure_model(data.billboards, data.trajectories,
                                    inst.slots, config.lambda_m);
  return inst;
}

struct ExperimentRow {
  Algorithm algorithm = Algorithm::kGreedy;
  std::size_t k = 0;
  double theta = 0.0;
  double lambda_m = 0.0;
  std::uint64_t seed = 0;
  std::size_t reps = 0;
  double influence = 0.0;  // mean over reps
  double influence_min = 0.0;
  double influence_max = 0.0;
  double runtime_ms = 0.0;  // mean selection-phase wall clock
  // Sizes and cluster counts are those of the first repetition.
  std::size_t ground_before = 0;
  std::size_t ground_after = 0;
  std::size_t clusters_before = 0;
  std::size_t clusters_after = 0;
  bool short_result = false;
  bool stalled = false;
  std::vector<SlotIndex> chosen;  // first repetition's pick
  std::string error;              // set when the cell failed (sweeps only)
};

/// One pipeline execution: the pick plus the ground-set/cluster trail.
struct PipelineOutcome {
  SelectionResult selection;
  std::size_t ground_before = 0;
  std::size_t ground_after = 0;
  std::size_t clusters_before = 0;
  std::size_t clusters_after = 0;
};

namespace detail {

inline std::vector<SlotIndex> all_slots(const ExposureModel& model) {
  std::vector<SlotIndex> out(model.slot_count());
  std::iota(out.begin(), out.end(), SlotIndex{0});
  return out;
}

inline std::vector<SlotIndex> nonzero_slots(const ExposureModel& model) {
  std::vector<SlotIndex> out;
  for (SlotIndex s = 0; s < model.slot_count(); ++s) {
    if (model.singleton_influence(s) > 0.0) out.push_back(s);
  }
  return out;
}

inline PsgParams psg_params(const RunConfig& config, std::uint64_t seed) {
  return PsgParams{config.h, config.ell, seed};
}

// theta-partition of the slots that reach anyone, then mean-influence pruning.
// Zero-influence slots overlap nothing and would each stay a singleton.
inline std::vector<SlotIndex> partition_and_prune(const Instance& inst,
                                                  const RunConfig& config,
                                                  PipelineOutcome& out) {
  const auto ground = nonzero_slots(inst.model);
  if (ground.empty()) return {};
  const auto partition =
      theta_partition(inst.model, ground, config.theta, config.max_sweeps);
  const auto pruned = prune_clusters(partition);
  out.clusters_before = partition.clusters.size();
  out.clusters_after = pruned.kept.size();
  return merge_members(pruned.kept);
}

// Greedy over a reduced ground set. The reductions drop zero-influence slots,
// so on an instance nobody passes they can leave nothing to pick from.
inline SelectionResult greedy_or_stall(const ExposureModel& model,
                                       std::span<const SlotIndex> ground,
                                       std::size_t k) {
  return ground.empty() ? nothing_to_pick(k) : greedy(model, ground, k);
}

}  // namespace detail

/// Runs one algorithm once. Wall clock covers everything after the model is
/// built (partitioning, pruning, and selection).
inline PipelineOutcome run_pipeline(const Instance& inst,
                                    const RunConfig& config,
                                    std::uint64_t seed) {
  const ExposureModel& model = inst.model;
  const auto ground = detail::all_slots(model);
  PipelineOutcome out;
  out.ground_before = ground.size();
  out.ground_after = ground.size();
  detail::Stopwatch clock;

  switch (config.algorithm) {
    case Algorithm::kGreedy:
      out.selection = greedy(model, ground, config.k);
      break;
    case Algorithm::kPsgGreedy: {
      const auto reduction =
          prune(model, ground, detail::psg_params(config, seed));
      out.ground_after = reduction.reduced.size();
      out.selection = detail::greedy_or_stall(model, reduction.reduced, config.k);
      break;
    }
    case Algorithm::kPartGreedy: {
      const auto merged = detail::partition_and_prune(inst, config, out);
      out.ground_after = merged.size();
      out.selection = detail::greedy_or_stall(model, merged, config.k);
      break;
    }
    case Algorithm::kPartPsgGreedy: {
      const auto merged = detail::partition_and_prune(inst, config, out);
      const auto reduced =
          merged.empty()
              ? merged
              : prune(model, merged, detail::psg_params(config, seed)).reduced;
      out.ground_after = reduced.size();
      out.selection = detail::greedy_or_stall(model, reduced, config.k);
      break;
    }
    case Algorithm::kRandom:
      out.selection = random_k(model, ground, config.k, seed);
      break;
    case Algorithm::kTopK:
      out.selection = top_k(model, ground, config.k);
      break;
    case Algorithm::kMaxCoverage:
      if (inst.data == nullptr) {
        throw std::invalid_argument("max_coverage needs trajectory records");
      }
      out.selection =
          max_coverage(model, inst.data->trajectories, ground, config.k);
      break;
    case Algorithm::kPsgRandom: {
      const auto params = detail::psg_params(config, seed);
      const auto reduction = prune(model, ground, params);
      out.ground_after = reduction.reduced.size();
      out.selection =
          reduction.reduced.empty()
              ? nothing_to_pick(config.k)
              : random_k(model, reduction.reduced, config.k, mix_seed(seed, 1));
      break;
    }
    case Algorithm::kBruteForce:
      out.selection = brute_force_opt(model, ground, config.k);
      break;
  }
  out.selection.elapsed_ms = clock.elapsed_ms();
  return out;
}

/// Checks a pick against an independent evaluation of the influence formula.
inline void revalidate(const ExposureModel& model, const SelectionResult& sel) {
  std::vector<SlotIndex> sorted = sel.chosen;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw InvariantError("selection contains a duplicate slot");
  }
  const double reference = naive_influence(model, sel.chosen);
  const double tolerance = 1e-9 * std::max(1.0, std::abs(reference));
  if (std::abs(reference - sel.influence) > tolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "reported influence " << sel.influence
        << " disagrees with direct evaluation " << reference;
    throw InvariantError(msg.str());
  }
}

/// Runs `config.reps` repetitions (repetition r uses seed mix(seed, r)) and
/// aggregates them into one row. Deterministic algorithms must reproduce the
/// same influence bit for bit on every repetition.
inline ExperimentRow run(const Instance& inst, const RunConfig& config) {
  if (config.reps < 1) throw std::invalid_argument("reps must be >= 1");
  ExperimentRow row;
  row.algorithm = config.algorithm;
  row.k = config.k;
  row.theta = config.theta;
  row.lambda_m = config.lambda_m;
  row.seed = config.seed;
  row.reps = config.reps;

  // Deviations from the first repetition, so identical repetitions average
  // to exactly that value.
  double first = 0.0;
  double deviation_sum = 0.0;
  double runtime_sum = 0.0;
  for (std::size_t rep = 0; rep < config.reps; ++rep) {
    const auto outcome = run_pipeline(inst, config, mix_seed(config.seed, rep));
    revalidate(inst.model, outcome.selection);
    const double value = outcome.selection.influence;
    if (rep == 0) {
      first = value;
      row.influence_min = row.influence_max = value;
      row.ground_before = outcome.ground_before;
      row.ground_after = outcome.ground_after;
      row.clusters_before = outcome.clusters_before;
      row.clusters_after = outcome.clusters_after;
      row.chosen = outcome.selection.chosen;
    } else if (!is_randomized(config.algorithm) && value != row.influence_min) {
      throw InvariantError(std::string(algorithm_name(config.algorithm)) +
                           " is deterministic but repetitions disagree");
    }
    row.influence_min = std::min(row.influence_min, value);
    row.influence_max = std::max(row.influence_max, value);
    row.short_result = row.short_result || outcome.selection.short_result;
    row.stalled = row.stalled || outcome.selection.stalled;
    deviation_sum += value - first;
    runtime_sum += outcome.selection.elapsed_ms;
  }
  row.influence = std::clamp(first + deviation_sum / static_cast<double>(config.reps),
                             row.influence_min, row.influence_max);
  row.runtime_ms = runtime_sum / static_cast<double>(config.reps);
  return row;
}

inline ExperimentRow run_with(const Instance& inst, RunConfig config,
                              Algorithm algorithm) {
  config.algorithm = algorithm;
  return run(inst, config);
}

/// PSG reduction, then greedy on the survivors.
inline ExperimentRow run_psg_greedy(const Instance& inst,
                                    const RunConfig& config) {
  return run_with(inst, config, Algorithm::kPsgGreedy);
}

/// theta-partition, cluster pruning, then greedy on the kept members.
inline ExperimentRow run_part_greedy(const Instance& inst,
                                     const RunConfig& config) {
  return run_with(inst, config, Algorithm::kPartGreedy);
}

/// theta-partition, cluster pruning, PSG reduction, then greedy.
inline ExperimentRow run_part_psg_greedy(const Instance& inst,
                                         const RunConfig& config) {
  return run_with(inst, config, Algorithm::kPartPsgGreedy);
}

// ---------------------------------------------------------------------------
// Synthetic instances

struct SyntheticSpec {
  std::size_t n_billboards = 76;
  std::size_t n_users = 500;
  std::size_t records_per_user = 4;
  Minutes horizon = 1440;
  Minutes delta = 5;
  double lat_min = 40.700;
  double lat_max = 40.720;
  double lon_min = -74.020;
  double lon_max = -73.990;
  double panel_min = 100.0;
  double panel_max = 1000.0;
  // 0 places billboards and waypoints uniformly; otherwise both gather
  // around this many random centres.
  std::size_t hotspots = 0;
  double hotspot_radius_m = 150.0;
  double step_m = 400.0;  // maximum waypoint move between records
  std::uint64_t seed = 1;
};

namespace detail {

inline constexpr double kMetersPerDegree =
    kEarthRadiusM * std::numbers::pi / 180.0;

inline double round6(double v) { return std::round(v * 1e6) / 1e6; }

struct GeoPoint {
  double lat;
  double lon;
};

inline GeoPoint offset_m(GeoPoint p, double north_m, double east_m) {
  const double lat = p.lat + north_m / kMetersPerDegree;
  const double lon =
      p.lon + east_m / (kMetersPerDegree *
                        std::cos(p.lat * std::numbers::pi / 180.0));
  return {lat, lon};
}

}  // namespace detail

/// Uniform (or hotspot-clustered) billboards and random-waypoint users over
/// [0, horizon]. Fully determined by `spec.seed`.
inline Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_billboards == 0) throw ValidationError("need at least one billboard");
  if (spec.horizon <= 0 || spec.delta <= 0 || spec.horizon % spec.delta != 0) {
    throw ValidationError("horizon must be a positive multiple of delta");
  }
  if (!(spec.lat_min < spec.lat_max) || !(spec.lon_min < spec.lon_max)) {
    throw ValidationError("empty geo box");
  }
  if (!(spec.panel_min > 0.0) || spec.panel_max < spec.panel_min) {
    throw ValidationError("panel size range must be positive and ordered");
  }
  Rng rng(spec.seed);
  const auto clamp_box = [&](detail::GeoPoint p) {
    return detail::GeoPoint{std::clamp(p.lat, spec.lat_min, spec.lat_max),
                            std::clamp(p.lon, spec.lon_min, spec.lon_max)};
  };
  const auto uniform_point = [&] {
    const double lat = rng.uniform(spec.lat_min, spec.lat_max);
    const double lon = rng.uniform(spec.lon_min, spec.lon_max);
    return detail::GeoPoint{lat, lon};
  };
  const auto jitter = [&](detail::GeoPoint p, double radius) {
    const double north = rng.uniform(-radius, radius);
    const double east = rng.uniform(-radius, radius);
    return clamp_box(detail::offset_m(p, north, east));
  };

  std::vector<detail::GeoPoint> centres;
  for (std::size_t c = 0; c < spec.hotspots; ++c) centres.push_back(uniform_point());
  const auto place = [&] {
    if (centres.empty()) return uniform_point();
    return jitter(centres[rng.below(centres.size())], spec.hotspot_radius_m);
  };

  Dataset data;
  for (std::size_t b = 0; b < spec.n_billboards; ++b) {
    const auto p = place();
    Billboard board;
    board.id = "b" + std::to_string(b);
    board.latitude = detail::round6(p.lat);
    board.longitude = detail::round6(p.lon);
    board.panel_size = std::round(rng.uniform(spec.panel_min, spec.panel_max));
    board.panel_size = std::max(board.panel_size, 1.0);
    board.cost = 1.0;
    data.billboards.push_back(std::move(board));
  }

  const Minutes segment =
      std::max<Minutes>(1, spec.horizon / static_cast<Minutes>(
                                              std::max<std::size_t>(1, spec.records_per_user)));
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    auto pos = place();
    auto t = static_cast<Minutes>(rng.below(static_cast<std::uint64_t>(segment)));
    for (std::size_t r = 0; r < spec.records_per_user && t <= spec.horizon; ++r) {
      const Minutes duration =
          spec.delta + static_cast<Minutes>(rng.below(
                           static_cast<std::uint64_t>(3 * spec.delta + 1)));
      TrajectoryRecord rec;
      rec.user_id = "u" + std::to_string(u);
      rec.latitude = detail::round6(pos.lat);
      rec.longitude = detail::round6(pos.lon);
      rec.t_start = t;
      rec.t_end = std::min(spec.horizon, t + duration);
      data.trajectories.push_back(std::move(rec));

      if (!centres.empty() && rng.uniform() < 0.5) {
        pos = place();
      } else {
        pos = jitter(pos, spec.step_m);
      }
      t = data.trajectories.back().t_end +
          static_cast<Minutes>(rng.below(static_cast<std::uint64_t>(2 * spec.delta + 1)));
    }
  }
  return data;
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepAxis { kK, kTheta, kLambda };

inline SweepAxis parse_axis(std::string_view name) {
  if (name == "k") return SweepAxis::kK;
  if (name == "theta") return SweepAxis::kTheta;
  if (name == "lambda") return SweepAxis::kLambda;
  throw ValidationError("unknown sweep axis '" + std::string(name) +
                        "' (expected k, theta or lambda)");
}

inline std::string_view axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kK:
      return "k";
    case SweepAxis::kTheta:
      return "theta";
    case SweepAxis::kLambda:
      return "lambda";
  }
  return "unknown";
}

inline RunConfig with_axis_value(RunConfig config, SweepAxis axis, double value) {
  switch (axis) {
    case SweepAxis::kK:
      if (!(value >= 1.0) || value != std::floor(value)) {
        throw ValidationError("k values must be positive integers");
      }
      config.k = static_cast<std::size_t>(value);
      break;
    case SweepAxis::kTheta:
      config.theta = value;
      break;
    case SweepAxis::kLambda:
      config.lambda_m = value;
      break;
  }
  return config;
}

/// One row per (algorithm, value), in that order regardless of which worker
/// finishes first. A failing cell yields a row with `error` set; the rest of
/// the sweep still runs. Lambda sweeps build one exposure model per value.
inline std::vector<ExperimentRow> sweep(const Dataset& data,
                                        const RunConfig& base, SweepAxis axis,
                                        std::span<const double> values,
                                        std::span<const Algorithm> algorithms,
                                        std::size_t workers = 1) {
  if (values.empty()) throw ValidationError("sweep needs at least one value");
  if (algorithms.empty()) throw ValidationError("sweep needs an algorithm");

  std::vector<RunConfig> configs;
  for (double v : values) configs.push_back(with_axis_value(base, axis, v));

  std::vector<std::optional<Instance>> instances(values.size());
  std::vector<std::string> instance_errors(values.size());
  for (std::size_t v = 0; v < values.size(); ++v) {
    if (axis != SweepAxis::kLambda && v > 0) continue;
    try {
      instances[v] = make_instance(data, configs[v]);
    } catch (const InputError& e) {
      instance_errors[v] = e.what();
    }
  }
  const auto instance_for = [&](std::size_t v) -> std::size_t {
    return axis == SweepAxis::kLambda ? v : 0;
  };

  const std::size_t cells = algorithms.size() * values.size();
  std::vector<ExperimentRow> rows(cells);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t cell = next++; cell < cells; cell = next++) {
      const std::size_t a = cell / values.size();
      const std::size_t v = cell % values.size();
      RunConfig config = configs[v];
      config.algorithm = algorithms[a];
      ExperimentRow& row = rows[cell];
      row.algorithm = config.algorithm;
      row.k = config.k;
      row.theta = config.theta;
      row.lambda_m = config.lambda_m;
      row.seed = config.seed;
      row.reps = config.reps;
      const std::size_t i = instance_for(v);
      if (!instances[i]) {
        row.error = instance_errors[i];
        continue;
      }
      try {
        row = run(*instances[i], config);
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(workers, 1, cells);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Output

inline constexpr std::string_view kResultHeader =
    "algorithm,k,theta,lambda_m,seed,reps,influence,influence_min,"
    "influence_max,runtime_ms,ground_before,ground_after,clusters_before,"
    "clusters_after";

/// `# key=value ...` line echoing every run setting.
inline std::string describe_config(std::string_view command,
                                   const RunConfig& config) {
  std::ostringstream out;
  out << "# slotmax " << command << " algorithm=" << algorithm_name(config.algorithm)
      << " k=" << config.k << " theta=" << detail::format_double(config.theta)
      << " lambda_m=" << detail::format_double(config.lambda_m)
      << " delta_min=" << config.delta_minutes << " t1=" << config.t1
      << " t2=" << config.t2 << " h=" << detail::format_double(config.h)
      << " ell=" << detail::format_double(config.ell) << " seed=" << config.seed
      << " reps=" << config.reps << " max_sweeps=" << config.max_sweeps
      << " billboards=" << config.billboards_path
      << " trajectories=" << config.trajectories_path;
  return out.str();
}

/// Writes the result table. With `timing` off, runtime_ms is written as -1 so
/// that identical invocations produce identical bytes.
inline void write_rows(std::ostream& out, std::string_view preamble,
                       std::span<const ExperimentRow> rows, bool timing) {
  if (!preamble.empty()) out << preamble << '\n';
  out << kResultHeader << '\n';
  std::vector<std::string> errors;
  for (const auto& r : rows) {
    out << algorithm_name(r.algorithm) << ',' << r.k << ','
        << detail::format_double(r.theta) << ','
        << detail::format_double(r.lambda_m) << ',' << r.seed << ',' << r.reps
        << ',';
    if (!r.error.empty()) {
      out << "ERR,ERR,ERR,ERR,ERR,ERR,ERR,ERR\n";
      errors.push_back(std::string(algorithm_name(r.algorithm)) + " k=" +
                       std::to_string(r.k) + " theta=" +
                       detail::format_double(r.theta) + " lambda_m=" +
                       detail::format_double(r.lambda_m) + ": " + r.error);
      continue;
    }
    out << detail::format_double(r.influence) << ','
        << detail::format_double(r.influence_min) << ','
        << detail::format_double(r.influence_max) << ','
        << (timing ? std::llround(r.runtime_ms) : -1LL) << ','
        << r.ground_before << ',' << r.ground_after << ',' << r.clusters_before
        << ',' << r.clusters_after << '\n';
  }
  for (const auto& e : errors) out << "# error " << e << '\n';
}

}  // namespace slotmax
