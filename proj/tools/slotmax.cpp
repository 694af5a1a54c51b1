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

// slotmax: pick the k most influential billboard slots.
//
//   slotmax run     --algorithm <name> --billboards <csv> --trajectories <csv>
//                   --k <int> --out <csv> [options]
//   slotmax sweep   --vary {k|theta|lambda} --values a,b,c [run options]
//   slotmax gen     --billboards-out <csv> --trajectories-out <csv> [options]
//   slotmax oracle  --billboards <csv> --trajectories <csv> --k <int> --out <csv>
//   slotmax partition --billboards <csv> --trajectories <csv>
//                   --members-out <csv> --summary-out <csv>
//
// Exit codes: 0 success, 1 input or validation error, 2 internal invariant
// violation.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slotmax/slotmax.hpp"

namespace {

using slotmax::RunConfig;

struct CommonFlags {
  RunConfig config;
  std::string algorithm = "greedy";
  bool timing = false;
  std::string chosen_out;
};

void add_input_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--billboards", f.config.billboards_path,
                  "Billboard CSV (billboard_id,lat,lon,panel_size,cost)")
      ->required();
  cmd->add_option("--trajectories", f.config.trajectories_path,
                  "Trajectory CSV (user_id,lat,lon,t_start,t_end)")
      ->required();
  cmd->add_option("--lambda-m", f.config.lambda_m, "Exposure radius in meters")
      ->capture_default_str();
  cmd->add_option("--delta-min", f.config.delta_minutes, "Slot length in minutes")
      ->capture_default_str();
  cmd->add_option("--t1", f.config.t1, "Operating horizon start (minutes)")
      ->capture_default_str();
  cmd->add_option("--t2", f.config.t2, "Operating horizon end (minutes)")
      ->capture_default_str();
}

void add_run_flags(CLI::App* cmd, CommonFlags& f, bool need_k) {
  add_input_flags(cmd, f);
  auto* k = cmd->add_option("--k", f.config.k, "Number of slots to select");
  if (need_k) k->required();
  cmd->add_option("--theta", f.config.theta, "Overlap-ratio merge threshold")
      ->capture_default_str();
  cmd->add_option("--h", f.config.h, "PSG probe-count multiplier")
      ->capture_default_str();
  cmd->add_option("--ell", f.config.ell, "PSG shrink-rate parameter")
      ->capture_default_str();
  cmd->add_option("--seed", f.config.seed, "Random seed")->capture_default_str();
  cmd->add_option("--reps", f.config.reps, "Repetitions averaged per row")
      ->capture_default_str();
  cmd->add_option("--max-sweeps", f.config.max_sweeps,
                  "Partition sweep limit")
      ->capture_default_str();
  cmd->add_option("--out", f.config.out_path, "Result CSV")->required();
  cmd->add_flag("--timing", f.timing,
                "Record wall-clock runtime_ms (otherwise written as -1)");
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw slotmax::InputError("cannot write '" + path + "'");
  return out;
}

void warn_flags(const slotmax::ExperimentRow& row) {
  if (row.short_result) {
    std::cerr << "warning: " << slotmax::algorithm_name(row.algorithm)
              << ": ground set smaller than k, selected all " << row.chosen.size()
              << " slots\n";
  }
  if (row.stalled) {
    std::cerr << "warning: " << slotmax::algorithm_name(row.algorithm)
              << ": some picks added no influence\n";
  }
}

void write_chosen(const std::string& path, const slotmax::Instance& inst,
                  const slotmax::ExperimentRow& row) {
  auto out = open_output(path);
  out << "rank,slot_index,billboard_id,window_start,window_end,singleton_influence\n";
  for (std::size_t i = 0; i < row.chosen.size(); ++i) {
    const auto& slot = inst.slots[row.chosen[i]];
    out << i + 1 << ',' << slot.slot_index << ',' << slot.billboard_id << ','
        << slot.window_start << ',' << slot.window_end << ','
        << slotmax::detail::format_double(
               inst.model.singleton_influence(slot.slot_index))
        << '\n';
  }
}

int run_command(CommonFlags& f, std::string_view command) {
  f.config.algorithm = slotmax::parse_algorithm(f.algorithm);
  const auto data = slotmax::load_dataset(f.config);
  const auto inst = slotmax::make_instance(data, f.config);
  const auto row = slotmax::run(inst, f.config);
  warn_flags(row);
  auto out = open_output(f.config.out_path);
  slotmax::write_rows(out, slotmax::describe_config(command, f.config),
                      std::span(&row, 1), f.timing);
  if (!f.chosen_out.empty()) write_chosen(f.chosen_out, inst, row);
  return 0;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Influential billboard slot selection"};
  // Long form only: --h is the PSG probe multiplier.
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run = app.add_subcommand("run", "Run one algorithm and write a result row");
  add_run_flags(run, run_flags, true);
  run->add_option("--algorithm", run_flags.algorithm,
                  "greedy, psg_greedy, part_greedy, part_psg_greedy, random, "
                  "top_k, max_coverage, psg_random, brute_force")
      ->required();
  run->add_option("--chosen-out", run_flags.chosen_out,
                  "Optional CSV listing the chosen slots");

  CommonFlags oracle_flags;
  auto* oracle = app.add_subcommand(
      "oracle", "Exact optimum by exhaustive search (small instances only)");
  add_run_flags(oracle, oracle_flags, true);
  oracle->add_option("--chosen-out", oracle_flags.chosen_out,
                     "Optional CSV listing the chosen slots");

  CommonFlags sweep_flags;
  std::string vary;
  std::string values;
  std::string algorithms =
      "greedy,psg_greedy,part_greedy,part_psg_greedy,random,top_k,max_coverage,"
      "psg_random";
  std::size_t jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Vary one parameter across algorithms");
  add_run_flags(sweep, sweep_flags, false);
  sweep->add_option("--vary", vary, "k, theta or lambda")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--algorithms", algorithms, "Comma-separated algorithms")
      ->capture_default_str();
  sweep->add_option("--jobs", jobs, "Concurrent sweep cells")->capture_default_str();

  slotmax::SyntheticSpec spec;
  std::string billboards_out;
  std::string trajectories_out;
  auto* gen = app.add_subcommand("gen", "Write a synthetic billboard/trajectory pair");
  gen->add_option("--billboards-out", billboards_out)->required();
  gen->add_option("--trajectories-out", trajectories_out)->required();
  gen->add_option("--n-billboards", spec.n_billboards)->capture_default_str();
  gen->add_option("--n-users", spec.n_users)->capture_default_str();
  gen->add_option("--records-per-user", spec.records_per_user)->capture_default_str();
  gen->add_option("--horizon", spec.horizon, "Minutes")->capture_default_str();
  gen->add_option("--delta", spec.delta, "Minutes")->capture_default_str();
  gen->add_option("--lat-min", spec.lat_min)->capture_default_str();
  gen->add_option("--lat-max", spec.lat_max)->capture_default_str();
  gen->add_option("--lon-min", spec.lon_min)->capture_default_str();
  gen->add_option("--lon-max", spec.lon_max)->capture_default_str();
  gen->add_option("--panel-min", spec.panel_min)->capture_default_str();
  gen->add_option("--panel-max", spec.panel_max)->capture_default_str();
  gen->add_option("--hotspots", spec.hotspots,
                  "Cluster billboards and waypoints around this many centres")
      ->capture_default_str();
  gen->add_option("--hotspot-radius-m", spec.hotspot_radius_m)->capture_default_str();
  gen->add_option("--seed", spec.seed)->capture_default_str();

  CommonFlags part_flags;
  std::string members_out;
  std::string summary_out;
  auto* part = app.add_subcommand("partition", "Dump the theta-partition of all slots");
  add_input_flags(part, part_flags);
  part->add_option("--theta", part_flags.config.theta)->capture_default_str();
  part->add_option("--max-sweeps", part_flags.config.max_sweeps)->capture_default_str();
  part->add_option("--members-out", members_out, "cluster_id,slot_index CSV")
      ->required();
  part->add_option("--summary-out", summary_out, "cluster_id,size,influence CSV")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) return run_command(run_flags, "run");
    if (*oracle) {
      oracle_flags.algorithm = "brute_force";
      return run_command(oracle_flags, "oracle");
    }
    if (*sweep) {
      auto& config = sweep_flags.config;
      const auto axis = slotmax::parse_axis(vary);
      std::vector<double> parsed;
      for (const auto& v : split_list(values)) {
        parsed.push_back(slotmax::detail::parse_number<double>(v, "value", 1));
      }
      std::vector<slotmax::Algorithm> algs;
      for (const auto& a : split_list(algorithms)) {
        algs.push_back(slotmax::parse_algorithm(a));
      }
      const auto data = slotmax::load_dataset(config);
      const auto rows = slotmax::sweep(data, config, axis, parsed, algs, jobs);
      auto out = open_output(config.out_path);
      std::string preamble = slotmax::describe_config("sweep", config);
      preamble += " vary=" + vary + " values=" + values + " algorithms=" + algorithms;
      slotmax::write_rows(out, preamble, rows, sweep_flags.timing);
      for (const auto& row : rows) {
        if (!row.error.empty()) {
          std::cerr << "error: " << slotmax::algorithm_name(row.algorithm)
                    << ": " << row.error << '\n';
        }
      }
      return 0;
    }
    if (*gen) {
      const auto data = slotmax::generate_synthetic(spec);
      auto b = open_output(billboards_out);
      slotmax::write_billboards(b, data.billboards);
      auto t = open_output(trajectories_out);
      slotmax::write_trajectories(t, data.trajectories);
      return 0;
    }
    if (*part) {
      const auto& config = part_flags.config;
      const auto data = slotmax::load_dataset(config);
      const auto inst = slotmax::make_instance(data, config);
      const auto partition = slotmax::theta_partition(
          inst.model, slotmax::detail::nonzero_slots(inst.model), config.theta,
          config.max_sweeps);
      auto m = open_output(members_out);
      slotmax::write_partition_members(m, partition);
      auto s = open_output(summary_out);
      slotmax::write_partition_summary(s, partition);
      if (!partition.converged) {
        std::cerr << "warning: partition did not converge within "
                  << config.max_sweeps << " sweeps\n";
      }
      return 0;
    }
  } catch (const slotmax::InvariantError& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  } catch (const slotmax::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
