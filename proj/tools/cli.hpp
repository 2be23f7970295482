/* Copyright 2026 The dtcost Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Command-line front end: estimate | simulate | sweep | fit-bandwidth |
// partition. Exit codes: 0 success, 1 internal failure, 2 usage/config.

#pragma once

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "dtcost/dtcost.hpp"

namespace dtcost::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

struct Options {
  std::string workload;
  std::string cluster;
  std::string strategy;
  std::string out;
  std::string format = "json";
  std::uint64_t seed = 0;

  // strategy overrides
  std::optional<std::string> kind;
  std::optional<std::uint64_t> degree;
  std::optional<std::uint64_t> micro_batches;
  std::optional<std::string> schedule;
  std::optional<std::string> sync_mode;
  std::optional<std::string> zero_stage;
  std::optional<std::uint64_t> global_batch;
  bool recompute = false;

  // simulate
  std::string trace;
  std::string trace_format = "events";
  bool compare = false;
  double tolerance = 1e-6;

  // sweep
  std::vector<std::uint64_t> sweep_degrees;
  std::vector<std::string> sweep_kinds;
  std::vector<std::uint64_t> sweep_micro_batches;
  std::vector<std::string> sweep_zero_stages;
  std::optional<std::uint64_t> per_device_batch;
  bool strong_scaling = false;
  unsigned threads = 0;

  // fit-bandwidth
  std::string samples_csv;
  std::vector<double> generate;
  std::size_t points = 8;
  double noise = 0.0;
  double min_bytes = 64.0 * 1024.0;
  double max_bytes = 1024.0 * 1024.0 * 1024.0;
  std::string samples_out;

  // partition
  std::vector<double> costs;
};

namespace detail {

inline std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto log = std::make_shared<spdlog::logger>("dtcost", sink);
  log->set_pattern("dtcost [%l] %v");
  log->set_level(spdlog::level::warn);
  if (const char* env = std::getenv("DTCOST_LOG")) {
    const std::string v = env;
    if (v == "error") log->set_level(spdlog::level::err);
    if (v == "warn") log->set_level(spdlog::level::warn);
    if (v == "info") log->set_level(spdlog::level::info);
    if (v == "debug") log->set_level(spdlog::level::debug);
  }
  return log;
}

inline void require(const std::string& value, const char* flag) {
  if (value.empty()) throw Error(ErrorKind::kConfig, std::string("missing required option ") + flag);
}

inline void emit(const Options& o, const std::string& text, std::ostream& out) {
  if (o.out.empty()) {
    out << text;
  } else {
    write_text_file(o.out, text);
  }
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline void check_format(const Options& o) {
  if (o.format != "json" && o.format != "csv") {
    throw Error(ErrorKind::kConfig, "unknown --format '" + o.format + "' (json|csv)");
  }
}

inline Strategy load_strategy_with_overrides(const Options& o) {
  Strategy s;
  if (!o.strategy.empty()) s = load_strategy(o.strategy);
  if (o.kind) s.kind = parse_parallel_kind(*o.kind);
  if (o.degree) {
    if (*o.degree != s.degree) s.stage_boundaries.clear();
    s.degree = *o.degree;
  }
  if (o.micro_batches) s.micro_batches = *o.micro_batches;
  if (o.schedule) s.schedule = parse_schedule(*o.schedule);
  if (o.sync_mode) s.sync_mode = parse_sync_mode(*o.sync_mode);
  if (o.zero_stage) s.zero_stage = parse_zero_stage(*o.zero_stage);
  if (o.recompute) s.recompute = true;
  return s;
}

inline Workload load_workload_with_overrides(const Options& o) {
  require(o.workload, "--workload");
  Workload w = load_workload(o.workload);
  if (o.global_batch) w.global_batch_size = *o.global_batch;
  return w;
}

inline ClusterSpec load_cluster_checked(const Options& o) {
  require(o.cluster, "--cluster");
  return load_cluster(o.cluster);
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline int cmd_estimate(const Options& o, std::ostream& out, spdlog::logger& log) {
  detail::check_format(o);
  const Workload w = detail::load_workload_with_overrides(o);
  const ClusterSpec c = detail::load_cluster_checked(o);
  const Strategy s = detail::load_strategy_with_overrides(o);
  const Estimate e = estimate(w, s, c);
  for (const auto& msg : e.warnings) log.warn("{}", msg);
  detail::emit(o, o.format == "csv" ? estimate_csv(e) : detail::dump(to_json(e)), out);
  return kExitOk;
}

inline int cmd_simulate(const Options& o, std::ostream& out, spdlog::logger& log) {
  detail::check_format(o);
  if (o.trace_format != "events" && o.trace_format != "chrome") {
    throw Error(ErrorKind::kConfig, "unknown --trace-format '" + o.trace_format + "' (events|chrome)");
  }
  const Workload w = detail::load_workload_with_overrides(o);
  const ClusterSpec c = detail::load_cluster_checked(o);
  const Strategy s = detail::load_strategy_with_overrides(o);
  const SimResult r = simulate(w, s, c);
  log.info("simulated {} events, makespan {} s", r.events.size(), r.makespan);

  json doc = to_json(r);
  std::string text = o.format == "csv" ? sim_csv(r) : std::string{};
  if (o.compare) {
    const Estimate e = estimate(w, s, c);
    const CompareReport cmp = compare(e, r, Tolerances{o.tolerance});
    for (const auto& msg : cmp.warnings) log.warn("{}", msg);
    if (!cmp.all_pass) log.warn("analytic and simulated results differ beyond tolerance {}", o.tolerance);
    doc["comparison"] = to_json(cmp);
    if (o.format == "csv") text += "\n" + compare_csv(cmp);
  }
  if (!o.trace.empty()) {
    const json trace = o.trace_format == "chrome" ? chrome_trace_json(r.events) : events_json(r.events);
    write_text_file(o.trace, detail::dump(trace));
  }
  detail::emit(o, o.format == "csv" ? text : detail::dump(doc), out);
  return kExitOk;
}

struct SweepPoint {
  std::size_t index = 0;
  ParallelKind kind = ParallelKind::kData;
  std::uint64_t degree = 1;
  std::uint64_t micro_batches = 1;
  ZeroStage zero = ZeroStage::kNone;
  std::uint64_t global_batch = 1;
};

struct SweepRow {
  SweepPoint point;
  std::optional<Estimate> estimate;
  std::string skipped;
};

inline const char* kSweepHeader =
    "index,kind,degree,micro_batches,zero_stage,global_batch,t_cm_min,t_cm_wait,t_cp,t_ol,t_sd,t_total,"
    "iteration_s,comm_volume_bytes,mem_weights,mem_activations,mem_gradients,mem_optimizer,mem_workspace,"
    "mem_total,mem_max_device,warnings";

inline std::string sweep_csv_row(const SweepRow& row) {
  const auto& p = row.point;
  const auto& e = *row.estimate;
  const auto& t = e.time_mean;
  const auto& m = e.memory.aggregate;
  Bytes max_dev = 0;
  for (const auto& d : e.memory.per_device) max_dev = std::max(max_dev, d.total);
  std::ostringstream s;
  s << p.index << "," << to_string(p.kind) << "," << p.degree << "," << p.micro_batches << "," << to_string(p.zero)
    << "," << p.global_batch << "," << format_g9(t.cm_min) << "," << format_g9(t.cm_wait) << "," << format_g9(t.cp)
    << "," << format_g9(t.ol) << "," << format_g9(t.sd) << "," << format_g9(t.total) << ","
    << format_g9(e.iteration_time) << "," << e.comm.total_volume << "," << m.weights << "," << m.activations << ","
    << m.gradients << "," << m.optimizer_states << "," << m.workspace << "," << m.total << "," << max_dev << ","
    << e.warnings.size();
  return s.str();
}

inline int cmd_sweep(const Options& o, std::ostream& out, spdlog::logger& log) {
  detail::check_format(o);
  if (o.sweep_degrees.empty() && o.sweep_kinds.empty() && o.sweep_micro_batches.empty() &&
      o.sweep_zero_stages.empty()) {
    throw Error(ErrorKind::kConfig, "sweep needs at least one axis (--degrees, --kinds, --micro-batch-list, --zero-stages)");
  }
  const Workload base_w = detail::load_workload_with_overrides(o);
  const ClusterSpec base_c = detail::load_cluster_checked(o);
  const Strategy base_s = detail::load_strategy_with_overrides(o);

  std::vector<std::uint64_t> degrees = o.sweep_degrees;
  if (degrees.empty()) degrees.push_back(base_s.degree);
  std::vector<ParallelKind> kinds;
  for (const auto& k : o.sweep_kinds) kinds.push_back(parse_parallel_kind(k));
  if (kinds.empty()) kinds.push_back(base_s.kind);
  std::vector<std::uint64_t> micro = o.sweep_micro_batches;
  if (micro.empty()) micro.push_back(base_s.micro_batches);
  std::vector<ZeroStage> zeros;
  for (const auto& z : o.sweep_zero_stages) zeros.push_back(parse_zero_stage(z));
  if (zeros.empty()) zeros.push_back(base_s.zero_stage);

  // weak scaling: global batch = per-device batch x D
  const std::uint64_t per_device = o.per_device_batch.value_or(base_w.global_batch_size);
  std::vector<SweepRow> rows;
  for (ParallelKind k : kinds) {
    for (std::uint64_t d : degrees) {
      for (std::uint64_t b : micro) {
        for (ZeroStage z : zeros) {
          SweepPoint p{rows.size(), k, d, b, z, o.strong_scaling ? base_w.global_batch_size : per_device * d};
          rows.push_back({p, std::nullopt, {}});
        }
      }
    }
  }

  auto evaluate = [&](SweepRow& row) {
    const SweepPoint& p = row.point;
    try {
      Workload w = base_w;
      w.global_batch_size = p.global_batch;
      Strategy s = base_s;
      s.kind = p.kind;
      s.degree = p.degree;
      s.micro_batches = p.micro_batches;
      s.zero_stage = p.zero;
      s.stage_boundaries.clear();
      if (p.kind != ParallelKind::kPipeline) s.recompute = false;
      if (p.kind != ParallelKind::kData) s.framework_buffer = false;
      ClusterSpec c = base_c;
      if (c.devices < p.degree && c.launch_skew.empty()) c.devices = p.degree;
      row.estimate = estimate(w, s, c);
    } catch (const Error& e) {
      row.skipped = e.what();
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(o.threads ? o.threads : std::thread::hardware_concurrency(),
                                                           static_cast<unsigned>(rows.size())));
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < rows.size(); i = next++) evaluate(rows[i]);
      });
    }
  }

  std::string text;
  json doc = {{"rows", json::array()}, {"skipped", json::array()}};
  if (o.format == "csv") text = std::string(kSweepHeader) + "\n";
  for (const auto& row : rows) {
    if (!row.estimate) {
      log.warn("sweep point {} ({} D={} B={} {}) skipped: {}", row.point.index, to_string(row.point.kind),
               row.point.degree, row.point.micro_batches, to_string(row.point.zero), row.skipped);
      doc["skipped"].push_back({{"index", row.point.index}, {"reason", row.skipped}});
      continue;
    }
    if (o.format == "csv") {
      text += sweep_csv_row(row) + "\n";
    } else {
      json j = to_json(*row.estimate);
      j["index"] = row.point.index;
      j["global_batch"] = row.point.global_batch;
      doc["rows"].push_back(std::move(j));
    }
  }
  detail::emit(o, o.format == "csv" ? text : detail::dump(doc), out);
  return kExitOk;
}

// Log-spaced sizes between min and max following the given curve, with
// optional uniform relative noise.
inline std::vector<BandwidthSample> synthesize_bandwidth(const BandwidthModel& m, std::size_t points, double min_bytes,
                                                         double max_bytes, double noise, std::uint64_t seed) {
  if (points < 2 || !(min_bytes > 0.0) || !(max_bytes > min_bytes)) {
    throw Error(ErrorKind::kConfig, "synthetic sweep needs >= 2 points and 0 < min < max bytes");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-noise, noise);
  std::vector<BandwidthSample> out;
  const double lo = std::log(min_bytes), hi = std::log(max_bytes);
  for (std::size_t i = 0; i < points; ++i) {
    const double s = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1));
    const double y = bandwidth_at(m, s) * (1.0 + (noise > 0.0 ? jitter(rng) : 0.0));
    out.push_back({s, y});
  }
  return out;
}

inline int cmd_fit_bandwidth(const Options& o, std::ostream& out, spdlog::logger& log) {
  detail::check_format(o);
  std::vector<BandwidthSample> samples;
  if (!o.generate.empty()) {
    if (o.generate.size() != 3) throw Error(ErrorKind::kConfig, "--generate takes peak,s_half,k");
    BandwidthModel truth{o.generate[0], o.generate[1], o.generate[2]};
    validate(truth);
    samples = synthesize_bandwidth(truth, o.points, o.min_bytes, o.max_bytes, o.noise, o.seed);
    if (!o.samples_out.empty()) write_text_file(o.samples_out, bandwidth_csv(samples));
  } else {
    detail::require(o.samples_csv, "<samples.csv>");
    samples = load_bandwidth_csv(o.samples_csv);
  }
  const BandwidthFit fit = fit_bandwidth(samples);
  log.info("fit converged after {} iterations", fit.iterations);
  if (o.format == "csv") {
    detail::emit(o,
                 "parameter,value\npeak," + format_g9(fit.model.peak_bw) + "\ns_half," + format_g9(fit.model.s_half) +
                     "\nk," + format_g9(fit.model.steepness) + "\nrms," + format_g9(fit.rms) + "\n",
                 out);
  } else {
    detail::emit(o, detail::dump(to_json(fit)), out);
  }
  if (!o.out.empty()) out << "residual RMS: " << format_g9(fit.rms) << " bytes/s\n";
  return kExitOk;
}

inline int cmd_partition(const Options& o, std::ostream& out, spdlog::logger&) {
  detail::check_format(o);
  if (!o.degree) throw Error(ErrorKind::kConfig, "partition needs --degree");
  std::vector<double> costs = o.costs;
  if (costs.empty()) costs = step_costs(detail::load_workload_with_overrides(o));
  const StagePartition p = partition_stages(costs, *o.degree);
  if (o.format == "csv") {
    std::ostringstream s;
    s << "stage,first_op,stage_cost\n";
    const auto ranges = stage_ranges(costs.size(), p.boundaries);
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      s << i << "," << ranges[i].first << "," << format_g9(p.stage_costs[i]) << "\n";
    }
    detail::emit(o, s.str(), out);
  } else {
    json costs_json = json::array();
    for (double c : p.stage_costs) costs_json.push_back(round_g9(c));
    detail::emit(o,
                 detail::dump({{"stage_boundaries", p.boundaries},
                               {"stage_costs", costs_json},
                               {"max_stage_cost", round_g9(p.max_stage_cost)}}),
                 out);
  }
  if (!o.out.empty()) out << "max stage cost: " << format_g9(p.max_stage_cost) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Options o;
  auto log = detail::make_logger(err);

  CLI::App app{"Analytical time and memory estimator for distributed training", "dtcost"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--workload", o.workload, "Workload JSON");
  app.add_option("--cluster", o.cluster, "Cluster JSON");
  app.add_option("--strategy", o.strategy, "Strategy JSON");
  app.add_option("--out", o.out, "Output file (default: stdout)");
  app.add_option("--format", o.format, "json | csv");
  app.add_option("--seed", o.seed, "Seed for synthetic noise");

  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("--kind", o.kind, "data | tensor | pipeline");
    sub->add_option("--degree", o.degree, "Devices in the strategy");
    sub->add_option("--micro-batches", o.micro_batches, "Pipeline micro-batches");
    sub->add_option("--schedule", o.schedule, "gpipe | 1f1b");
    sub->add_option("--sync-mode", o.sync_mode, "overlapped | blocking");
    sub->add_option("--zero-stage", o.zero_stage, "none | zero2 | zero3");
    sub->add_option("--global-batch", o.global_batch, "Override the workload's global batch");
    sub->add_flag("--recompute", o.recompute, "Enable pipeline re-computation");
  };

  auto* est = app.add_subcommand("estimate", "Analytic per-device time and memory breakdown");
  add_overrides(est);

  auto* sim = app.add_subcommand("simulate", "Discrete-event simulation of a pipeline or data-parallel step");
  add_overrides(sim);
  sim->add_option("--trace", o.trace, "Write the event trace here");
  sim->add_option("--trace-format", o.trace_format, "events | chrome");
  sim->add_flag("--compare", o.compare, "Append analytic-vs-simulated deviations");
  sim->add_option("--tolerance", o.tolerance, "Relative tolerance for --compare");

  auto* sweep = app.add_subcommand("sweep", "Estimate over the Cartesian product of strategy axes");
  add_overrides(sweep);
  sweep->add_option("--degrees", o.sweep_degrees, "e.g. 1,2,4,8")->delimiter(',');
  sweep->add_option("--kinds", o.sweep_kinds, "e.g. data,pipeline")->delimiter(',');
  sweep->add_option("--micro-batch-list", o.sweep_micro_batches, "e.g. 4,8,16")->delimiter(',');
  sweep->add_option("--zero-stages", o.sweep_zero_stages, "e.g. none,zero2,zero3")->delimiter(',');
  sweep->add_option("--per-device-batch", o.per_device_batch, "Weak-scaling batch per device");
  sweep->add_flag("--strong-scaling", o.strong_scaling, "Keep the workload's global batch fixed");
  sweep->add_option("--threads", o.threads, "Worker threads (default: hardware)");

  auto* fit = app.add_subcommand("fit-bandwidth", "Fit a sigmoid bandwidth curve to measurements");
  fit->add_option("samples", o.samples_csv, "CSV with header bytes,bandwidth_bytes_per_s");
  fit->add_option("--generate", o.generate, "Synthesize samples from peak,s_half,k")->delimiter(',');
  fit->add_option("--points", o.points, "Synthetic sample count");
  fit->add_option("--noise", o.noise, "Uniform relative noise on synthetic samples");
  fit->add_option("--min-bytes", o.min_bytes, "Smallest synthetic message");
  fit->add_option("--max-bytes", o.max_bytes, "Largest synthetic message");
  fit->add_option("--samples-out", o.samples_out, "Write synthetic samples as CSV");

  auto* part = app.add_subcommand("partition", "Split the operator chain into balanced pipeline stages");
  part->add_option("--degree", o.degree, "Number of stages");
  part->add_option("--costs", o.costs, "Explicit per-operator costs, e.g. 3,1,4")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (est->parsed()) return cmd_estimate(o, out, *log);
    if (sim->parsed()) return cmd_simulate(o, out, *log);
    if (sweep->parsed()) return cmd_sweep(o, out, *log);
    if (fit->parsed()) return cmd_fit_bandwidth(o, out, *log);
    if (part->parsed()) return cmd_partition(o, out, *log);
  } catch (const Error& e) {
    err << "dtcost: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "dtcost: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace dtcost::cli
