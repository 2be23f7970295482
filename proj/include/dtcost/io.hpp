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

#pragma once

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dtcost/cluster.hpp"
#include "dtcost/common.hpp"
#include "dtcost/estimator.hpp"
#include "dtcost/schedsim.hpp"
#include "dtcost/strategy.hpp"
#include "dtcost/workload.hpp"

namespace dtcost {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Formatting

// Values are written with 9 significant digits so reports diff cleanly.
inline std::string format_g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline double round_g9(double v) { return std::stod(format_g9(v)); }

// ---------------------------------------------------------------------------
// Enum names

inline const char* to_string(TensorPattern p) {
  switch (p) {
    case TensorPattern::kAR: return "AR";
    case TensorPattern::kAP: return "AP";
    case TensorPattern::kPRWeightReplicated: return "PR_weight_replicated";
    case TensorPattern::kPRWeightPartitioned: return "PR_weight_partitioned";
  }
  return "?";
}
inline const char* to_string(BackwardDependency b) { return b == BackwardDependency::kInput ? "input" : "output"; }
inline const char* to_string(ParallelKind k) {
  switch (k) {
    case ParallelKind::kData: return "data";
    case ParallelKind::kTensor: return "tensor";
    case ParallelKind::kPipeline: return "pipeline";
  }
  return "?";
}
inline const char* to_string(ZeroStage z) {
  switch (z) {
    case ZeroStage::kNone: return "none";
    case ZeroStage::kZero2: return "zero2";
    case ZeroStage::kZero3: return "zero3";
  }
  return "?";
}
inline const char* to_string(PipelineSchedule s) { return s == PipelineSchedule::kGPipe ? "gpipe" : "1f1b"; }
inline const char* to_string(SyncMode m) { return m == SyncMode::kOverlapped ? "overlapped" : "blocking"; }

namespace detail {

inline std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

[[noreturn]] inline void bad_value(const std::string& field, const std::string& value) {
  throw Error(ErrorKind::kConfig, "unknown " + field + " '" + value + "'");
}

}  // namespace detail

inline TensorPattern parse_tensor_pattern(const std::string& s) {
  const std::string v = detail::lower(s);
  if (v == "ar") return TensorPattern::kAR;
  if (v == "ap") return TensorPattern::kAP;
  if (v == "pr_weight_replicated") return TensorPattern::kPRWeightReplicated;
  if (v == "pr_weight_partitioned") return TensorPattern::kPRWeightPartitioned;
  detail::bad_value("tensor_pattern", s);
}
inline BackwardDependency parse_backward_dependency(const std::string& s) {
  const std::string v = detail::lower(s);
  if (v == "input") return BackwardDependency::kInput;
  if (v == "output") return BackwardDependency::kOutput;
  detail::bad_value("backward_depends_on", s);
}
inline ParallelKind parse_parallel_kind(const std::string& s) {
  const std::string v = detail::lower(s);
  if (v == "data") return ParallelKind::kData;
  if (v == "tensor") return ParallelKind::kTensor;
  if (v == "pipeline") return ParallelKind::kPipeline;
  detail::bad_value("strategy kind", s);
}
inline ZeroStage parse_zero_stage(const std::string& s) {
  const std::string v = detail::lower(s);
  if (v == "none" || v == "0") return ZeroStage::kNone;
  if (v == "zero2" || v == "2") return ZeroStage::kZero2;
  if (v == "zero3" || v == "3") return ZeroStage::kZero3;
  detail::bad_value("zero_stage", s);
}
inline PipelineSchedule parse_schedule(const std::string& s) {
  const std::string v = detail::lower(s);
  if (v == "gpipe") return PipelineSchedule::kGPipe;
  if (v == "1f1b" || v == "onefoneb") return PipelineSchedule::kOneFOneB;
  detail::bad_value("schedule", s);
}
inline SyncMode parse_sync_mode(const std::string& s) {
  const std::string v = detail::lower(s);
  if (v == "overlapped") return SyncMode::kOverlapped;
  if (v == "blocking") return SyncMode::kBlocking;
  detail::bad_value("sync_mode", s);
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kConfig, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfig, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kConfig, "cannot write '" + path.string() + "'");
  out << text;
}

// Wraps nlohmann type errors so callers see one error type.
template <typename F>
auto with_config_errors(const std::string& what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfig, what + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Workload

inline Operator operator_from_json(const json& j) {
  Operator op;
  op.name = j.value("name", std::string{});
  op.weight_bytes = j.value("weight_bytes", Bytes{0});
  op.activation_bytes_per_sample = j.value("activation_bytes_per_sample", Bytes{0});
  op.fwd_time_per_sample = j.value("fwd_time_per_sample_s", 0.0);
  op.bwd_time_per_sample = j.contains("bwd_time_per_sample_s") ? j.at("bwd_time_per_sample_s").get<double>()
                                                                : default_bwd_time(op.fwd_time_per_sample);
  op.tensor_pattern = parse_tensor_pattern(j.value("tensor_pattern", std::string{"PR_weight_replicated"}));
  op.backward_depends_on = parse_backward_dependency(j.value("backward_depends_on", std::string{"input"}));
  op.comm_extra_bytes_per_sample = j.value("comm_extra_bytes_per_sample", Bytes{0});
  return op;
}

inline Workload workload_from_json(const json& j) {
  return with_config_errors("workload", [&] {
    Workload w;
    w.bytes_per_element = j.value("bytes_per_element", Bytes{4});
    w.global_batch_size = j.at("global_batch_size").get<std::uint64_t>();
    for (const auto& op : j.at("operators")) w.operators.push_back(operator_from_json(op));
    validate(w);
    return w;
  });
}

inline json to_json(const Workload& w) {
  json ops = json::array();
  for (const auto& op : w.operators) {
    ops.push_back({{"name", op.name},
                   {"weight_bytes", op.weight_bytes},
                   {"activation_bytes_per_sample", op.activation_bytes_per_sample},
                   {"fwd_time_per_sample_s", op.fwd_time_per_sample},
                   {"bwd_time_per_sample_s", op.bwd_time_per_sample},
                   {"tensor_pattern", to_string(op.tensor_pattern)},
                   {"backward_depends_on", to_string(op.backward_depends_on)},
                   {"comm_extra_bytes_per_sample", op.comm_extra_bytes_per_sample}});
  }
  return {{"bytes_per_element", w.bytes_per_element}, {"global_batch_size", w.global_batch_size}, {"operators", ops}};
}

inline Workload load_workload(const std::filesystem::path& path) { return workload_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Strategy

inline Strategy strategy_from_json(const json& j) {
  return with_config_errors("strategy", [&] {
    Strategy s;
    s.kind = parse_parallel_kind(j.at("kind").get<std::string>());
    s.degree = j.value("degree", std::uint64_t{1});
    s.micro_batches = j.value("micro_batches", std::uint64_t{1});
    s.bucket_bytes = j.value("bucket_bytes", kDefaultBucketBytes);
    s.zero_stage = parse_zero_stage(j.value("zero_stage", std::string{"none"}));
    s.recompute = j.value("recompute", false);
    s.schedule = parse_schedule(j.value("schedule", std::string{"gpipe"}));
    if (j.contains("stage_boundaries") && !j.at("stage_boundaries").is_null()) {
      s.stage_boundaries = j.at("stage_boundaries").get<std::vector<std::size_t>>();
    }
    s.sync_mode = parse_sync_mode(j.value("sync_mode", std::string{"overlapped"}));
    s.framework_buffer = j.value("framework_buffer", false);
    return s;
  });
}

inline json to_json(const Strategy& s) {
  return {{"kind", to_string(s.kind)},
          {"degree", s.degree},
          {"micro_batches", s.micro_batches},
          {"bucket_bytes", s.bucket_bytes},
          {"zero_stage", to_string(s.zero_stage)},
          {"recompute", s.recompute},
          {"schedule", to_string(s.schedule)},
          {"stage_boundaries", s.stage_boundaries},
          {"sync_mode", to_string(s.sync_mode)},
          {"framework_buffer", s.framework_buffer}};
}

inline Strategy load_strategy(const std::filesystem::path& path) { return strategy_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Bandwidth samples (CSV: bytes,bandwidth_bytes_per_s)

inline constexpr const char* kBandwidthCsvHeader = "bytes,bandwidth_bytes_per_s";

inline std::vector<BandwidthSample> parse_bandwidth_csv(const std::string& text, const std::string& origin = "csv") {
  std::istringstream in(text);
  std::string line;
  std::vector<BandwidthSample> out;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kBandwidthCsvHeader) {
        throw Error(ErrorKind::kConfig, origin + ": expected header '" + kBandwidthCsvHeader + "'");
      }
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("missing comma");
      out.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
    } catch (const std::exception&) {
      throw Error(ErrorKind::kConfig, origin + ":" + std::to_string(lineno) + ": malformed row '" + line + "'");
    }
  }
  if (!header) throw Error(ErrorKind::kConfig, origin + ": empty bandwidth CSV");
  return out;
}

inline std::vector<BandwidthSample> load_bandwidth_csv(const std::filesystem::path& path) {
  return parse_bandwidth_csv(read_text_file(path), path.string());
}

inline std::string bandwidth_csv(const std::vector<BandwidthSample>& samples) {
  std::string out = std::string(kBandwidthCsvHeader) + "\n";
  for (const auto& s : samples) out += format_g9(s.bytes) + "," + format_g9(s.bandwidth) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Cluster

inline json to_json(const BandwidthModel& m) {
  return {{"peak", round_g9(m.peak_bw)}, {"s_half", round_g9(m.s_half)}, {"k", round_g9(m.steepness)}};
}

inline json to_json(const BandwidthFit& f) {
  json j = to_json(f.model);
  j["rms"] = round_g9(f.rms);
  j["iterations"] = f.iterations;
  return j;
}

// Either {peak, s_half, k} or {"fit_csv": path}; relative paths resolve
// against `base_dir`.
inline BandwidthModel bandwidth_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (j.contains("fit_csv")) {
    std::filesystem::path p = j.at("fit_csv").get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    const auto samples = load_bandwidth_csv(p);
    return fit_bandwidth(samples).model;
  }
  BandwidthModel m{j.at("peak").get<double>(), j.at("s_half").get<double>(), j.value("k", 1.0)};
  validate(m);
  return m;
}

inline ClusterSpec cluster_from_json(const json& j, const std::filesystem::path& base_dir = ".") {
  return with_config_errors("cluster", [&] {
    ClusterSpec c;
    c.devices = j.at("devices").get<std::uint64_t>();
    c.p2p_bw = bandwidth_from_json(j.at("p2p_bw"), base_dir);
    c.collective_bw = bandwidth_from_json(j.at("collective_bw"), base_dir);
    c.devices_per_node = j.value("devices_per_node", std::uint64_t{0});
    if (j.contains("inter_node_p2p_bw")) c.inter_node_p2p_bw = bandwidth_from_json(j.at("inter_node_p2p_bw"), base_dir);
    if (j.contains("inter_node_collective_bw")) {
      c.inter_node_collective_bw = bandwidth_from_json(j.at("inter_node_collective_bw"), base_dir);
    }
    c.launch_skew = j.value("launch_skew_s", std::vector<double>{});
    c.optimizer_factor = j.value("optimizer_factor", 2.0);
    c.contention_factor = j.value("contention_factor", 0.3);
    c.workspace_bytes = j.value("workspace_bytes", Bytes{0});
    validate(c);
    return c;
  });
}

inline json to_json(const ClusterSpec& c) {
  json j = {{"devices", c.devices},
            {"p2p_bw", to_json(c.p2p_bw)},
            {"collective_bw", to_json(c.collective_bw)},
            {"launch_skew_s", c.launch_skew},
            {"optimizer_factor", c.optimizer_factor},
            {"contention_factor", c.contention_factor},
            {"workspace_bytes", c.workspace_bytes}};
  if (c.devices_per_node != 0) j["devices_per_node"] = c.devices_per_node;
  if (c.inter_node_p2p_bw) j["inter_node_p2p_bw"] = to_json(*c.inter_node_p2p_bw);
  if (c.inter_node_collective_bw) j["inter_node_collective_bw"] = to_json(*c.inter_node_collective_bw);
  return j;
}

inline ClusterSpec load_cluster(const std::filesystem::path& path) {
  return cluster_from_json(read_json_file(path), path.parent_path());
}

// ---------------------------------------------------------------------------
// Reports

inline json to_json(const TimeBreakdown& t) {
  return {{"cm_min", round_g9(t.cm_min)}, {"cm_wait", round_g9(t.cm_wait)}, {"cp", round_g9(t.cp)},
          {"ol", round_g9(t.ol)},         {"sd", round_g9(t.sd)},           {"total", round_g9(t.total)},
          {"recompute", round_g9(t.recompute)}};
}

inline json to_json(const MemoryBreakdown& m) {
  return {{"weights", m.weights},     {"activations", m.activations}, {"gradients", m.gradients},
          {"optimizer", m.optimizer_states}, {"workspace", m.workspace}, {"total", m.total}};
}

inline json to_json(const Estimate& e) {
  json per_device = json::array();
  for (std::size_t d = 0; d < e.time.size(); ++d) {
    per_device.push_back({{"device", d}, {"time", to_json(e.time[d])}, {"memory", to_json(e.memory.per_device[d])}});
  }
  return {{"strategy", to_json(e.strategy)},
          {"per_device", per_device},
          {"aggregate",
           {{"time_mean", to_json(e.time_mean)},
            {"iteration_s", round_g9(e.iteration_time)},
            {"memory", to_json(e.memory.aggregate)},
            {"comm_volume_bytes", e.comm.total_volume}}},
          {"warnings", e.warnings}};
}

// One row per (device, component); device "all" holds time means and
// memory totals.
inline std::string estimate_csv(const Estimate& e) {
  std::ostringstream out;
  out << "device,component,value\n";
  auto rows = [&](const std::string& dev, const TimeBreakdown& t, const MemoryBreakdown& m) {
    const std::pair<const char*, double> times[] = {{"cm_min", t.cm_min}, {"cm_wait", t.cm_wait}, {"cp", t.cp},
                                                    {"ol", t.ol},         {"sd", t.sd},           {"total", t.total}};
    for (const auto& [name, v] : times) out << dev << "," << name << "," << format_g9(v) << "\n";
    const std::pair<const char*, Bytes> mem[] = {{"weights", m.weights},
                                                 {"activations", m.activations},
                                                 {"gradients", m.gradients},
                                                 {"optimizer", m.optimizer_states},
                                                 {"workspace", m.workspace},
                                                 {"memory_total", m.total}};
    for (const auto& [name, v] : mem) out << dev << "," << name << "," << v << "\n";
  };
  for (std::size_t d = 0; d < e.time.size(); ++d) rows(std::to_string(d), e.time[d], e.memory.per_device[d]);
  rows("all", e.time_mean, e.memory.aggregate);
  return out.str();
}

inline json to_json(const SimResult& r) {
  json devices = json::array();
  for (std::size_t d = 0; d < r.devices.size(); ++d) {
    const auto& s = r.devices[d];
    devices.push_back({{"device", d},
                       {"busy_compute", round_g9(s.busy_compute)},
                       {"comm_total", round_g9(s.comm_total)},
                       {"comm_overlapped", round_g9(s.comm_overlapped)},
                       {"idle", round_g9(s.idle)},
                       {"peak_live_micro_batches", s.peak_live_micro_batches},
                       {"peak_activation_bytes", s.peak_activation_bytes},
                       {"comm_bytes", round_g9(s.comm_bytes)}});
  }
  return {{"makespan_s", round_g9(r.makespan)},
          {"total_comm_bytes", r.total_comm_bytes},
          {"comm_tail_s", round_g9(r.comm_tail)},
          {"per_device", devices}};
}

inline std::string sim_csv(const SimResult& r) {
  std::ostringstream out;
  out << "device,busy_compute,comm_total,comm_overlapped,idle,peak_live_micro_batches,peak_activation_bytes\n";
  for (std::size_t d = 0; d < r.devices.size(); ++d) {
    const auto& s = r.devices[d];
    out << d << "," << format_g9(s.busy_compute) << "," << format_g9(s.comm_total) << ","
        << format_g9(s.comm_overlapped) << "," << format_g9(s.idle) << "," << s.peak_live_micro_batches << ","
        << s.peak_activation_bytes << "\n";
  }
  return out.str();
}

inline json events_json(const std::vector<SimEvent>& events) {
  json out = json::array();
  for (const auto& e : events) {
    out.push_back({{"device", e.device},
                   {"kind", to_string(e.kind)},
                   {"micro_batch", e.micro_batch},
                   {"index", e.index},
                   {"start", round_g9(e.start)},
                   {"end", round_g9(e.end)}});
  }
  return out;
}

// Chrome trace-event format: one process per device, compute on thread 0
// and communication on thread 1; timestamps in microseconds.
inline json chrome_trace_json(const std::vector<SimEvent>& events) {
  json trace = json::array();
  for (const auto& e : events) {
    const std::string name = std::string(to_string(e.kind)) + " mb" + std::to_string(e.micro_batch);
    trace.push_back({{"name", name},
                     {"cat", is_compute(e.kind) ? "compute" : "comm"},
                     {"ph", "X"},
                     {"pid", e.device},
                     {"tid", is_compute(e.kind) ? 0 : 1},
                     {"ts", round_g9(e.start * 1e6)},
                     {"dur", round_g9((e.end - e.start) * 1e6)}});
  }
  return {{"traceEvents", trace}, {"displayTimeUnit", "ms"}};
}

inline json to_json(const CompareReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"component", row.component},
                    {"analytic", round_g9(row.analytic)},
                    {"simulated", round_g9(row.simulated)},
                    {"deviation", round_g9(row.deviation)},
                    {"pass", row.pass}});
  }
  return {{"rows", rows}, {"all_pass", r.all_pass}, {"warnings", r.warnings}};
}

inline std::string compare_csv(const CompareReport& r) {
  std::ostringstream out;
  out << "component,analytic,simulated,deviation,pass\n";
  for (const auto& row : r.rows) {
    out << row.component << "," << format_g9(row.analytic) << "," << format_g9(row.simulated) << ","
        << format_g9(row.deviation) << "," << (row.pass ? "true" : "false") << "\n";
  }
  return out.str();
}

}  // namespace dtcost
