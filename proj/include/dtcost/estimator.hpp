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

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dtcost/cluster.hpp"
#include "dtcost/common.hpp"
#include "dtcost/strategy.hpp"
#include "dtcost/workload.hpp"

namespace dtcost {

// Per-device time for one training iteration. `total` closes the
// decomposition: total = cm_min + cm_wait + cp - ol + sd.
struct TimeBreakdown {
  Seconds cm_min = 0.0;
  Seconds cm_wait = 0.0;
  Seconds cp = 0.0;
  Seconds ol = 0.0;
  Seconds sd = 0.0;
  Seconds total = 0.0;
  // Part of `cp` spent re-running forward passes; informational.
  Seconds recompute = 0.0;

  Seconds cm() const { return cm_min + cm_wait; }
  void close() { total = cm() + cp - ol + sd; }
};

struct MemoryBreakdown {
  Bytes weights = 0;
  Bytes activations = 0;
  Bytes gradients = 0;
  Bytes optimizer_states = 0;
  Bytes workspace = 0;
  Bytes total = 0;

  void close() { total = weights + activations + gradients + optimizer_states + workspace; }

  MemoryBreakdown& operator+=(const MemoryBreakdown& o) {
    weights += o.weights;
    activations += o.activations;
    gradients += o.gradients;
    optimizer_states += o.optimizer_states;
    workspace += o.workspace;
    total += o.total;
    return *this;
  }
};

struct MemoryReport {
  std::vector<MemoryBreakdown> per_device;
  MemoryBreakdown aggregate;

  void close() {
    aggregate = {};
    for (auto& m : per_device) {
      m.close();
      aggregate += m;
    }
  }
};

struct CommTime {
  Seconds min = 0.0;
  Seconds wait = 0.0;
};

struct CommBreakdown {
  std::vector<CommTime> per_device;
  std::vector<double> device_volume;  // bytes each device sends/receives
  Bytes total_volume = 0;             // summed over devices
  // Data parallel: duration of each gradient bucket's all-reduce.
  std::vector<Seconds> bucket_times;
  // Tensor parallel: total volume by source.
  Bytes conversion_volume = 0;
  Bytes during_volume = 0;
  Bytes post_backward_volume = 0;

  explicit CommBreakdown(std::uint64_t devices = 0) : per_device(devices), device_volume(devices, 0.0) {}
};

inline void validate(const Workload& w, const Strategy& s, const ClusterSpec& c) {
  validate(w, s);
  validate(c);
  if (s.degree > c.devices) {
    throw Error(ErrorKind::kValidation, "strategy degree " + std::to_string(s.degree) + " exceeds the cluster's " +
                                            std::to_string(c.devices) + " devices");
  }
}

// ---------------------------------------------------------------------------
// Pipeline bookkeeping shared by the estimator and the simulator.

struct PipelinePlan {
  std::vector<std::size_t> boundaries;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  std::uint64_t micro_batches = 1;
  std::uint64_t micro_batch_samples = 1;
  // Full-batch compute per stage.
  std::vector<Seconds> stage_fwd;
  std::vector<Seconds> stage_bwd;
  // Boundary k (k = 0..D-2) sits between stage k and k+1.
  std::vector<Bytes> boundary_bytes;         // full batch
  std::vector<Seconds> boundary_time;        // full batch, one direction
  std::vector<Bytes> boundary_micro_bytes;   // one micro-batch
  std::vector<Seconds> boundary_micro_time;  // one micro-batch, one direction
};

inline PipelinePlan plan_pipeline(const Workload& w, const Strategy& strategy, const ClusterSpec& c) {
  const Strategy s = resolved(w, strategy);
  if (s.kind != ParallelKind::kPipeline) throw Error(ErrorKind::kValidation, "not a pipeline strategy");
  PipelinePlan p;
  p.boundaries = s.stage_boundaries;
  p.ranges = stage_ranges(w.size(), p.boundaries);
  p.micro_batches = s.micro_batches;
  p.micro_batch_samples = w.global_batch_size / s.micro_batches;
  const double batch = static_cast<double>(w.global_batch_size);
  for (const auto& [first, last] : p.ranges) {
    Seconds f = 0.0, b = 0.0;
    for (std::size_t i = first; i < last; ++i) {
      f += w.operators[i].fwd_time_per_sample;
      b += w.operators[i].bwd_time_per_sample;
    }
    p.stage_fwd.push_back(batch * f);
    p.stage_bwd.push_back(batch * b);
  }
  p.boundary_bytes = boundary_activations(w, p.boundaries, w.global_batch_size);
  for (std::size_t k = 0; k < p.boundaries.size(); ++k) {
    const BandwidthModel& bw = p2p_model(c, k, k + 1);
    const Bytes micro = p.micro_batch_samples * w.operators[p.boundaries[k]].activation_bytes_per_sample;
    const double block = static_cast<double>(micro);
    p.boundary_micro_bytes.push_back(micro);
    p.boundary_time.push_back(transfer_time(bw, static_cast<double>(p.boundary_bytes[k]), block));
    p.boundary_micro_time.push_back(transfer_time(bw, block, block));
  }
  return p;
}

// Micro-batches whose activations a stage holds at once (0-based stage).
inline std::uint64_t live_micro_batches(PipelineSchedule schedule, std::uint64_t stages,
                                        std::uint64_t micro_batches, std::uint64_t stage) {
  if (schedule == PipelineSchedule::kGPipe) return micro_batches;
  return std::min<std::uint64_t>(stages - stage, micro_batches);
}

// ---------------------------------------------------------------------------
// Communication

// P2P traffic: every boundary moves its activation forward and its gradient
// backward, and both endpoints spend the transfer time.
inline CommBreakdown comm_pipeline(const Workload& w, const Strategy& s, const ClusterSpec& c) {
  validate(w, s, c);
  if (s.kind != ParallelKind::kPipeline) throw Error(ErrorKind::kValidation, "comm_pipeline needs a pipeline strategy");
  const PipelinePlan p = plan_pipeline(w, s, c);
  CommBreakdown out(s.degree);
  for (std::size_t k = 0; k < p.boundary_bytes.size(); ++k) {
    const Bytes a = p.boundary_bytes[k];
    for (std::size_t d : {k, k + 1}) {
      out.per_device[d].min += 2.0 * p.boundary_time[k];
      out.device_volume[d] += 2.0 * static_cast<double>(a);
    }
    out.total_volume += 4 * a;
  }
  return out;
}

inline std::vector<Bytes> gradient_buckets(Bytes total, Bytes bucket_bytes) {
  std::vector<Bytes> out;
  for (Bytes left = total; left > 0;) {
    const Bytes b = std::min(left, bucket_bytes);
    out.push_back(b);
    left -= b;
  }
  return out;
}

inline CommBreakdown comm_data(const Workload& w, const Strategy& s, const ClusterSpec& c) {
  validate(w, s, c);
  if (s.kind != ParallelKind::kData) throw Error(ErrorKind::kValidation, "comm_data needs a data strategy");
  CommBreakdown out(s.degree);
  if (s.degree == 1) return out;
  const Bytes weights = total_weight_bytes(w);
  const BandwidthModel& bw = collective_model(c, s.degree);
  const auto waits = collective_waits(c, s.degree);
  const auto buckets = gradient_buckets(weights, s.bucket_bytes);
  double volume = 0.0;
  Seconds min = 0.0;
  for (Bytes b : buckets) {
    const double v = allreduce_device_volume(static_cast<double>(b), s.degree);
    const Seconds t = transfer_time(bw, v, static_cast<double>(b));
    out.bucket_times.push_back(t);
    volume += v;
    min += t;
    out.total_volume += allreduce_total_volume(b, s.degree);
  }
  for (std::size_t d = 0; d < s.degree; ++d) {
    out.per_device[d] = {min, static_cast<double>(buckets.size()) * waits[d]};
    out.device_volume[d] = volume;
  }
  return out;
}

// Layout an operator leaves its output in under tensor parallelism.
inline TensorLayout output_layout(TensorPattern p) {
  return p == TensorPattern::kPRWeightReplicated ? TensorLayout::kPartitioned : TensorLayout::kReplicated;
}

inline CommBreakdown comm_tensor(const Workload& w, const Strategy& s, const ClusterSpec& c) {
  validate(w, s, c);
  if (s.kind != ParallelKind::kTensor) throw Error(ErrorKind::kValidation, "comm_tensor needs a tensor strategy");
  CommBreakdown out(s.degree);
  if (s.degree == 1) return out;
  const std::uint64_t D = s.degree;
  const std::uint64_t batch = w.global_batch_size;
  const BandwidthModel& bw = collective_model(c, D);
  const auto waits = collective_waits(c, D);
  const LayoutAssignment layouts = derive_layouts(w, s);

  Seconds min = 0.0;
  double volume = 0.0;
  std::uint64_t collectives = 0;
  enum class Kind { kAllReduce, kAllGather };
  auto charge = [&](Kind kind, Bytes message, Bytes& source_total) {
    if (message == 0) return;
    const double msg = static_cast<double>(message);
    const double v = kind == Kind::kAllReduce ? allreduce_device_volume(msg, D) : allgather_device_volume(msg, D);
    const Bytes total = kind == Kind::kAllReduce ? allreduce_total_volume(message, D)
                                                 : allgather_total_volume(message, D);
    min += transfer_time(bw, v, msg);
    volume += v;
    source_total += total;
    out.total_volume += total;
    ++collectives;
  };

  TensorLayout upstream = TensorLayout::kReplicated;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const Operator& op = w.operators[i];
    const Bytes act = batch * op.activation_bytes_per_sample;
    // before compute: gather a partitioned input the operator needs whole
    if (layouts.per_operator[i].activation == TensorLayout::kReplicated && upstream == TensorLayout::kPartitioned) {
      charge(Kind::kAllGather, act, out.conversion_volume);
    }
    const Bytes extra = batch * op.comm_extra_bytes_per_sample;
    if (op.tensor_pattern == TensorPattern::kPRWeightPartitioned) {
      charge(Kind::kAllReduce, extra, out.during_volume);  // declared output aggregation
    } else {
      charge(Kind::kAllGather, extra, out.conversion_volume);  // halo / declared conversion
    }
    // during compute: partial sums of AP operators
    if (op.tensor_pattern == TensorPattern::kAP) charge(Kind::kAllReduce, act, out.during_volume);
    // after backward: gradients of the replicated operand
    if (op.tensor_pattern == TensorPattern::kPRWeightReplicated) {
      charge(Kind::kAllReduce, op.weight_bytes, out.post_backward_volume);
    } else if (op.tensor_pattern == TensorPattern::kPRWeightPartitioned) {
      charge(Kind::kAllReduce, act, out.post_backward_volume);
    }
    upstream = output_layout(op.tensor_pattern);
  }
  for (std::size_t d = 0; d < D; ++d) {
    out.per_device[d] = {min, static_cast<double>(collectives) * waits[d]};
    out.device_volume[d] = volume;
  }
  return out;
}

inline CommBreakdown comm(const Workload& w, const Strategy& s, const ClusterSpec& c) {
  switch (s.kind) {
    case ParallelKind::kPipeline: return comm_pipeline(w, s, c);
    case ParallelKind::kData: return comm_data(w, s, c);
    case ParallelKind::kTensor: return comm_tensor(w, s, c);
  }
  return CommBreakdown{};
}

// ---------------------------------------------------------------------------
// Computation

// Forward time spent again by re-computation on each device.
inline std::vector<Seconds> recompute_time(const Workload& w, const Strategy& s, const ClusterSpec& c) {
  std::vector<Seconds> out(s.degree, 0.0);
  if (s.kind != ParallelKind::kPipeline || !s.recompute) return out;
  const PipelinePlan p = plan_pipeline(w, s, c);
  for (std::size_t d = 0; d < s.degree; ++d) out[d] = p.stage_fwd[d];
  return out;
}

// Per-device compute time. When `overlap` is given, the contention penalty
// contention_factor * overlap is added.
inline std::vector<Seconds> comp_time(const Workload& w, const Strategy& s, const ClusterSpec& c,
                                      std::span<const Seconds> overlap = {}) {
  validate(w, s, c);
  const std::uint64_t D = s.degree;
  const double batch = static_cast<double>(w.global_batch_size);
  std::vector<Seconds> out(D, 0.0);
  switch (s.kind) {
    case ParallelKind::kPipeline: {
      const PipelinePlan p = plan_pipeline(w, s, c);
      const auto extra = recompute_time(w, s, c);
      for (std::size_t d = 0; d < D; ++d) out[d] = p.stage_fwd[d] + p.stage_bwd[d] + extra[d];
      break;
    }
    case ParallelKind::kData: {
      const Seconds t = batch * total_step_time_per_sample(w) / static_cast<double>(D);
      std::fill(out.begin(), out.end(), t);
      break;
    }
    case ParallelKind::kTensor: {
      Seconds t = 0.0;
      for (const auto& op : w.operators) {
        const Seconds full = batch * op.step_time_per_sample();
        t += op.tensor_pattern == TensorPattern::kAR ? full : full / static_cast<double>(D);
      }
      std::fill(out.begin(), out.end(), t);
      break;
    }
  }
  if (!overlap.empty()) {
    if (overlap.size() != D) throw Error(ErrorKind::kValidation, "overlap vector has the wrong length");
    for (std::size_t d = 0; d < D; ++d) out[d] += c.contention_factor * overlap[d];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Overlap

inline std::vector<Seconds> overlap_time(const Workload& w, const Strategy& s, const ClusterSpec& c,
                                         const CommBreakdown& cm) {
  validate(w, s, c);
  const std::uint64_t D = s.degree;
  std::vector<Seconds> out(D, 0.0);
  if (cm.per_device.size() != D) throw Error(ErrorKind::kValidation, "communication breakdown has the wrong length");
  switch (s.kind) {
    case ParallelKind::kPipeline: {
      if (s.sync_mode == SyncMode::kBlocking) break;
      const PipelinePlan p = plan_pipeline(w, s, c);
      const double factor = static_cast<double>(s.micro_batches - 1) / static_cast<double>(s.micro_batches);
      for (std::size_t k = 0; k < p.boundary_time.size(); ++k) {
        const Seconds t = p.boundary_time[k];
        // the boundary's traffic hides behind the compute of both neighbours
        for (std::size_t d : {k, k + 1}) {
          out[d] += factor * (std::min(t, p.stage_fwd[d]) + std::min(t, p.stage_bwd[d]));
        }
      }
      break;
    }
    case ParallelKind::kData: {
      if (cm.bucket_times.empty()) break;
      const auto waits = collective_waits(c, D);
      Seconds bwd = 0.0;
      for (const auto& op : w.operators) bwd += op.bwd_time_per_sample;
      bwd *= static_cast<double>(w.global_batch_size) / static_cast<double>(D);
      for (std::size_t d = 0; d < D; ++d) {
        // only the last bucket cannot hide behind backward compute
        const Seconds tail = cm.bucket_times.back() + waits[d];
        out[d] = std::clamp(cm.per_device[d].min + cm.per_device[d].wait - tail, 0.0, bwd);
      }
      break;
    }
    case ParallelKind::kTensor:
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scheduling overhead

struct SchedOverhead {
  std::vector<Seconds> per_device;
  // (max - min) / max over stage compute times.
  double imbalance = 0.0;
  bool imbalanced = false;
};

inline constexpr double kImbalanceThreshold = 0.05;

inline SchedOverhead sched_overhead(const Workload& w, const Strategy& s, const ClusterSpec& c) {
  validate(w, s, c);
  const std::uint64_t D = s.degree;
  SchedOverhead out;
  out.per_device.assign(D, 0.0);
  if (s.kind != ParallelKind::kPipeline || D == 1) return out;
  const PipelinePlan p = plan_pipeline(w, s, c);
  const auto extra = recompute_time(w, s, c);
  std::vector<Seconds> stage(D);
  for (std::size_t d = 0; d < D; ++d) stage[d] = p.stage_fwd[d] + p.stage_bwd[d] + extra[d];
  const Seconds compute = std::accumulate(stage.begin(), stage.end(), 0.0);
  const Seconds comm = std::accumulate(p.boundary_time.begin(), p.boundary_time.end(), 0.0);
  const double bd = static_cast<double>(s.micro_batches) * static_cast<double>(D);
  const Seconds sd = static_cast<double>(D - 1) / bd * compute + 2.0 * static_cast<double>(D - 2) / bd * comm;
  std::fill(out.per_device.begin(), out.per_device.end(), sd);
  const auto [lo, hi] = std::minmax_element(stage.begin(), stage.end());
  out.imbalance = *hi > 0.0 ? (*hi - *lo) / *hi : 0.0;
  out.imbalanced = out.imbalance > kImbalanceThreshold;
  return out;
}

// Bubble share of a balanced GPipe schedule with no communication.
inline double bubble_ratio(std::uint64_t stages, std::uint64_t micro_batches) {
  return static_cast<double>(stages - 1) / static_cast<double>(stages + micro_batches - 1);
}

// ---------------------------------------------------------------------------
// Memory

inline void fill_weight_terms(MemoryBreakdown& m, Bytes weights, double alpha, Bytes workspace) {
  m.weights = weights;
  m.gradients = weights;
  m.optimizer_states = round_bytes(alpha * static_cast<double>(weights));
  m.workspace = workspace;
}

// Baseline footprint; ZeRO and re-computation are applied separately.
inline MemoryReport memory(const Workload& w, const Strategy& s, const ClusterSpec& c) {
  validate(w, s, c);
  const std::uint64_t D = s.degree;
  const std::uint64_t batch = w.global_batch_size;
  const double alpha = c.optimizer_factor;
  MemoryReport out;
  out.per_device.resize(D);
  switch (s.kind) {
    case ParallelKind::kPipeline: {
      const PipelinePlan p = plan_pipeline(w, s, c);
      const Bytes mb = p.micro_batch_samples;
      for (std::size_t d = 0; d < D; ++d) {
        const auto [first, last] = p.ranges[d];
        Bytes weights = 0, act = 0;
        for (std::size_t i = first; i < last; ++i) {
          weights += w.operators[i].weight_bytes;
          act += w.operators[i].activation_bytes_per_sample;
        }
        // an in-place op ending the stage keeps its already-sent output
        if (d + 1 < D && w.operators[last - 1].backward_depends_on == BackwardDependency::kOutput) {
          act += w.operators[last].activation_bytes_per_sample;
        }
        const Bytes n = live_micro_batches(s.schedule, D, s.micro_batches, d);
        auto& m = out.per_device[d];
        fill_weight_terms(m, weights, alpha, c.workspace_bytes);
        m.activations = n * mb * act;
      }
      break;
    }
    case ParallelKind::kData: {
      const Bytes weights = total_weight_bytes(w);
      const Bytes act = total_activation_bytes(w, batch);
      for (std::size_t d = 0; d < D; ++d) {
        auto& m = out.per_device[d];
        fill_weight_terms(m, weights, alpha, c.workspace_bytes);
        if (s.framework_buffer) m.weights += weights;
        m.activations = split_even(act, D, d);
      }
      break;
    }
    case ParallelKind::kTensor: {
      const LayoutAssignment layouts = derive_layouts(w, s);
      for (std::size_t d = 0; d < D; ++d) {
        Bytes weights = 0, act = 0;
        for (std::size_t i = 0; i < w.size(); ++i) {
          const Operator& op = w.operators[i];
          const Bytes a = batch * op.activation_bytes_per_sample;
          weights += layouts.weight_partitioned(i) ? split_even(op.weight_bytes, D, d) : op.weight_bytes;
          act += layouts.activation_partitioned(i) ? split_even(a, D, d) : a;
        }
        auto& m = out.per_device[d];
        fill_weight_terms(m, weights, alpha, c.workspace_bytes);
        m.activations = act;
      }
      break;
    }
  }
  out.close();
  return out;
}

// Shards gradients and optimizer states (ZeRO-2), and also weights
// (ZeRO-3), across the data-parallel ranks.
inline MemoryReport apply_zero(const MemoryReport& base, const Workload& w, const Strategy& s, const ClusterSpec& c) {
  if (s.kind != ParallelKind::kData) throw Error(ErrorKind::kValidation, "ZeRO applies to data parallelism only");
  MemoryReport out = base;
  if (s.zero_stage == ZeroStage::kNone) return out;
  const std::uint64_t D = s.degree;
  if (out.per_device.size() != D) throw Error(ErrorKind::kValidation, "memory report has the wrong device count");
  const Bytes weights = total_weight_bytes(w);
  const Bytes optimizer = round_bytes(c.optimizer_factor * static_cast<double>(weights));
  for (std::size_t d = 0; d < D; ++d) {
    auto& m = out.per_device[d];
    m.gradients = split_even(weights, D, d);
    m.optimizer_states = split_even(optimizer, D, d);
    if (s.zero_stage == ZeroStage::kZero3) {
      m.weights = split_even(weights, D, d);
      if (s.framework_buffer) m.weights += split_even(weights, D, d);
    }
  }
  out.close();
  return out;
}

// Keeps only each stage's input per in-flight micro-batch, plus the full
// activations of the one micro-batch being back-propagated.
inline MemoryReport apply_recompute(const MemoryReport& base, const Workload& w, const Strategy& s,
                                    const ClusterSpec& c) {
  if (s.kind != ParallelKind::kPipeline) {
    throw Error(ErrorKind::kValidation, "re-computation applies to pipeline parallelism only");
  }
  const PipelinePlan p = plan_pipeline(w, s, c);
  MemoryReport out = base;
  const std::uint64_t D = s.degree;
  if (out.per_device.size() != D) throw Error(ErrorKind::kValidation, "memory report has the wrong device count");
  const Bytes mb = p.micro_batch_samples;
  for (std::size_t d = 0; d < D; ++d) {
    const auto [first, last] = p.ranges[d];
    Bytes act = 0;
    for (std::size_t i = first; i < last; ++i) act += w.operators[i].activation_bytes_per_sample;
    const Bytes n = live_micro_batches(s.schedule, D, s.micro_batches, d);
    out.per_device[d].activations = mb * act + (n - 1) * mb * w.operators[first].activation_bytes_per_sample;
  }
  out.close();
  return out;
}

// ---------------------------------------------------------------------------
// Full estimate

struct Estimate {
  Strategy strategy;  // with resolved stage boundaries
  std::vector<TimeBreakdown> time;
  TimeBreakdown time_mean;
  Seconds iteration_time = 0.0;  // slowest device
  MemoryReport memory;
  CommBreakdown comm;
  std::vector<std::string> warnings;
};

inline Estimate estimate(const Workload& w, const Strategy& strategy, const ClusterSpec& c) {
  validate(w, strategy, c);
  Estimate out;
  out.strategy = resolved(w, strategy);
  const Strategy& s = out.strategy;
  const std::uint64_t D = s.degree;

  out.comm = comm(w, s, c);
  const auto ol = overlap_time(w, s, c, out.comm);
  const auto cp = comp_time(w, s, c, ol);
  const auto rc = recompute_time(w, s, c);
  const SchedOverhead sd = sched_overhead(w, s, c);

  out.time.resize(D);
  for (std::size_t d = 0; d < D; ++d) {
    auto& t = out.time[d];
    t.cm_min = out.comm.per_device[d].min;
    t.cm_wait = out.comm.per_device[d].wait;
    t.cp = cp[d];
    t.ol = ol[d];
    t.sd = sd.per_device[d];
    t.recompute = rc[d];
    t.close();
    out.time_mean.cm_min += t.cm_min / static_cast<double>(D);
    out.time_mean.cm_wait += t.cm_wait / static_cast<double>(D);
    out.time_mean.cp += t.cp / static_cast<double>(D);
    out.time_mean.ol += t.ol / static_cast<double>(D);
    out.time_mean.sd += t.sd / static_cast<double>(D);
    out.time_mean.recompute += t.recompute / static_cast<double>(D);
    out.iteration_time = std::max(out.iteration_time, t.total);
  }
  out.time_mean.close();

  out.memory = memory(w, s, c);
  if (s.kind == ParallelKind::kData && s.zero_stage != ZeroStage::kNone) out.memory = apply_zero(out.memory, w, s, c);
  if (s.kind == ParallelKind::kPipeline && s.recompute) out.memory = apply_recompute(out.memory, w, s, c);

  if (sd.imbalanced) {
    std::ostringstream msg;
    msg << "pipeline stages are imbalanced (" << sd.imbalance * 100.0
        << "% spread); scheduling overhead assumes equal stages, simulate for a tighter figure";
    out.warnings.push_back(msg.str());
  }
  if (s.kind == ParallelKind::kData && w.global_batch_size % D != 0) {
    out.warnings.push_back("global batch does not split evenly across data-parallel devices");
  }
  return out;
}

}  // namespace dtcost
