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
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <string>
#include <tuple>
#include <vector>

#include "dtcost/cluster.hpp"
#include "dtcost/common.hpp"
#include "dtcost/estimator.hpp"
#include "dtcost/strategy.hpp"
#include "dtcost/workload.hpp"

namespace dtcost {

enum class SimEventKind { kFwd, kBwd, kSend, kRecv, kAllReduce, kIdle };

inline const char* to_string(SimEventKind k) {
  switch (k) {
    case SimEventKind::kFwd: return "fwd";
    case SimEventKind::kBwd: return "bwd";
    case SimEventKind::kSend: return "send";
    case SimEventKind::kRecv: return "recv";
    case SimEventKind::kAllReduce: return "allreduce";
    case SimEventKind::kIdle: return "idle";
  }
  return "?";
}

inline bool is_compute(SimEventKind k) { return k == SimEventKind::kFwd || k == SimEventKind::kBwd; }

struct SimEvent {
  std::size_t device = 0;
  SimEventKind kind = SimEventKind::kFwd;
  std::size_t micro_batch = 0;
  std::size_t index = 0;  // stage for pipeline events, bucket for all-reduces
  Seconds start = 0.0;
  Seconds end = 0.0;

  friend bool operator==(const SimEvent&, const SimEvent&) = default;
};

struct DeviceStats {
  Seconds busy_compute = 0.0;
  Seconds comm_total = 0.0;
  Seconds comm_overlapped = 0.0;
  Seconds idle = 0.0;
  std::uint64_t peak_live_micro_batches = 0;
  Bytes peak_activation_bytes = 0;
  double comm_bytes = 0.0;
};

struct SimResult {
  std::vector<DeviceStats> devices;
  Seconds makespan = 0.0;
  Bytes total_comm_bytes = 0;  // summed over devices
  // Data parallel: time from the end of backward compute to the end of the
  // last all-reduce.
  Seconds comm_tail = 0.0;
  std::vector<SimEvent> events;
};

namespace detail {

using Interval = std::pair<Seconds, Seconds>;

inline std::vector<Interval> merged(std::vector<Interval> v) {
  std::sort(v.begin(), v.end());
  std::vector<Interval> out;
  for (const auto& iv : v) {
    if (iv.second <= iv.first) continue;
    if (!out.empty() && iv.first <= out.back().second) {
      out.back().second = std::max(out.back().second, iv.second);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

inline Seconds measure(const std::vector<Interval>& v) {
  Seconds s = 0.0;
  for (const auto& [a, b] : v) s += b - a;
  return s;
}

inline Seconds intersection(const std::vector<Interval>& a, const std::vector<Interval>& b) {
  Seconds s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const Seconds lo = std::max(a[i].first, b[j].first);
    const Seconds hi = std::min(a[i].second, b[j].second);
    if (hi > lo) s += hi - lo;
    (a[i].second < b[j].second) ? ++i : ++j;
  }
  return s;
}

// Canonical event order: time, then device, then kind.
inline void sort_events(std::vector<SimEvent>& events) {
  std::stable_sort(events.begin(), events.end(), [](const SimEvent& x, const SimEvent& y) {
    return std::tie(x.start, x.device, x.kind, x.end, x.micro_batch, x.index) <
           std::tie(y.start, y.device, y.kind, y.end, y.micro_batch, y.index);
  });
}

// Fills busy/comm/overlap/idle from the trace. Compute intervals never
// overlap each other on a device, nor do comm intervals.
inline void account(SimResult& r) {
  const std::size_t D = r.devices.size();
  std::vector<std::vector<Interval>> compute(D), comm(D);
  for (const auto& e : r.events) {
    r.makespan = std::max(r.makespan, e.end);
    if (is_compute(e.kind)) {
      compute[e.device].emplace_back(e.start, e.end);
    } else if (e.kind != SimEventKind::kIdle) {
      comm[e.device].emplace_back(e.start, e.end);
    }
  }
  for (std::size_t d = 0; d < D; ++d) {
    auto& st = r.devices[d];
    const auto cp = merged(compute[d]);
    const auto cm = merged(comm[d]);
    st.busy_compute = measure(cp);
    st.comm_total = measure(cm);
    st.comm_overlapped = intersection(cp, cm);
    std::vector<Interval> all = cp;
    all.insert(all.end(), cm.begin(), cm.end());
    st.idle = r.makespan - measure(merged(std::move(all)));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pipeline simulator

struct PipelineSimOptions {
  bool keep_trace = true;
};

// Order in which a stage runs its forward (true) and backward (false)
// passes.
inline std::vector<std::pair<bool, std::size_t>> stage_order(PipelineSchedule schedule, std::size_t stages,
                                                             std::size_t micro_batches, std::size_t stage) {
  std::vector<std::pair<bool, std::size_t>> order;
  order.reserve(2 * micro_batches);
  if (schedule == PipelineSchedule::kGPipe) {
    for (std::size_t i = 0; i < micro_batches; ++i) order.emplace_back(true, i);
    for (std::size_t i = 0; i < micro_batches; ++i) order.emplace_back(false, i);
    return order;
  }
  const std::size_t warmup = std::min(stages - stage - 1, micro_batches);
  std::size_t next_f = 0, next_b = 0;
  for (; next_f < warmup; ++next_f) order.emplace_back(true, next_f);
  while (next_f < micro_batches) {
    order.emplace_back(true, next_f++);
    order.emplace_back(false, next_b++);
  }
  while (next_b < micro_batches) order.emplace_back(false, next_b++);
  return order;
}

inline SimResult simulate_pipeline(const Workload& w, const Strategy& strategy, const ClusterSpec& c,
                                   const PipelineSimOptions& opt = {}) {
  validate(w, strategy, c);
  if (strategy.kind != ParallelKind::kPipeline) {
    throw Error(ErrorKind::kValidation, "simulate_pipeline needs a pipeline strategy");
  }
  const Strategy s = resolved(w, strategy);
  const PipelinePlan plan = plan_pipeline(w, s, c);
  const std::size_t D = s.degree;
  const std::size_t B = s.micro_batches;
  const bool blocking = s.sync_mode == SyncMode::kBlocking;
  const double inv_b = 1.0 / static_cast<double>(B);
  const Bytes mb = plan.micro_batch_samples;

  std::vector<Seconds> fwd(D), bwd(D);
  std::vector<Bytes> full_bytes(D), retained_bytes(D);
  for (std::size_t d = 0; d < D; ++d) {
    fwd[d] = plan.stage_fwd[d] * inv_b;
    bwd[d] = plan.stage_bwd[d] * inv_b + (s.recompute ? fwd[d] : 0.0);
    const auto [first, last] = plan.ranges[d];
    Bytes act = 0;
    for (std::size_t i = first; i < last; ++i) act += w.operators[i].activation_bytes_per_sample;
    full_bytes[d] = mb * act;
    if (s.recompute) {
      retained_bytes[d] = mb * w.operators[first].activation_bytes_per_sample;
    } else {
      if (d + 1 < D && w.operators[last - 1].backward_depends_on == BackwardDependency::kOutput) {
        full_bytes[d] += mb * w.operators[last].activation_bytes_per_sample;
      }
      retained_bytes[d] = full_bytes[d];
    }
  }

  std::vector<std::vector<std::pair<bool, std::size_t>>> order(D);
  for (std::size_t d = 0; d < D; ++d) order[d] = stage_order(s.schedule, D, B, d);

  constexpr Seconds kNever = std::numeric_limits<Seconds>::infinity();
  // act_ready[d][i]: forward input of micro-batch i is on stage d.
  std::vector<std::vector<Seconds>> act_ready(D, std::vector<Seconds>(B, kNever));
  std::vector<std::vector<Seconds>> grad_ready(D, std::vector<Seconds>(B, kNever));
  for (std::size_t i = 0; i < B; ++i) act_ready[0][i] = 0.0;
  for (std::size_t i = 0; i < B; ++i) grad_ready[D - 1][i] = 0.0;
  // Blocking mode: devices done with micro-batch i's forward (incl. send).
  std::vector<std::size_t> fwd_settled(B, 0);

  std::vector<std::size_t> pos(D, 0);
  std::vector<Seconds> compute_free(D, 0.0), comm_free(D, 0.0);
  std::vector<std::uint64_t> live(D, 0);
  std::vector<Bytes> live_bytes(D, 0);

  SimResult result;
  result.devices.resize(D);
  auto note_peak = [&](std::size_t d, Bytes extra) {
    auto& st = result.devices[d];
    st.peak_live_micro_batches = std::max(st.peak_live_micro_batches, live[d]);
    st.peak_activation_bytes = std::max(st.peak_activation_bytes, live_bytes[d] + extra);
  };

  struct Transfer {
    bool forward;  // activation (true) or gradient (false)
    std::size_t from, to, micro;
    Seconds ready;
  };
  std::vector<Transfer> pending;

  enum class Done { kCompute, kTransfer };
  struct Completion {
    Seconds time;
    std::uint64_t seq;
    Done what;
    std::size_t device;  // compute: device; transfer: sender
    bool forward;
    std::size_t micro;
    std::size_t to;
  };
  auto later = [](const Completion& a, const Completion& b) {
    return std::tie(a.time, a.seq) > std::tie(b.time, b.seq);
  };
  std::priority_queue<Completion, std::vector<Completion>, decltype(later)> queue(later);
  std::uint64_t seq = 0;

  auto record = [&](std::size_t d, SimEventKind k, std::size_t micro, std::size_t idx, Seconds a, Seconds b) {
    result.events.push_back({d, k, micro, idx, a, b});
  };

  std::size_t remaining = 2 * D * B;
  Seconds now = 0.0;
  while (true) {
    // start transfers first so blocking devices send before computing on
    bool progress = true;
    while (progress) {
      progress = false;
      std::stable_sort(pending.begin(), pending.end(), [](const Transfer& a, const Transfer& b) {
        return std::tie(a.ready, a.from, a.forward, a.micro) < std::tie(b.ready, b.from, b.forward, b.micro);
      });
      for (auto it = pending.begin(); it != pending.end();) {
        const Transfer& t = *it;
        const bool free = t.ready <= now && comm_free[t.from] <= now && comm_free[t.to] <= now &&
                          (!blocking || (compute_free[t.from] <= now && compute_free[t.to] <= now));
        if (!free) {
          ++it;
          continue;
        }
        const std::size_t boundary = std::min(t.from, t.to);
        const Seconds dur = plan.boundary_micro_time[boundary];
        const double bytes = static_cast<double>(plan.boundary_micro_bytes[boundary]);
        comm_free[t.from] = comm_free[t.to] = now + dur;
        record(t.from, SimEventKind::kSend, t.micro, t.from, now, now + dur);
        record(t.to, SimEventKind::kRecv, t.micro, t.to, now, now + dur);
        result.devices[t.from].comm_bytes += bytes;
        result.devices[t.to].comm_bytes += bytes;
        result.total_comm_bytes += 2 * plan.boundary_micro_bytes[boundary];
        queue.push({now + dur, seq++, Done::kTransfer, t.from, t.forward, t.micro, t.to});
        it = pending.erase(it);
        progress = true;
      }
      for (std::size_t d = 0; d < D; ++d) {
        if (pos[d] >= order[d].size() || compute_free[d] > now) continue;
        if (blocking && comm_free[d] > now) continue;
        const auto [is_fwd, i] = order[d][pos[d]];
        if (is_fwd) {
          if (act_ready[d][i] > now) continue;
          if (blocking && i > 0 && fwd_settled[i - 1] < D) continue;
        } else if (grad_ready[d][i] > now) {
          continue;
        }
        const Seconds dur = is_fwd ? fwd[d] : bwd[d];
        compute_free[d] = now + dur;
        record(d, is_fwd ? SimEventKind::kFwd : SimEventKind::kBwd, i, d, now, now + dur);
        if (!is_fwd && s.recompute) note_peak(d, full_bytes[d] - retained_bytes[d]);
        queue.push({now + dur, seq++, Done::kCompute, d, is_fwd, i, d});
        ++pos[d];
        progress = true;
      }
    }
    if (queue.empty()) break;
    now = queue.top().time;
    while (!queue.empty() && queue.top().time == now) {
      const Completion e = queue.top();
      queue.pop();
      if (e.what == Done::kCompute) {
        --remaining;
        const std::size_t d = e.device;
        if (e.forward) {
          ++live[d];
          live_bytes[d] += retained_bytes[d];
          note_peak(d, 0);
          if (d + 1 < D) {
            pending.push_back({true, d, d + 1, e.micro, now});
          } else {
            ++fwd_settled[e.micro];
          }
        } else {
          --live[d];
          live_bytes[d] -= retained_bytes[d];
          if (d > 0) pending.push_back({false, d, d - 1, e.micro, now});
        }
      } else if (e.forward) {
        act_ready[e.to][e.micro] = now;
        ++fwd_settled[e.micro];
      } else {
        grad_ready[e.to][e.micro] = now;
      }
    }
  }
  if (remaining != 0 || !pending.empty()) {
    throw Error(ErrorKind::kInfeasible, "pipeline schedule deadlocked");
  }

  detail::sort_events(result.events);
  detail::account(result);
  if (!opt.keep_trace) result.events.clear();
  return result;
}

// ---------------------------------------------------------------------------
// Data-parallel bucketed all-reduce simulator

inline SimResult simulate_data_parallel(const Workload& w, const Strategy& s, const ClusterSpec& c,
                                        bool keep_trace = true) {
  validate(w, s, c);
  if (s.kind != ParallelKind::kData) throw Error(ErrorKind::kValidation, "simulate_data_parallel needs a data strategy");
  const std::size_t D = s.degree;
  const double samples = static_cast<double>(w.global_batch_size) / static_cast<double>(D);
  const BandwidthModel& bw = collective_model(c, D);
  std::vector<Seconds> skew(D, 0.0);
  if (!c.launch_skew.empty()) std::copy_n(c.launch_skew.begin(), D, skew.begin());
  const Seconds max_skew = *std::max_element(skew.begin(), skew.end());

  SimResult result;
  result.devices.resize(D);

  Seconds fwd = 0.0;
  for (const auto& op : w.operators) fwd += samples * op.fwd_time_per_sample;

  // Backward in reverse chain order; a bucket is ready once the gradients
  // filling it exist, the last partial bucket when backward ends.
  struct Bucket {
    Bytes bytes;
    Seconds ready;
  };
  std::vector<Bucket> buckets;
  std::vector<std::pair<Seconds, Seconds>> bwd_ops;
  Seconds t = fwd;
  Bytes pending = 0;
  for (auto it = w.operators.rbegin(); it != w.operators.rend(); ++it) {
    const Seconds dur = samples * it->bwd_time_per_sample;
    bwd_ops.emplace_back(t, t + dur);
    t += dur;
    pending += it->weight_bytes;
    while (pending >= s.bucket_bytes) {
      buckets.push_back({s.bucket_bytes, t});
      pending -= s.bucket_bytes;
    }
  }
  const Seconds bwd_end = t;
  if (pending > 0) buckets.push_back({pending, bwd_end});

  for (std::size_t d = 0; d < D; ++d) {
    result.events.push_back({d, SimEventKind::kFwd, 0, 0, 0.0, fwd});
    for (std::size_t k = 0; k < bwd_ops.size(); ++k) {
      result.events.push_back({d, SimEventKind::kBwd, 0, w.size() - 1 - k, bwd_ops[k].first, bwd_ops[k].second});
    }
  }

  Seconds end = bwd_end;
  if (D > 1) {
    Seconds comm_free = 0.0;
    for (std::size_t k = 0; k < buckets.size(); ++k) {
      const Bucket& b = buckets[k];
      const double v = allreduce_device_volume(static_cast<double>(b.bytes), D);
      const Seconds dur = transfer_time(bw, v, static_cast<double>(b.bytes));
      // the collective starts once the slowest rank has launched it
      const Seconds start = std::max(b.ready + max_skew, comm_free);
      for (std::size_t d = 0; d < D; ++d) {
        // rank d waits from its own launch until the collective starts
        const Seconds joined = std::max(b.ready + skew[d], comm_free);
        result.events.push_back({d, SimEventKind::kAllReduce, 0, k, joined, start + dur});
        result.devices[d].comm_bytes += v;
      }
      comm_free = start + dur;
      result.total_comm_bytes += allreduce_total_volume(b.bytes, D);
    }
    end = std::max(end, comm_free);
  }
  result.comm_tail = end - bwd_end;

  detail::sort_events(result.events);
  detail::account(result);
  if (!keep_trace) result.events.clear();
  return result;
}

inline SimResult simulate(const Workload& w, const Strategy& s, const ClusterSpec& c) {
  switch (s.kind) {
    case ParallelKind::kPipeline: return simulate_pipeline(w, s, c);
    case ParallelKind::kData: return simulate_data_parallel(w, s, c);
    case ParallelKind::kTensor: break;
  }
  throw Error(ErrorKind::kValidation, "no simulator for tensor parallelism");
}

// ---------------------------------------------------------------------------
// Analytic vs simulated comparison

struct Tolerances {
  double relative = 1e-6;
  // Absolute floor below which both values count as equal (seconds/bytes).
  double absolute = 1e-12;
};

struct CompareRow {
  std::string component;
  double analytic = 0.0;
  double simulated = 0.0;
  double deviation = 0.0;  // relative
  bool pass = false;
};

struct CompareReport {
  std::vector<CompareRow> rows;
  std::vector<std::string> warnings;
  bool all_pass = true;
};

inline double relative_deviation(double a, double b, double absolute_floor) {
  const double diff = std::abs(a - b);
  if (diff <= absolute_floor) return 0.0;
  return diff / std::max(std::abs(a), std::abs(b));
}

// Device means of each time component, plus per-device peak activation
// memory for pipelines. The simulator models no compute contention, so
// compare against estimates made with contention_factor = 0.
inline CompareReport compare(const Estimate& analytic, const SimResult& sim, const Tolerances& tol = {}) {
  const std::size_t D = analytic.time.size();
  if (D == 0 || sim.devices.size() != D) {
    throw Error(ErrorKind::kValidation, "estimate and simulation cover different device counts");
  }
  CompareReport report;
  report.warnings = analytic.warnings;
  auto add = [&](std::string name, double a, double s) {
    CompareRow row{std::move(name), a, s, relative_deviation(a, s, tol.absolute), false};
    row.pass = row.deviation <= tol.relative;
    report.all_pass = report.all_pass && row.pass;
    report.rows.push_back(std::move(row));
  };
  DeviceStats mean;
  for (const auto& st : sim.devices) {
    mean.busy_compute += st.busy_compute / static_cast<double>(D);
    mean.comm_total += st.comm_total / static_cast<double>(D);
    mean.comm_overlapped += st.comm_overlapped / static_cast<double>(D);
    mean.idle += st.idle / static_cast<double>(D);
  }
  const TimeBreakdown& t = analytic.time_mean;
  add("t_cm", t.cm(), mean.comm_total);
  add("t_cp", t.cp, mean.busy_compute);
  add("t_ol", t.ol, mean.comm_overlapped);
  add("t_sd", t.sd, mean.idle);
  add("t_total", t.total, sim.makespan);
  add("comm_bytes", static_cast<double>(analytic.comm.total_volume), static_cast<double>(sim.total_comm_bytes));
  if (analytic.strategy.kind == ParallelKind::kPipeline) {
    for (std::size_t d = 0; d < D; ++d) {
      add("activations[" + std::to_string(d) + "]", static_cast<double>(analytic.memory.per_device[d].activations),
          static_cast<double>(sim.devices[d].peak_activation_bytes));
    }
  }
  return report;
}

}  // namespace dtcost
