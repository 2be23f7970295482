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
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dtcost/common.hpp"
#include "dtcost/workload.hpp"

namespace dtcost {

enum class ParallelKind { kData, kTensor, kPipeline };
enum class ZeroStage { kNone, kZero2, kZero3 };
enum class PipelineSchedule { kGPipe, kOneFOneB };
// kBlocking serializes compute and P2P and barriers every forward
// micro-batch across devices, as some framework pipelines do.
enum class SyncMode { kOverlapped, kBlocking };

inline constexpr Bytes kDefaultBucketBytes = 25 * kMiB;

struct Strategy {
  ParallelKind kind = ParallelKind::kData;
  std::uint64_t degree = 1;
  std::uint64_t micro_batches = 1;
  Bytes bucket_bytes = kDefaultBucketBytes;
  ZeroStage zero_stage = ZeroStage::kNone;
  bool recompute = false;
  PipelineSchedule schedule = PipelineSchedule::kGPipe;
  // Index of the first operator of stages 2..D. Empty means "partition
  // automatically" for pipeline strategies.
  std::vector<std::size_t> stage_boundaries;
  SyncMode sync_mode = SyncMode::kOverlapped;
  // Data parallel only: count the framework's gradient-bucket copy of the
  // weights (doubles the weight term).
  bool framework_buffer = false;

  friend bool operator==(const Strategy&, const Strategy&) = default;
};

inline void validate_boundaries(std::span<const std::size_t> boundaries, std::size_t num_ops,
                                std::uint64_t degree) {
  if (boundaries.size() + 1 != degree) {
    throw Error(ErrorKind::kValidation, "expected " + std::to_string(degree - 1) + " stage boundaries, got " +
                                            std::to_string(boundaries.size()));
  }
  std::size_t prev = 0;
  for (std::size_t b : boundaries) {
    if (b <= prev || b >= num_ops) {
      throw Error(ErrorKind::kValidation,
                  "stage boundaries must be strictly increasing and inside (0, " + std::to_string(num_ops) + ")");
    }
    prev = b;
  }
}

// Structural checks only; boundaries may still be empty for a pipeline.
inline void validate(const Workload& w, const Strategy& s) {
  validate(w);
  if (s.degree < 1) throw Error(ErrorKind::kValidation, "degree must be >= 1");
  if (s.micro_batches < 1) throw Error(ErrorKind::kValidation, "micro_batches must be >= 1");
  if (s.bucket_bytes < 1) throw Error(ErrorKind::kValidation, "bucket_bytes must be >= 1");
  if (s.zero_stage != ZeroStage::kNone && s.kind != ParallelKind::kData) {
    throw Error(ErrorKind::kValidation, "ZeRO applies to data parallelism only");
  }
  if (s.recompute && s.kind != ParallelKind::kPipeline) {
    throw Error(ErrorKind::kValidation, "re-computation applies to pipeline parallelism only");
  }
  if (s.framework_buffer && s.kind != ParallelKind::kData) {
    throw Error(ErrorKind::kValidation, "framework_buffer applies to data parallelism only");
  }
  if (s.kind == ParallelKind::kPipeline) {
    if (s.degree > w.size()) {
      throw Error(ErrorKind::kInfeasible, std::to_string(s.degree) + " pipeline stages for " +
                                              std::to_string(w.size()) + " operators");
    }
    if (w.global_batch_size % s.micro_batches != 0) {
      throw Error(ErrorKind::kValidation, "global batch " + std::to_string(w.global_batch_size) +
                                              " is not divisible into " + std::to_string(s.micro_batches) +
                                              " micro-batches");
    }
    if (!s.stage_boundaries.empty() || s.degree == 1) validate_boundaries(s.stage_boundaries, w.size(), s.degree);
  } else if (!s.stage_boundaries.empty()) {
    throw Error(ErrorKind::kValidation, "stage_boundaries only apply to pipeline parallelism");
  }
}

// ---------------------------------------------------------------------------
// Layouts

enum class OperatorLayout { kExclusive, kShared };
enum class TensorLayout { kReplicated, kPartitioned };

struct OperatorLayouts {
  OperatorLayout op = OperatorLayout::kShared;
  // Absent under the exclusive (pipeline) layout.
  std::optional<TensorLayout> weight;
  std::optional<TensorLayout> activation;

  friend bool operator==(const OperatorLayouts&, const OperatorLayouts&) = default;
};

struct LayoutAssignment {
  std::vector<OperatorLayouts> per_operator;

  bool weight_partitioned(std::size_t i) const { return per_operator[i].weight == TensorLayout::kPartitioned; }
  bool activation_partitioned(std::size_t i) const {
    return per_operator[i].activation == TensorLayout::kPartitioned;
  }
};

inline OperatorLayouts layouts_for_pattern(TensorPattern p) {
  using enum TensorLayout;
  switch (p) {
    case TensorPattern::kAR: return {OperatorLayout::kShared, kReplicated, kReplicated};
    case TensorPattern::kAP: return {OperatorLayout::kShared, kPartitioned, kPartitioned};
    case TensorPattern::kPRWeightPartitioned: return {OperatorLayout::kShared, kPartitioned, kReplicated};
    case TensorPattern::kPRWeightReplicated: return {OperatorLayout::kShared, kReplicated, kPartitioned};
  }
  return {};
}

inline LayoutAssignment derive_layouts(const Workload& w, const Strategy& s) {
  validate(w, s);
  LayoutAssignment out;
  out.per_operator.reserve(w.size());
  for (const auto& op : w.operators) {
    switch (s.kind) {
      case ParallelKind::kData:
        // batch split: replicated weights, partitioned activations
        out.per_operator.push_back({OperatorLayout::kShared, TensorLayout::kReplicated, TensorLayout::kPartitioned});
        break;
      case ParallelKind::kPipeline:
        out.per_operator.push_back({OperatorLayout::kExclusive, std::nullopt, std::nullopt});
        break;
      case ParallelKind::kTensor:
        out.per_operator.push_back(layouts_for_pattern(op.tensor_pattern));
        break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stage partitioning

struct StagePartition {
  std::vector<std::size_t> boundaries;
  std::vector<double> stage_costs;
  double max_stage_cost = 0.0;
};

// Contiguous split of `costs` into `stages` parts minimising the largest
// part. Among optimal splits the lexicographically smallest boundary
// sequence is returned. Range sums are accumulated left to right so that a
// given range always has the same floating-point cost.
inline StagePartition partition_stages(std::span<const double> costs, std::uint64_t stages) {
  const std::size_t n = costs.size();
  if (stages < 1) throw Error(ErrorKind::kDomain, "stage count must be >= 1");
  if (stages > n) {
    throw Error(ErrorKind::kInfeasible,
                "cannot split " + std::to_string(n) + " operators into " + std::to_string(stages) + " stages");
  }
  for (double c : costs) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw Error(ErrorKind::kDomain, "operator costs must be finite and >= 0");
  }

  // range[i][j - i - 1] = cost of ops [i, j)
  std::vector<std::vector<double>> range(n);
  for (std::size_t i = 0; i < n; ++i) {
    range[i].resize(n - i);
    double acc = 0.0;
    for (std::size_t j = i; j < n; ++j) {
      acc += costs[j];
      range[i][j - i] = acc;
    }
  }
  auto cost = [&](std::size_t i, std::size_t j) { return range[i][j - i - 1]; };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  const std::size_t k_max = static_cast<std::size_t>(stages);
  // suffix[k][i] = best max-stage cost for ops [i, n) in k stages
  std::vector<std::vector<double>> suffix(k_max + 1, std::vector<double>(n + 1, kInf));
  for (std::size_t i = 0; i < n; ++i) suffix[1][i] = cost(i, n);
  for (std::size_t k = 2; k <= k_max; ++k) {
    for (std::size_t i = 0; i + k <= n; ++i) {
      double best = kInf;
      for (std::size_t e = i + 1; e + (k - 1) <= n; ++e) {
        best = std::min(best, std::max(cost(i, e), suffix[k - 1][e]));
      }
      suffix[k][i] = best;
    }
  }

  StagePartition out;
  out.max_stage_cost = suffix[k_max][0];
  std::size_t start = 0;
  for (std::size_t k = k_max; k > 1; --k) {
    for (std::size_t e = start + 1; e + (k - 1) <= n; ++e) {
      if (cost(start, e) <= out.max_stage_cost && suffix[k - 1][e] <= out.max_stage_cost) {
        out.boundaries.push_back(e);
        out.stage_costs.push_back(cost(start, e));
        start = e;
        break;
      }
    }
  }
  out.stage_costs.push_back(cost(start, n));
  return out;
}

// Per-operator cost for partitioning: full-batch forward + backward time.
inline std::vector<double> step_costs(const Workload& w) {
  std::vector<double> costs;
  costs.reserve(w.size());
  const double batch = static_cast<double>(w.global_batch_size);
  for (const auto& op : w.operators) costs.push_back(batch * op.step_time_per_sample());
  return costs;
}

inline StagePartition partition_stages(const Workload& w, std::uint64_t stages) {
  const auto costs = step_costs(w);
  return partition_stages(costs, stages);
}

inline std::size_t stage_of(std::size_t op_index, std::span<const std::size_t> boundaries) {
  return static_cast<std::size_t>(std::upper_bound(boundaries.begin(), boundaries.end(), op_index) -
                                  boundaries.begin());
}

// Half-open operator ranges [first, last) of every stage.
inline std::vector<std::pair<std::size_t, std::size_t>> stage_ranges(std::size_t num_ops,
                                                                     std::span<const std::size_t> boundaries) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t start = 0;
  for (std::size_t b : boundaries) {
    out.emplace_back(start, b);
    start = b;
  }
  out.emplace_back(start, num_ops);
  return out;
}

// Full-batch bytes entering stages 2..D (input of each stage's first op).
inline std::vector<Bytes> boundary_activations(const Workload& w, std::span<const std::size_t> boundaries,
                                               std::uint64_t batch) {
  std::vector<Bytes> out;
  out.reserve(boundaries.size());
  for (std::size_t b : boundaries) out.push_back(batch * w.operators.at(b).activation_bytes_per_sample);
  return out;
}

// Boundaries to use for a pipeline strategy: the declared ones, or an
// optimal partition on forward + backward time.
inline std::vector<std::size_t> resolve_boundaries(const Workload& w, const Strategy& s) {
  if (s.kind != ParallelKind::kPipeline) return {};
  if (!s.stage_boundaries.empty() || s.degree == 1) return s.stage_boundaries;
  return partition_stages(w, s.degree).boundaries;
}

inline Strategy resolved(const Workload& w, Strategy s) {
  validate(w, s);
  s.stage_boundaries = resolve_boundaries(w, s);
  if (s.kind == ParallelKind::kPipeline) validate_boundaries(s.stage_boundaries, w.size(), s.degree);
  return s;
}

}  // namespace dtcost
