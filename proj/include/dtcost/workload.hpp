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

#include <cstdint>
#include <string>
#include <vector>

#include "dtcost/common.hpp"

namespace dtcost {

// How an operator's tensors are laid out when tensor parallelism is applied.
// PR (mixed) operators are split by which operand stays replicated.
enum class TensorPattern {
  kAR,                    // weights and inputs replicated
  kAP,                    // weights and inputs partitioned
  kPRWeightReplicated,    // weight replicated, activation partitioned
  kPRWeightPartitioned,   // weight partitioned, activation replicated
};

// Which activation the backward pass of an operator reads. In-place
// operators (ReLU) depend on their output.
enum class BackwardDependency { kInput, kOutput };

struct Operator {
  std::string name;
  Bytes weight_bytes = 0;
  // Activation tensor bytes for one sample. Doubles as the operator's input
  // tensor size when it starts a pipeline stage.
  Bytes activation_bytes_per_sample = 0;
  Seconds fwd_time_per_sample = 0.0;
  Seconds bwd_time_per_sample = 0.0;
  TensorPattern tensor_pattern = TensorPattern::kPRWeightReplicated;
  BackwardDependency backward_depends_on = BackwardDependency::kInput;
  // Extra collective traffic (layout conversion, halo exchange, declared
  // output aggregation) under tensor parallelism, per sample.
  Bytes comm_extra_bytes_per_sample = 0;

  Seconds step_time_per_sample() const { return fwd_time_per_sample + bwd_time_per_sample; }

  friend bool operator==(const Operator&, const Operator&) = default;
};

struct Workload {
  std::vector<Operator> operators;
  std::uint64_t global_batch_size = 1;
  Bytes bytes_per_element = 4;

  std::size_t size() const { return operators.size(); }

  friend bool operator==(const Workload&, const Workload&) = default;
};

// Backward time used when only a forward time is known.
inline Seconds default_bwd_time(Seconds fwd) { return 2.0 * fwd; }

inline void validate(const Workload& w) {
  if (w.operators.empty()) throw Error(ErrorKind::kValidation, "workload has no operators");
  if (w.global_batch_size < 1) throw Error(ErrorKind::kValidation, "global_batch_size must be >= 1");
  if (w.bytes_per_element < 1) throw Error(ErrorKind::kValidation, "bytes_per_element must be >= 1");
  for (const auto& op : w.operators) {
    if (op.fwd_time_per_sample < 0.0 || op.bwd_time_per_sample < 0.0 ||
        !std::isfinite(op.fwd_time_per_sample) || !std::isfinite(op.bwd_time_per_sample)) {
      throw Error(ErrorKind::kValidation, "operator '" + op.name + "' has a negative or non-finite time");
    }
  }
}

inline Bytes total_weight_bytes(const Workload& w) {
  Bytes sum = 0;
  for (const auto& op : w.operators) sum += op.weight_bytes;
  return sum;
}

inline Bytes total_activation_bytes(const Workload& w, std::uint64_t batch) {
  if (batch < 1) throw Error(ErrorKind::kDomain, "batch must be >= 1");
  Bytes per_sample = 0;
  for (const auto& op : w.operators) per_sample += op.activation_bytes_per_sample;
  return batch * per_sample;
}

inline Seconds total_step_time_per_sample(const Workload& w) {
  Seconds sum = 0.0;
  for (const auto& op : w.operators) sum += op.step_time_per_sample();
  return sum;
}

struct TransformerOptions {
  // Stored activation bytes per encoder per sample, in units of
  // seq_len * hidden * bytes_per_element. 23 reproduces 8.63 MiB for
  // Bert-base at seq_len 128; it is a calibration, not a derivation.
  double activation_multiplier = 23.0;
  Seconds fwd_time_per_sample = 0.0;
  // Negative means "use the 2x forward rule".
  Seconds bwd_time_per_sample = -1.0;
  std::uint64_t global_batch_size = 32;
  // Declare the two output all-reduces (attention and FFN) a Megatron
  // encoder needs under tensor parallelism.
  bool declare_output_allreduce = true;
  std::string name_prefix = "encoder";
};

// Parameters of one encoder: QKV + output projections, FFN and two
// LayerNorms, all with biases.
inline std::uint64_t transformer_encoder_params(std::uint64_t hidden, std::uint64_t ffn) {
  return 4 * hidden * hidden + 4 * hidden   // attention projections
         + 2 * hidden * ffn + ffn + hidden  // feed-forward
         + 4 * hidden;                      // two LayerNorms
}

inline Workload build_transformer(std::uint64_t hidden, std::uint64_t ffn, std::uint64_t heads,
                                  std::uint64_t seq_len, std::uint64_t layers,
                                  Bytes bytes_per_element, const TransformerOptions& opt = {}) {
  if (hidden < 1 || ffn < 1 || heads < 1 || seq_len < 1 || layers < 1 || bytes_per_element < 1) {
    throw Error(ErrorKind::kShape, "transformer dimensions must all be >= 1");
  }
  if (hidden % heads != 0) {
    throw Error(ErrorKind::kShape, "hidden size " + std::to_string(hidden) +
                                       " is not divisible by " + std::to_string(heads) + " heads");
  }
  if (opt.activation_multiplier < 0.0) {
    throw Error(ErrorKind::kShape, "activation multiplier must be non-negative");
  }
  const Bytes token_bytes = seq_len * hidden * bytes_per_element;
  Operator enc;
  enc.weight_bytes = bytes_per_element * transformer_encoder_params(hidden, ffn);
  enc.activation_bytes_per_sample = round_bytes(opt.activation_multiplier * static_cast<double>(token_bytes));
  enc.fwd_time_per_sample = opt.fwd_time_per_sample;
  enc.bwd_time_per_sample =
      opt.bwd_time_per_sample < 0.0 ? default_bwd_time(opt.fwd_time_per_sample) : opt.bwd_time_per_sample;
  enc.tensor_pattern = TensorPattern::kPRWeightPartitioned;
  enc.backward_depends_on = BackwardDependency::kInput;
  enc.comm_extra_bytes_per_sample = opt.declare_output_allreduce ? 2 * token_bytes : 0;

  Workload w;
  w.bytes_per_element = bytes_per_element;
  w.global_batch_size = opt.global_batch_size;
  w.operators.reserve(layers);
  for (std::uint64_t i = 0; i < layers; ++i) {
    enc.name = opt.name_prefix + "_" + std::to_string(i);
    w.operators.push_back(enc);
  }
  return w;
}

struct ConvOptions {
  Seconds fwd_time_per_sample = 0.0;
  Seconds bwd_time_per_sample = -1.0;
  // Set for in-place activations (ReLU) whose backward reads the output.
  bool in_place_activation = false;
  std::string name = "conv";
};

inline Operator build_cnn_conv(std::uint64_t in_channels, std::uint64_t out_channels, std::uint64_t kernel,
                               std::uint64_t stride, std::uint64_t in_hw, Bytes bytes_per_element,
                               const ConvOptions& opt = {}) {
  if (in_channels < 1 || out_channels < 1 || kernel < 1 || stride < 1 || in_hw < 1 || bytes_per_element < 1) {
    throw Error(ErrorKind::kShape, "convolution dimensions must all be >= 1");
  }
  const std::uint64_t out_hw = (in_hw + stride - 1) / stride;
  Operator op;
  op.name = opt.name;
  op.weight_bytes = kernel * kernel * in_channels * out_channels * bytes_per_element;
  op.activation_bytes_per_sample = out_channels * out_hw * out_hw * bytes_per_element;
  op.fwd_time_per_sample = opt.fwd_time_per_sample;
  op.bwd_time_per_sample =
      opt.bwd_time_per_sample < 0.0 ? default_bwd_time(opt.fwd_time_per_sample) : opt.bwd_time_per_sample;
  op.tensor_pattern = TensorPattern::kPRWeightReplicated;
  op.backward_depends_on = opt.in_place_activation ? BackwardDependency::kOutput : BackwardDependency::kInput;
  // Feature maps are split by height; neighbours exchange kernel/2 border rows.
  op.comm_extra_bytes_per_sample = (kernel / 2) * in_hw * in_channels * bytes_per_element;
  return op;
}

}  // namespace dtcost
