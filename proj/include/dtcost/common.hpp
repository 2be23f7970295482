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

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dtcost {

using Bytes = std::uint64_t;
using Seconds = double;

inline constexpr Bytes kKiB = 1024;
inline constexpr Bytes kMiB = 1024 * kKiB;
inline constexpr Bytes kGiB = 1024 * kMiB;

enum class ErrorKind {
  kShape,       // builder dimensions do not fit together
  kInfeasible,  // no solution exists (e.g. more stages than operators)
  kValidation,  // inconsistent workload / strategy / cluster
  kFit,         // curve fitting precondition or convergence failure
  kDomain,      // argument outside the function's domain
  kConfig,      // unreadable or malformed input document
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kInfeasible: return "infeasible";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kFit: return "fit error";
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kConfig: return "config error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Share of `total` held by part `index` when `total` is split as evenly as
// possible over `parts`; the first (total % parts) parts get one extra byte,
// so the shares always sum back to `total`.
inline Bytes split_even(Bytes total, std::uint64_t parts, std::uint64_t index) {
  const Bytes base = total / parts;
  return base + (index < total % parts ? 1 : 0);
}

inline Bytes ceil_div(Bytes num, Bytes den) { return (num + den - 1) / den; }

inline Bytes round_bytes(double value) {
  return value <= 0.0 ? 0 : static_cast<Bytes>(std::llround(value));
}

inline double to_mib(Bytes b) { return static_cast<double>(b) / static_cast<double>(kMiB); }

}  // namespace dtcost
