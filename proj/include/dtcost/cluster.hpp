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

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dtcost/common.hpp"

namespace dtcost {

// Log-logistic bandwidth curve: bw(s) = peak / (1 + (s_half / s)^k).
struct BandwidthModel {
  double peak_bw = 0.0;  // bytes/s
  double s_half = 1.0;   // bytes
  double steepness = 1.0;

  friend bool operator==(const BandwidthModel&, const BandwidthModel&) = default;
};

inline void validate(const BandwidthModel& m) {
  if (!(m.peak_bw > 0.0) || !(m.s_half > 0.0) || !(m.steepness > 0.0)) {
    throw Error(ErrorKind::kValidation, "bandwidth model needs peak_bw, s_half and k all > 0");
  }
}

inline double bandwidth_at(const BandwidthModel& m, double message_bytes) {
  if (!(message_bytes > 0.0)) throw Error(ErrorKind::kDomain, "message size must be > 0 bytes");
  return m.peak_bw / (1.0 + std::pow(m.s_half / message_bytes, m.steepness));
}

// Seconds to move `volume` bytes when the link runs at the bandwidth
// reached by blocks of `block` bytes. Zero volume costs nothing.
inline Seconds transfer_time(const BandwidthModel& m, double volume, double block) {
  if (volume <= 0.0) return 0.0;
  return volume / bandwidth_at(m, block);
}

struct BandwidthSample {
  double bytes = 0.0;
  double bandwidth = 0.0;  // bytes/s
};

struct BandwidthFit {
  BandwidthModel model;
  double rms = 0.0;  // residual RMS in bytes/s
  int iterations = 0;
};

// Levenberg-Marquardt least squares over (peak, ln s_half, k), started at
// peak = max y, s_half = median size, k = 1. Bandwidths are normalised by
// their maximum during the solve.
inline BandwidthFit fit_bandwidth(std::span<const BandwidthSample> samples, int max_iterations = 500) {
  if (samples.size() < 3) throw Error(ErrorKind::kFit, "need at least 3 bandwidth samples");
  double y_max = 0.0;
  std::vector<double> log_sizes;
  for (const auto& s : samples) {
    if (!(s.bytes > 0.0) || !(s.bandwidth > 0.0) || !std::isfinite(s.bytes) || !std::isfinite(s.bandwidth)) {
      throw Error(ErrorKind::kFit, "bandwidth samples must be positive and finite");
    }
    y_max = std::max(y_max, s.bandwidth);
    log_sizes.push_back(std::log(s.bytes));
  }
  std::vector<double> sorted = log_sizes;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) throw Error(ErrorKind::kFit, "all samples have the same message size");
  const std::size_t n = samples.size();
  const double log_median =
      n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = samples[i].bandwidth / y_max;

  Eigen::Vector3d x(1.0, log_median, 1.0);  // peak (normalised), ln s_half, k
  auto residuals = [&](const Eigen::Vector3d& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    r.resize(static_cast<Eigen::Index>(n));
    if (jac) jac->resize(static_cast<Eigen::Index>(n), 3);
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = p[1] - log_sizes[i];
      const double e = std::exp(p[2] * diff);
      const double g = 1.0 / (1.0 + e);
      const auto row = static_cast<Eigen::Index>(i);
      r[row] = p[0] * g - y[i];
      if (jac) {
        const double common = -p[0] * g * g * e;
        (*jac)(row, 0) = g;
        (*jac)(row, 1) = common * p[2];
        (*jac)(row, 2) = common * diff;
      }
    }
    return r.squaredNorm();
  };

  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  double cost = residuals(x, r, &jac);
  double lambda = 1e-3;
  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    const Eigen::Vector3d grad = jac.transpose() * r;
    if (grad.lpNorm<Eigen::Infinity>() < 1e-15) break;
    bool improved = false;
    Eigen::Vector3d step = Eigen::Vector3d::Zero();
    for (int tries = 0; tries < 40; ++tries) {
      Eigen::Matrix3d damped = jtj;
      for (int k = 0; k < 3; ++k) damped(k, k) += lambda * std::max(jtj(k, k), 1e-12);
      step = damped.ldlt().solve(-grad);
      const Eigen::Vector3d trial = x + step;
      if (trial[0] > 0.0 && trial[2] > 0.0 && trial.allFinite()) {
        Eigen::VectorXd r_trial;
        const double trial_cost = residuals(trial, r_trial, nullptr);
        if (trial_cost < cost) {
          x = trial;
          cost = residuals(x, r, &jac);
          lambda = std::max(lambda / 10.0, 1e-12);
          improved = true;
          break;
        }
      }
      lambda *= 10.0;
    }
    if (!improved) break;
    if (step.norm() <= 1e-14 * (x.norm() + 1e-14)) break;
  }
  if (!x.allFinite()) throw Error(ErrorKind::kFit, "bandwidth fit diverged");

  BandwidthFit fit;
  fit.model = {x[0] * y_max, std::exp(x[1]), x[2]};
  fit.rms = std::sqrt(cost / static_cast<double>(n)) * y_max;
  fit.iterations = iter;
  return fit;
}

// ---------------------------------------------------------------------------
// Collective volumes (ring accounting)

// Bytes each device sends for an all-reduce of `s` bytes over D devices.
inline double allreduce_device_volume(double s, std::uint64_t devices) {
  if (devices <= 1) return 0.0;
  const auto d = static_cast<double>(devices);
  return 2.0 * (d - 1.0) / d * s;
}

inline double allgather_device_volume(double s, std::uint64_t devices) {
  if (devices <= 1) return 0.0;
  const auto d = static_cast<double>(devices);
  return (d - 1.0) / d * s;
}

inline double p2p_volume(double s) { return s; }

// Bytes moved by all devices together; exact in integers.
inline Bytes allreduce_total_volume(Bytes s, std::uint64_t devices) {
  return devices <= 1 ? 0 : 2 * (devices - 1) * s;
}
inline Bytes allgather_total_volume(Bytes s, std::uint64_t devices) {
  return devices <= 1 ? 0 : (devices - 1) * s;
}

// ---------------------------------------------------------------------------
// Cluster

struct ClusterSpec {
  std::uint64_t devices = 1;
  BandwidthModel p2p_bw;
  BandwidthModel collective_bw;
  // Devices sharing the fast link class. Zero means all devices.
  std::uint64_t devices_per_node = 0;
  std::optional<BandwidthModel> inter_node_p2p_bw;
  std::optional<BandwidthModel> inter_node_collective_bw;
  // Per-device kernel launch delay; empty means no skew.
  std::vector<Seconds> launch_skew;
  double optimizer_factor = 2.0;   // Adam keeps two moments
  double contention_factor = 0.3;  // compute slowdown per second of overlap
  Bytes workspace_bytes = 0;
};

inline void validate(const ClusterSpec& c) {
  if (c.devices < 1) throw Error(ErrorKind::kValidation, "cluster needs at least one device");
  validate(c.p2p_bw);
  validate(c.collective_bw);
  if (c.inter_node_p2p_bw) validate(*c.inter_node_p2p_bw);
  if (c.inter_node_collective_bw) validate(*c.inter_node_collective_bw);
  if (!c.launch_skew.empty() && c.launch_skew.size() != c.devices) {
    throw Error(ErrorKind::kValidation, "launch_skew must list one value per device");
  }
  for (double s : c.launch_skew) {
    if (!(s >= 0.0)) throw Error(ErrorKind::kValidation, "launch skew must be >= 0");
  }
  if (!(c.optimizer_factor >= 0.0)) throw Error(ErrorKind::kValidation, "optimizer_factor must be >= 0");
  if (!(c.contention_factor >= 0.0 && c.contention_factor <= 1.0)) {
    throw Error(ErrorKind::kValidation, "contention_factor must lie in [0, 1]");
  }
}

inline std::uint64_t node_of(const ClusterSpec& c, std::uint64_t device) {
  return c.devices_per_node == 0 ? 0 : device / c.devices_per_node;
}

// A collective over the first `devices` ranks runs at the speed of its
// slowest link class.
inline const BandwidthModel& collective_model(const ClusterSpec& c, std::uint64_t devices) {
  if (c.inter_node_collective_bw && devices > 0 && node_of(c, devices - 1) != 0) return *c.inter_node_collective_bw;
  return c.collective_bw;
}

inline const BandwidthModel& p2p_model(const ClusterSpec& c, std::uint64_t from, std::uint64_t to) {
  if (c.inter_node_p2p_bw && node_of(c, from) != node_of(c, to)) return *c.inter_node_p2p_bw;
  return c.p2p_bw;
}

inline Seconds collective_wait(std::span<const Seconds> launch_skew, std::size_t device) {
  if (launch_skew.empty()) return 0.0;
  if (device >= launch_skew.size()) throw Error(ErrorKind::kDomain, "device index out of range");
  return *std::max_element(launch_skew.begin(), launch_skew.end()) - launch_skew[device];
}

// Waits among the first `degree` devices of the cluster.
inline std::vector<Seconds> collective_waits(const ClusterSpec& c, std::uint64_t degree) {
  std::vector<Seconds> out(degree, 0.0);
  if (c.launch_skew.empty()) return out;
  const std::span<const Seconds> skew(c.launch_skew.data(), degree);
  for (std::size_t d = 0; d < degree; ++d) out[d] = collective_wait(skew, d);
  return out;
}

}  // namespace dtcost
