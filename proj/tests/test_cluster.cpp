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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dtcost/dtcost.hpp"

namespace dtcost {
namespace {

std::vector<BandwidthSample> sweep(const BandwidthModel& m, int points, double noise = 0.0, unsigned seed = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-noise, noise);
  std::vector<BandwidthSample> out;
  for (int i = 0; i < points; ++i) {
    const double s = 1024.0 * std::pow(2.0, i);
    out.push_back({s, bandwidth_at(m, s) * (1.0 + u(rng))});
  }
  return out;
}

TEST(Bandwidth, CurveShape) {
  const BandwidthModel m{10.0, 100.0, 2.0};
  EXPECT_DOUBLE_EQ(bandwidth_at(m, 100.0), 5.0);
  EXPECT_NEAR(bandwidth_at(m, 1e9), 10.0, 1e-6);
  EXPECT_LT(bandwidth_at(m, 10.0), bandwidth_at(m, 20.0));
  EXPECT_THROW(bandwidth_at(m, 0.0), Error);
  EXPECT_DOUBLE_EQ(transfer_time(m, 0.0, 100.0), 0.0);
  EXPECT_DOUBLE_EQ(transfer_time(m, 50.0, 100.0), 10.0);
}

TEST(Bandwidth, ModelValidation) {
  EXPECT_THROW(validate(BandwidthModel{0.0, 1.0, 1.0}), Error);
  EXPECT_THROW(validate(BandwidthModel{1.0, -1.0, 1.0}), Error);
  EXPECT_THROW(validate(BandwidthModel{1.0, 1.0, 0.0}), Error);
  EXPECT_NO_THROW(validate(BandwidthModel{1.0, 1.0, 1.0}));
}

TEST(BandwidthFit, RecoversNoiselessParameters) {
  for (const BandwidthModel truth : {BandwidthModel{1.2e10, 1.0e6, 1.1}, BandwidthModel{2.5e10, 3.0e5, 0.7},
                                     BandwidthModel{5.0e9, 4.0e7, 2.0}}) {
    const auto samples = sweep(truth, 24);
    const BandwidthFit fit = fit_bandwidth(samples);
    EXPECT_NEAR(fit.model.peak_bw / truth.peak_bw, 1.0, 1e-3);
    EXPECT_NEAR(fit.model.s_half / truth.s_half, 1.0, 1e-3);
    EXPECT_NEAR(fit.model.steepness / truth.steepness, 1.0, 1e-3);
    EXPECT_LT(fit.rms, 1e-6 * truth.peak_bw);
  }
}

TEST(BandwidthFit, ToleratesNoise) {
  const BandwidthModel truth{1.2e10, 1.0e6, 1.1};
  const auto samples = sweep(truth, 24, 0.01, 42);
  const BandwidthFit fit = fit_bandwidth(samples);
  EXPECT_LE(fit.rms, 0.02 * truth.peak_bw);
  EXPECT_NEAR(fit.model.peak_bw / truth.peak_bw, 1.0, 0.05);
}

TEST(BandwidthFit, RejectsDegenerateInput) {
  std::vector<BandwidthSample> two{{1.0, 1.0}, {2.0, 2.0}};
  EXPECT_THROW(fit_bandwidth(two), Error);
  std::vector<BandwidthSample> same{{4.0, 1.0}, {4.0, 2.0}, {4.0, 3.0}};
  EXPECT_THROW(fit_bandwidth(same), Error);
  std::vector<BandwidthSample> negative{{1.0, 1.0}, {2.0, -2.0}, {3.0, 3.0}};
  try {
    fit_bandwidth(negative);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFit);
  }
}

TEST(Volumes, RingAccounting) {
  EXPECT_DOUBLE_EQ(allreduce_device_volume(100.0, 1), 0.0);
  EXPECT_DOUBLE_EQ(allreduce_device_volume(100.0, 4), 150.0);
  EXPECT_DOUBLE_EQ(allgather_device_volume(100.0, 4), 75.0);
  EXPECT_DOUBLE_EQ(p2p_volume(7.0), 7.0);
  EXPECT_EQ(allreduce_total_volume(100, 4), 600u);
  EXPECT_EQ(allgather_total_volume(100, 4), 300u);
  EXPECT_EQ(allreduce_total_volume(100, 1), 0u);
  // per-device volumes sum to the integer totals
  for (std::uint64_t d : {2u, 3u, 8u}) {
    EXPECT_NEAR(allreduce_device_volume(1000.0, d) * static_cast<double>(d),
                static_cast<double>(allreduce_total_volume(1000, d)), 1e-9);
  }
}

TEST(Cluster, Validation) {
  ClusterSpec c;
  c.devices = 2;
  c.p2p_bw = {1.0, 1.0, 1.0};
  c.collective_bw = {1.0, 1.0, 1.0};
  EXPECT_NO_THROW(validate(c));
  c.launch_skew = {0.0};
  EXPECT_THROW(validate(c), Error);
  c.launch_skew = {0.0, -1.0};
  EXPECT_THROW(validate(c), Error);
  c.launch_skew = {};
  c.contention_factor = 1.5;
  EXPECT_THROW(validate(c), Error);
  c.contention_factor = 0.3;
  c.devices = 0;
  EXPECT_THROW(validate(c), Error);
}

TEST(Cluster, LinkSelection) {
  ClusterSpec c;
  c.devices = 8;
  c.devices_per_node = 4;
  c.p2p_bw = {100.0, 1.0, 1.0};
  c.collective_bw = {200.0, 1.0, 1.0};
  EXPECT_EQ(p2p_model(c, 3, 4).peak_bw, 100.0);
  c.inter_node_p2p_bw = BandwidthModel{10.0, 1.0, 1.0};
  c.inter_node_collective_bw = BandwidthModel{20.0, 1.0, 1.0};
  EXPECT_EQ(node_of(c, 3), 0u);
  EXPECT_EQ(node_of(c, 4), 1u);
  EXPECT_EQ(p2p_model(c, 2, 3).peak_bw, 100.0);
  EXPECT_EQ(p2p_model(c, 3, 4).peak_bw, 10.0);
  EXPECT_EQ(collective_model(c, 4).peak_bw, 200.0);
  EXPECT_EQ(collective_model(c, 8).peak_bw, 20.0);
}

TEST(Cluster, CollectiveWaits) {
  const std::vector<Seconds> skew{0.0, 3.0, 1.0};
  EXPECT_DOUBLE_EQ(collective_wait(skew, 0), 3.0);
  EXPECT_DOUBLE_EQ(collective_wait(skew, 1), 0.0);
  EXPECT_DOUBLE_EQ(collective_wait(skew, 2), 2.0);
  EXPECT_THROW(collective_wait(skew, 3), Error);

  ClusterSpec c;
  c.devices = 3;
  c.launch_skew = skew;
  EXPECT_EQ(collective_waits(c, 2), (std::vector<Seconds>{3.0, 0.0}));
  c.launch_skew.clear();
  EXPECT_EQ(collective_waits(c, 3), (std::vector<Seconds>(3, 0.0)));
}

}  // namespace
}  // namespace dtcost
