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

#include <chrono>
#include <random>

#include "dtcost/dtcost.hpp"
#include "oracles.hpp"

namespace dtcost {
namespace {

using testing::brute_force_min_max;
using testing::group_cost;

TEST(Partition, MatchesBruteForceOnRandomChains) {
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<std::size_t> len(1, 12);
  std::uniform_int_distribution<int> cost(0, 20);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = len(rng);
    std::vector<double> costs(n);
    for (auto& c : costs) c = cost(rng);
    std::uniform_int_distribution<std::size_t> k(1, n);
    const std::size_t stages = k(rng);
    const StagePartition p = partition_stages(costs, stages);
    ASSERT_EQ(p.boundaries.size(), stages - 1);
    EXPECT_DOUBLE_EQ(p.max_stage_cost, brute_force_min_max(costs, stages));
    // reported stage costs agree with the cut positions
    const auto ranges = stage_ranges(n, p.boundaries);
    double worst = 0.0;
    for (std::size_t s = 0; s < stages; ++s) {
      EXPECT_GT(ranges[s].second, ranges[s].first);
      EXPECT_DOUBLE_EQ(p.stage_costs[s], group_cost(costs, ranges[s].first, ranges[s].second));
      worst = std::max(worst, p.stage_costs[s]);
    }
    EXPECT_DOUBLE_EQ(worst, p.max_stage_cost);
  }
}

TEST(Partition, TiesResolveToEarliestCuts) {
  const std::vector<double> costs{1, 1, 1, 1};
  EXPECT_EQ(partition_stages(costs, 2).boundaries, (std::vector<std::size_t>{2}));
  // max 2 is reachable by cutting after 1 or after 2; the earliest wins
  const std::vector<double> skewed{2, 0, 2};
  EXPECT_EQ(partition_stages(skewed, 2).boundaries, (std::vector<std::size_t>{1}));
  const std::vector<double> zeros(5, 0.0);
  EXPECT_EQ(partition_stages(zeros, 3).boundaries, (std::vector<std::size_t>{1, 2}));
}

TEST(Partition, RejectsMoreStagesThanOperators) {
  const std::vector<double> costs{1, 2};
  try {
    partition_stages(costs, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInfeasible);
  }
}

TEST(Partition, LongChainIsFast) {
  std::vector<double> costs(2000);
  std::iota(costs.begin(), costs.end(), 1.0);
  const auto t0 = std::chrono::steady_clock::now();
  const StagePartition p = partition_stages(costs, 16);
  const auto dt = std::chrono::steady_clock::now() - t0;
  EXPECT_EQ(p.boundaries.size(), 15u);
  EXPECT_LT(std::chrono::duration<double>(dt).count(), 2.0);
}

TEST(Partition, WorkloadCostsUseFullBatchStepTime) {
  Workload w;
  w.global_batch_size = 2;
  w.operators = {{"a", 0, 0, 1.0, 2.0}, {"b", 0, 0, 1.0, 1.0}, {"c", 0, 0, 4.0, 0.0}};
  EXPECT_EQ(step_costs(w), (std::vector<double>{6.0, 4.0, 8.0}));
  EXPECT_EQ(partition_stages(w, 2).boundaries, (std::vector<std::size_t>{2}));
}

TEST(Strategy, StageHelpers) {
  const std::vector<std::size_t> b{2, 5};
  EXPECT_EQ(stage_of(0, b), 0u);
  EXPECT_EQ(stage_of(2, b), 1u);
  EXPECT_EQ(stage_of(4, b), 1u);
  EXPECT_EQ(stage_of(6, b), 2u);
  const auto r = stage_ranges(7, b);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[1], (std::pair<std::size_t, std::size_t>{2, 5}));
  EXPECT_EQ(r[2], (std::pair<std::size_t, std::size_t>{5, 7}));

  Workload w;
  for (Bytes a : {10, 20, 30, 40, 50, 60, 70}) w.operators.push_back({"x", 0, a, 1.0, 1.0});
  EXPECT_EQ(boundary_activations(w, b, 3), (std::vector<Bytes>{90, 180}));
}

TEST(Strategy, ValidationRules) {
  Workload w;
  w.global_batch_size = 8;
  for (int i = 0; i < 4; ++i) w.operators.push_back({"x", 1, 1, 1.0, 1.0});

  Strategy s = testing::pipeline(4, 4);
  EXPECT_NO_THROW(validate(w, s));
  s.micro_batches = 3;
  EXPECT_THROW(validate(w, s), Error);
  s = testing::pipeline(5, 1);
  try {
    validate(w, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInfeasible);
  }
  s = testing::pipeline(2, 1);
  s.stage_boundaries = {0};
  EXPECT_THROW(validate(w, s), Error);
  s.stage_boundaries = {4};
  EXPECT_THROW(validate(w, s), Error);
  s.stage_boundaries = {1, 2};
  EXPECT_THROW(validate(w, s), Error);
  s.stage_boundaries = {3};
  EXPECT_NO_THROW(validate(w, s));

  Strategy t = testing::tensor(2);
  t.zero_stage = ZeroStage::kZero2;
  EXPECT_THROW(validate(w, t), Error);
  Strategy d = testing::data(2);
  d.recompute = true;
  EXPECT_THROW(validate(w, d), Error);
  d = testing::data(2);
  d.stage_boundaries = {1};
  EXPECT_THROW(validate(w, d), Error);
  d = testing::data(0);
  EXPECT_THROW(validate(w, d), Error);
}

TEST(Strategy, ResolvedFillsBoundaries) {
  Workload w;
  w.global_batch_size = 4;
  for (double f : {1.0, 1.0, 1.0, 3.0}) w.operators.push_back({"x", 0, 0, f, 0.0});
  const Strategy r = resolved(w, testing::pipeline(2, 2));
  EXPECT_EQ(r.stage_boundaries, (std::vector<std::size_t>{3}));
  Strategy fixed = testing::pipeline(2, 2);
  fixed.stage_boundaries = {1};
  EXPECT_EQ(resolved(w, fixed).stage_boundaries, (std::vector<std::size_t>{1}));
  EXPECT_TRUE(resolved(w, testing::data(2)).stage_boundaries.empty());
}

TEST(Layouts, PatternTable) {
  auto check = [](TensorPattern p, TensorLayout weight, TensorLayout act) {
    const OperatorLayouts l = layouts_for_pattern(p);
    EXPECT_EQ(l.op, OperatorLayout::kShared);
    EXPECT_EQ(l.weight, weight);
    EXPECT_EQ(l.activation, act);
  };
  check(TensorPattern::kAR, TensorLayout::kReplicated, TensorLayout::kReplicated);
  check(TensorPattern::kAP, TensorLayout::kPartitioned, TensorLayout::kPartitioned);
  check(TensorPattern::kPRWeightPartitioned, TensorLayout::kPartitioned, TensorLayout::kReplicated);
  check(TensorPattern::kPRWeightReplicated, TensorLayout::kReplicated, TensorLayout::kPartitioned);
}

TEST(Layouts, DerivedPerKind) {
  Workload w;
  w.global_batch_size = 4;
  w.operators = {{"a", 1, 1, 1.0, 1.0}, {"b", 1, 1, 1.0, 1.0}};
  w.operators[1].tensor_pattern = TensorPattern::kAP;

  const LayoutAssignment dp = derive_layouts(w, testing::data(2));
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(dp.per_operator[i].op, OperatorLayout::kShared);
    EXPECT_FALSE(dp.weight_partitioned(i));
    EXPECT_TRUE(dp.activation_partitioned(i));
  }
  const LayoutAssignment pp = derive_layouts(w, testing::pipeline(2, 1));
  for (const auto& l : pp.per_operator) {
    EXPECT_EQ(l.op, OperatorLayout::kExclusive);
    EXPECT_FALSE(l.weight.has_value());
    EXPECT_FALSE(l.activation.has_value());
  }
  const LayoutAssignment tp = derive_layouts(w, testing::tensor(2));
  EXPECT_FALSE(tp.weight_partitioned(0));
  EXPECT_TRUE(tp.activation_partitioned(0));
  EXPECT_TRUE(tp.weight_partitioned(1));
  EXPECT_TRUE(tp.activation_partitioned(1));
}

}  // namespace
}  // namespace dtcost
