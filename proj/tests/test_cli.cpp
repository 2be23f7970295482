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

#include <filesystem>
#include <random>
#include <sstream>
#include <cstdlib>

#include "cli.hpp"
#include "oracles.hpp"

namespace dtcost {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dtcost");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("dtcost_cli_" + std::to_string(rd()));
    fs::create_directories(dir_);
    TransformerOptions opt;
    opt.fwd_time_per_sample = 1e-4;
    opt.global_batch_size = 16;
    write_text_file(dir_ / "bert.json", to_json(build_transformer(256, 1024, 4, 64, 8, 4, opt)).dump());
    ClusterSpec c = testing::simple_cluster(8, 1e10, 1e6);
    write_text_file(dir_ / "cluster.json", to_json(c).dump());
    write_text_file(dir_ / "pipe.json", R"({"kind": "pipeline", "degree": 4, "micro_batches": 4})");
    // light traffic: each micro-batch transfer is far shorter than a stage
    write_text_file(dir_ / "chain.json", to_json(testing::uniform_workload(8, 1e-3, 2e-3, 100, 1000, 64)).dump());
    TransformerOptions base;
    base.fwd_time_per_sample = 1.5e-4;
    base.global_batch_size = 8;
    write_text_file(dir_ / "bert_base.json", to_json(build_transformer(768, 3072, 12, 128, 12, 4, base)).dump());
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const char* name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, EstimateJson) {
  const Result r = run_cli({"--workload", path("bert.json"), "--cluster", path("cluster.json"), "--strategy",
                            path("pipe.json"), "estimate"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j.at("per_device").size(), 4u);
  EXPECT_EQ(j.at("strategy").at("kind"), "pipeline");
}

TEST_F(CliTest, EstimateOverridesAndCsvToFile) {
  const Result r = run_cli({"--workload", path("bert.json"), "--cluster", path("cluster.json"), "--format", "csv",
                            "--out", path("est.csv"), "estimate", "--kind", "data", "--degree", "8",
                            "--zero-stage", "zero3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = read_text_file(path("est.csv"));
  EXPECT_EQ(csv.rfind("device,component,value", 0), 0u);
  EXPECT_NE(csv.find("\n7,"), std::string::npos);
}

TEST_F(CliTest, SimulateWithCompareAndTrace) {
  const Result r = run_cli({"--workload", path("bert.json"), "--cluster", path("cluster.json"), "--strategy",
                            path("pipe.json"), "simulate", "--compare", "--trace", path("trace.json"),
                            "--trace-format", "chrome", "--schedule", "1f1b"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_TRUE(j.contains("comparison"));
  EXPECT_GT(j.at("makespan_s").get<double>(), 0.0);
  const json trace = json::parse(read_text_file(path("trace.json")));
  EXPECT_FALSE(trace.at("traceEvents").empty());
}

TEST_F(CliTest, UnknownScheduleIsUsageError) {
  const Result r = run_cli({"--workload", path("bert.json"), "--cluster", path("cluster.json"), "--strategy",
                            path("pipe.json"), "simulate", "--schedule", "zigzag"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("zigzag"), std::string::npos);
}

TEST_F(CliTest, MissingFileNamesPath) {
  const Result r = run_cli({"--workload", path("nope.json"), "--cluster", path("cluster.json"), "estimate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope.json"), std::string::npos);
}

TEST_F(CliTest, MissingSubcommandOrOption) {
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"estimate", "--bogus"}).code, 2);
  EXPECT_EQ(run_cli({"--cluster", path("cluster.json"), "estimate"}).code, 2);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST_F(CliTest, SweepWeakScaling) {
  const Result r = run_cli({"--workload", path("bert.json"), "--cluster", path("cluster.json"), "--format", "csv",
                            "sweep", "--degrees", "1,2,4,8", "--kinds", "data,pipeline", "--micro-batch-list", "4",
                            "--per-device-batch", "4", "--threads", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, cli::kSweepHeader);
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 8u);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].rfind(std::to_string(i) + ",", 0), 0u);
  // weak scaling: global batch 4 x D
  EXPECT_NE(rows[3].find(",8,4,none,32,"), std::string::npos) << rows[3];
}

TEST_F(CliTest, SweepSkipsInvalidPoints) {
  const Result r = run_cli({"--workload", path("bert.json"), "--cluster", path("cluster.json"), "sweep",
                            "--kinds", "data,tensor", "--zero-stages", "none,zero2", "--degrees", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j.at("rows").size(), 3u);
  EXPECT_EQ(j.at("skipped").size(), 1u);
  EXPECT_NE(r.err.find("skipped"), std::string::npos);
  EXPECT_EQ(run_cli({"--workload", path("bert.json"), "--cluster", path("cluster.json"), "sweep"}).code, 2);
}

TEST_F(CliTest, SweepIsDeterministicAcrossThreadCounts) {
  auto sweep = [&](const char* threads) {
    return run_cli({"--workload", path("bert.json"), "--cluster", path("cluster.json"), "--format", "csv", "sweep",
                    "--degrees", "2,4,8", "--kinds", "data,tensor,pipeline", "--micro-batch-list", "1,2,4",
                    "--threads", threads})
        .out;
  };
  EXPECT_EQ(sweep("1"), sweep("4"));
}

TEST_F(CliTest, FitBandwidthFromGeneratedSamples) {
  const Result r = run_cli({"--seed", "3", "--out", path("fit.json"), "fit-bandwidth", "--generate", "1e10,1e6,1.2",
                            "--points", "20", "--samples-out", path("samples.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("residual RMS"), std::string::npos);
  const json fit = json::parse(read_text_file(path("fit.json")));
  EXPECT_NEAR(fit.at("peak").get<double>() / 1e10, 1.0, 1e-3);
  const Result again = run_cli({"fit-bandwidth", path("samples.csv")});
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_NEAR(json::parse(again.out).at("s_half").get<double>() / 1e6, 1.0, 1e-3);
  EXPECT_EQ(run_cli({"fit-bandwidth", path("missing.csv")}).code, 2);
}

TEST_F(CliTest, Partition) {
  const Result r = run_cli({"partition", "--costs", "1,2,3,4,5", "--degree", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j.at("stage_boundaries"), json::array({3}));
  EXPECT_DOUBLE_EQ(j.at("max_stage_cost").get<double>(), 9.0);
  EXPECT_EQ(run_cli({"partition", "--costs", "1,2", "--degree", "3"}).code, 2);
  const Result w = run_cli({"--workload", path("bert.json"), "partition", "--degree", "4"});
  ASSERT_EQ(w.code, 0) << w.err;
  EXPECT_EQ(json::parse(w.out).at("stage_boundaries"), json::array({2, 4, 6}));
}

TEST_F(CliTest, CompareAgreesOnBalancedPipeline) {
  const Result r = run_cli({"--workload", path("chain.json"), "--cluster", path("cluster.json"), "simulate",
                            "--kind", "pipeline", "--degree", "4", "--micro-batches", "16", "--compare"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json cmp = json::parse(r.out).at("comparison");
  EXPECT_TRUE(cmp.at("all_pass").get<bool>()) << cmp.dump(2);
  EXPECT_EQ(cmp.at("rows").size(), 10u);
}

TEST_F(CliTest, OneFOneBPeakFollowsStageDepth) {
  const Result r = run_cli({"--workload", path("chain.json"), "--cluster", path("cluster.json"), "simulate",
                            "--kind", "pipeline", "--degree", "4", "--micro-batches", "8", "--schedule", "1f1b"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json devices = json::parse(r.out).at("per_device");
  for (std::size_t d = 0; d < 4; ++d) EXPECT_EQ(devices[d].at("peak_live_micro_batches").get<std::size_t>(), 4 - d);
}

TEST_F(CliTest, PartitionExampleChain) {
  const Result r = run_cli({"partition", "--costs", "3,1,4,1,5,9,2,6", "--degree", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_DOUBLE_EQ(json::parse(r.out).at("max_stage_cost").get<double>(), 14.0);
  EXPECT_DOUBLE_EQ(testing::brute_force_min_max({3, 1, 4, 1, 5, 9, 2, 6}, 3), 14.0);
}

TEST_F(CliTest, ZeroSweepOrdersMemory) {
  const Result r = run_cli({"--workload", path("bert.json"), "--cluster", path("cluster.json"), "sweep", "--kinds",
                            "data", "--degrees", "4", "--zero-stages", "none,zero2,zero3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json rows = json::parse(r.out).at("rows");
  ASSERT_EQ(rows.size(), 3u);
  auto total = [&](int i) { return rows[i].at("aggregate").at("memory").at("total").get<Bytes>(); };
  EXPECT_GT(total(0), total(1));
  EXPECT_GT(total(1), total(2));
}

TEST_F(CliTest, TransformerSweepFavoursPipelineTraffic) {
  const Result r = run_cli({"--workload", path("bert_base.json"), "--cluster", path("cluster.json"), "sweep",
                            "--strong-scaling", "--kinds", "data,pipeline", "--degrees", "2,4,8",
                            "--micro-batch-list", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json rows = json::parse(r.out).at("rows");
  ASSERT_EQ(rows.size(), 6u);
  auto cm = [&](int i) {
    const json& t = rows[i].at("aggregate").at("time_mean");
    return t.at("cm_min").get<double>() + t.at("cm_wait").get<double>();
  };
  for (int d = 0; d < 3; ++d) EXPECT_LT(cm(3 + d), cm(d)) << "degree index " << d;
}

TEST_F(CliTest, LogLevelFromEnvironment) {
  const std::vector<std::string> args{"--workload", path("chain.json"), "--cluster", path("cluster.json"),
                                      "simulate", "--kind", "pipeline", "--degree", "2"};
  ::setenv("DTCOST_LOG", "info", 1);
  const Result loud = run_cli(args);
  ::setenv("DTCOST_LOG", "error", 1);
  const Result quiet = run_cli(args);
  ::unsetenv("DTCOST_LOG");
  EXPECT_NE(loud.err.find("[info]"), std::string::npos);
  EXPECT_TRUE(quiet.err.empty()) << quiet.err;
}

}  // namespace
}  // namespace dtcost
