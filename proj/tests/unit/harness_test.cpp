// Copyright 2026 The GradLab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "gradlab/error.hpp"
#include "gradlab/harness.hpp"

namespace gradlab::harness {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.dataset.count = 200;
  cfg.fed.local.tau = 1;
  cfg.attack.projection = {attack::ProjectionKind::identity, 1, ""};
  cfg.attack.iterations = 5;
  cfg.seed = 17;
  return cfg;
}

TEST(ExperimentConfigTest, Defaults) {
  const ExperimentConfig cfg;
  EXPECT_EQ(cfg.fed.local.tau, 5u);
  EXPECT_EQ(cfg.fed.local.eta, 5e-3);
  EXPECT_EQ(cfg.fed.local.batch, 16u);
}

TEST(ExperimentConfigTest, JsonRoundTrip) {
  ExperimentConfig cfg = small_config();
  cfg.sweep.batch = {1, 2};
  cfg.sweep.obfuscation.emplace_back();
  cfg.sweep.obfuscation.back().stages.push_back(obf::Qsgd{3});
  cfg.obfuscation.stages.push_back(obf::TopK{0.9});
  cfg.dataset.kind = DatasetKind::idx;
  cfg.dataset.images = "a.idx";
  cfg.dataset.labels = "b.idx";
  EXPECT_TRUE(experiment_config_from_json(to_json(cfg)) == cfg);
}

TEST(ExperimentConfigTest, RejectsUnknownKeysAndBadValues) {
  auto j = to_json(small_config());
  j["fed"]["lr"] = 0.1;
  EXPECT_THROW(experiment_config_from_json(j), ConfigError);
  j = to_json(small_config());
  j["fed"]["sampled"] = 50;
  EXPECT_THROW(experiment_config_from_json(j), ConfigError);
  j = to_json(small_config());
  j["dataset"]["test_fraction"] = 1.0;
  EXPECT_THROW(experiment_config_from_json(j), ConfigError);
}

TEST(DatasetTest, SplitAndShapeCheck) {
  const auto d = load_datasets(small_config().dataset, models::ModelSpec{});
  EXPECT_EQ(d.train.size(), 160u);
  EXPECT_EQ(d.test.size(), 40u);
  models::ModelSpec rgb;
  rgb.channels = 3;
  DatasetSource src;
  src.kind = DatasetKind::idx;
  const auto dir = fs::temp_directory_path() / "gradlab_harness_idx";
  fs::create_directories(dir);
  data::write_idx(d.test, dir / "i.idx", dir / "l.idx");
  src.images = (dir / "i.idx").string();
  src.labels = (dir / "l.idx").string();
  EXPECT_THROW(load_datasets(src, rgb), ConfigError);
  EXPECT_EQ(load_datasets(src, models::ModelSpec{}).train.size(), 32u);
}

TEST(SweepTest, BatchAxisHeaderAndRows) {
  ExperimentConfig cfg = small_config();
  cfg.sweep.batch = {1, 2, 4, 8};
  const auto r = run_sweep(cfg, 1, std::nullopt);
  EXPECT_EQ(sweep_csv(r).substr(0, sweep_csv(r).find('\n')), "batch,psnr_mean,ssim_mean,grad_dist_final");
  ASSERT_EQ(r.rows.size(), 4u);
  EXPECT_EQ(r.rows[3].axes, std::vector<std::string>{"8"});
}

TEST(SweepTest, MixedAxes) {
  ExperimentConfig cfg = small_config();
  cfg.sweep.d_z = {784, 49};
  cfg.attack.projection = {attack::ProjectionKind::bicubic, 4, ""};
  cfg.sweep.obfuscation.resize(2);
  cfg.sweep.obfuscation[1].stages.push_back(obf::Sign{});
  const auto r = run_sweep(cfg, 2, std::nullopt);
  EXPECT_EQ(r.header, (std::vector<std::string>{"d_z", "obfuscation", "psnr_mean", "ssim_mean", "grad_dist_final"}));
  ASSERT_EQ(r.rows.size(), 4u);
  EXPECT_EQ(r.rows[1].axes, (std::vector<std::string>{"784", "sign"}));
  cfg.sweep.d_z = {50};
  EXPECT_THROW(run_sweep(cfg, 1, std::nullopt), ConfigError);
}

TEST(SweepTest, ByteIdenticalAcrossRunsAndThreadCounts) {
  ExperimentConfig cfg = small_config();
  cfg.sweep.batch = {1, 2};
  cfg.sweep.repeats = 2;
  const auto base = fs::temp_directory_path() / "gradlab_sweep_det";
  fs::remove_all(base);
  run_sweep(cfg, 1, base / "a");
  run_sweep(cfg, 3, base / "b");
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(base / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), base / "a");
    EXPECT_EQ(slurp(e.path()), slurp(base / "b" / rel)) << rel;
    ++files;
  }
  EXPECT_GT(files, 10u);
}

TEST(SweepTest, ZeroIterationsDumpsInitialization) {
  ExperimentConfig cfg = small_config();
  cfg.attack.iterations = 0;
  const auto dir = fs::temp_directory_path() / "gradlab_sweep_zero";
  fs::remove_all(dir);
  run_sweep(cfg, 1, dir);
  const auto rep = dir / "cell_0" / "rep_0";
  EXPECT_EQ(slurp(rep / "reconstruction_0.pgm"), slurp(rep / "initial_0.pgm"));
  EXPECT_EQ(slurp(rep / "history.csv").substr(0, 15), "iter,grad_dist\n");
}

TEST(VictimTest, PicksClientWithEnoughData) {
  fed::Partition p;
  p.assignment = {{1}, {2, 3, 4}, {}};
  EXPECT_EQ(pick_victim(p, 0, 2), 1u);
  EXPECT_EQ(pick_victim(p, 2, 1), 0u);
  EXPECT_THROW(pick_victim(p, 0, 5), ConfigError);
}

}  // namespace
}  // namespace gradlab::harness
