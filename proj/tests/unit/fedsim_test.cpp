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


#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "gradlab/error.hpp"
#include "gradlab/fedsim.hpp"

namespace gradlab::fed {
namespace {

namespace fs = std::filesystem;

models::ModelSpec small_spec() {
  models::ModelSpec s;
  s.height = 16;
  s.width = 16;
  return s;
}

double chi_square_skew(const Partition& p, std::span<const int> labels) {
  const std::size_t classes = p.proportions.size();
  double total = 0.0;
  for (const auto& shard : p.assignment) {
    if (shard.empty()) continue;
    std::vector<double> hist(classes, 0.0);
    for (const auto i : shard) hist[labels[i]] += 1.0;
    const double expected = double(shard.size()) / double(classes);
    for (const double h : hist) total += (h - expected) * (h - expected) / expected;
  }
  return total;
}

TEST(PartitionTest, SingleClientGetsEverything) {
  const std::vector<int> labels{0, 1, 2, 1, 0, 3};
  const auto p = dirichlet_partition(labels, 1, 0.5, 1);
  ASSERT_EQ(p.assignment.size(), 1u);
  EXPECT_EQ(p.assignment[0], (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
}

TEST(PartitionTest, ExhaustiveAndClassCountsExact) {
  const auto ds = data::synthetic_digits(500, 2, 8, 8);
  const auto p = dirichlet_partition(ds.labels, 7, 0.5, 3);
  std::vector<int> seen(ds.size(), 0);
  for (const auto& shard : p.assignment) {
    for (const auto i : shard) ++seen[i];
  }
  for (const int s : seen) EXPECT_EQ(s, 1);
  for (std::size_t k = 0; k < p.proportions.size(); ++k) {
    double sum = 0.0;
    for (const double q : p.proportions[k]) sum += q;
    EXPECT_NEAR(sum, 1.0, 1e-9);
    std::size_t class_total = 0, assigned = 0;
    for (const int l : ds.labels) class_total += l == int(k);
    for (const auto& shard : p.assignment) {
      for (const auto i : shard) assigned += ds.labels[i] == int(k);
    }
    EXPECT_EQ(assigned, class_total);
  }
}

TEST(PartitionTest, SeedDeterministic) {
  const auto ds = data::synthetic_digits(200, 2, 8, 8);
  EXPECT_EQ(dirichlet_partition(ds.labels, 5, 0.5, 8).assignment,
            dirichlet_partition(ds.labels, 5, 0.5, 8).assignment);
  EXPECT_NE(dirichlet_partition(ds.labels, 5, 0.5, 8).assignment,
            dirichlet_partition(ds.labels, 5, 0.5, 9).assignment);
}

TEST(PartitionTest, SmallAlphaIsMoreSkewed) {
  const auto ds = data::synthetic_digits(1000, 4, 8, 8);
  double skewed = 0.0, flat = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    skewed += chi_square_skew(dirichlet_partition(ds.labels, 10, 0.5, seed), ds.labels);
    flat += chi_square_skew(dirichlet_partition(ds.labels, 10, 100.0, seed), ds.labels);
  }
  EXPECT_GT(skewed / 20, flat / 20);
}

TEST(PartitionTest, RejectsBadInput) {
  EXPECT_THROW(dirichlet_partition({}, 3, 0.5, 1), ConfigError);
  const std::vector<int> labels{0, 1};
  EXPECT_THROW(dirichlet_partition(labels, 0, 0.5, 1), ConfigError);
  EXPECT_THROW(dirichlet_partition(labels, 2, 0.0, 1), ConfigError);
}

class LocalUpdateTest : public ::testing::Test {
 protected:
  LocalUpdateTest()
      : model(small_spec()), w0(model.init_params(1)), shard(data::synthetic_digits(6, 3, 16, 16)) {}
  models::Model model;
  ParamVector w0;
  data::Dataset shard;
};

TEST_F(LocalUpdateTest, ZeroLearningRateKeepsWeights) {
  const auto r = local_update(model, w0, shard, {0.0, 2, 4}, 1);
  EXPECT_EQ(r.params, w0);
  EXPECT_EQ(r.steps, 4u);
}

TEST_F(LocalUpdateTest, FullBatchStepIsPlainGradientStep) {
  const double eta = 0.05;
  const auto r = local_update(model, w0, shard, {eta, 1, shard.size()}, 1);
  const auto g = model.gradient(w0, shard.all(), shard.labels);
  ASSERT_EQ(r.steps, 1u);
  for (std::size_t i = 0; i < g.size(); ++i) ASSERT_EQ(r.params[i], w0[i] - eta * g[i]);
  const auto delta = weight_delta(w0, r.params);
  for (std::size_t i = 0; i < g.size(); ++i) {
    ASSERT_NEAR(delta[i], eta * g[i], 1e-15 * std::max(1.0, std::abs(w0[i])));
  }
}

TEST_F(LocalUpdateTest, TwoEpochsFollowRecursion) {
  const double eta = 0.1;
  const auto r = local_update(model, w0, shard, {eta, 2, 100}, 1);
  EXPECT_TRUE(r.full_batch_fallback);
  ParamVector w = w0;
  for (int step = 0; step < 2; ++step) {
    const auto g = model.gradient(w, shard.all(), shard.labels);
    for (std::size_t i = 0; i < g.size(); ++i) w[i] = w[i] - eta * g[i];
  }
  EXPECT_EQ(r.params, w);
}

TEST_F(LocalUpdateTest, MiniBatchStepCount) {
  const auto r = local_update(model, w0, shard, {0.01, 3, 4}, 1);
  EXPECT_EQ(r.steps, 6u);
  EXPECT_FALSE(r.full_batch_fallback);
  EXPECT_EQ(local_update(model, w0, shard, {0.01, 3, 4}, 1).params, r.params);
}

TEST(WeightDeltaTest, Basics) {
  auto t = std::make_shared<SegmentTable>();
  t->append("a", {2});
  t->append("b", {1});
  const ParamVector w0(t, {1.0, 2.0, 3.0});
  const ParamVector w1(t, {0.5, 2.0, 5.0});
  EXPECT_EQ(weight_delta(w0, w0), GradientVector::zeros(t));
  const auto d = weight_delta(w0, w1);
  EXPECT_DOUBLE_EQ(d.segment_norm(0), 0.5);
  EXPECT_DOUBLE_EQ(d.segment_norm(1), 2.0);
  auto other = std::make_shared<SegmentTable>();
  other->append("a", {3});
  EXPECT_THROW(weight_delta(w0, ParamVector(other, {1.0, 2.0, 3.0})), ShapeError);
}

std::shared_ptr<const SegmentTable> flat_table(std::size_t n) {
  auto t = std::make_shared<SegmentTable>();
  t->append("w", {n});
  return t;
}

TEST(FedAvgTest, SingleClientFollowsEndpoint) {
  auto t = flat_table(3);
  const ParamVector global(t, {1.0, 1e-17, -3.0});
  const ParamVector end(t, {0.3, 2e-17, 1.0 / 3.0});
  const std::vector<ParamVector> endpoints{end};
  EXPECT_EQ(fedavg_round(global, endpoints, {}, 1), end);
}

TEST(FedAvgTest, OppositeDeltasCancel) {
  auto t = flat_table(3);
  const ParamVector global(t, {1.0, 2.0, 3.0});
  const std::vector<GradientVector> deltas{GradientVector(t, {0.5, -1.0, 0.25}),
                                           GradientVector(t, {-0.5, 1.0, -0.25})};
  EXPECT_EQ(fedavg_round(global, deltas, {}, 1), global);
  EXPECT_THROW(fedavg_round(global, std::span<const GradientVector>{}, {}, 1), ConfigError);
}

TEST(FedAvgTest, QuantizedUpdateUnbiasedOverResamples) {
  auto t = flat_table(6);
  const ParamVector global(t, {0.0, 0.0, 0.0, 0.0, 0.0, 0.0});
  const std::vector<GradientVector> deltas{
      GradientVector(t, {0.3, -0.1, 0.05, 0.7, -0.2, 0.0}),
      GradientVector(t, {-0.4, 0.2, 0.1, 0.1, 0.3, -0.6})};
  const auto exact = fedavg_round(global, deltas, {}, 0);
  const obf::ObfuscationSpec spec{{obf::Qsgd{3}}};
  constexpr int kDraws = 10000;
  std::vector<double> sum(6, 0.0), sum_sq(6, 0.0);
  for (int d = 0; d < kDraws; ++d) {
    const auto w = fedavg_round(global, deltas, spec, std::uint64_t(d));
    for (std::size_t i = 0; i < 6; ++i) {
      sum[i] += w[i];
      sum_sq[i] += w[i] * w[i];
    }
  }
  for (std::size_t i = 0; i < 6; ++i) {
    const double mean = sum[i] / kDraws;
    const double se = std::sqrt(std::max(0.0, sum_sq[i] / kDraws - mean * mean) / kDraws);
    EXPECT_LE(std::abs(mean - exact[i]), 4 * se + 1e-15) << i;
  }
}

TEST(FedAvgTest, ClientOrderDoesNotMatterAfterSorting) {
  const auto ids = sample_clients(10, 4, 5, 3);
  EXPECT_EQ(ids.size(), 4u);
  EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
  EXPECT_EQ(std::set<std::size_t>(ids.begin(), ids.end()).size(), 4u);
  EXPECT_EQ(ids, sample_clients(10, 4, 5, 3));
  EXPECT_THROW(sample_clients(3, 4, 1, 1), ConfigError);
}

class TrainingTest : public ::testing::Test {
 protected:
  TrainingTest()
      : model(small_spec()),
        train(data::synthetic_digits(120, 1, 16, 16)),
        test(data::synthetic_digits(60, 2, 16, 16)) {
    dir = fs::temp_directory_path() /
          ("gradlab_fed_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
  }
  ~TrainingTest() override { fs::remove_all(dir); }

  models::Model model;
  data::Dataset train, test;
  fs::path dir;
};

TEST_F(TrainingTest, ZeroRoundsSavesOnlyInit) {
  FedConfig cfg;
  cfg.rounds = 0;
  const auto init = model.init_params(1);
  const auto r = run_training(model, init, train, test, cfg, {}, 1, dir);
  EXPECT_TRUE(r.records.empty());
  ASSERT_EQ(r.checkpoints.size(), 1u);
  EXPECT_EQ(r.checkpoints[0].first, 0u);
  EXPECT_TRUE(fs::exists(checkpoint_path(dir, 0)));
  EXPECT_FALSE(fs::exists(checkpoint_path(dir, 1)));
}

TEST_F(TrainingTest, ShortRunLearnsAndIsDeterministic) {
  FedConfig cfg;
  cfg.clients = 3;
  cfg.sampled = 2;
  cfg.rounds = 6;
  cfg.alpha = 100.0;
  cfg.local = {0.1, 3, 8};
  cfg.checkpoint_rounds = {0, 3};
  const auto init = model.init_params(1);
  const auto r = run_training(model, init, train, test, cfg, {}, 4, dir);
  ASSERT_EQ(r.records.size(), 6u);
  for (std::size_t i = 0; i < r.records.size(); ++i) EXPECT_EQ(r.records[i].round, i + 1);
  EXPECT_GT(r.records.back().test_accuracy, r.records.front().test_accuracy + 0.2);
  EXPECT_EQ(r.checkpoints.size(), 2u);
  const std::string csv = [&] {
    std::ifstream in(dir / "rounds.csv");
    return std::string((std::istreambuf_iterator<char>(in)), {});
  }();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "round,client_ids,mean_delta_norm,test_acc");
  const auto ckpt = io::read_container(checkpoint_path(dir, 3));
  EXPECT_EQ(checkpoint_params(model, ckpt), r.checkpoints[1].second);

  const auto again = run_training(model, init, train, test, cfg, {}, 4);
  EXPECT_EQ(again.checkpoints[1].second, r.checkpoints[1].second);
}

TEST_F(TrainingTest, SingleClientMatchesCentralizedSgd) {
  FedConfig cfg;
  cfg.clients = 1;
  cfg.sampled = 1;
  cfg.rounds = 5;
  cfg.local = {0.05, 1, train.size()};
  cfg.checkpoint_rounds = {5};
  const auto init = model.init_params(2);
  const auto r = run_training(model, init, train, test, cfg, {}, 1);
  ParamVector w = init;
  for (int step = 0; step < 5; ++step) {
    const auto g = model.gradient(w, train.all(), train.labels);
    for (std::size_t i = 0; i < g.size(); ++i) w[i] = w[i] - 0.05 * g[i];
  }
  EXPECT_EQ(r.checkpoints.back().second, w);
}

TEST_F(TrainingTest, CaptureMatchesScaledGradient) {
  const auto w = model.init_params(3);
  const auto shard = train.subset(std::vector<std::size_t>{0, 1, 2});
  const LocalConfig local{0.01, 1, 3};
  const auto [cap, truth] = capture_victim(model, w, 0, shard, {2, 0}, local, {}, 1);
  const auto g = model.gradient(w, shard.all(), shard.labels);
  for (std::size_t i = 0; i < g.size(); ++i) {
    ASSERT_NEAR(cap.gradient[i], 0.01 * g[i], 1e-15 * std::max(1.0, std::abs(w[i])));
  }
  EXPECT_EQ(cap.labels, shard.labels);
  EXPECT_EQ(truth.pixels, shard.pixels);

  const auto bytes = io::encode(capture_container(cap));
  const auto [cap2, truth2] = capture_victim(model, w, 0, shard, {2, 0}, local, {}, 1);
  EXPECT_EQ(io::encode(capture_container(cap2)), bytes);

  const auto back = read_capture(io::decode(bytes));
  EXPECT_EQ(back.gradient, cap.gradient);
  EXPECT_EQ(back.labels, cap.labels);
  EXPECT_EQ(back.model, cap.model);
  EXPECT_EQ(back.client, 2u);
}

TEST_F(TrainingTest, CaptureSchemaRejectsPixels) {
  const auto w = model.init_params(3);
  const auto shard = train.subset(std::vector<std::size_t>{0});
  const auto [cap, truth] = capture_victim(model, w, 0, shard, {0, 0}, {0.01, 1, 1}, {}, 1);
  auto c = capture_container(cap);
  c.tensors.push_back({"images", {1, 1, 16, 16}, truth.pixels});
  EXPECT_THROW(read_capture(c), FormatError);
  const auto gt = read_ground_truth(ground_truth_container(truth));
  EXPECT_EQ(gt.pixels, truth.pixels);
  EXPECT_THROW(read_capture(ground_truth_container(truth)), FormatError);
}

}  // namespace
}  // namespace gradlab::fed
