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

#include <gtest/gtest.h>

#include "gradlab/error.hpp"
#include "gradlab/metrics.hpp"
#include "gradlab/rng.hpp"

namespace gradlab::metrics {
namespace {

std::vector<double> random_image(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform01();
  return v;
}

TEST(MseTest, Examples) {
  const std::vector<double> x(16, 0.0), y(16, 0.1);
  EXPECT_EQ(mse(x, x), 0.0);
  EXPECT_NEAR(mse(x, y), 0.01, 1e-17);
  const std::vector<double> short_y(15, 0.0);
  EXPECT_THROW(mse(x, short_y), ShapeError);
}

TEST(MseTest, MatchesLoopOracle) {
  const auto x = random_image(300, 1), y = random_image(300, 2);
  long double acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += (long double)(x[i] - y[i]) * (x[i] - y[i]);
  EXPECT_NEAR(mse(x, y), double(acc / 300), 1e-15);
}

TEST(PsnrTest, Examples) {
  const std::vector<double> x(16, 0.0), y(16, 0.1);
  EXPECT_NEAR(psnr(x, y), 20.0, 1e-12);
  EXPECT_EQ(psnr(x, x), std::numeric_limits<double>::infinity());
  EXPECT_EQ(format_number(psnr(x, x)), "inf");
}

TEST(PsnrTest, RandomPairsStayLow) {
  double total = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    total += psnr(random_image(28 * 28, 2 * s), random_image(28 * 28, 2 * s + 1));
  }
  EXPECT_LT(total / 20, 10.0);
}

TEST(PsnrTest, StrictlyDecreasingInMse) {
  double prev = std::numeric_limits<double>::infinity();
  for (double m = 1e-6; m < 1.0; m *= 1.7) {
    const double p = psnr_from_mse(m);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(SsimTest, IdenticalIsOne) {
  const auto x = random_image(64, 3);
  EXPECT_DOUBLE_EQ(ssim(x, x), 1.0);
}

TEST(SsimTest, ConstantImagesClosedForm) {
  const std::vector<double> x(25, 0.5), y(25, 0.25);
  const double expected = (2 * 0.5 * 0.25 + kSsimC1) * kSsimC2 /
                          ((0.25 + 0.0625 + kSsimC1) * kSsimC2);
  EXPECT_NEAR(ssim(x, y), expected, 1e-6);
  EXPECT_NEAR(ssim(x, y), 0.2501 / 0.3126, 1e-12);
}

TEST(SsimTest, SymmetricAndBounded) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto x = random_image(3 * 49, s), y = random_image(3 * 49, s + 100);
    EXPECT_EQ(ssim(x, y, 3), ssim(y, x, 3));
    EXPECT_GE(ssim(x, y, 3), -1.0);
    EXPECT_LE(ssim(x, y, 3), 1.0);
  }
}

TEST(SsimTest, InvariantUnderSharedPermutation) {
  auto x = random_image(100, 4), y = random_image(100, 5);
  const double before = ssim(x, y);
  const double m = mse(x, y);
  std::vector<std::size_t> perm(100);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(6);
  for (std::size_t i = 99; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  std::vector<double> px(100), py(100);
  for (std::size_t i = 0; i < 100; ++i) {
    px[i] = x[perm[i]];
    py[i] = y[perm[i]];
  }
  EXPECT_NEAR(ssim(px, py), before, 1e-12);
  EXPECT_NEAR(mse(px, py), m, 1e-15);
}

TEST(JaccardTest, Examples) {
  const std::vector<std::string> a{"robin", "bird", "branch"};
  EXPECT_EQ(jaccard(a, a), 1.0);
  EXPECT_EQ(jaccard(a, {"car", "road"}), 0.0);
  EXPECT_DOUBLE_EQ(jaccard({"a", "b", "c", "d"}, {"a", "b", "c", "e"}), 0.6);
  EXPECT_EQ(jaccard({}, {}), 1.0);
  EXPECT_EQ(jaccard({" Orange (Color) "}, {"orange (color)"}), 1.0);
  EXPECT_EQ(jaccard({"x", "y"}, {"y", "z", "w"}), jaccard({"y", "z", "w"}, {"x", "y"}));
}

TEST(JaccardTest, ReadsTagFiles) {
  const auto path = std::filesystem::temp_directory_path() / "gradlab_tags.txt";
  {
    std::ofstream out(path);
    out << "Bird\n\n  robin \nBranch\n";
  }
  const auto tags = read_tags(path);
  EXPECT_EQ(tags.size(), 3u);
  EXPECT_EQ(jaccard(tags, {"bird", "robin", "branch"}), 1.0);
  std::filesystem::remove(path);
}

ag::Tensor batch_of(std::vector<double> v, std::size_t n) {
  const std::size_t per = v.size() / n;
  return ag::Tensor({n, 1, 1, per}, std::move(v));
}

TEST(BatchReportTest, IdenticalPairs) {
  const auto x = batch_of(random_image(3 * 16, 1), 3);
  const auto r = batch_report(x, x);
  for (const auto& q : r.images) EXPECT_TRUE(std::isinf(q.psnr));
  EXPECT_EQ(r.best_index, 0u);
  EXPECT_EQ(r.worst_index, 0u);
  EXPECT_TRUE(std::isinf(r.psnr.mean));
}

TEST(BatchReportTest, WorstPointsAtCorruptedImage) {
  auto v = random_image(4 * 16, 2);
  auto w = v;
  for (std::size_t i = 2 * 16; i < 3 * 16; ++i) w[i] = 1.0 - w[i];
  w[5] += 1e-3;
  const auto r = batch_report(batch_of(v, 4), batch_of(w, 4));
  EXPECT_EQ(r.worst_index, 2u);
  EXPECT_EQ(r.best_index, 1u);
  EXPECT_EQ(batch_report(batch_of(v, 4), batch_of(w, 4), RankBy::mse).worst_index, 2u);
  EXPECT_EQ(batch_report(batch_of(v, 4), batch_of(w, 4), RankBy::ssim).worst_index, 2u);
}

TEST(BatchReportTest, AggregatesMatchRecomputation) {
  const auto a = batch_of(random_image(5 * 20, 3), 5);
  const auto b = batch_of(random_image(5 * 20, 4), 5);
  const auto r = batch_report(a, b);
  double sum = 0.0, lo = 1e9, hi = -1e9;
  for (std::size_t i = 0; i < 5; ++i) {
    const double p = psnr(a.values().subspan(i * 20, 20), b.values().subspan(i * 20, 20));
    EXPECT_EQ(r.images[i].psnr, p);
    sum += p;
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  EXPECT_NEAR(r.psnr.mean, sum / 5, 1e-12);
  EXPECT_EQ(r.psnr.min, lo);
  EXPECT_EQ(r.psnr.max, hi);
  EXPECT_LE(r.ssim.min, r.ssim.mean);
  EXPECT_LE(r.ssim.mean, r.ssim.max);
  EXPECT_EQ(to_csv(r).substr(0, 19), "index,mse,psnr,ssim");
  EXPECT_THROW(batch_report(a, batch_of(random_image(4 * 25, 1), 4)), ShapeError);
}

}  // namespace
}  // namespace gradlab::metrics
