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


#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gradlab/tensor.hpp"
#include "json.hpp"

namespace gradlab::metrics {

inline constexpr double kSsimC1 = 1e-4;
inline constexpr double kSsimC2 = 9e-4;

double mse(std::span<const double> x, std::span<const double> y);
// +inf when the images are identical.
double psnr(std::span<const double> x, std::span<const double> y,
            double max_val = 1.0);
double psnr_from_mse(double mse, double max_val = 1.0);
// Global-statistics SSIM per channel, averaged over channels.
double ssim(std::span<const double> x, std::span<const double> y,
            std::size_t channels = 1, double c1 = kSsimC1, double c2 = kSsimC2);

// Trimmed and case-folded; empty after trimming means "no tag".
std::string canonical_tag(const std::string& tag);
double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);
std::vector<std::string> read_tags(const std::filesystem::path& path);

enum class RankBy { psnr, ssim, mse };
RankBy parse_rank_by(const std::string& name);
std::string to_string(RankBy r);

struct ImageQuality {
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct Aggregate {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct QualityReport {
  RankBy rank_by = RankBy::psnr;
  std::vector<ImageQuality> images;
  Aggregate mse, psnr, ssim;
  std::size_t best_index = 0;
  std::size_t worst_index = 0;
};

// Batches are [n, C, H, W].
QualityReport batch_report(const ag::Tensor& originals, const ag::Tensor& recon,
                           RankBy rank_by = RankBy::psnr);

// Shortest round-trip decimal; infinities as "inf" / "-inf".
std::string format_number(double v);
nlohmann::json to_json(const QualityReport& r);
// Header `index,mse,psnr,ssim` plus one row per image.
std::string to_csv(const QualityReport& r);

}  // namespace gradlab::metrics
