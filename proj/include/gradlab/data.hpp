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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gradlab/tensor.hpp"

namespace gradlab::data {

// Channel-first images in [0, 1] with integer labels.
struct Dataset {
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t image_size() const { return channels * height * width; }
  std::span<const double> image(std::size_t i) const;

  // [n, C, H, W] constant tensor of the selected rows.
  ag::Tensor batch(std::span<const std::size_t> indices) const;
  ag::Tensor all() const;
  std::vector<int> labels_of(std::span<const std::size_t> indices) const;
  Dataset subset(std::span<const std::size_t> indices) const;
};

Dataset load_idx(const std::filesystem::path& images,
                 const std::filesystem::path& labels);
void write_idx(const Dataset& ds, const std::filesystem::path& images,
               const std::filesystem::path& labels);

// Directory of P5/P6 files plus a CSV of `file,label` rows (header optional).
// Files are taken in sorted path order.
Dataset load_image_dir(const std::filesystem::path& dir,
                       const std::filesystem::path& labels_csv);

// Seven-segment digit glyphs with random placement, stroke width and noise.
// A hermetic stand-in for handwritten digits.
Dataset synthetic_digits(std::size_t count, std::uint64_t seed,
                         std::size_t height = 28, std::size_t width = 28,
                         std::size_t channels = 1);

struct Image {
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;
};

enum class RangePolicy { error, clamp };

// round(255 x) with halves rounded up; P5 for one channel, P6 for three.
void write_image(std::span<const double> chw, std::size_t channels,
                 std::size_t height, std::size_t width,
                 const std::filesystem::path& path,
                 RangePolicy policy = RangePolicy::error);
Image read_image(const std::filesystem::path& path);

std::uint8_t quantize_pixel(double x);

}  // namespace gradlab::data
