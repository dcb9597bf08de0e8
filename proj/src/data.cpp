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


#include "gradlab/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "gradlab/error.hpp"
#include "gradlab/rng.hpp"

namespace gradlab::data {
namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at) {
  return (std::uint32_t(b[at]) << 24) | (std::uint32_t(b[at + 1]) << 16) |
         (std::uint32_t(b[at + 2]) << 8) | std::uint32_t(b[at + 3]);
}

void put_be32(std::string& s, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) s.push_back(char((v >> shift) & 0xff));
}

// Parses the whitespace/comment separated header fields of a PNM file.
class PnmHeader {
 public:
  PnmHeader(const std::vector<unsigned char>& bytes, const fs::path& path)
      : bytes_(bytes), path_(path) {}

  std::string token() {
    skip();
    std::string t;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) t.push_back(char(bytes_[pos_++]));
    if (t.empty()) throw FormatError(path_.string() + ": truncated PNM header");
    return t;
  }

  std::size_t number() {
    const auto t = token();
    if (!std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(c); })) {
      throw FormatError(path_.string() + ": bad PNM header field '" + t + "'");
    }
    return std::stoul(t);
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_start() const { return pos_ + 1; }

 private:
  void skip() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  const fs::path& path_;
  std::size_t pos_ = 0;
};

// Segments a..g of a seven-segment display as (x0, y0, x1, y1) in a unit box.
constexpr std::array<std::array<double, 4>, 7> kSegments{{
    {0.0, 0.0, 1.0, 0.0},  // a top
    {1.0, 0.0, 1.0, 0.5},  // b upper right
    {1.0, 0.5, 1.0, 1.0},  // c lower right
    {0.0, 1.0, 1.0, 1.0},  // d bottom
    {0.0, 0.5, 0.0, 1.0},  // e lower left
    {0.0, 0.0, 0.0, 0.5},  // f upper left
    {0.0, 0.5, 1.0, 0.5},  // g middle
}};

constexpr std::array<unsigned, 10> kDigitMasks{
    0b0111111, 0b0000110, 0b1011011, 0b1001111, 0b1100110,
    0b1101101, 0b1111101, 0b0000111, 0b1111111, 0b1101111};

double segment_distance(double px, double py, double x0, double y0, double x1,
                        double y1) {
  const double dx = x1 - x0, dy = y1 - y0;
  const double len2 = dx * dx + dy * dy;
  const double t = std::clamp(((px - x0) * dx + (py - y0) * dy) / len2, 0.0, 1.0);
  const double qx = x0 + t * dx - px, qy = y0 + t * dy - py;
  return std::sqrt(qx * qx + qy * qy);
}

}  // namespace

std::span<const double> Dataset::image(std::size_t i) const {
  if (i >= size()) throw ShapeError("image index out of range");
  return std::span<const double>(pixels).subspan(i * image_size(), image_size());
}

ag::Tensor Dataset::batch(std::span<const std::size_t> indices) const {
  std::vector<double> v;
  v.reserve(indices.size() * image_size());
  for (const std::size_t i : indices) {
    const auto img = image(i);
    v.insert(v.end(), img.begin(), img.end());
  }
  return ag::Tensor({indices.size(), channels, height, width}, std::move(v));
}

ag::Tensor Dataset::all() const {
  return ag::Tensor({size(), channels, height, width}, pixels);
}

std::vector<int> Dataset::labels_of(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (const std::size_t i : indices) {
    if (i >= size()) throw ShapeError("label index out of range");
    out.push_back(labels[i]);
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out{channels, height, width, {}, labels_of(indices)};
  out.pixels.reserve(indices.size() * image_size());
  for (const std::size_t i : indices) {
    const auto img = image(i);
    out.pixels.insert(out.pixels.end(), img.begin(), img.end());
  }
  return out;
}

Dataset load_idx(const fs::path& images, const fs::path& labels) {
  const auto ib = read_file(images);
  const auto lb = read_file(labels);
  if (ib.size() < 16 || be32(ib, 0) != kIdxImages) {
    throw FormatError(images.string() + ": not an IDX image file (magic 0x00000803)");
  }
  if (lb.size() < 8 || be32(lb, 0) != kIdxLabels) {
    throw FormatError(labels.string() + ": not an IDX label file (magic 0x00000801)");
  }
  const std::size_t n = be32(ib, 4), rows = be32(ib, 8), cols = be32(ib, 12);
  if (ib.size() != 16 + n * rows * cols) throw FormatError(images.string() + ": truncated IDX payload");
  const std::size_t nl = be32(lb, 4);
  if (lb.size() != 8 + nl) throw FormatError(labels.string() + ": truncated IDX payload");
  if (nl != n) {
    throw FormatError("IDX count mismatch: " + std::to_string(n) + " images, " +
                      std::to_string(nl) + " labels");
  }
  Dataset ds{1, rows, cols, {}, {}};
  ds.pixels.resize(n * rows * cols);
  for (std::size_t i = 0; i < ds.pixels.size(); ++i) ds.pixels[i] = ib[16 + i] / 255.0;
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = lb[8 + i];
  return ds;
}

void write_idx(const Dataset& ds, const fs::path& images, const fs::path& labels) {
  if (ds.channels != 1) throw ShapeError("IDX holds single-channel images only");
  std::string ib, lb;
  put_be32(ib, kIdxImages);
  put_be32(ib, std::uint32_t(ds.size()));
  put_be32(ib, std::uint32_t(ds.height));
  put_be32(ib, std::uint32_t(ds.width));
  for (const double x : ds.pixels) ib.push_back(char(quantize_pixel(std::clamp(x, 0.0, 1.0))));
  put_be32(lb, kIdxLabels);
  put_be32(lb, std::uint32_t(ds.size()));
  for (const int l : ds.labels) {
    if (l < 0 || l > 255) throw ConfigError("IDX labels must fit in a byte");
    lb.push_back(char(l));
  }
  write_file(images, ib);
  write_file(labels, lb);
}

Dataset load_image_dir(const fs::path& dir, const fs::path& labels_csv) {
  std::ifstream csv(labels_csv);
  if (!csv) throw IoError("cannot open " + labels_csv.string());
  std::map<std::string, int> by_name;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(csv, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw FormatError(labels_csv.string() + ":" + std::to_string(line_no) + ": expected file,label");
    }
    const std::string name = line.substr(0, comma);
    const std::string value = line.substr(comma + 1);
    try {
      std::size_t used = 0;
      const int label = std::stoi(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      by_name[name] = label;
    } catch (const std::exception&) {
      if (line_no == 1) continue;  // header row
      throw FormatError(labels_csv.string() + ":" + std::to_string(line_no) + ": bad label '" + value + "'");
    }
  }

  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension().string();
    if (entry.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.size() != by_name.size()) {
    throw FormatError("label/image count mismatch: " + std::to_string(files.size()) +
                      " images, " + std::to_string(by_name.size()) + " labels");
  }

  Dataset ds;
  for (const auto& f : files) {
    const auto it = by_name.find(f.filename().string());
    if (it == by_name.end()) throw FormatError("no label for " + f.filename().string());
    Image img = read_image(f);
    if (ds.labels.empty()) {
      ds.channels = img.channels;
      ds.height = img.height;
      ds.width = img.width;
    } else if (img.channels != ds.channels || img.height != ds.height || img.width != ds.width) {
      throw ShapeError(f.string() + ": image shape differs from the first image");
    }
    ds.pixels.insert(ds.pixels.end(), img.pixels.begin(), img.pixels.end());
    ds.labels.push_back(it->second);
  }
  return ds;
}

Dataset synthetic_digits(std::size_t count, std::uint64_t seed, std::size_t height,
                         std::size_t width, std::size_t channels) {
  if (count == 0) throw ConfigError("synthetic dataset needs at least one image");
  if (height < 8 || width < 8) throw ConfigError("synthetic images must be at least 8x8");
  Dataset ds{channels, height, width, std::vector<double>(count * channels * height * width, 0.0), {}};
  ds.labels.resize(count);
  std::vector<double> glyph(height * width);
  for (std::size_t n = 0; n < count; ++n) {
    Rng rng = derive_stream(seed, "synthetic", n);
    const int digit = static_cast<int>(rng.below(10));
    ds.labels[n] = digit;
    const double box_w = width * rng.uniform(0.30, 0.42);
    const double box_h = height * rng.uniform(0.50, 0.62);
    const double x0 = (width - box_w) / 2 + rng.uniform(-0.08, 0.08) * width;
    const double y0 = (height - box_h) / 2 + rng.uniform(-0.06, 0.06) * height;
    const double slant = rng.uniform(-0.15, 0.15);
    const double stroke = rng.uniform(0.045, 0.075) * width;
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        const double py = (r + 0.5 - y0) / box_h;
        const double px = (c + 0.5 - x0) / box_w + slant * (py - 0.5);
        double d = 1e9;
        for (std::size_t s = 0; s < 7; ++s) {
          if (!(kDigitMasks[digit] >> s & 1u)) continue;
          const auto& seg = kSegments[s];
          // Distances in pixels: rescale the unit box axes back.
          const double dist = segment_distance(px * box_w, py * box_h, seg[0] * box_w,
                                              seg[1] * box_h, seg[2] * box_w, seg[3] * box_h);
          d = std::min(d, dist);
        }
        glyph[r * width + c] = std::clamp(stroke - d + 0.5, 0.0, 1.0);
      }
    }
    std::vector<double> tint(channels, 1.0);
    if (channels > 1) {
      for (auto& t : tint) t = rng.uniform(0.55, 1.0);
    }
    double* out = ds.pixels.data() + n * ds.image_size();
    for (std::size_t ch = 0; ch < channels; ++ch) {
      for (std::size_t i = 0; i < height * width; ++i) {
        out[ch * height * width + i] =
            std::clamp(tint[ch] * glyph[i] + 0.03 * rng.normal(), 0.0, 1.0);
      }
    }
  }
  return ds;
}

std::uint8_t quantize_pixel(double x) {
  return static_cast<std::uint8_t>(std::floor(255.0 * x + 0.5));
}

void write_image(std::span<const double> chw, std::size_t channels, std::size_t height,
                 std::size_t width, const fs::path& path, RangePolicy policy) {
  if (channels != 1 && channels != 3) throw ShapeError("images must have 1 or 3 channels");
  if (chw.size() != channels * height * width) throw ShapeError("pixel count does not match shape");
  const std::string ext = path.extension().string();
  if ((channels == 1 && ext == ".ppm") || (channels == 3 && ext == ".pgm")) {
    throw ConfigError(path.string() + ": use .pgm for 1 channel and .ppm for 3");
  }
  std::string bytes = (channels == 1 ? "P5\n" : "P6\n") + std::to_string(width) + " " +
                      std::to_string(height) + "\n255\n";
  const std::size_t plane = height * width;
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      double x = chw[c * plane + i];
      if (!(x >= 0.0 && x <= 1.0)) {
        if (policy == RangePolicy::error || std::isnan(x)) {
          throw NumericError(path.string() + ": pixel value outside [0, 1]");
        }
        x = std::clamp(x, 0.0, 1.0);
      }
      bytes.push_back(char(quantize_pixel(x)));
    }
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file(path, bytes);
}

Image read_image(const fs::path& path) {
  const auto bytes = read_file(path);
  PnmHeader header(bytes, path);
  const auto magic = header.token();
  if (magic != "P5" && magic != "P6") throw FormatError(path.string() + ": expected binary PGM (P5) or PPM (P6)");
  Image img;
  img.channels = magic == "P5" ? 1 : 3;
  img.width = header.number();
  img.height = header.number();
  const std::size_t maxval = header.number();
  if (maxval == 0 || maxval > 255) throw FormatError(path.string() + ": only 8-bit PNM is supported");
  const std::size_t plane = img.width * img.height;
  const std::size_t start = header.raster_start();
  if (bytes.size() < start + plane * img.channels) throw FormatError(path.string() + ": truncated raster");
  img.pixels.resize(plane * img.channels);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < img.channels; ++c) {
      img.pixels[c * plane + i] = bytes[start + i * img.channels + c] / double(maxval);
    }
  }
  return img;
}

}  // namespace gradlab::data
