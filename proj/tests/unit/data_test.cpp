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

#include <gtest/gtest.h>

#include "gradlab/container.hpp"
#include "gradlab/data.hpp"
#include "gradlab/error.hpp"
#include "gradlab/rng.hpp"

namespace gradlab {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("gradlab_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_bytes(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

TEST(RngStreamTest, SameKeySameDraws) {
  Rng a = derive_stream(7, "client", 3);
  Rng b = derive_stream(7, "client", 3);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngStreamTest, DifferentLabelsDiffer) {
  Rng a = derive_stream(7, "shuffle", 0);
  Rng b = derive_stream(7, "dirichlet", 0);
  Rng c = derive_stream(7, "shuffle", 1);
  int same_ab = 0, same_ac = 0;
  for (int i = 0; i < 16; ++i) {
    const auto x = a.next_u64();
    same_ab += x == b.next_u64();
    same_ac += x == c.next_u64();
  }
  EXPECT_EQ(same_ab, 0);
  EXPECT_EQ(same_ac, 0);
}

TEST(RngStreamTest, GaussianMoments) {
  Rng rng = derive_stream(11, "gauss");
  constexpr int kN = 1000000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < kN; ++i) {
    const double x = rng.normal();
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / kN;
  EXPECT_LT(std::abs(mean), 0.01);
  EXPECT_NEAR(sum_sq / kN - mean * mean, 1.0, 0.01);
}

TEST(ImageIoTest, QuantizationRounding) {
  EXPECT_EQ(data::quantize_pixel(0.0), 0);
  EXPECT_EQ(data::quantize_pixel(1.0), 255);
  EXPECT_EQ(data::quantize_pixel(0.5), 128);
}

TEST(ImageIoTest, FormatFollowsChannels) {
  TempDir dir;
  const std::vector<double> gray{0.0, 0.5, 1.0, 0.25};
  data::write_image(gray, 1, 2, 2, dir.path() / "g.pgm");
  EXPECT_EQ(read_bytes(dir.path() / "g.pgm").substr(0, 2), "P5");
  std::vector<double> rgb(12, 0.2);
  data::write_image(rgb, 3, 2, 2, dir.path() / "c.ppm");
  EXPECT_EQ(read_bytes(dir.path() / "c.ppm").substr(0, 2), "P6");
  EXPECT_THROW(data::write_image(rgb, 3, 2, 2, dir.path() / "c.pgm"), ConfigError);
}

TEST(ImageIoTest, OutOfRangeRejectedByDefault) {
  TempDir dir;
  const std::vector<double> v{1.2, -0.1};
  EXPECT_THROW(data::write_image(v, 1, 1, 2, dir.path() / "x.pgm"), NumericError);
  data::write_image(v, 1, 1, 2, dir.path() / "x.pgm", data::RangePolicy::clamp);
  const auto img = data::read_image(dir.path() / "x.pgm");
  EXPECT_EQ(img.pixels, (std::vector<double>{1.0, 0.0}));
}

TEST(ImageIoTest, QuantizedRoundTripIsExact) {
  TempDir dir;
  Rng rng(3);
  std::vector<double> v(3 * 5 * 4);
  for (auto& x : v) x = data::quantize_pixel(rng.uniform01()) / 255.0;
  data::write_image(v, 3, 5, 4, dir.path() / "r.ppm");
  const auto img = data::read_image(dir.path() / "r.ppm");
  EXPECT_EQ(img.channels, 3u);
  EXPECT_EQ(img.height, 5u);
  EXPECT_EQ(img.width, 4u);
  EXPECT_EQ(img.pixels, v);
  // 255 reads back as exactly 1.0.
  data::write_image(std::vector<double>{1.0}, 1, 1, 1, dir.path() / "w.pgm");
  EXPECT_EQ(data::read_image(dir.path() / "w.pgm").pixels[0], 1.0);
}

TEST(ImageIoTest, HeaderCommentsAccepted) {
  TempDir dir;
  write_bytes(dir.path() / "c.pgm", std::string("P5\n# made by hand\n2 1\n255\n") + char(0) + char(255));
  EXPECT_EQ(data::read_image(dir.path() / "c.pgm").pixels, (std::vector<double>{0.0, 1.0}));
  write_bytes(dir.path() / "t.pgm", "P5\n2 2\n255\n\x01");
  EXPECT_THROW(data::read_image(dir.path() / "t.pgm"), FormatError);
}

TEST(IdxTest, RoundTripAndMagic) {
  TempDir dir;
  auto ds = data::synthetic_digits(6, 1, 10, 12);
  for (auto& x : ds.pixels) x = data::quantize_pixel(x) / 255.0;
  data::write_idx(ds, dir.path() / "img.idx", dir.path() / "lbl.idx");
  const auto back = data::load_idx(dir.path() / "img.idx", dir.path() / "lbl.idx");
  EXPECT_EQ(back.pixels, ds.pixels);
  EXPECT_EQ(back.labels, ds.labels);
  EXPECT_EQ(back.height, 10u);
  EXPECT_EQ(back.width, 12u);
  // Swapped files fail on magic.
  EXPECT_THROW(data::load_idx(dir.path() / "lbl.idx", dir.path() / "img.idx"), FormatError);
  auto bytes = read_bytes(dir.path() / "img.idx");
  write_bytes(dir.path() / "short.idx", bytes.substr(0, bytes.size() - 1));
  EXPECT_THROW(data::load_idx(dir.path() / "short.idx", dir.path() / "lbl.idx"), FormatError);
}

TEST(IdxTest, CountMismatchRejected) {
  TempDir dir;
  const auto a = data::synthetic_digits(4, 1, 8, 8);
  const auto b = data::synthetic_digits(3, 1, 8, 8);
  data::write_idx(a, dir.path() / "a.idx", dir.path() / "al.idx");
  data::write_idx(b, dir.path() / "b.idx", dir.path() / "bl.idx");
  EXPECT_THROW(data::load_idx(dir.path() / "a.idx", dir.path() / "bl.idx"), FormatError);
}

TEST(ImageDirTest, LoadsSortedWithLabels) {
  TempDir dir;
  const auto ds = data::synthetic_digits(3, 5, 8, 8, 3);
  std::ofstream csv(dir.path() / "labels.csv");
  csv << "file,label\n";
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string name = "img" + std::to_string(2 - i) + ".ppm";
    data::write_image(ds.image(i), 3, 8, 8, dir.path() / "imgs" / name);
    csv << name << "," << ds.labels[i] << "\n";
  }
  csv.close();
  const auto back = data::load_image_dir(dir.path() / "imgs", dir.path() / "labels.csv");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back.channels, 3u);
  // img0 sorts first and holds dataset row 2.
  EXPECT_EQ(back.labels[0], ds.labels[2]);
  EXPECT_NEAR(back.image(0)[5], ds.image(2)[5], 0.5 / 255 + 1e-12);

  std::ofstream extra(dir.path() / "more.csv");
  extra << "img0.ppm,1\n";
  extra.close();
  EXPECT_THROW(data::load_image_dir(dir.path() / "imgs", dir.path() / "more.csv"), FormatError);
}

TEST(SyntheticTest, DeterministicAndInRange) {
  const auto a = data::synthetic_digits(20, 9);
  const auto b = data::synthetic_digits(20, 9);
  EXPECT_EQ(a.pixels, b.pixels);
  EXPECT_EQ(a.labels, b.labels);
  for (const double x : a.pixels) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
  EXPECT_NE(data::synthetic_digits(20, 10).pixels, a.pixels);
}

io::Container sample_container() {
  io::Container c;
  c.role = "checkpoint";
  c.metadata = {{"round", 3}};
  c.tensors.push_back({"params.a", {2, 2}, {1.0, -2.5, 3e-300, 0.1}});
  c.tensors.push_back({"params.b", {3}, {0.0, 1.0 / 3.0, -7.0}});
  return c;
}

TEST(ContainerTest, RoundTripIsLossless) {
  const auto c = sample_container();
  const std::string bytes = io::encode(c);
  EXPECT_EQ(bytes.substr(0, 4), "GOBF");
  const auto back = io::decode(bytes);
  EXPECT_EQ(back.role, "checkpoint");
  EXPECT_EQ(back.metadata, c.metadata);
  ASSERT_EQ(back.tensors.size(), 2u);
  EXPECT_EQ(back.get("params.b").values, c.tensors[1].values);
  EXPECT_EQ(back.get("params.a").shape, (ag::Shape{2, 2}));
  EXPECT_EQ(io::encode(back), bytes);
}

TEST(ContainerTest, PayloadLengthMatchesHeader) {
  const std::string bytes = io::encode(sample_container());
  const std::size_t header = static_cast<unsigned char>(bytes[6]) |
                             (static_cast<unsigned char>(bytes[7]) << 8);
  EXPECT_EQ(bytes.size() - 10 - header, 7u * 8u);
  EXPECT_THROW(io::decode(bytes.substr(0, bytes.size() - 8)), FormatError);
  EXPECT_THROW(io::decode(bytes + "x"), FormatError);
}

TEST(ContainerTest, DistinctMagicAndVersionErrors) {
  std::string bytes = io::encode(sample_container());
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(io::decode(bad_magic), FormatError);
  std::string bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(io::decode(bad_version), VersionError);
  try {
    io::decode(bad_version);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), "version");
  }
}

}  // namespace
}  // namespace gradlab
