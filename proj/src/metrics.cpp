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


#include "gradlab/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "gradlab/error.hpp"

namespace gradlab::metrics {
namespace {

void check_same(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw ShapeError("images differ in size: " + std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()));
  }
  if (x.empty()) throw ShapeError("empty image");
}

Aggregate aggregate(const std::vector<ImageQuality>& rows, double ImageQuality::*field) {
  Aggregate a{0.0, std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& r : rows) {
    const double v = r.*field;
    a.mean += v;
    a.min = std::min(a.min, v);
    a.max = std::max(a.max, v);
  }
  a.mean /= double(rows.size());
  // An all-infinite column has mean +inf; clamp rounding drift otherwise.
  if (std::isfinite(a.mean)) a.mean = std::clamp(a.mean, a.min, a.max);
  return a;
}

}  // namespace

double mse(std::span<const double> x, std::span<const double> y) {
  check_same(x, y);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return acc / double(x.size());
}

double psnr_from_mse(double m, double max_val) {
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_val * max_val / m);
}

double psnr(std::span<const double> x, std::span<const double> y, double max_val) {
  return psnr_from_mse(mse(x, y), max_val);
}

double ssim(std::span<const double> x, std::span<const double> y, std::size_t channels,
            double c1, double c2) {
  check_same(x, y);
  if (channels == 0 || x.size() % channels != 0) throw ShapeError("channel count does not divide the image");
  const std::size_t plane = x.size() / channels;
  double total = 0.0;
  for (std::size_t c = 0; c < channels; ++c) {
    const auto xs = x.subspan(c * plane, plane);
    const auto ys = y.subspan(c * plane, plane);
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= double(plane);
    my /= double(plane);
    double vx = 0.0, vy = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      const double dx = xs[i] - mx, dy = ys[i] - my;
      vx += dx * dx;
      vy += dy * dy;
      cov += dx * dy;
    }
    vx /= double(plane);
    vy /= double(plane);
    cov /= double(plane);
    total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
             ((mx * mx + my * my + c1) * (vx + vy + c2));
  }
  return total / double(channels);
}

std::string canonical_tag(const std::string& tag) {
  std::size_t b = 0, e = tag.size();
  while (b < e && std::isspace(static_cast<unsigned char>(tag[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(tag[e - 1]))) --e;
  std::string out = tag.substr(b, e - b);
  for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> sa, sb;
  for (const auto& t : a) {
    if (auto c = canonical_tag(t); !c.empty()) sa.insert(std::move(c));
  }
  for (const auto& t : b) {
    if (auto c = canonical_tag(t); !c.empty()) sb.insert(std::move(c));
  }
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  return double(inter) / double(sa.size() + sb.size() - inter);
}

std::vector<std::string> read_tags(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> tags;
  std::string line;
  while (std::getline(in, line)) {
    if (!canonical_tag(line).empty()) tags.push_back(line);
  }
  return tags;
}

RankBy parse_rank_by(const std::string& name) {
  if (name == "psnr") return RankBy::psnr;
  if (name == "ssim") return RankBy::ssim;
  if (name == "mse") return RankBy::mse;
  throw ConfigError("unknown ranking metric: " + name);
}

std::string to_string(RankBy r) {
  switch (r) {
    case RankBy::psnr: return "psnr";
    case RankBy::ssim: return "ssim";
    case RankBy::mse: return "mse";
  }
  return "psnr";
}

QualityReport batch_report(const ag::Tensor& originals, const ag::Tensor& recon, RankBy rank_by) {
  if (originals.shape() != recon.shape()) {
    throw ShapeError("batch shapes differ: " + ag::to_string(originals.shape()) + " vs " +
                     ag::to_string(recon.shape()));
  }
  if (originals.rank() != 4) throw ShapeError("expected [n, C, H, W] batches");
  const std::size_t n = originals.dim(0);
  if (n == 0) throw ShapeError("empty batch");
  const std::size_t channels = originals.dim(1);
  const std::size_t size = originals.numel() / n;
  QualityReport r;
  r.rank_by = rank_by;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = originals.values().subspan(i * size, size);
    const auto y = recon.values().subspan(i * size, size);
    const double m = mse(x, y);
    r.images.push_back({m, psnr_from_mse(m), ssim(x, y, channels)});
  }
  r.mse = aggregate(r.images, &ImageQuality::mse);
  r.psnr = aggregate(r.images, &ImageQuality::psnr);
  r.ssim = aggregate(r.images, &ImageQuality::ssim);
  // Higher score is better; mse is negated. Strict comparisons keep the
  // lowest index on ties.
  auto score = [&](const ImageQuality& q) {
    switch (rank_by) {
      case RankBy::psnr: return q.psnr;
      case RankBy::ssim: return q.ssim;
      case RankBy::mse: return -q.mse;
    }
    return q.psnr;
  };
  for (std::size_t i = 1; i < n; ++i) {
    if (score(r.images[i]) > score(r.images[r.best_index])) r.best_index = i;
    if (score(r.images[i]) < score(r.images[r.worst_index])) r.worst_index = i;
  }
  return r;
}

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

nlohmann::json to_json(const QualityReport& r) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return format_number(v);
  };
  auto agg = [&](const Aggregate& a) {
    return nlohmann::json{{"mean", num(a.mean)}, {"min", num(a.min)}, {"max", num(a.max)}};
  };
  nlohmann::json images = nlohmann::json::array();
  for (const auto& q : r.images) {
    images.push_back({{"mse", num(q.mse)}, {"psnr", num(q.psnr)}, {"ssim", num(q.ssim)}});
  }
  return nlohmann::json{{"rank_by", to_string(r.rank_by)},
                        {"images", images},
                        {"mse", agg(r.mse)},
                        {"psnr", agg(r.psnr)},
                        {"ssim", agg(r.ssim)},
                        {"best_index", r.best_index},
                        {"worst_index", r.worst_index}};
}

std::string to_csv(const QualityReport& r) {
  std::string out = "index,mse,psnr,ssim\n";
  for (std::size_t i = 0; i < r.images.size(); ++i) {
    const auto& q = r.images[i];
    out += std::to_string(i) + "," + format_number(q.mse) + "," + format_number(q.psnr) + "," +
           format_number(q.ssim) + "\n";
  }
  return out;
}

}  // namespace gradlab::metrics
