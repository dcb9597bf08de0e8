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


#include "gradlab/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gradlab/error.hpp"
#include "gradlab/ops.hpp"
#include "gradlab/optim.hpp"
#include "gradlab/rng.hpp"

namespace gradlab::attack {
namespace {

void check_images(const ag::Tensor& t, const char* what) {
  if (t.rank() != 4) throw ShapeError(std::string(what) + " must be [n, C, H, W]");
}

ag::Tensor upsample_matrix(std::size_t n) { return bicubic_matrix(n, 2 * n); }

ag::Tensor conv_layer(const ag::Tensor& x, std::span<const ag::Tensor> p, std::size_t i) {
  return ag::add_channel_bias(ag::conv2d(x, p[2 * i], 1, 1), p[2 * i + 1]);
}

}  // namespace

double keys_cubic(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

ag::Tensor bicubic_matrix(std::size_t in, std::size_t out) {
  if (in == 0 || out == 0) throw ShapeError("resampling needs non-empty extents");
  std::vector<double> m(out * in, 0.0);
  const double step = double(in) / double(out);
  const double support = std::max(1.0, step);
  for (std::size_t i = 0; i < out; ++i) {
    const double center = (double(i) + 0.5) * step - 0.5;
    const auto lo = static_cast<long>(std::floor(center - 2.0 * support));
    const auto hi = static_cast<long>(std::ceil(center + 2.0 * support));
    double total = 0.0;
    for (long j = lo; j <= hi; ++j) {
      const double w = keys_cubic((double(j) - center) / support);
      if (w == 0.0) continue;
      const long c = std::clamp(j, 0L, static_cast<long>(in) - 1);
      m[i * in + static_cast<std::size_t>(c)] += w;
      total += w;
    }
    for (std::size_t j = 0; j < in; ++j) m[i * in + j] /= total;
  }
  return ag::Tensor({out, in}, std::move(m));
}

ag::Tensor enc_bicubic(const ag::Tensor& img, std::size_t factor) {
  check_images(img, "enc_bicubic input");
  const std::size_t h = img.dim(2), w = img.dim(3);
  if (factor == 0 || h % factor || w % factor) {
    throw ShapeError("image " + std::to_string(h) + "x" + std::to_string(w) +
                     " is not divisible by factor " + std::to_string(factor));
  }
  if (factor == 1) return img;
  return ag::resample2d(img, bicubic_matrix(h, h / factor), bicubic_matrix(w, w / factor));
}

ag::Tensor dec_bicubic(const ag::Tensor& z, std::size_t factor) {
  check_images(z, "dec_bicubic input");
  if (factor == 0) throw ShapeError("factor must be positive");
  if (factor == 1) return z;
  const std::size_t h = z.dim(2), w = z.dim(3);
  return ag::resample2d(z, bicubic_matrix(h, h * factor), bicubic_matrix(w, w * factor));
}

Autoencoder::Autoencoder(std::size_t channels, std::size_t height, std::size_t width,
                         std::size_t d_z, std::size_t hidden)
    : channels_(channels), height_(height), width_(width), d_z_(d_z), hidden_(hidden) {
  if (d_z == 0 || hidden == 0) throw ConfigError("autoencoder sizes must be positive");
  constexpr std::size_t kMaxCodeChannels = 64;
  // Deepest power-of-two downsampling whose grid divides d_z with a modest
  // channel count.
  bool found = false;
  for (std::size_t f = 1; height % f == 0 && width % f == 0 && f <= height && f <= width; f *= 2) {
    const std::size_t grid = (height / f) * (width / f);
    if (d_z % grid == 0 && d_z / grid <= kMaxCodeChannels) {
      factor_ = f;
      code_channels_ = d_z / grid;
      found = true;
    }
  }
  if (!found) {
    throw ConfigError("d_z = " + std::to_string(d_z) + " does not fit the conv geometry of " +
                      std::to_string(height) + "x" + std::to_string(width) +
                      " (needs c * (H/f) * (W/f) with f a power of two and c <= 64)");
  }
  while ((std::size_t(1) << levels_) < factor_) ++levels_;
  auto t = std::make_shared<SegmentTable>();
  auto conv = [&](const std::string& name, std::size_t in, std::size_t out) {
    t->append(name + ".weight", {out, in, 3, 3});
    t->append(name + ".bias", {out});
  };
  conv("enc0", channels_, hidden_);
  for (std::size_t l = 0; l < levels_; ++l) conv("enc" + std::to_string(l + 1), hidden_, hidden_);
  conv("enc_code", hidden_, code_channels_);
  conv("dec0", code_channels_, hidden_);
  for (std::size_t l = 0; l < levels_; ++l) conv("dec" + std::to_string(l + 1), hidden_, hidden_);
  conv("dec_out", hidden_, channels_);
  table_ = std::move(t);
}

ParamVector Autoencoder::init_params(std::uint64_t seed) const {
  ParamVector p = ParamVector::zeros(table_);
  for (std::size_t s = 0; s < table_->count(); ++s) {
    const auto& seg = table_->segments()[s];
    if (seg.shape.size() != 4) continue;
    const double fan_in = double(seg.shape[1] * seg.shape[2] * seg.shape[3]);
    const double bound = std::sqrt(2.0 / fan_in);
    Rng rng = derive_stream(seed, "ae-init/" + seg.name);
    for (double& v : p.segment(s)) v = rng.uniform(-bound, bound);
  }
  return p;
}

ag::Tensor Autoencoder::encode(std::span<const ag::Tensor> p, const ag::Tensor& x) const {
  check_images(x, "autoencoder input");
  std::size_t layer = 0;
  ag::Tensor h = ag::relu(conv_layer(x, p, layer++));
  for (std::size_t l = 0; l < levels_; ++l) {
    h = ag::relu(conv_layer(ag::avg_pool2d(h, 2, 2), p, layer++));
  }
  return conv_layer(h, p, layer);
}

ag::Tensor Autoencoder::decode(std::span<const ag::Tensor> p, const ag::Tensor& z) const {
  check_images(z, "autoencoder code");
  std::size_t layer = levels_ + 2;
  ag::Tensor h = ag::relu(conv_layer(z, p, layer++));
  for (std::size_t l = 0; l < levels_; ++l) {
    const std::size_t rows = h.dim(2), cols = h.dim(3);
    h = ag::resample2d(h, upsample_matrix(rows), upsample_matrix(cols));
    h = ag::relu(conv_layer(h, p, layer++));
  }
  return ag::sigmoid(conv_layer(h, p, layer));
}

double reconstruction_mse(const Autoencoder& net, const ParamVector& params,
                          const data::Dataset& ds) {
  if (ds.size() == 0) throw ConfigError("empty evaluation set");
  const auto p = params.unflatten();
  double total = 0.0;
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < ds.size(); start += kChunk) {
    std::vector<std::size_t> rows(std::min(kChunk, ds.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    const ag::Tensor x = ds.batch(rows);
    const ag::Tensor y = net.decode(p, net.encode(p, x));
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const double d = x[i] - y[i];
      total += d * d;
    }
  }
  return total / double(ds.pixels.size());
}

TrainedAutoencoder train_autoencoder(const data::Dataset& aux, const data::Dataset& heldout,
                                     std::size_t d_z, const AutoencoderTraining& cfg,
                                     std::uint64_t seed) {
  if (aux.size() == 0) throw ConfigError("autoencoder training needs auxiliary images");
  if (cfg.batch == 0) throw ConfigError("autoencoder batch must be positive");
  Autoencoder net(aux.channels, aux.height, aux.width, d_z, cfg.hidden);
  TrainedAutoencoder out{net, net.init_params(seed), {}};
  Adam adam(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8}, out.params.size());
  std::vector<std::size_t> order(aux.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng = derive_stream(seed, "ae-shuffle", epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::span<const std::size_t> rows(order.data() + start,
                                              std::min(cfg.batch, order.size() - start));
      const ag::Tensor x = aux.batch(rows);
      ag::Tape tape;
      std::vector<ag::Tensor> p;
      for (const auto& t : out.params.unflatten()) p.push_back(tape.variable(t));
      const ag::Tensor y = net.decode(p, net.encode(p, x));
      const ag::Tensor loss = ag::mean(ag::square(y - x));
      const auto grads = tape.backward(loss, p);
      const auto g = GradientVector::flatten(net.table(), grads);
      adam.step(out.params.values(), g.values());
    }
    if (heldout.size() > 0) out.heldout_mse.push_back(reconstruction_mse(net, out.params, heldout));
  }
  return out;
}

io::Container autoencoder_container(const TrainedAutoencoder& ae) {
  io::Container c;
  c.role = "autoencoder";
  c.metadata = {{"channels", ae.net.channels()}, {"height", ae.net.height()},
                {"width", ae.net.width()},       {"d_z", ae.net.d_z()},
                {"hidden", ae.net.hidden()},     {"heldout_mse", ae.heldout_mse}};
  io::append_segmented(c, "params", ae.params);
  return c;
}

TrainedAutoencoder read_autoencoder(const io::Container& c) {
  if (c.role != "autoencoder") throw FormatError("expected an autoencoder container, got " + c.role);
  try {
    const auto& m = c.metadata;
    Autoencoder net(m.at("channels").get<std::size_t>(), m.at("height").get<std::size_t>(),
                    m.at("width").get<std::size_t>(), m.at("d_z").get<std::size_t>(),
                    m.at("hidden").get<std::size_t>());
    auto params = io::extract_segmented<ParamTag>(c, "params", net.table());
    return {net, std::move(params), m.at("heldout_mse").get<std::vector<double>>()};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("autoencoder metadata: ") + e.what());
  }
}

std::string to_string(ProjectionKind k) {
  switch (k) {
    case ProjectionKind::identity: return "identity";
    case ProjectionKind::bicubic: return "bicubic";
    case ProjectionKind::autoencoder: return "autoencoder";
  }
  return "identity";
}

ProjectionKind parse_projection_kind(const std::string& name) {
  if (name == "identity") return ProjectionKind::identity;
  if (name == "bicubic") return ProjectionKind::bicubic;
  if (name == "autoencoder") return ProjectionKind::autoencoder;
  throw ConfigError("unknown projection kind: " + name);
}

Projection Projection::identity(std::size_t c, std::size_t h, std::size_t w) {
  return Projection(ProjectionKind::identity, c, h, w, 1);
}

Projection Projection::bicubic(std::size_t c, std::size_t h, std::size_t w, std::size_t factor) {
  if (factor == 0 || h % factor || w % factor) {
    throw ShapeError("image " + std::to_string(h) + "x" + std::to_string(w) +
                     " is not divisible by factor " + std::to_string(factor));
  }
  return Projection(ProjectionKind::bicubic, c, h, w, factor);
}

Projection Projection::autoencoder(TrainedAutoencoder ae) {
  Projection p(ProjectionKind::autoencoder, ae.net.channels(), ae.net.height(), ae.net.width(),
               ae.net.factor());
  p.ae_params_ = ae.params.unflatten();
  p.ae_.emplace(std::move(ae));
  return p;
}

std::size_t Projection::latent_size() const {
  if (kind_ == ProjectionKind::autoencoder) return ae_->net.d_z();
  return channels_ * (height_ / factor_) * (width_ / factor_);
}

ag::Shape Projection::latent_shape(std::size_t batch) const {
  if (kind_ == ProjectionKind::autoencoder) {
    return {batch, ae_->net.code_channels(), height_ / factor_, width_ / factor_};
  }
  return {batch, channels_, height_ / factor_, width_ / factor_};
}

ag::Tensor Projection::encode(const ag::Tensor& images) const {
  check_images(images, "projection input");
  if (images.dim(1) != channels_ || images.dim(2) != height_ || images.dim(3) != width_) {
    throw ShapeError("projection built for a different image shape");
  }
  switch (kind_) {
    case ProjectionKind::identity: return images;
    case ProjectionKind::bicubic: return enc_bicubic(images, factor_);
    case ProjectionKind::autoencoder: return ae_->net.encode(ae_params_, images);
  }
  return images;
}

ag::Tensor Projection::decode(const ag::Tensor& z) const {
  switch (kind_) {
    case ProjectionKind::identity: return z;
    case ProjectionKind::bicubic: return dec_bicubic(z, factor_);
    case ProjectionKind::autoencoder: return ae_->net.decode(ae_params_, z);
  }
  return z;
}

}  // namespace gradlab::attack
