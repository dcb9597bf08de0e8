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

#include "gradlab/models.hpp"

#include <algorithm>
#include <cmath>

#include "gradlab/error.hpp"
#include "gradlab/ops.hpp"

namespace gradlab::models {
namespace {

ag::IndexList column_range(std::size_t rows, std::size_t width,
                           std::size_t begin, std::size_t count) {
  auto idx = std::make_shared<std::vector<std::size_t>>();
  idx->reserve(rows * count);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < count; ++c) idx->push_back(r * width + begin + c);
  }
  return idx;
}

// Spatial extent after a valid (unpadded) k x k conv, or 0 when it does not fit.
std::size_t after_conv(std::size_t extent, std::size_t kernel,
                       std::size_t padding) {
  const std::size_t padded = extent + 2 * padding;
  return padded < kernel ? 0 : padded - kernel + 1;
}

}  // namespace

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::lenet_mini:
      return "lenet_mini";
    case Architecture::vgg_mini:
      return "vgg_mini";
  }
  return "unknown";
}

Architecture parse_architecture(const std::string& name) {
  if (name == "lenet_mini") return Architecture::lenet_mini;
  if (name == "vgg_mini") return Architecture::vgg_mini;
  throw ConfigError("unknown architecture: " + name);
}

PrecodeOutput precode_forward(const ag::Tensor& features,
                              const ag::Tensor& encoder_weight,
                              const ag::Tensor& encoder_bias,
                              const ag::Tensor& decoder_weight,
                              const ag::Tensor& decoder_bias, Rng* noise,
                              bool deterministic) {
  const std::size_t batch = features.dim(0);
  const std::size_t width = decoder_weight.dim(1);
  const ag::Tensor encoded = ag::linear(features, encoder_weight, encoder_bias);
  PrecodeOutput out;
  out.mean = ag::gather(encoded, column_range(batch, 2 * width, 0, width),
                        {batch, width});
  out.log_variance = ag::gather(
      encoded, column_range(batch, 2 * width, width, width), {batch, width});
  if (deterministic) {
    out.sample = out.mean;
  } else {
    if (!noise) throw ConfigError("bottleneck sampling needs a noise stream");
    std::vector<double> eps(batch * width);
    for (auto& e : eps) e = noise->normal();
    const ag::Tensor sigma = ag::exp(ag::scale(out.log_variance, 0.5));
    out.sample = ag::add(
        out.mean, ag::mul(sigma, ag::Tensor({batch, width}, std::move(eps))));
  }
  out.output = ag::linear(out.sample, decoder_weight, decoder_bias);
  return out;
}

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
  if (spec_.channels == 0 || spec_.classes < 2) {
    throw ConfigError("model needs at least one channel and two classes");
  }
  auto table = std::make_shared<SegmentTable>();
  std::size_t channels = spec_.channels;
  std::size_t h = spec_.height;
  std::size_t w = spec_.width;

  auto add_conv = [&](const std::string& name, std::size_t out,
                      std::size_t kernel, std::size_t padding) {
    const std::size_t nh = after_conv(h, kernel, padding);
    const std::size_t nw = after_conv(w, kernel, padding);
    if (nh == 0 || nw == 0) {
      throw ConfigError("unsupported input shape " +
                        std::to_string(spec_.height) + "x" +
                        std::to_string(spec_.width) + " for " +
                        models::to_string(spec_.architecture) + " at " + name);
    }
    program_.push_back({ModelStep::Op::conv, table->count(), padding, name});
    table->append(name + ".weight", {out, channels, kernel, kernel});
    table->append(name + ".bias", {out});
    layers_.push_back({name, LayerKind::conv, channels, out, kernel, padding});
    channels = out;
    h = nh;
    w = nw;
    program_.push_back({ModelStep::Op::relu, 0, 0, ""});
  };
  auto add_pool = [&]() {
    if (h < 2 || w < 2) {
      throw ConfigError("unsupported input shape " +
                        std::to_string(spec_.height) + "x" +
                        std::to_string(spec_.width) + ": too small to pool");
    }
    program_.push_back({ModelStep::Op::avg_pool, 0, 0, ""});
    h /= 2;
    w /= 2;
  };
  std::size_t features = 0;
  auto add_fc = [&](const std::string& name, std::size_t out, bool relu) {
    program_.push_back({ModelStep::Op::fully_connected, table->count(), 0, name});
    table->append(name + ".weight", {out, features});
    table->append(name + ".bias", {out});
    layers_.push_back({name, LayerKind::fully_connected, features, out, 0, 0});
    features = out;
    if (relu) program_.push_back({ModelStep::Op::relu, 0, 0, ""});
  };

  std::size_t hidden = 0;
  switch (spec_.architecture) {
    case Architecture::lenet_mini:
      add_conv("conv1", 8, 5, 0);
      add_pool();
      add_conv("conv2", 16, 5, 0);
      add_pool();
      hidden = 120;
      break;
    case Architecture::vgg_mini:
      add_conv("conv1", 16, 3, 1);
      add_conv("conv2", 16, 3, 1);
      add_pool();
      add_conv("conv3", 32, 3, 1);
      add_conv("conv4", 32, 3, 1);
      add_pool();
      hidden = 128;
      break;
  }
  program_.push_back({ModelStep::Op::flatten, 0, 0, ""});
  features = channels * h * w;
  add_fc("fc1", hidden, true);
  if (spec_.precode) {
    const std::size_t width = *spec_.precode;
    if (width == 0) throw ConfigError("bottleneck width must be positive");
    program_.push_back({ModelStep::Op::precode, table->count(), 0, "precode"});
    table->append("precode.encoder.weight", {2 * width, features});
    table->append("precode.encoder.bias", {2 * width});
    table->append("precode.decoder.weight", {features, width});
    table->append("precode.decoder.bias", {features});
    layers_.push_back({"precode.encoder", LayerKind::fully_connected, features,
                       2 * width, 0, 0});
    layers_.push_back({"precode.decoder", LayerKind::fully_connected, width,
                       features, 0, 0});
  }
  add_fc("fc2", spec_.classes, false);
  table_ = std::move(table);
}

const LayerInfo& Model::layer(const std::string& name) const {
  for (const auto& l : layers_) {
    if (l.name == name) return l;
  }
  throw ConfigError("model has no layer named " + name);
}

ParamVector Model::init_params(std::uint64_t seed) const {
  ParamVector params = ParamVector::zeros(table_);
  for (std::size_t i = 0; i < table_->count(); ++i) {
    const auto& seg = table_->segments()[i];
    if (seg.shape.size() < 2) continue;  // biases stay zero
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < seg.shape.size(); ++d) fan_in *= seg.shape[d];
    const double bound = std::sqrt(2.0 / static_cast<double>(fan_in));
    Rng rng = derive_stream(seed, "init/" + seg.name, i);
    for (double& v : params.segment(i)) v = rng.uniform(-bound, bound);
  }
  return params;
}

std::vector<ag::Tensor> Model::bind(ag::Tape& tape,
                                    const ParamVector& params) const {
  if (!(*params.table_ptr() == *table_)) {
    throw ShapeError("parameter vector layout does not match the model");
  }
  std::vector<ag::Tensor> out;
  for (const auto& t : params.unflatten()) out.push_back(tape.variable(t));
  return out;
}

ag::Tensor Model::forward(std::span<const ag::Tensor> params,
                          const ag::Tensor& images,
                          const ForwardOptions& options) const {
  if (params.size() != table_->count()) {
    throw ShapeError("model expects " + std::to_string(table_->count()) +
                     " parameter tensors, got " + std::to_string(params.size()));
  }
  const ag::Shape expected{images.rank() == 4 ? images.dim(0) : 0, spec_.channels,
                           spec_.height, spec_.width};
  if (images.rank() != 4 || images.shape() != expected) {
    throw ShapeError("model input must be [B," + std::to_string(spec_.channels) +
                     "," + std::to_string(spec_.height) + "," +
                     std::to_string(spec_.width) + "], got " +
                     ag::to_string(images.shape()));
  }
  ag::Tensor x = images;
  for (const auto& step : program_) {
    switch (step.op) {
      case ModelStep::Op::conv:
        x = ag::add_channel_bias(
            ag::conv2d(x, params[step.param], 1, step.padding),
            params[step.param + 1]);
        break;
      case ModelStep::Op::relu:
        if (options.relu_inputs) options.relu_inputs->push_back(x);
        x = ag::relu(x);
        break;
      case ModelStep::Op::avg_pool:
        x = ag::avg_pool2d(x, 2, 2);
        break;
      case ModelStep::Op::flatten:
        x = ag::reshape(x, {x.dim(0), x.numel() / x.dim(0)});
        break;
      case ModelStep::Op::fully_connected:
        if (options.tapped && options.tap_layer == step.layer) *options.tapped = x;
        x = ag::linear(x, params[step.param], params[step.param + 1]);
        break;
      case ModelStep::Op::precode:
        x = precode_forward(x, params[step.param], params[step.param + 1],
                            params[step.param + 2], params[step.param + 3],
                            options.precode_noise, options.precode_deterministic)
                .output;
        break;
    }
  }
  return x;
}

ag::Tensor Model::loss(std::span<const ag::Tensor> params,
                       const ag::Tensor& images, std::span<const int> labels,
                       const ForwardOptions& options) const {
  return ag::softmax_cross_entropy(forward(params, images, options), labels);
}

GradientVector Model::gradient(const ParamVector& params,
                               const ag::Tensor& images,
                               std::span<const int> labels,
                               const ForwardOptions& options) const {
  ag::Tape tape;
  const auto bound = bind(tape, params);
  const ag::Tensor l = loss(bound, images, labels, options);
  const auto grads = tape.backward(l, bound);
  return GradientVector::flatten(table_, grads);
}

std::vector<int> Model::predict(const ParamVector& params,
                                const ag::Tensor& images,
                                const ForwardOptions& options) const {
  const auto consts = params.unflatten();
  const ag::Tensor logits = forward(consts, images, options);
  const std::size_t k = logits.dim(1);
  std::vector<int> out(logits.dim(0));
  const auto z = logits.values();
  for (std::size_t b = 0; b < out.size(); ++b) {
    const auto row = z.subspan(b * k, k);
    out[b] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace gradlab::models
