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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gradlab/rng.hpp"
#include "gradlab/segmented.hpp"
#include "gradlab/tensor.hpp"

namespace gradlab::models {

enum class Architecture { lenet_mini, vgg_mini };

std::string to_string(Architecture arch);
Architecture parse_architecture(const std::string& name);

struct ModelSpec {
  Architecture architecture = Architecture::lenet_mini;
  std::size_t channels = 1;
  std::size_t height = 28;
  std::size_t width = 28;
  std::size_t classes = 10;
  // Width of the variational bottleneck in front of the classifier head.
  std::optional<std::size_t> precode;

  bool operator==(const ModelSpec&) const = default;
};

enum class LayerKind { conv, fully_connected };

struct LayerInfo {
  std::string name;
  LayerKind kind;
  std::size_t inputs;   // channels or features
  std::size_t outputs;  // channels or features
  std::size_t kernel = 0;
  std::size_t padding = 0;
};

struct ForwardOptions {
  // Noise source for the bottleneck sample; required when the model has one
  // and `precode_deterministic` is false.
  Rng* precode_noise = nullptr;
  // Uses the bottleneck mean, i.e. sigma forced to zero.
  bool precode_deterministic = false;
  // When set, receives the input of the named fully connected layer.
  std::string tap_layer;
  ag::Tensor* tapped = nullptr;
  // When set, receives the input of every relu in forward order.
  std::vector<ag::Tensor>* relu_inputs = nullptr;
};

struct PrecodeOutput {
  ag::Tensor mean;
  ag::Tensor log_variance;
  ag::Tensor sample;
  ag::Tensor output;
};

// Variational block: encoder -> (mean, log variance), reparameterized sample,
// decoder back to the feature width.
PrecodeOutput precode_forward(const ag::Tensor& features,
                              const ag::Tensor& encoder_weight,
                              const ag::Tensor& encoder_bias,
                              const ag::Tensor& decoder_weight,
                              const ag::Tensor& decoder_bias, Rng* noise,
                              bool deterministic);

// One instruction of a model's forward program. `param` indexes the first
// of the step's segments (weight, then bias).
struct ModelStep {
  enum class Op { conv, relu, avg_pool, flatten, fully_connected, precode };
  Op op;
  std::size_t param = 0;
  std::size_t padding = 0;
  std::string layer;
};

class Model {
 public:
  // Throws ConfigError for an unsupported input shape.
  explicit Model(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  const std::vector<LayerInfo>& layers() const { return layers_; }
  const std::shared_ptr<const SegmentTable>& table() const { return table_; }
  std::size_t parameter_count() const { return table_->total(); }
  const LayerInfo& layer(const std::string& name) const;

  // Kaiming-style uniform fan-in init for weights, zero biases.
  ParamVector init_params(std::uint64_t seed) const;

  // One tape leaf per segment.
  std::vector<ag::Tensor> bind(ag::Tape& tape, const ParamVector& params) const;

  ag::Tensor forward(std::span<const ag::Tensor> params,
                     const ag::Tensor& images,
                     const ForwardOptions& options = {}) const;

  ag::Tensor loss(std::span<const ag::Tensor> params, const ag::Tensor& images,
                  std::span<const int> labels,
                  const ForwardOptions& options = {}) const;

  // First-order gradient of the mean loss at `params`.
  GradientVector gradient(const ParamVector& params, const ag::Tensor& images,
                          std::span<const int> labels,
                          const ForwardOptions& options = {}) const;

  std::vector<int> predict(const ParamVector& params, const ag::Tensor& images,
                           const ForwardOptions& options = {}) const;

 private:
  ModelSpec spec_;
  std::vector<LayerInfo> layers_;
  std::vector<ModelStep> program_;
  std::shared_ptr<const SegmentTable> table_;
};

}  // namespace gradlab::models
