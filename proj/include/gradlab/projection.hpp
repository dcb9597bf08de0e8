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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gradlab/container.hpp"
#include "gradlab/data.hpp"
#include "gradlab/segmented.hpp"
#include "gradlab/tensor.hpp"

namespace gradlab::attack {

// Keys cubic convolution kernel with a = -0.5.
double keys_cubic(double x);

// [out, in] resampling matrix with clamp-to-edge taps. Downsampling widens
// the kernel by in/out (antialiasing); every row sums to one.
ag::Tensor bicubic_matrix(std::size_t in, std::size_t out);

// img [n, C, H, W] -> [n, C, H/f, W/f] and back; both differentiable.
ag::Tensor enc_bicubic(const ag::Tensor& img, std::size_t factor);
ag::Tensor dec_bicubic(const ag::Tensor& z, std::size_t factor);

// Small convolutional autoencoder. The code is [c_z, H/f, W/f] with
// c_z * (H/f) * (W/f) = d_z.
class Autoencoder {
 public:
  Autoencoder(std::size_t channels, std::size_t height, std::size_t width,
              std::size_t d_z, std::size_t hidden = 16);

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t d_z() const { return d_z_; }
  std::size_t factor() const { return factor_; }
  std::size_t code_channels() const { return code_channels_; }
  std::size_t hidden() const { return hidden_; }
  const std::shared_ptr<const SegmentTable>& table() const { return table_; }

  ParamVector init_params(std::uint64_t seed) const;
  ag::Tensor encode(std::span<const ag::Tensor> params, const ag::Tensor& x) const;
  ag::Tensor decode(std::span<const ag::Tensor> params, const ag::Tensor& z) const;

 private:
  std::size_t channels_, height_, width_, d_z_, hidden_;
  std::size_t factor_ = 1, code_channels_ = 1, levels_ = 0;
  std::shared_ptr<const SegmentTable> table_;
};

struct TrainedAutoencoder {
  Autoencoder net;
  ParamVector params;
  // Held-out reconstruction MSE after each epoch.
  std::vector<double> heldout_mse;
};

struct AutoencoderTraining {
  std::size_t epochs = 5;
  std::size_t batch = 16;
  double lr = 2e-3;
  std::size_t hidden = 16;
};

// Trains on `aux`; `heldout` only feeds the per-epoch MSE log.
TrainedAutoencoder train_autoencoder(const data::Dataset& aux,
                                     const data::Dataset& heldout,
                                     std::size_t d_z,
                                     const AutoencoderTraining& cfg,
                                     std::uint64_t seed);
double reconstruction_mse(const Autoencoder& net, const ParamVector& params,
                          const data::Dataset& ds);

io::Container autoencoder_container(const TrainedAutoencoder& ae);
TrainedAutoencoder read_autoencoder(const io::Container& c);

enum class ProjectionKind { identity, bicubic, autoencoder };
std::string to_string(ProjectionKind k);
ProjectionKind parse_projection_kind(const std::string& name);

// Latent parameterization of a dummy image batch.
class Projection {
 public:
  static Projection identity(std::size_t channels, std::size_t height, std::size_t width);
  static Projection bicubic(std::size_t channels, std::size_t height, std::size_t width,
                            std::size_t factor);
  static Projection autoencoder(TrainedAutoencoder ae);

  ProjectionKind kind() const { return kind_; }
  std::size_t factor() const { return factor_; }
  // d_z: latent entries per image.
  std::size_t latent_size() const;
  ag::Shape latent_shape(std::size_t batch) const;
  ag::Tensor encode(const ag::Tensor& images) const;
  ag::Tensor decode(const ag::Tensor& z) const;

 private:
  Projection(ProjectionKind kind, std::size_t c, std::size_t h, std::size_t w, std::size_t f)
      : kind_(kind), channels_(c), height_(h), width_(w), factor_(f) {}

  ProjectionKind kind_;
  std::size_t channels_, height_, width_, factor_;
  std::optional<TrainedAutoencoder> ae_;
  std::vector<ag::Tensor> ae_params_;
};

}  // namespace gradlab::attack
