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
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gradlab/models.hpp"
#include "gradlab/rng.hpp"
#include "gradlab/segmented.hpp"
#include "json.hpp"

// Postprocessing applied to a client's update before it leaves the device.
namespace gradlab::obf {

struct Identity {
  bool operator==(const Identity&) const = default;
};
struct Sign {
  bool operator==(const Sign&) const = default;
};
// b bits -> s = 2^(b-1) - 1 magnitude levels plus a sign.
struct UniformQuant {
  int bits = 3;
  double p = 2.0;
  double kappa = 1.0;
  bool operator==(const UniformQuant&) const = default;
};
struct Qsgd {
  int bits = 3;
  double p = 2.0;
  double kappa = 1.0;
  bool operator==(const Qsgd&) const = default;
};
struct TopK {
  double sparsity = 0.95;
  bool operator==(const TopK&) const = default;
};
// Per-example, per-layer clipping to `clip` followed by Gaussian noise whose
// power sits `snr_db` below the clipped mean's power. +inf means no noise.
struct FedCdp {
  double clip = 1.0;
  double snr_db = std::numeric_limits<double>::infinity();
  bool operator==(const FedCdp&) const = default;
};
// Zeroes the defended layer's weights for the rho fraction of representation
// components with the largest loss sensitivity.
struct Soteria {
  double rho = 0.8;
  std::string defended_layer = "fc1";
  bool operator==(const Soteria&) const = default;
};

using Stage = std::variant<Identity, Sign, UniformQuant, Qsgd, TopK, FedCdp, Soteria>;

std::string stage_name(const Stage& stage);

// Left-to-right chain. FedCdp and Soteria consume per-example data rather
// than a finished gradient, so they may only appear first.
struct ObfuscationSpec {
  std::vector<Stage> stages;
  // Quantizer norms per layer segment (true) or over the whole vector.
  bool per_layer_norm = true;

  void validate() const;
  // The leading FedCdp/Soteria stage, if any.
  const Stage* gradient_stage() const;
  // Stages that operate on a finished gradient.
  std::span<const Stage> tail() const;
  bool contains_sign() const;
  bool is_identity() const;
  // Compact label such as "qsgd3+topk0.95"; "identity" for an empty chain.
  std::string label() const;

  bool operator==(const ObfuscationSpec&) const = default;
};

nlohmann::json to_json(const ObfuscationSpec& spec);
// Strict: unknown keys and out-of-range values are ConfigErrors.
ObfuscationSpec spec_from_json(const nlohmann::json& j);

// ceil(x) that ignores representation noise just above an integer.
std::size_t guarded_ceil(double x);

GradientVector sign_compress(const GradientVector& g);

double lp_norm(std::span<const double> v, double p);

GradientVector uniform_quantize(const GradientVector& g, const UniformQuant& q,
                                bool per_layer = true);
GradientVector qsgd_quantize(const GradientVector& g, const Qsgd& q, Rng& rng,
                             bool per_layer = true);

std::size_t topk_count(std::size_t size, double sparsity);
GradientVector topk_sparsify(const GradientVector& g, double sparsity);

// Rescales each layer segment to l2 norm <= clip.
GradientVector clip_per_layer(const GradientVector& g, double clip);
// Noise multiplier sigma for a target SNR over the clipped mean.
double fedcdp_sigma(std::span<const double> clipped_mean, double clip,
                    double snr_db);

struct FedCdpResult {
  GradientVector clipped_mean;
  GradientVector noisy;
  double sigma = 0.0;
};
FedCdpResult fedcdp(std::span<const GradientVector> per_example,
                    const FedCdp& stage, Rng& rng);

struct SoteriaResult {
  GradientVector gradient;
  // Representation components whose weights were zeroed.
  std::vector<std::size_t> pruned;
};

// Data needed by stages that look behind the gradient.
struct ExampleBatch {
  const models::Model& model;
  const ParamVector& params;
  ag::Tensor images;
  std::span<const int> labels;
  models::ForwardOptions options = {};
};

SoteriaResult soteria_prune(const ExampleBatch& batch, const Soteria& stage);

// Gradient of the batch after the leading FedCdp/Soteria stage (clean
// gradient when there is none).
GradientVector gradient_stage(const ObfuscationSpec& spec,
                              const ExampleBatch& batch, Rng& rng);
// Applies only the stages that act on a finished gradient.
GradientVector apply_tail(const ObfuscationSpec& spec, const GradientVector& g,
                          Rng& rng);
// Whole chain on a finished gradient; rejects FedCdp/Soteria.
GradientVector apply_chain(const ObfuscationSpec& spec, const GradientVector& g,
                           Rng& rng);
// Whole chain starting from raw examples.
GradientVector apply_chain(const ObfuscationSpec& spec,
                           const ExampleBatch& batch, Rng& rng);

}  // namespace gradlab::obf
