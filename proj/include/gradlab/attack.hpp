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

#include "gradlab/fedsim.hpp"
#include "gradlab/models.hpp"
#include "gradlab/obfuscators.hpp"
#include "gradlab/optim.hpp"
#include "gradlab/projection.hpp"
#include "gradlab/tensor.hpp"

namespace gradlab::attack {

enum class UpdateModel { automatic, single_step, unrolled };
// automatic: sign_match when the observed chain contains sign, else l2.
enum class MatchKind { automatic, l2, cosine_tv, sign_match };
enum class PostKind { none, hist_eq, tv_denoise, normalize_sign };
enum class InitKind { uniform01, constant };

struct ProjectionConfig {
  ProjectionKind kind = ProjectionKind::bicubic;
  std::size_t factor = 4;
  // Autoencoder container; required for the autoencoder kind.
  std::string autoencoder;

  bool operator==(const ProjectionConfig&) const = default;
};

struct PostStep {
  PostKind kind = PostKind::none;
  double weight = 0.1;
  std::size_t steps = 50;

  bool operator==(const PostStep&) const = default;
};

struct AttackConfig {
  ProjectionConfig projection;
  MatchKind loss = MatchKind::automatic;
  double tv_weight = 0.1;
  std::size_t iterations = 100;
  AdamConfig adam;
  // Step decay: the rate drops tenfold at 3/8, 5/8 and 7/8 of the run.
  bool lr_decay = true;
  UpdateModel update = UpdateModel::automatic;
  // Largest number of local steps the unrolled model will replay.
  std::size_t unroll_cap = 10;
  std::vector<PostStep> postprocess;
  InitKind init = InitKind::uniform01;
  double init_value = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const AttackConfig&) const = default;
};

nlohmann::json to_json(const AttackConfig& cfg);
AttackConfig attack_config_from_json(const nlohmann::json& j);

// Baseline presets: DLG matches raw pixels with the l2 loss, InvertGrad
// with cosine distance plus total variation.
AttackConfig dlg_config();
AttackConfig invertgrad_config();

std::string to_string(MatchKind k);
std::string to_string(UpdateModel u);
std::string to_string(PostKind k);

// What the attacker knows about the victim's local training.
struct VictimUpdate {
  double eta = 5e-3;
  std::size_t tau = 1;
  std::size_t batch = 1;
  std::size_t examples = 1;

  std::size_t steps() const;
};

// Dummy weight difference for images `x` on the tape. single_step returns
// eta * steps * grad f(w0; x); unrolled replays `steps` full-batch steps and
// returns w0 - w_steps. Both stay differentiable in x.
std::vector<ag::Tensor> dummy_gradient(const models::Model& model, ag::Tape& tape,
                                       const ParamVector& w0, const ag::Tensor& x,
                                       std::span<const int> labels, UpdateModel mode,
                                       const VictimUpdate& victim,
                                       std::size_t unroll_cap = 10);

UpdateModel resolve_update_model(UpdateModel mode, const VictimUpdate& victim,
                                 std::size_t unroll_cap);
MatchKind resolve_match_kind(MatchKind kind, const obf::ObfuscationSpec& spec);

// Mean over pixels of sqrt(dx^2 + dy^2 + eps) - sqrt(eps), forward
// differences with a replicate boundary.
inline constexpr double kTvEps = 1e-8;
ag::Tensor total_variation(const ag::Tensor& images);

struct MatchLoss {
  ag::Tensor value;
  // Cosine mode met a zero-norm dummy gradient; the match term was set to 0.
  bool degenerate = false;
};

MatchLoss match_loss(MatchKind kind, std::span<const ag::Tensor> dummy,
                     const GradientVector& observed, const ag::Tensor& images,
                     double tv_weight);

// Attacker-side view of phi applied to the dummy update; identity except for
// stages with a differentiable stand-in.
std::vector<ag::Tensor> surrogate(const obf::ObfuscationSpec& spec,
                                  std::vector<ag::Tensor> dummy,
                                  const GradientVector& observed);

ag::Tensor hist_eq(const ag::Tensor& images);
ag::Tensor tv_denoise(const ag::Tensor& images, double weight, std::size_t steps);
ag::Tensor normalize_sign(const ag::Tensor& images);
ag::Tensor postprocess(const ag::Tensor& images, std::span<const PostStep> steps);

struct AttackState {
  ag::Tensor z;
  std::vector<double> adam_m, adam_v;
  std::size_t adam_t = 0;
};

struct HistoryPoint {
  std::size_t iter;
  double grad_dist;
};

struct AttackResult {
  ag::Tensor reconstruction;  // postprocessed
  ag::Tensor decoded;         // clamp(dec(z_best))
  ag::Tensor initial;         // clamp(dec(z_0))
  std::vector<HistoryPoint> history;
  AttackState state;
  double initial_loss = 0.0;
  double best_loss = 0.0;
  std::size_t best_iter = 0;
  std::size_t d_z = 0;
  MatchKind loss_kind = MatchKind::l2;
  UpdateModel update = UpdateModel::single_step;
  bool degenerate_loss = false;
};

struct Observation {
  const models::Model& model;
  const ParamVector& params;
  const GradientVector& gradient;
  std::span<const int> labels;
  const obf::ObfuscationSpec& spec;
  VictimUpdate victim;
};

Projection build_projection(const ProjectionConfig& cfg, std::size_t channels,
                            std::size_t height, std::size_t width);

AttackResult rog_attack(const AttackConfig& cfg, const Projection& projection,
                        const Observation& obs);

// Loss-curve CSV with header `iter,grad_dist`.
std::string history_csv(std::span<const HistoryPoint> history);

}  // namespace gradlab::attack
