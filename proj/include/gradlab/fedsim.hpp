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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gradlab/container.hpp"
#include "gradlab/data.hpp"
#include "gradlab/models.hpp"
#include "gradlab/obfuscators.hpp"

namespace gradlab::fed {

struct Partition {
  std::size_t clients = 0;
  double alpha = 0.0;
  // assignment[m] lists the example indices held by client m, ascending.
  std::vector<std::vector<std::size_t>> assignment;
  // proportions[k][m]: share of class k given to client m.
  std::vector<std::vector<double>> proportions;
};

Partition dirichlet_partition(std::span<const int> labels, std::size_t clients,
                              double alpha, std::uint64_t seed);

nlohmann::json to_json(const Partition& p);

struct LocalConfig {
  double eta = 5e-3;
  std::size_t tau = 5;
  std::size_t batch = 16;

  bool operator==(const LocalConfig&) const = default;
};

struct LocalResult {
  ParamVector params;
  std::size_t steps = 0;
  // The batch size exceeded the shard, so each epoch was one full batch.
  bool full_batch_fallback = false;
};

// tau epochs of mini-batch SGD, reshuffled each epoch from `seed`. A leading
// FedCDP/Soteria stage of `spec` replaces each step's plain gradient.
LocalResult local_update(const models::Model& model, const ParamVector& w0,
                         const data::Dataset& shard, const LocalConfig& cfg,
                         std::uint64_t seed,
                         const obf::ObfuscationSpec& spec = {});

GradientVector weight_delta(const ParamVector& w0, const ParamVector& wt);

// global - mean_m phi(delta_m); deltas are summed in the given order.
ParamVector fedavg_round(const ParamVector& global,
                         std::span<const GradientVector> deltas,
                         const obf::ObfuscationSpec& spec, std::uint64_t seed);

// Same update from client endpoints. When phi is the identity on deltas the
// result is the plain mean of the endpoints, so one client reproduces its
// endpoint bit for bit.
ParamVector fedavg_round(const ParamVector& global,
                         std::span<const ParamVector> endpoints,
                         const obf::ObfuscationSpec& spec, std::uint64_t seed);

struct FedConfig {
  std::size_t clients = 10;
  std::size_t sampled = 4;
  std::size_t rounds = 30;
  LocalConfig local;
  double alpha = 0.5;
  std::vector<std::size_t> checkpoint_rounds{0, 1, 10, 30, 50};

  bool operator==(const FedConfig&) const = default;
};

struct RoundRecord {
  std::size_t round = 0;
  std::vector<std::size_t> client_ids;
  std::vector<double> delta_norms;
  double mean_delta_norm = 0.0;
  double test_accuracy = 0.0;
  std::string checkpoint;
};

struct TrainingResult {
  Partition partition;
  std::vector<RoundRecord> records;
  // (round, weights) for every requested checkpoint round reached.
  std::vector<std::pair<std::size_t, ParamVector>> checkpoints;
};

std::vector<std::size_t> sample_clients(std::size_t clients, std::size_t sampled,
                                        std::uint64_t seed, std::size_t round);

double accuracy(const models::Model& model, const ParamVector& params,
                const data::Dataset& test);

// Runs `rounds` FedAvg rounds from `init`. When `out_dir` is set, writes
// checkpoint_round<k>.gobf files and rounds.csv there.
TrainingResult run_training(const models::Model& model, const ParamVector& init,
                            const data::Dataset& train, const data::Dataset& test,
                            const FedConfig& cfg, const obf::ObfuscationSpec& spec,
                            std::uint64_t seed,
                            const std::optional<std::filesystem::path>& out_dir = {});

void write_rounds_csv(const std::filesystem::path& path,
                      std::span<const RoundRecord> records);

io::Container checkpoint_container(const models::Model& model,
                                   const ParamVector& params, std::size_t round);
ParamVector checkpoint_params(const models::Model& model, const io::Container& c);
std::filesystem::path checkpoint_path(const std::filesystem::path& dir,
                                      std::size_t round);

struct Capture {
  std::size_t round = 0;
  std::size_t client = 0;
  ParamVector params;
  GradientVector gradient;
  std::vector<int> labels;
  obf::ObfuscationSpec spec;
  LocalConfig local;
  models::ModelSpec model;
};

struct VictimSelection {
  std::size_t client = 0;
  // Number of leading shard examples the victim trains on; 0 = whole shard.
  std::size_t examples = 0;
};

// The victim's transmitted update phi(w_k - w_k,tau) at round k, plus the
// private images it was computed from (returned separately).
std::pair<Capture, data::Dataset> capture_victim(
    const models::Model& model, const ParamVector& checkpoint, std::size_t round,
    const data::Dataset& shard, const VictimSelection& victim,
    const LocalConfig& local, const obf::ObfuscationSpec& spec,
    std::uint64_t seed);

io::Container capture_container(const Capture& c);
// Rejects containers carrying anything other than params.* and gradient.*.
Capture read_capture(const io::Container& c);
io::Container ground_truth_container(const data::Dataset& images);
data::Dataset read_ground_truth(const io::Container& c);

nlohmann::json to_json(const models::ModelSpec& spec);
models::ModelSpec model_spec_from_json(const nlohmann::json& j);

}  // namespace gradlab::fed
