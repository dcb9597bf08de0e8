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
#include <string>
#include <vector>

#include "gradlab/attack.hpp"
#include "gradlab/data.hpp"
#include "gradlab/fedsim.hpp"
#include "gradlab/metrics.hpp"
#include "gradlab/models.hpp"
#include "gradlab/obfuscators.hpp"
#include "json.hpp"

namespace gradlab::harness {

enum class DatasetKind { synthetic, idx, image_dir };

struct DatasetSource {
  DatasetKind kind = DatasetKind::synthetic;
  // synthetic
  std::size_t count = 2000;
  std::uint64_t seed = 11;
  // idx: images + labels; image_dir: dir + labels
  std::string images;
  std::string labels;
  std::string dir;
  // Trailing share of the examples held out as the test / auxiliary set.
  double test_fraction = 0.2;

  bool operator==(const DatasetSource&) const = default;
};

struct VictimConfig {
  std::size_t client = 0;
  // Leading shard examples the victim trains on; 0 = whole shard.
  std::size_t examples = 1;
  // Checkpoint round the update is captured at.
  std::size_t round = 0;

  bool operator==(const VictimConfig&) const = default;
};

// Axes of a sweep grid; empty lists are not swept.
struct SweepGrid {
  std::vector<std::size_t> batch;
  std::vector<std::size_t> rounds;
  std::vector<std::size_t> d_z;
  std::vector<obf::ObfuscationSpec> obfuscation;
  // Victims attacked per cell; results are averaged.
  std::size_t repeats = 1;
  // Epochs for autoencoders trained on the fly for d_z cells.
  std::size_t autoencoder_epochs = 5;

  bool operator==(const SweepGrid&) const = default;
};

struct ExperimentConfig {
  models::ModelSpec model;
  DatasetSource dataset;
  fed::FedConfig fed;
  obf::ObfuscationSpec obfuscation;
  attack::AttackConfig attack;
  VictimConfig victim;
  SweepGrid sweep;
  std::string output_dir = "out";
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig read_experiment_config(const std::filesystem::path& path);

struct Datasets {
  data::Dataset train;
  data::Dataset test;
};

Datasets load_datasets(const DatasetSource& source, const models::ModelSpec& model);

// Model weights before any training.
ParamVector initial_params(const models::Model& model, std::uint64_t seed);

// Partition plus the global weights at each requested round; trains only
// as far as the largest round.
struct Federation {
  fed::Partition partition;
  std::vector<std::pair<std::size_t, ParamVector>> checkpoints;

  const ParamVector& at(std::size_t round) const;
};

Federation prepare_federation(const ExperimentConfig& cfg, const models::Model& model,
                              const Datasets& data, std::vector<std::size_t> rounds);

// First client from `first` on (cyclically) whose shard holds `examples`.
std::size_t pick_victim(const fed::Partition& p, std::size_t first, std::size_t examples);

// Writes every image of a batch as <prefix>_<i>.pgm (or .ppm).
void write_images(const ag::Tensor& images, const std::filesystem::path& dir,
                  const std::string& prefix);
void write_text(const std::filesystem::path& path, const std::string& text);

// Attack outputs for one capture.
struct AttackRun {
  attack::AttackResult result;
  std::optional<metrics::QualityReport> report;
};

// Runs the configured attack on a capture; `truth` only feeds the metrics.
AttackRun run_attack(const attack::AttackConfig& cfg, const attack::Projection& projection,
                     const fed::Capture& capture, const data::Dataset* truth);
void write_attack_outputs(const AttackRun& run, const std::filesystem::path& dir);

struct SweepRow {
  std::vector<std::string> axes;
  double psnr_mean = 0.0;
  double ssim_mean = 0.0;
  double grad_dist_final = 0.0;
};

struct SweepResult {
  std::vector<std::string> header;
  std::vector<SweepRow> rows;
};

SweepResult run_sweep(const ExperimentConfig& cfg, std::size_t threads,
                      const std::optional<std::filesystem::path>& out_dir);
std::string sweep_csv(const SweepResult& r);

}  // namespace gradlab::harness
