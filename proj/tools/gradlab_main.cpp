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


#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "gradlab/container.hpp"
#include "gradlab/error.hpp"
#include "gradlab/harness.hpp"
#include "gradlab/metrics.hpp"

namespace fs = std::filesystem;
using namespace gradlab;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t threads = 1;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  auto* opt = cmd->add_option("--config", c.config, "experiment config JSON");
  if (needs_config) opt->required();
  cmd->add_option("--seed", c.seed, "overrides the config seed");
  cmd->add_option("--out", c.out, "output directory (overrides the config)");
  cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

harness::ExperimentConfig load_config(const Common& c) {
  harness::ExperimentConfig cfg;
  if (!c.config.empty()) cfg = harness::read_experiment_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  cfg.validate();
  return cfg;
}

void set_log_level() {
  const char* env = std::getenv("GRADLAB_LOG");
  const std::string level = env ? env : "info";
  if (level != "error" && level != "info" && level != "debug") {
    throw ConfigError("GRADLAB_LOG must be error, info or debug");
  }
  spdlog::set_default_logger(spdlog::stderr_color_st("gradlab"));
  spdlog::set_level(level == "error" ? spdlog::level::err
                    : level == "debug" ? spdlog::level::debug
                                       : spdlog::level::info);
}

int exit_code(const std::string& kind) {
  if (kind == "config") return 2;
  if (kind == "io" || kind == "format" || kind == "version") return 3;
  return 1;
}

int report_error(const std::string& kind, const std::string& message) {
  const nlohmann::json j{{"error", {{"kind", kind}, {"message", message}}}};
  std::cerr << j.dump() << "\n";
  return exit_code(kind);
}

void cmd_partition(const Common& c) {
  const auto cfg = load_config(c);
  const auto data = harness::load_datasets(cfg.dataset, cfg.model);
  const auto p = fed::dirichlet_partition(data.train.labels, cfg.fed.clients, cfg.fed.alpha,
                                          derive_seed(cfg.seed, "partition"));
  harness::write_text(fs::path(cfg.output_dir) / "partition.json", fed::to_json(p).dump(2) + "\n");
}

void cmd_fedtrain(const Common& c) {
  const auto cfg = load_config(c);
  const models::Model model(cfg.model);
  const auto data = harness::load_datasets(cfg.dataset, cfg.model);
  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  harness::write_text(out / "config.json", harness::to_json(cfg).dump(2) + "\n");
  fed::run_training(model, harness::initial_params(model, cfg.seed), data.train, data.test, cfg.fed,
                    cfg.obfuscation, cfg.seed, out);
}

void cmd_capture(const Common& c, const std::string& checkpoint) {
  const auto cfg = load_config(c);
  const models::Model model(cfg.model);
  const auto data = harness::load_datasets(cfg.dataset, cfg.model);
  std::size_t round = cfg.victim.round;
  ParamVector w;
  harness::Federation fed_state;
  if (!checkpoint.empty()) {
    const auto ck = io::read_container(checkpoint);
    w = fed::checkpoint_params(model, ck);
    if (ck.metadata.contains("round")) round = ck.metadata.at("round").get<std::size_t>();
    fed_state = harness::prepare_federation(cfg, model, data, {0});
  } else {
    fed_state = harness::prepare_federation(cfg, model, data, {round});
    w = fed_state.at(round);
  }
  const std::size_t client = harness::pick_victim(fed_state.partition, cfg.victim.client, cfg.victim.examples);
  const auto shard = data.train.subset(fed_state.partition.assignment[client]);
  const auto [cap, truth] = fed::capture_victim(model, w, round, shard, {client, cfg.victim.examples},
                                                cfg.fed.local, cfg.obfuscation, cfg.seed);
  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  io::write_container(out / "capture.gobf", fed::capture_container(cap));
  io::write_container(out / "ground_truth.gobf", fed::ground_truth_container(truth));
}

void cmd_attack(const Common& c, const std::string& capture_path, const std::string& truth_path) {
  const auto cfg = load_config(c);
  const auto cap = fed::read_capture(io::read_container(capture_path));
  std::optional<data::Dataset> truth;
  if (!truth_path.empty()) truth = fed::read_ground_truth(io::read_container(truth_path));
  const auto& m = cap.model;
  const auto projection = attack::build_projection(cfg.attack.projection, m.channels, m.height, m.width);
  attack::AttackConfig ac = cfg.attack;
  if (c.seed) ac.seed = *c.seed;
  const auto run = harness::run_attack(ac, projection, cap, truth ? &*truth : nullptr);
  harness::write_attack_outputs(run, cfg.output_dir);
  if (run.report) std::cout << metrics::to_json(*run.report).dump(2) << "\n";
}

data::Dataset image_dir_dataset(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (ext == ".pgm" || ext == ".ppm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no images in " + dir.string());
  data::Dataset ds;
  for (const auto& f : files) {
    const auto img = data::read_image(f);
    if (ds.labels.empty()) {
      ds.channels = img.channels;
      ds.height = img.height;
      ds.width = img.width;
    } else if (img.channels != ds.channels || img.height != ds.height || img.width != ds.width) {
      throw ShapeError("images in " + dir.string() + " differ in shape");
    }
    ds.pixels.insert(ds.pixels.end(), img.pixels.begin(), img.pixels.end());
    ds.labels.push_back(0);
  }
  return ds;
}

void cmd_eval(const Common& c, const std::string& a, const std::string& b, const std::string& tags_a,
              const std::string& tags_b, const std::string& rank_by) {
  if (!tags_a.empty() || !tags_b.empty()) {
    if (tags_a.empty() || tags_b.empty()) throw ConfigError("eval needs both --tags-a and --tags-b");
    std::cout << metrics::format_number(metrics::jaccard(metrics::read_tags(tags_a), metrics::read_tags(tags_b)))
              << "\n";
    return;
  }
  if (a.empty() || b.empty()) throw ConfigError("eval needs --a and --b image directories");
  const auto da = image_dir_dataset(a), db = image_dir_dataset(b);
  if (da.size() != db.size()) throw ShapeError("image directories hold different counts");
  const auto report = metrics::batch_report(da.all(), db.all(), metrics::parse_rank_by(rank_by));
  const auto csv = metrics::to_csv(report);
  if (!c.out.empty()) {
    harness::write_text(fs::path(c.out) / "metrics.csv", csv);
    harness::write_text(fs::path(c.out) / "report.json", metrics::to_json(report).dump(2) + "\n");
  }
  std::cout << csv;
}

void cmd_sweep(const Common& c) {
  const auto cfg = load_config(c);
  const fs::path out = cfg.output_dir;
  const auto result = harness::run_sweep(cfg, c.threads, out);
  std::cout << harness::sweep_csv(result);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradlab: federated learning simulator and gradient inversion toolkit"};
  app.require_subcommand(1);
  Common common;
  std::string checkpoint, capture, truth, a, b, tags_a, tags_b, rank_by = "psnr";

  auto* partition = app.add_subcommand("partition", "write the Dirichlet client partition");
  add_common(partition, common, false);
  auto* fedtrain = app.add_subcommand("fedtrain", "run federated training");
  add_common(fedtrain, common, false);
  auto* cap = app.add_subcommand("capture", "capture one client's transmitted update");
  add_common(cap, common, false);
  cap->add_option("--checkpoint", checkpoint, "checkpoint container (default: train to victim.round)");
  auto* atk = app.add_subcommand("attack", "reconstruct images from a captured update");
  add_common(atk, common, false);
  atk->add_option("--capture", capture, "capture container")->required();
  atk->add_option("--truth", truth, "ground truth container, used only for metrics");
  auto* eval = app.add_subcommand("eval", "compare two image directories or two tag files");
  add_common(eval, common, false);
  eval->add_option("--a", a, "reference image directory");
  eval->add_option("--b", b, "reconstruction image directory");
  eval->add_option("--tags-a", tags_a, "reference tag file");
  eval->add_option("--tags-b", tags_b, "predicted tag file");
  eval->add_option("--rank-by", rank_by, "psnr, ssim or mse");
  auto* sweep = app.add_subcommand("sweep", "run an ablation grid");
  add_common(sweep, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what());
  }

  try {
    set_log_level();
    if (*partition) cmd_partition(common);
    if (*fedtrain) cmd_fedtrain(common);
    if (*cap) cmd_capture(common, checkpoint);
    if (*atk) cmd_attack(common, capture, truth);
    if (*eval) cmd_eval(common, a, b, tags_a, tags_b, rank_by);
    if (*sweep) cmd_sweep(common);
  } catch (const Error& e) {
    return report_error(e.kind(), e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
  return 0;
}
