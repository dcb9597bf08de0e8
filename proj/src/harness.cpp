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


#include "gradlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <thread>

#include <spdlog/spdlog.h>

#include "gradlab/error.hpp"
#include "gradlab/json_util.hpp"
#include "gradlab/projection.hpp"
#include "gradlab/rng.hpp"

namespace gradlab::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string dataset_kind_name(DatasetKind k) {
  switch (k) {
    case DatasetKind::synthetic: return "synthetic";
    case DatasetKind::idx: return "idx";
    case DatasetKind::image_dir: return "image_dir";
  }
  return "?";
}

template <typename T>
std::vector<T> list_of(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  try {
    return j.get<std::vector<T>>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": wrong element type");
  }
}

json dataset_json(const DatasetSource& d) {
  return json{{"kind", dataset_kind_name(d.kind)}, {"count", d.count},   {"seed", d.seed},
              {"images", d.images},                {"labels", d.labels}, {"dir", d.dir},
              {"test_fraction", d.test_fraction}};
}

DatasetSource dataset_from_json(const json& j) {
  StrictObject o(j, "dataset");
  DatasetSource d;
  const auto kind = o.get<std::string>("kind", "synthetic");
  if (kind == "synthetic") {
    d.kind = DatasetKind::synthetic;
  } else if (kind == "idx") {
    d.kind = DatasetKind::idx;
  } else if (kind == "image_dir") {
    d.kind = DatasetKind::image_dir;
  } else {
    throw ConfigError("dataset: unknown kind " + kind);
  }
  d.count = o.get<std::size_t>("count", d.count);
  d.seed = o.get<std::uint64_t>("seed", d.seed);
  d.images = o.get<std::string>("images", d.images);
  d.labels = o.get<std::string>("labels", d.labels);
  d.dir = o.get<std::string>("dir", d.dir);
  d.test_fraction = o.number("test_fraction", d.test_fraction);
  o.finish();
  if (d.kind == DatasetKind::idx && (d.images.empty() || d.labels.empty())) {
    throw ConfigError("dataset: idx needs images and labels");
  }
  if (d.kind == DatasetKind::image_dir && (d.dir.empty() || d.labels.empty())) {
    throw ConfigError("dataset: image_dir needs dir and labels");
  }
  return d;
}

json fed_json(const fed::FedConfig& f) {
  return json{{"clients", f.clients},     {"sampled", f.sampled},
              {"rounds", f.rounds},       {"eta", f.local.eta},
              {"tau", f.local.tau},       {"batch", f.local.batch},
              {"alpha", f.alpha},         {"checkpoint_rounds", f.checkpoint_rounds}};
}

fed::FedConfig fed_from_json(const json& j) {
  StrictObject o(j, "fed");
  fed::FedConfig f;
  f.clients = o.get<std::size_t>("clients", f.clients);
  f.sampled = o.get<std::size_t>("sampled", f.sampled);
  f.rounds = o.get<std::size_t>("rounds", f.rounds);
  f.local.eta = o.number("eta", f.local.eta);
  f.local.tau = o.get<std::size_t>("tau", f.local.tau);
  f.local.batch = o.get<std::size_t>("batch", f.local.batch);
  f.alpha = o.number("alpha", f.alpha);
  if (o.has("checkpoint_rounds")) {
    f.checkpoint_rounds = list_of<std::size_t>(o.raw("checkpoint_rounds"), "fed.checkpoint_rounds");
  }
  o.finish();
  return f;
}

json sweep_json(const SweepGrid& s) {
  json obf = json::array();
  for (const auto& spec : s.obfuscation) obf.push_back(obf::to_json(spec));
  return json{{"batch", s.batch},         {"rounds", s.rounds},
              {"d_z", s.d_z},             {"obfuscation", obf},
              {"repeats", s.repeats},     {"autoencoder_epochs", s.autoencoder_epochs}};
}

SweepGrid sweep_from_json(const json& j) {
  StrictObject o(j, "sweep");
  SweepGrid s;
  if (o.has("batch")) s.batch = list_of<std::size_t>(o.raw("batch"), "sweep.batch");
  if (o.has("rounds")) s.rounds = list_of<std::size_t>(o.raw("rounds"), "sweep.rounds");
  if (o.has("d_z")) s.d_z = list_of<std::size_t>(o.raw("d_z"), "sweep.d_z");
  if (o.has("obfuscation")) {
    const auto& list = o.raw("obfuscation");
    if (!list.is_array()) throw ConfigError("sweep.obfuscation: expected an array");
    for (const auto& item : list) s.obfuscation.push_back(obf::spec_from_json(item));
  }
  s.repeats = o.get<std::size_t>("repeats", s.repeats);
  s.autoencoder_epochs = o.get<std::size_t>("autoencoder_epochs", s.autoencoder_epochs);
  o.finish();
  return s;
}

std::string axis_value(std::size_t v) { return std::to_string(v); }

}  // namespace

void ExperimentConfig::validate() const {
  models::Model probe(model);
  if (!(dataset.test_fraction >= 0.0 && dataset.test_fraction < 1.0)) {
    throw ConfigError("dataset.test_fraction must lie in [0, 1)");
  }
  if (dataset.kind == DatasetKind::synthetic && dataset.count == 0) {
    throw ConfigError("dataset.count must be positive");
  }
  if (fed.clients == 0) throw ConfigError("fed.clients must be positive");
  if (fed.sampled == 0 || fed.sampled > fed.clients) {
    throw ConfigError("fed.sampled must lie in [1, clients]");
  }
  if (!(fed.local.eta >= 0.0) || !std::isfinite(fed.local.eta)) {
    throw ConfigError("fed.eta must be finite and non-negative");
  }
  if (fed.local.tau == 0) throw ConfigError("fed.tau must be positive");
  if (fed.local.batch == 0) throw ConfigError("fed.batch must be positive");
  if (!(fed.alpha > 0.0) || !std::isfinite(fed.alpha)) throw ConfigError("fed.alpha must be positive");
  if (victim.client >= fed.clients) throw ConfigError("victim.client exceeds the client count");
  obfuscation.validate();
  attack.validate();
  for (const auto& s : sweep.obfuscation) s.validate();
  for (std::size_t b : sweep.batch) {
    if (b == 0) throw ConfigError("sweep.batch entries must be positive");
  }
  for (std::size_t d : sweep.d_z) {
    if (d == 0) throw ConfigError("sweep.d_z entries must be positive");
  }
  if (sweep.repeats == 0) throw ConfigError("sweep.repeats must be positive");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

json to_json(const ExperimentConfig& cfg) {
  return json{{"model", fed::to_json(cfg.model)},
              {"dataset", dataset_json(cfg.dataset)},
              {"fed", fed_json(cfg.fed)},
              {"obfuscation", obf::to_json(cfg.obfuscation)},
              {"attack", attack::to_json(cfg.attack)},
              {"victim", {{"client", cfg.victim.client},
                          {"examples", cfg.victim.examples},
                          {"round", cfg.victim.round}}},
              {"sweep", sweep_json(cfg.sweep)},
              {"output_dir", cfg.output_dir},
              {"seed", cfg.seed}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  StrictObject o(j, "config");
  ExperimentConfig cfg;
  if (o.has("model")) cfg.model = fed::model_spec_from_json(o.raw("model"));
  if (o.has("dataset")) cfg.dataset = dataset_from_json(o.raw("dataset"));
  if (o.has("fed")) cfg.fed = fed_from_json(o.raw("fed"));
  if (o.has("obfuscation")) cfg.obfuscation = obf::spec_from_json(o.raw("obfuscation"));
  if (o.has("attack")) cfg.attack = attack::attack_config_from_json(o.raw("attack"));
  if (o.has("victim")) {
    StrictObject v(o.raw("victim"), "victim");
    cfg.victim.client = v.get<std::size_t>("client", cfg.victim.client);
    cfg.victim.examples = v.get<std::size_t>("examples", cfg.victim.examples);
    cfg.victim.round = v.get<std::size_t>("round", cfg.victim.round);
    v.finish();
  }
  if (o.has("sweep")) cfg.sweep = sweep_from_json(o.raw("sweep"));
  cfg.output_dir = o.get<std::string>("output_dir", cfg.output_dir);
  cfg.seed = o.get<std::uint64_t>("seed", cfg.seed);
  o.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig read_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

Datasets load_datasets(const DatasetSource& source, const models::ModelSpec& model) {
  data::Dataset all;
  switch (source.kind) {
    case DatasetKind::synthetic:
      all = data::synthetic_digits(source.count, source.seed, model.height, model.width, model.channels);
      break;
    case DatasetKind::idx: all = data::load_idx(source.images, source.labels); break;
    case DatasetKind::image_dir: all = data::load_image_dir(source.dir, source.labels); break;
  }
  if (all.channels != model.channels || all.height != model.height || all.width != model.width) {
    throw ConfigError("dataset images are " + std::to_string(all.channels) + "x" +
                      std::to_string(all.height) + "x" + std::to_string(all.width) +
                      ", the model expects " + std::to_string(model.channels) + "x" +
                      std::to_string(model.height) + "x" + std::to_string(model.width));
  }
  for (int l : all.labels) {
    if (l < 0 || std::size_t(l) >= model.classes) throw ConfigError("dataset label out of range");
  }
  const std::size_t n = all.size();
  const auto n_test = std::size_t(std::floor(double(n) * source.test_fraction));
  if (n - n_test == 0) throw ConfigError("dataset leaves no training examples");
  std::vector<std::size_t> train_idx(n - n_test), test_idx(n_test);
  for (std::size_t i = 0; i < train_idx.size(); ++i) train_idx[i] = i;
  for (std::size_t i = 0; i < n_test; ++i) test_idx[i] = n - n_test + i;
  return {all.subset(train_idx), all.subset(test_idx)};
}

ParamVector initial_params(const models::Model& model, std::uint64_t seed) {
  return model.init_params(derive_seed(seed, "init"));
}

Federation prepare_federation(const ExperimentConfig& cfg, const models::Model& model,
                              const Datasets& data, std::vector<std::size_t> rounds) {
  std::sort(rounds.begin(), rounds.end());
  rounds.erase(std::unique(rounds.begin(), rounds.end()), rounds.end());
  Federation f;
  const ParamVector init = initial_params(model, cfg.seed);
  if (rounds.empty() || rounds.back() == 0) {
    f.partition = fed::dirichlet_partition(data.train.labels, cfg.fed.clients, cfg.fed.alpha,
                                           derive_seed(cfg.seed, "partition"));
    f.checkpoints.emplace_back(0, init);
    return f;
  }
  fed::FedConfig fc = cfg.fed;
  fc.rounds = rounds.back();
  fc.checkpoint_rounds = rounds;
  auto tr = fed::run_training(model, init, data.train, data.test, fc, cfg.obfuscation, cfg.seed);
  f.partition = std::move(tr.partition);
  f.checkpoints = std::move(tr.checkpoints);
  return f;
}

const ParamVector& Federation::at(std::size_t round) const {
  for (const auto& [k, w] : checkpoints) {
    if (k == round) return w;
  }
  throw ConfigError("no checkpoint for round " + std::to_string(round));
}

std::size_t pick_victim(const fed::Partition& p, std::size_t first, std::size_t examples) {
  const std::size_t m = p.assignment.size();
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t c = (first + i) % m;
    if (p.assignment[c].size() >= std::max<std::size_t>(examples, 1)) return c;
  }
  throw ConfigError("no client holds " + std::to_string(examples) + " examples");
}

void write_images(const ag::Tensor& images, const fs::path& dir, const std::string& prefix) {
  if (images.rank() != 4) throw ShapeError("write_images expects [n, C, H, W]");
  fs::create_directories(dir);
  const std::size_t c = images.dim(1), h = images.dim(2), w = images.dim(3);
  const std::size_t per = c * h * w;
  const auto v = images.values();
  for (std::size_t i = 0; i < images.dim(0); ++i) {
    const auto name = prefix + "_" + std::to_string(i) + (c == 3 ? ".ppm" : ".pgm");
    data::write_image(v.subspan(i * per, per), c, h, w, dir / name);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

AttackRun run_attack(const attack::AttackConfig& cfg, const attack::Projection& projection,
                     const fed::Capture& capture, const data::Dataset* truth) {
  const models::Model model(capture.model);
  const attack::VictimUpdate victim{capture.local.eta, capture.local.tau, capture.local.batch,
                                    capture.labels.size()};
  AttackRun run;
  run.result = attack::rog_attack(
      cfg, projection, {model, capture.params, capture.gradient, capture.labels, capture.spec, victim});
  if (truth) {
    if (truth->size() != capture.labels.size()) {
      throw ConfigError("ground truth holds " + std::to_string(truth->size()) + " images, capture " +
                        std::to_string(capture.labels.size()));
    }
    run.report = metrics::batch_report(truth->all(), run.result.reconstruction);
  }
  return run;
}

void write_attack_outputs(const AttackRun& run, const fs::path& dir) {
  fs::create_directories(dir);
  write_images(run.result.reconstruction, dir, "reconstruction");
  write_images(run.result.initial, dir, "initial");
  write_text(dir / "history.csv", attack::history_csv(run.result.history));
  if (run.report) {
    write_text(dir / "report.json", metrics::to_json(*run.report).dump(2) + "\n");
    write_text(dir / "metrics.csv", metrics::to_csv(*run.report));
  }
}

namespace {

attack::Projection projection_for(const ExperimentConfig& cfg, std::optional<std::size_t> d_z,
                                  const Datasets& data) {
  const auto& m = cfg.model;
  const std::size_t pixels = m.channels * m.height * m.width;
  if (!d_z) return attack::build_projection(cfg.attack.projection, m.channels, m.height, m.width);
  switch (cfg.attack.projection.kind) {
    case attack::ProjectionKind::identity:
      if (*d_z != pixels) throw ConfigError("identity projection needs d_z = " + std::to_string(pixels));
      return attack::Projection::identity(m.channels, m.height, m.width);
    case attack::ProjectionKind::bicubic:
      for (std::size_t f = 1; f <= std::min(m.height, m.width); ++f) {
        if (m.height % f == 0 && m.width % f == 0 && pixels / (f * f) == *d_z) {
          return attack::Projection::bicubic(m.channels, m.height, m.width, f);
        }
      }
      throw ConfigError("no bicubic factor gives d_z = " + std::to_string(*d_z));
    case attack::ProjectionKind::autoencoder: {
      if (data.test.size() < 2) throw ConfigError("autoencoder training needs held-out data");
      const std::size_t half = data.test.size() / 2;
      std::vector<std::size_t> a(half), b(data.test.size() - half);
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = i;
      for (std::size_t i = 0; i < b.size(); ++i) b[i] = half + i;
      attack::AutoencoderTraining t;
      t.epochs = cfg.sweep.autoencoder_epochs;
      auto ae = attack::train_autoencoder(data.test.subset(a), data.test.subset(b), *d_z, t,
                                          derive_seed(cfg.seed, "autoencoder", *d_z));
      return attack::Projection::autoencoder(std::move(ae));
    }
  }
  throw ConfigError("unhandled projection kind");
}

struct Cell {
  std::size_t batch;
  std::size_t round;
  std::optional<std::size_t> d_z;
  std::size_t d_z_slot;
  const obf::ObfuscationSpec* spec;
  std::vector<std::string> axes;
};

struct CellRun {
  double psnr = 0.0, ssim = 0.0, grad_dist = 0.0;
};

}  // namespace

SweepResult run_sweep(const ExperimentConfig& cfg, std::size_t threads,
                      const std::optional<fs::path>& out_dir) {
  cfg.validate();
  const auto& grid = cfg.sweep;
  const models::Model model(cfg.model);
  const Datasets data = load_datasets(cfg.dataset, cfg.model);

  SweepResult result;
  if (!grid.batch.empty()) result.header.push_back("batch");
  if (!grid.rounds.empty()) result.header.push_back("rounds");
  if (!grid.d_z.empty()) result.header.push_back("d_z");
  if (!grid.obfuscation.empty()) result.header.push_back("obfuscation");
  for (const char* h : {"psnr_mean", "ssim_mean", "grad_dist_final"}) result.header.push_back(h);

  const auto batches = grid.batch.empty() ? std::vector<std::size_t>{cfg.victim.examples} : grid.batch;
  const auto rounds = grid.rounds.empty() ? std::vector<std::size_t>{cfg.victim.round} : grid.rounds;
  std::vector<std::optional<std::size_t>> dzs;
  for (std::size_t d : grid.d_z) dzs.emplace_back(d);
  if (dzs.empty()) dzs.emplace_back();
  std::vector<const obf::ObfuscationSpec*> specs;
  for (const auto& s : grid.obfuscation) specs.push_back(&s);
  if (specs.empty()) specs.push_back(&cfg.obfuscation);

  const Federation federation = prepare_federation(cfg, model, data, rounds);
  std::vector<attack::Projection> projections;
  for (const auto& d : dzs) projections.push_back(projection_for(cfg, d, data));

  std::vector<Cell> cells;
  for (std::size_t b : batches) {
    for (std::size_t k : rounds) {
      for (std::size_t di = 0; di < dzs.size(); ++di) {
        for (const auto* s : specs) {
          Cell c{b, k, dzs[di], di, s, {}};
          if (!grid.batch.empty()) c.axes.push_back(axis_value(b));
          if (!grid.rounds.empty()) c.axes.push_back(axis_value(k));
          if (!grid.d_z.empty()) c.axes.push_back(axis_value(*dzs[di]));
          if (!grid.obfuscation.empty()) c.axes.push_back(s->label());
          cells.push_back(std::move(c));
        }
      }
    }
  }

  const std::size_t max_batch = *std::max_element(batches.begin(), batches.end());
  std::vector<std::size_t> victims(grid.repeats);
  for (std::size_t r = 0; r < grid.repeats; ++r) {
    victims[r] = pick_victim(federation.partition, cfg.victim.client + r, max_batch);
  }

  const std::size_t tasks = cells.size() * grid.repeats;
  std::vector<CellRun> runs(tasks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const std::size_t ci = t / grid.repeats, r = t % grid.repeats;
      const Cell& cell = cells[ci];
      const std::size_t client = victims[r];
      const auto shard = data.train.subset(federation.partition.assignment[client]);
      auto [cap, truth] = fed::capture_victim(model, federation.at(cell.round), cell.round, shard,
                                              {client, cell.batch}, cfg.fed.local, *cell.spec,
                                              derive_seed(cfg.seed, "capture", r));
      attack::AttackConfig ac = cfg.attack;
      ac.seed = derive_seed(cfg.seed, "attack", r);
      const AttackRun run = run_attack(ac, projections[cell.d_z_slot], cap, &truth);
      runs[t] = {run.report->psnr.mean, run.report->ssim.mean, run.result.history.back().grad_dist};
      if (out_dir) {
        write_attack_outputs(run, *out_dir / ("cell_" + std::to_string(ci)) / ("rep_" + std::to_string(r)));
      }
      spdlog::debug("sweep cell {} repeat {}: psnr {:.3f}", ci, r, runs[t].psnr);
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(tasks, 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
  }

  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    SweepRow row;
    row.axes = cells[ci].axes;
    for (std::size_t r = 0; r < grid.repeats; ++r) {
      const auto& run = runs[ci * grid.repeats + r];
      row.psnr_mean += run.psnr;
      row.ssim_mean += run.ssim;
      row.grad_dist_final += run.grad_dist;
    }
    const double n = double(grid.repeats);
    row.psnr_mean /= n;
    row.ssim_mean /= n;
    row.grad_dist_final /= n;
    spdlog::info("sweep row {}: psnr {:.3f} ssim {:.4f}", ci, row.psnr_mean, row.ssim_mean);
    result.rows.push_back(std::move(row));
  }
  if (out_dir) write_text(*out_dir / "sweep.csv", sweep_csv(result));
  return result;
}

std::string sweep_csv(const SweepResult& r) {
  std::string out;
  for (std::size_t i = 0; i < r.header.size(); ++i) out += (i ? "," : "") + r.header[i];
  out += "\n";
  for (const auto& row : r.rows) {
    for (const auto& a : row.axes) out += a + ",";
    out += metrics::format_number(row.psnr_mean) + "," + metrics::format_number(row.ssim_mean) + "," +
           metrics::format_number(row.grad_dist_final) + "\n";
  }
  return out;
}

}  // namespace gradlab::harness
