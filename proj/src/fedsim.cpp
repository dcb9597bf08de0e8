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


#include "gradlab/fedsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "gradlab/error.hpp"
#include "gradlab/json_util.hpp"

namespace gradlab::fed {
namespace fs = std::filesystem;

namespace {

bool tail_is_identity(const obf::ObfuscationSpec& spec) {
  return std::all_of(spec.tail().begin(), spec.tail().end(), [](const obf::Stage& s) {
    return std::holds_alternative<obf::Identity>(s);
  });
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.below(i)]);
  }
}

}  // namespace

Partition dirichlet_partition(std::span<const int> labels, std::size_t clients,
                              double alpha, std::uint64_t seed) {
  if (labels.empty()) throw ConfigError("cannot partition an empty dataset");
  if (clients == 0) throw ConfigError("partition needs at least one client");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("Dirichlet alpha must be positive");
  const int max_label = *std::max_element(labels.begin(), labels.end());
  if (*std::min_element(labels.begin(), labels.end()) < 0) throw ConfigError("labels must be non-negative");
  const std::size_t classes = static_cast<std::size_t>(max_label) + 1;

  // q[m] ~ Dir(alpha 1_c) via normalized gamma draws.
  std::vector<std::vector<double>> q(clients, std::vector<double>(classes));
  for (std::size_t m = 0; m < clients; ++m) {
    Rng rng = derive_stream(seed, "dirichlet", m);
    double total = 0.0;
    for (auto& x : q[m]) total += (x = rng.gamma(alpha));
    for (auto& x : q[m]) x = total > 0.0 ? x / total : 1.0 / double(classes);
  }

  Partition p{clients, alpha, std::vector<std::vector<std::size_t>>(clients),
              std::vector<std::vector<double>>(classes, std::vector<double>(clients))};
  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);

  for (std::size_t k = 0; k < classes; ++k) {
    double column = 0.0;
    for (std::size_t m = 0; m < clients; ++m) column += q[m][k];
    for (std::size_t m = 0; m < clients; ++m) {
      p.proportions[k][m] = column > 0.0 ? q[m][k] / column : 1.0 / double(clients);
    }
    const std::size_t n = members[k].size();
    if (n == 0) continue;
    // Largest remainder: floor shares, then hand leftovers to the largest
    // fractional parts (lower client index on ties).
    std::vector<std::size_t> counts(clients);
    std::vector<double> remainder(clients);
    std::size_t assigned = 0;
    for (std::size_t m = 0; m < clients; ++m) {
      const double share = double(n) * p.proportions[k][m];
      counts[m] = static_cast<std::size_t>(std::floor(share));
      remainder[m] = share - double(counts[m]);
      assigned += counts[m];
    }
    std::vector<std::size_t> order(clients);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % clients]];
    while (assigned > n) {  // floating point overshoot, never expected
      for (std::size_t m = clients; m-- > 0 && assigned > n;) {
        if (counts[m] > 0) --counts[m], --assigned;
      }
    }

    Rng rng = derive_stream(seed, "class-order", k);
    shuffle(members[k], rng);
    std::size_t next = 0;
    for (std::size_t m = 0; m < clients; ++m) {
      for (std::size_t c = 0; c < counts[m]; ++c) p.assignment[m].push_back(members[k][next++]);
    }
  }
  for (auto& a : p.assignment) std::sort(a.begin(), a.end());
  return p;
}

nlohmann::json to_json(const Partition& p) {
  return nlohmann::json{{"clients", p.clients},
                        {"alpha", p.alpha},
                        {"assignment", p.assignment},
                        {"proportions", p.proportions}};
}

LocalResult local_update(const models::Model& model, const ParamVector& w0,
                         const data::Dataset& shard, const LocalConfig& cfg,
                         std::uint64_t seed, const obf::ObfuscationSpec& spec) {
  if (!(cfg.eta >= 0.0) || !std::isfinite(cfg.eta)) throw ConfigError("learning rate must be >= 0");
  if (cfg.tau < 1) throw ConfigError("tau must be at least 1");
  if (cfg.batch < 1) throw ConfigError("batch size must be at least 1");
  LocalResult result{w0, 0, false};
  const std::size_t n = shard.size();
  if (n == 0) return result;
  std::size_t batch = cfg.batch;
  if (batch > n) {
    result.full_batch_fallback = true;
    batch = n;
  }
  const bool precode = model.spec().precode.has_value();
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < cfg.tau; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = derive_stream(seed, "shuffle", epoch);
    shuffle(order, shuffle_rng);
    for (std::size_t start = 0; start < n; start += batch) {
      // Sorted within the batch: the mean loss does not depend on row order,
      // and a full batch is then identical across epochs.
      std::vector<std::size_t> rows(order.begin() + start,
                                    order.begin() + std::min(n, start + batch));
      std::sort(rows.begin(), rows.end());
      const ag::Tensor images = shard.batch(rows);
      const std::vector<int> labels = shard.labels_of(rows);
      Rng noise = derive_stream(seed, "precode", result.steps);
      models::ForwardOptions options;
      if (precode) options.precode_noise = &noise;
      GradientVector g;
      if (spec.gradient_stage()) {
        Rng stage_rng = derive_stream(seed, "gradient-stage", result.steps);
        g = obf::gradient_stage(spec, {model, result.params, images, labels, options}, stage_rng);
      } else {
        g = model.gradient(result.params, images, labels, options);
      }
      for (std::size_t i = 0; i < g.size(); ++i) result.params[i] = result.params[i] - cfg.eta * g[i];
      ++result.steps;
    }
  }
  return result;
}

GradientVector weight_delta(const ParamVector& w0, const ParamVector& wt) {
  if (!w0.same_layout(wt)) throw ShapeError("weight_delta: segment tables differ");
  GradientVector d = GradientVector::zeros(w0.table_ptr());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = w0[i] - wt[i];
  return d;
}

ParamVector fedavg_round(const ParamVector& global, std::span<const GradientVector> deltas,
                         const obf::ObfuscationSpec& spec, std::uint64_t seed) {
  if (deltas.empty()) throw ConfigError("fedavg_round needs at least one client update");
  std::vector<double> sum(global.size(), 0.0);
  for (std::size_t m = 0; m < deltas.size(); ++m) {
    if (deltas[m].size() != global.size()) throw ShapeError("client delta does not match the model");
    Rng rng = derive_stream(seed, "phi", m);
    const GradientVector sent = obf::apply_tail(spec, deltas[m], rng);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += sent[i];
  }
  ParamVector out = global;
  const double n = static_cast<double>(deltas.size());
  for (std::size_t i = 0; i < sum.size(); ++i) out[i] = global[i] - sum[i] / n;
  return out;
}

ParamVector fedavg_round(const ParamVector& global, std::span<const ParamVector> endpoints,
                         const obf::ObfuscationSpec& spec, std::uint64_t seed) {
  if (endpoints.empty()) throw ConfigError("fedavg_round needs at least one client update");
  if (!tail_is_identity(spec)) {
    std::vector<GradientVector> deltas;
    deltas.reserve(endpoints.size());
    for (const auto& e : endpoints) deltas.push_back(weight_delta(global, e));
    return fedavg_round(global, deltas, spec, seed);
  }
  ParamVector out = ParamVector::zeros(global.table_ptr());
  for (const auto& e : endpoints) {
    if (!e.same_layout(global)) throw ShapeError("client weights do not match the model");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += e[i];
  }
  if (endpoints.size() > 1) {
    const double n = static_cast<double>(endpoints.size());
    for (double& v : out.values()) v /= n;
  }
  return out;
}

std::vector<std::size_t> sample_clients(std::size_t clients, std::size_t sampled,
                                        std::uint64_t seed, std::size_t round) {
  if (sampled == 0 || sampled > clients) {
    throw ConfigError("sampled clients must be between 1 and the client count");
  }
  std::vector<std::size_t> ids(clients);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng = derive_stream(seed, "sample", round);
  // Partial Fisher-Yates: the first `sampled` slots are a uniform subset.
  for (std::size_t i = 0; i < sampled; ++i) {
    std::swap(ids[i], ids[i + rng.below(clients - i)]);
  }
  ids.resize(sampled);
  std::sort(ids.begin(), ids.end());
  return ids;
}

double accuracy(const models::Model& model, const ParamVector& params,
                const data::Dataset& test) {
  if (test.size() == 0) return 0.0;
  std::size_t correct = 0;
  models::ForwardOptions options;
  options.precode_deterministic = true;
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < test.size(); start += kChunk) {
    std::vector<std::size_t> rows(std::min(kChunk, test.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    const auto pred = model.predict(params, test.batch(rows), options);
    for (std::size_t i = 0; i < rows.size(); ++i) correct += pred[i] == test.labels[rows[i]];
  }
  return double(correct) / double(test.size());
}

fs::path checkpoint_path(const fs::path& dir, std::size_t round) {
  return dir / ("checkpoint_round" + std::to_string(round) + ".gobf");
}

TrainingResult run_training(const models::Model& model, const ParamVector& init,
                            const data::Dataset& train, const data::Dataset& test,
                            const FedConfig& cfg, const obf::ObfuscationSpec& spec,
                            std::uint64_t seed, const std::optional<fs::path>& out_dir) {
  spec.validate();
  TrainingResult result;
  result.partition = dirichlet_partition(train.labels, cfg.clients, cfg.alpha,
                                         derive_seed(seed, "partition"));
  std::vector<data::Dataset> shards;
  shards.reserve(cfg.clients);
  for (const auto& a : result.partition.assignment) shards.push_back(train.subset(a));

  auto wants = [&](std::size_t k) {
    return std::find(cfg.checkpoint_rounds.begin(), cfg.checkpoint_rounds.end(), k) !=
           cfg.checkpoint_rounds.end();
  };
  auto save = [&](std::size_t k, const ParamVector& w) -> std::string {
    result.checkpoints.emplace_back(k, w);
    if (!out_dir) return {};
    const auto path = checkpoint_path(*out_dir, k);
    io::write_container(path, checkpoint_container(model, w, k));
    return path.filename().string();
  };

  ParamVector global = init;
  if (wants(0) || cfg.rounds == 0) save(0, global);
  for (std::size_t k = 1; k <= cfg.rounds; ++k) {
    RoundRecord rec;
    rec.round = k;
    rec.client_ids = sample_clients(cfg.clients, cfg.sampled, seed, k);
    std::vector<ParamVector> endpoints;
    endpoints.reserve(rec.client_ids.size());
    for (const std::size_t m : rec.client_ids) {
      const auto local = local_update(model, global, shards[m], cfg.local,
                                      derive_seed(seed, "local", k * cfg.clients + m), spec);
      if (local.full_batch_fallback) {
        spdlog::debug("round {} client {}: batch exceeds shard of {}, using one full batch", k, m,
                      shards[m].size());
      }
      rec.delta_norms.push_back(weight_delta(global, local.params).norm());
      endpoints.push_back(local.params);
    }
    rec.mean_delta_norm = std::accumulate(rec.delta_norms.begin(), rec.delta_norms.end(), 0.0) /
                          double(rec.delta_norms.size());
    global = fedavg_round(global, endpoints, spec, derive_seed(seed, "round", k));
    rec.test_accuracy = accuracy(model, global, test);
    if (wants(k)) rec.checkpoint = save(k, global);
    spdlog::info("round {}: mean delta norm {:.6g}, test accuracy {:.4f}", k, rec.mean_delta_norm,
                 rec.test_accuracy);
    result.records.push_back(std::move(rec));
  }
  if (out_dir) write_rounds_csv(*out_dir / "rounds.csv", result.records);
  return result;
}

void write_rounds_csv(const fs::path& path, std::span<const RoundRecord> records) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "round,client_ids,mean_delta_norm,test_acc\n";
  char buf[64];
  for (const auto& r : records) {
    out << r.round << ',';
    for (std::size_t i = 0; i < r.client_ids.size(); ++i) out << (i ? ";" : "") << r.client_ids[i];
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", r.mean_delta_norm, r.test_accuracy);
    out << buf;
  }
  if (!out) throw IoError("write failed for " + path.string());
}

nlohmann::json to_json(const models::ModelSpec& spec) {
  nlohmann::json j{{"architecture", models::to_string(spec.architecture)},
                   {"channels", spec.channels},
                   {"height", spec.height},
                   {"width", spec.width},
                   {"classes", spec.classes}};
  j["precode"] = spec.precode ? nlohmann::json(*spec.precode) : nlohmann::json(nullptr);
  return j;
}

models::ModelSpec model_spec_from_json(const nlohmann::json& j) {
  StrictObject o(j, "model");
  models::ModelSpec spec;
  spec.architecture = models::parse_architecture(
      o.get<std::string>("architecture", models::to_string(spec.architecture)));
  spec.channels = o.get<std::size_t>("channels", spec.channels);
  spec.height = o.get<std::size_t>("height", spec.height);
  spec.width = o.get<std::size_t>("width", spec.width);
  spec.classes = o.get<std::size_t>("classes", spec.classes);
  if (o.has("precode")) {
    const auto& v = o.raw("precode");
    if (!v.is_null()) {
      if (!v.is_number_unsigned() || v.get<std::size_t>() == 0) {
        throw ConfigError("model.precode: expected a positive width or null");
      }
      spec.precode = v.get<std::size_t>();
    }
  }
  o.finish();
  return spec;
}

io::Container checkpoint_container(const models::Model& model, const ParamVector& params,
                                   std::size_t round) {
  io::Container c;
  c.role = "checkpoint";
  c.metadata = {{"round", round}, {"model", to_json(model.spec())}};
  io::append_segmented(c, "params", params);
  return c;
}

ParamVector checkpoint_params(const models::Model& model, const io::Container& c) {
  if (c.role != "checkpoint") throw FormatError("expected a checkpoint container, got " + c.role);
  return io::extract_segmented<ParamTag>(c, "params", model.table());
}

std::pair<Capture, data::Dataset> capture_victim(
    const models::Model& model, const ParamVector& checkpoint, std::size_t round,
    const data::Dataset& shard, const VictimSelection& victim, const LocalConfig& local,
    const obf::ObfuscationSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (shard.size() == 0) throw ConfigError("victim client holds no data");
  const std::size_t n = victim.examples == 0 ? shard.size() : victim.examples;
  if (n > shard.size()) {
    throw ConfigError("victim batch of " + std::to_string(n) + " exceeds the shard of " +
                      std::to_string(shard.size()));
  }
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  data::Dataset batch = shard.subset(rows);
  const auto seed_index = round * 1000003 + victim.client;
  const auto result =
      local_update(model, checkpoint, batch, local, derive_seed(seed, "victim", seed_index), spec);
  Rng phi = derive_stream(seed, "victim-phi", seed_index);
  Capture cap;
  cap.round = round;
  cap.client = victim.client;
  cap.params = checkpoint;
  cap.gradient = obf::apply_tail(spec, weight_delta(checkpoint, result.params), phi);
  cap.labels = batch.labels;
  cap.spec = spec;
  cap.local = local;
  cap.model = model.spec();
  return {std::move(cap), std::move(batch)};
}

io::Container capture_container(const Capture& c) {
  io::Container out;
  out.role = "capture";
  out.metadata = {{"round", c.round},
                  {"client", c.client},
                  {"labels", c.labels},
                  {"obfuscation", obf::to_json(c.spec)},
                  {"local", {{"eta", c.local.eta}, {"tau", c.local.tau}, {"batch", c.local.batch}}},
                  {"model", to_json(c.model)}};
  io::append_segmented(out, "params", c.params);
  io::append_segmented(out, "gradient", c.gradient);
  return out;
}

Capture read_capture(const io::Container& c) {
  if (c.role != "capture") throw FormatError("expected a capture container, got " + c.role);
  for (const auto& t : c.tensors) {
    if (t.name.rfind("params.", 0) != 0 && t.name.rfind("gradient.", 0) != 0) {
      throw FormatError("capture schema violation: unexpected tensor '" + t.name + "'");
    }
  }
  Capture cap;
  try {
    const auto& m = c.metadata;
    cap.round = m.at("round").get<std::size_t>();
    cap.client = m.at("client").get<std::size_t>();
    cap.labels = m.at("labels").get<std::vector<int>>();
    cap.spec = obf::spec_from_json(m.at("obfuscation"));
    const auto& l = m.at("local");
    cap.local = {l.at("eta").get<double>(), l.at("tau").get<std::size_t>(),
                 l.at("batch").get<std::size_t>()};
    cap.model = model_spec_from_json(m.at("model"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("capture metadata: ") + e.what());
  }
  const models::Model model(cap.model);
  cap.params = io::extract_segmented<ParamTag>(c, "params", model.table());
  cap.gradient = io::extract_segmented<GradientTag>(c, "gradient", model.table());
  if (c.tensors.size() != 2 * model.table()->count()) {
    throw FormatError("capture holds tensors the model does not define");
  }
  return cap;
}

io::Container ground_truth_container(const data::Dataset& images) {
  io::Container c;
  c.role = "ground_truth";
  c.metadata = {{"labels", images.labels}};
  c.tensors.push_back({"images", {images.size(), images.channels, images.height, images.width},
                       images.pixels});
  return c;
}

data::Dataset read_ground_truth(const io::Container& c) {
  if (c.role != "ground_truth") throw FormatError("expected a ground_truth container, got " + c.role);
  const auto& t = c.get("images");
  if (t.shape.size() != 4) throw FormatError("ground truth images must be [n, C, H, W]");
  data::Dataset ds{t.shape[1], t.shape[2], t.shape[3], t.values, {}};
  try {
    ds.labels = c.metadata.at("labels").get<std::vector<int>>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError("ground truth metadata lacks labels");
  }
  if (ds.labels.size() != t.shape[0]) throw FormatError("ground truth label count mismatch");
  return ds;
}

}  // namespace gradlab::fed
