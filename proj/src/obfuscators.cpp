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

#include "gradlab/obfuscators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gradlab/error.hpp"
#include "gradlab/json_util.hpp"
#include "gradlab/ops.hpp"

namespace gradlab::obf {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool is_gradient_stage(const Stage& s) {
  return std::holds_alternative<FedCdp>(s) || std::holds_alternative<Soteria>(s);
}

int levels(int bits) { return (1 << (bits - 1)) - 1; }

void check_bits(int bits, const char* name) {
  if (bits < 2) {
    throw ConfigError(std::string(name) +
                      " needs bits >= 2; use sign compression for 1 bit");
  }
  if (bits > 31) throw ConfigError(std::string(name) + ": bits must be <= 31");
}

void check_norm_params(double p, double kappa, const char* name) {
  if (!(p >= 1.0)) throw ConfigError(std::string(name) + ": p must be >= 1");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw ConfigError(std::string(name) + ": kappa must be positive");
  }
}

// Applies f(values, out) to each norm group: layer segments or the whole vector.
template <typename F>
GradientVector per_group(const GradientVector& g, bool per_layer, F f) {
  GradientVector out = GradientVector::zeros(g.table_ptr());
  if (per_layer) {
    for (std::size_t i = 0; i < g.table().count(); ++i) f(g.segment(i), out.segment(i));
  } else {
    f(g.values(), out.values());
  }
  return out;
}

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::string stage_name(const Stage& stage) {
  return std::visit(
      Overloaded{
          [](const Identity&) { return std::string("identity"); },
          [](const Sign&) { return std::string("sign"); },
          [](const UniformQuant& q) { return "uniform" + std::to_string(q.bits); },
          [](const Qsgd& q) { return "qsgd" + std::to_string(q.bits); },
          [](const TopK& t) { return "topk" + format_number(t.sparsity); },
          [](const FedCdp& f) {
            return "fedcdp" + format_number(f.clip) + "@" + format_number(f.snr_db);
          },
          [](const Soteria& s) { return "soteria" + format_number(s.rho); },
      },
      stage);
}

void ObfuscationSpec::validate() const {
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const Stage& s = stages[i];
    if (i > 0 && is_gradient_stage(s)) {
      throw ConfigError(stage_name(s) + " must be the first stage of the chain");
    }
    std::visit(Overloaded{
                   [](const Identity&) {},
                   [](const Sign&) {},
                   [](const UniformQuant& q) {
                     check_bits(q.bits, "uniform_quant");
                     check_norm_params(q.p, q.kappa, "uniform_quant");
                   },
                   [](const Qsgd& q) {
                     check_bits(q.bits, "qsgd");
                     check_norm_params(q.p, q.kappa, "qsgd");
                   },
                   [](const TopK& t) {
                     if (!(t.sparsity >= 0.0 && t.sparsity < 1.0)) {
                       throw ConfigError("topk: sparsity must lie in [0, 1)");
                     }
                   },
                   [](const FedCdp& f) {
                     if (!(f.clip > 0.0) || !std::isfinite(f.clip)) {
                       throw ConfigError("fedcdp: clip bound C must be positive");
                     }
                     if (std::isnan(f.snr_db) || f.snr_db == -std::numeric_limits<double>::infinity()) {
                       throw ConfigError("fedcdp: snr_db must be a number or +inf");
                     }
                   },
                   [](const Soteria& s) {
                     if (!(s.rho >= 0.0 && s.rho <= 1.0)) {
                       throw ConfigError("soteria: rho must lie in [0, 1]");
                     }
                   },
               },
               s);
  }
}

const Stage* ObfuscationSpec::gradient_stage() const {
  if (!stages.empty() && is_gradient_stage(stages.front())) return &stages.front();
  return nullptr;
}

std::span<const Stage> ObfuscationSpec::tail() const {
  std::span<const Stage> all(stages);
  return gradient_stage() ? all.subspan(1) : all;
}

bool ObfuscationSpec::contains_sign() const {
  return std::any_of(stages.begin(), stages.end(), [](const Stage& s) {
    return std::holds_alternative<Sign>(s);
  });
}

bool ObfuscationSpec::is_identity() const {
  return std::all_of(stages.begin(), stages.end(), [](const Stage& s) {
    return std::holds_alternative<Identity>(s);
  });
}

std::string ObfuscationSpec::label() const {
  if (stages.empty()) return "identity";
  std::string out;
  for (const auto& s : stages) {
    if (!out.empty()) out += '+';
    out += stage_name(s);
  }
  return out;
}

nlohmann::json to_json(const ObfuscationSpec& spec) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : spec.stages) {
    stages.push_back(std::visit(
        Overloaded{
            [](const Identity&) { return nlohmann::json{{"kind", "identity"}}; },
            [](const Sign&) { return nlohmann::json{{"kind", "sign"}}; },
            [](const UniformQuant& q) {
              return nlohmann::json{{"kind", "uniform_quant"},
                                    {"bits", q.bits},
                                    {"p", StrictObject::from_number(q.p)},
                                    {"kappa", q.kappa}};
            },
            [](const Qsgd& q) {
              return nlohmann::json{{"kind", "qsgd"},
                                    {"bits", q.bits},
                                    {"p", StrictObject::from_number(q.p)},
                                    {"kappa", q.kappa}};
            },
            [](const TopK& t) {
              return nlohmann::json{{"kind", "topk"}, {"sparsity", t.sparsity}};
            },
            [](const FedCdp& f) {
              return nlohmann::json{{"kind", "fedcdp"},
                                    {"clip", f.clip},
                                    {"snr_db", StrictObject::from_number(f.snr_db)}};
            },
            [](const Soteria& s) {
              return nlohmann::json{{"kind", "soteria"},
                                    {"rho", s.rho},
                                    {"defended_layer", s.defended_layer}};
            },
        },
        s));
  }
  return nlohmann::json{{"stages", stages}, {"per_layer_norm", spec.per_layer_norm}};
}

ObfuscationSpec spec_from_json(const nlohmann::json& j) {
  ObfuscationSpec spec;
  const nlohmann::json* stages = &j;
  std::optional<StrictObject> top;
  if (j.is_object()) {
    top.emplace(j, "obfuscation");
    stages = &top->raw("stages");
    spec.per_layer_norm = top->get<bool>("per_layer_norm", true);
    top->finish();
  }
  if (!stages->is_array()) throw ConfigError("obfuscation: stages must be an array");
  for (const auto& item : *stages) {
    StrictObject o(item, "obfuscation stage");
    const auto kind = o.require<std::string>("kind");
    if (kind == "identity") {
      spec.stages.emplace_back(Identity{});
    } else if (kind == "sign") {
      spec.stages.emplace_back(Sign{});
    } else if (kind == "uniform_quant" || kind == "qsgd") {
      const int bits = o.get<int>("bits", 3);
      const double p = o.number("p", 2.0);
      const double kappa = o.number("kappa", 1.0);
      if (kind == "qsgd") {
        spec.stages.emplace_back(Qsgd{bits, p, kappa});
      } else {
        spec.stages.emplace_back(UniformQuant{bits, p, kappa});
      }
    } else if (kind == "topk") {
      spec.stages.emplace_back(TopK{o.number("sparsity", 0.95)});
    } else if (kind == "fedcdp") {
      spec.stages.emplace_back(
          FedCdp{o.number("clip", 1.0),
                 o.number("snr_db", std::numeric_limits<double>::infinity())});
    } else if (kind == "soteria") {
      spec.stages.emplace_back(
          Soteria{o.number("rho", 0.8), o.get<std::string>("defended_layer", "fc1")});
    } else {
      throw ConfigError("unknown obfuscation stage: " + kind);
    }
    o.finish();
  }
  spec.validate();
  return spec;
}

std::size_t guarded_ceil(double x) {
  if (x <= 0.0) return 0;
  return static_cast<std::size_t>(std::ceil(x - 1e-9));
}

GradientVector sign_compress(const GradientVector& g) {
  GradientVector out = GradientVector::zeros(g.table_ptr());
  for (std::size_t i = 0; i < g.size(); ++i) {
    out[i] = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
  }
  return out;
}

double lp_norm(std::span<const double> v, double p) {
  if (std::isinf(p)) {
    double m = 0.0;
    for (const double x : v) m = std::max(m, std::abs(x));
    return m;
  }
  double acc = 0.0;
  if (p == 2.0) {
    for (const double x : v) acc += x * x;
    return std::sqrt(acc);
  }
  for (const double x : v) acc += std::pow(std::abs(x), p);
  return std::pow(acc, 1.0 / p);
}

GradientVector uniform_quantize(const GradientVector& g, const UniformQuant& q,
                                bool per_layer) {
  check_bits(q.bits, "uniform_quant");
  check_norm_params(q.p, q.kappa, "uniform_quant");
  const int s = levels(q.bits);
  return per_group(g, per_layer, [&](std::span<const double> in, std::span<double> out) {
    const double norm = lp_norm(in, q.p);
    if (norm == 0.0) return;
    const double step = q.kappa / s * norm;
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double level = std::clamp(
          std::round(s * std::abs(in[i]) / (q.kappa * norm)), 0.0, double(s));
      const double sign = in[i] > 0.0 ? 1.0 : (in[i] < 0.0 ? -1.0 : 0.0);
      out[i] = sign * (step * level);
    }
  });
}

GradientVector qsgd_quantize(const GradientVector& g, const Qsgd& q, Rng& rng,
                             bool per_layer) {
  check_bits(q.bits, "qsgd");
  check_norm_params(q.p, q.kappa, "qsgd");
  const int s = levels(q.bits);
  return per_group(g, per_layer, [&](std::span<const double> in, std::span<double> out) {
    const double norm = lp_norm(in, q.p);
    if (norm == 0.0) return;
    const double step = q.kappa / s * norm;
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double scaled = s * std::abs(in[i]) / (q.kappa * norm);
      double level = std::floor(scaled);
      double prob = scaled - level;
      if (level >= s) {
        level = s;
        prob = 0.0;
      }
      // One draw per coordinate keeps the stream aligned with the index.
      if (rng.uniform01() < prob) level += 1.0;
      const double sign = in[i] > 0.0 ? 1.0 : (in[i] < 0.0 ? -1.0 : 0.0);
      out[i] = sign * (step * level);
    }
  });
}

std::size_t topk_count(std::size_t size, double sparsity) {
  return std::min(size, guarded_ceil((1.0 - sparsity) * static_cast<double>(size)));
}

GradientVector topk_sparsify(const GradientVector& g, double sparsity) {
  if (!(sparsity >= 0.0 && sparsity < 1.0)) {
    throw ConfigError("topk: sparsity must lie in [0, 1)");
  }
  const std::size_t k = topk_count(g.size(), sparsity);
  std::vector<std::size_t> order(g.size());
  std::iota(order.begin(), order.end(), 0);
  const auto values = g.values();
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                   order.end(), [&](std::size_t a, std::size_t b) {
                     const double x = std::abs(values[a]);
                     const double y = std::abs(values[b]);
                     return x > y || (x == y && a < b);
                   });
  GradientVector out = GradientVector::zeros(g.table_ptr());
  for (std::size_t i = 0; i < k; ++i) out[order[i]] = g[order[i]];
  return out;
}

GradientVector clip_per_layer(const GradientVector& g, double clip) {
  GradientVector out = g;
  for (std::size_t s = 0; s < g.table().count(); ++s) {
    const double norm = g.segment_norm(s);
    const double factor = std::max(1.0, norm / clip);
    for (double& v : out.segment(s)) v /= factor;
  }
  return out;
}

double fedcdp_sigma(std::span<const double> clipped_mean, double clip,
                    double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  double power = 0.0;
  for (const double v : clipped_mean) power += v * v;
  if (clipped_mean.empty() || power == 0.0) return 0.0;
  power /= static_cast<double>(clipped_mean.size());
  return std::sqrt(power / (clip * clip * std::pow(10.0, snr_db / 10.0)));
}

FedCdpResult fedcdp(std::span<const GradientVector> per_example,
                    const FedCdp& stage, Rng& rng) {
  if (per_example.empty()) throw ConfigError("fedcdp needs at least one example");
  if (!(stage.clip > 0.0)) throw ConfigError("fedcdp: clip bound C must be positive");
  FedCdpResult result;
  result.clipped_mean = GradientVector::zeros(per_example.front().table_ptr());
  for (const auto& g : per_example) {
    const GradientVector clipped = clip_per_layer(g, stage.clip);
    for (std::size_t i = 0; i < clipped.size(); ++i) result.clipped_mean[i] += clipped[i];
  }
  const double inv = 1.0 / static_cast<double>(per_example.size());
  for (double& v : result.clipped_mean.values()) v *= inv;
  result.sigma = fedcdp_sigma(result.clipped_mean.values(), stage.clip, stage.snr_db);
  result.noisy = result.clipped_mean;
  if (result.sigma > 0.0) {
    const double stddev = result.sigma * stage.clip;
    for (double& v : result.noisy.values()) v += stddev * rng.normal();
  }
  return result;
}

SoteriaResult soteria_prune(const ExampleBatch& batch, const Soteria& stage) {
  if (!(stage.rho >= 0.0 && stage.rho <= 1.0)) {
    throw ConfigError("soteria: rho must lie in [0, 1]");
  }
  const auto& layer = batch.model.layer(stage.defended_layer);
  if (layer.kind != models::LayerKind::fully_connected ||
      stage.defended_layer.rfind("precode", 0) == 0) {
    throw ConfigError("soteria: defended layer " + stage.defended_layer +
                      " is not a fully connected layer of the classifier");
  }
  ag::Tape tape;
  const auto params = batch.model.bind(tape, batch.params);
  ag::Tensor representation;
  models::ForwardOptions options = batch.options;
  options.tap_layer = stage.defended_layer;
  options.tapped = &representation;
  const ag::Tensor loss = batch.model.loss(params, batch.images, batch.labels, options);
  std::vector<ag::Tensor> wrt = params;
  wrt.push_back(representation);
  auto grads = tape.backward(loss, wrt);
  const ag::Tensor rep_grad = grads.back();
  grads.pop_back();

  SoteriaResult result{GradientVector::flatten(batch.model.table(), grads), {}};
  const std::size_t width = layer.inputs;
  const std::size_t rows = rep_grad.dim(0);
  std::vector<double> score(width, 0.0);
  for (std::size_t b = 0; b < rows; ++b) {
    for (std::size_t i = 0; i < width; ++i) {
      const double v = rep_grad[b * width + i];
      score[i] += v * v;
    }
  }
  const std::size_t count = std::min(width, guarded_ceil(stage.rho * double(width)));
  std::vector<std::size_t> order(width);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  result.pruned.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(result.pruned.begin(), result.pruned.end());

  const auto weight = *batch.model.table()->find(stage.defended_layer + ".weight");
  auto seg = result.gradient.segment(weight);
  for (std::size_t o = 0; o < layer.outputs; ++o) {
    for (const std::size_t i : result.pruned) seg[o * width + i] = 0.0;
  }
  return result;
}

GradientVector gradient_stage(const ObfuscationSpec& spec,
                              const ExampleBatch& batch, Rng& rng) {
  const Stage* stage = spec.gradient_stage();
  if (!stage) {
    return batch.model.gradient(batch.params, batch.images, batch.labels, batch.options);
  }
  if (const auto* s = std::get_if<Soteria>(stage)) return soteria_prune(batch, *s).gradient;
  const auto& f = std::get<FedCdp>(*stage);
  std::vector<GradientVector> per_example;
  const std::size_t n = batch.images.dim(0);
  per_example.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t row[] = {i};
    per_example.push_back(batch.model.gradient(
        batch.params, ag::select_rows(batch.images, row),
        batch.labels.subspan(i, 1), batch.options));
  }
  return fedcdp(per_example, f, rng).noisy;
}

GradientVector apply_tail(const ObfuscationSpec& spec, const GradientVector& g,
                          Rng& rng) {
  GradientVector out = g;
  for (const auto& stage : spec.tail()) {
    out = std::visit(
        Overloaded{
            [&](const Identity&) { return out; },
            [&](const Sign&) { return sign_compress(out); },
            [&](const UniformQuant& q) {
              return uniform_quantize(out, q, spec.per_layer_norm);
            },
            [&](const Qsgd& q) { return qsgd_quantize(out, q, rng, spec.per_layer_norm); },
            [&](const TopK& t) { return topk_sparsify(out, t.sparsity); },
            [&](const FedCdp&) -> GradientVector {
              throw ConfigError("fedcdp must be the first stage of the chain");
            },
            [&](const Soteria&) -> GradientVector {
              throw ConfigError("soteria must be the first stage of the chain");
            },
        },
        stage);
  }
  return out;
}

GradientVector apply_chain(const ObfuscationSpec& spec, const GradientVector& g,
                           Rng& rng) {
  spec.validate();
  if (spec.gradient_stage()) {
    throw ConfigError(stage_name(*spec.gradient_stage()) +
                      " needs per-example inputs, not a finished gradient");
  }
  return apply_tail(spec, g, rng);
}

GradientVector apply_chain(const ObfuscationSpec& spec,
                           const ExampleBatch& batch, Rng& rng) {
  spec.validate();
  return apply_tail(spec, gradient_stage(spec, batch, rng), rng);
}

}  // namespace gradlab::obf
