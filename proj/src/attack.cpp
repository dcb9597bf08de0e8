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


#include "gradlab/attack.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "gradlab/container.hpp"
#include "gradlab/error.hpp"
#include "gradlab/json_util.hpp"
#include "gradlab/metrics.hpp"
#include "gradlab/ops.hpp"

namespace gradlab::attack {
namespace {

template <typename E, std::size_t N>
E parse_enum(const std::string& name, const std::array<std::pair<const char*, E>, N>& table,
             const char* what) {
  for (const auto& [key, value] : table) {
    if (name == key) return value;
  }
  throw ConfigError(std::string("unknown ") + what + ": " + name);
}

template <typename E, std::size_t N>
std::string enum_name(E value, const std::array<std::pair<const char*, E>, N>& table) {
  for (const auto& [key, v] : table) {
    if (v == value) return key;
  }
  return "?";
}

constexpr std::array<std::pair<const char*, MatchKind>, 4> kMatchNames{{
    {"auto", MatchKind::automatic},
    {"l2", MatchKind::l2},
    {"cosine_tv", MatchKind::cosine_tv},
    {"sign_match", MatchKind::sign_match},
}};
constexpr std::array<std::pair<const char*, UpdateModel>, 3> kUpdateNames{{
    {"auto", UpdateModel::automatic},
    {"single_step", UpdateModel::single_step},
    {"unrolled", UpdateModel::unrolled},
}};
constexpr std::array<std::pair<const char*, PostKind>, 4> kPostNames{{
    {"none", PostKind::none},
    {"hist_eq", PostKind::hist_eq},
    {"tv_denoise", PostKind::tv_denoise},
    {"normalize_sign", PostKind::normalize_sign},
}};

// Flat index of the forward neighbour along rows (dy) or columns (dx),
// replicating the last row/column.
ag::IndexList neighbour_index(const ag::Shape& shape, bool rows) {
  const std::size_t h = shape[2], w = shape[3];
  auto idx = std::make_shared<std::vector<std::size_t>>(ag::numel(shape));
  for (std::size_t i = 0; i < idx->size(); ++i) {
    const std::size_t col = i % w;
    const std::size_t row = (i / w) % h;
    if (rows) {
      (*idx)[i] = row + 1 < h ? i + w : i;
    } else {
      (*idx)[i] = col + 1 < w ? i + 1 : i;
    }
  }
  return idx;
}

ag::Tensor values_of(const ag::Tensor& t) { return t.detach(); }

ag::Tensor clamp_values(const ag::Tensor& t) {
  std::vector<double> v = t.to_vector();
  for (double& x : v) x = std::clamp(x, 0.0, 1.0);
  return ag::Tensor(t.shape(), std::move(v));
}

}  // namespace

void AttackConfig::validate() const {
  if (!(adam.lr > 0.0)) throw ConfigError("attack: Adam learning rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("attack: Adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("attack: Adam eps must be positive");
  if (!(tv_weight >= 0.0)) throw ConfigError("attack: tv_weight must be >= 0");
  if (projection.kind == ProjectionKind::bicubic && projection.factor == 0) {
    throw ConfigError("attack: bicubic factor must be positive");
  }
  if (projection.kind == ProjectionKind::autoencoder && projection.autoencoder.empty()) {
    throw ConfigError("attack: autoencoder projection needs a model file");
  }
  for (const auto& p : postprocess) {
    if (p.kind == PostKind::tv_denoise && !(p.weight >= 0.0)) {
      throw ConfigError("attack: tv_denoise weight must be >= 0");
    }
  }
  if (!(init_value >= 0.0 && init_value <= 1.0)) {
    throw ConfigError("attack: constant init value must lie in [0, 1]");
  }
}

std::string to_string(MatchKind k) { return enum_name(k, kMatchNames); }
std::string to_string(UpdateModel u) { return enum_name(u, kUpdateNames); }
std::string to_string(PostKind k) { return enum_name(k, kPostNames); }

nlohmann::json to_json(const AttackConfig& cfg) {
  nlohmann::json post = nlohmann::json::array();
  for (const auto& p : cfg.postprocess) {
    nlohmann::json step{{"kind", to_string(p.kind)}};
    if (p.kind == PostKind::tv_denoise) {
      step["weight"] = p.weight;
      step["steps"] = p.steps;
    }
    post.push_back(step);
  }
  nlohmann::json projection{{"kind", to_string(cfg.projection.kind)},
                            {"factor", cfg.projection.factor}};
  if (!cfg.projection.autoencoder.empty()) projection["autoencoder"] = cfg.projection.autoencoder;
  nlohmann::json init{{"kind", cfg.init == InitKind::uniform01 ? "uniform01" : "constant"}};
  if (cfg.init == InitKind::constant) init["value"] = cfg.init_value;
  return nlohmann::json{
      {"projection", projection},
      {"loss", to_string(cfg.loss)},
      {"tv_weight", cfg.tv_weight},
      {"iterations", cfg.iterations},
      {"adam",
       {{"lr", cfg.adam.lr}, {"beta1", cfg.adam.beta1}, {"beta2", cfg.adam.beta2}, {"eps", cfg.adam.eps}}},
      {"lr_decay", cfg.lr_decay},
      {"update", to_string(cfg.update)},
      {"unroll_cap", cfg.unroll_cap},
      {"postprocess", post},
      {"init", init},
      {"seed", cfg.seed}};
}

AttackConfig attack_config_from_json(const nlohmann::json& j) {
  StrictObject o(j, "attack");
  AttackConfig cfg;
  if (o.has("projection")) {
    StrictObject p(o.raw("projection"), "attack.projection");
    cfg.projection.kind = parse_projection_kind(p.get<std::string>("kind", "bicubic"));
    cfg.projection.factor = p.get<std::size_t>("factor", cfg.projection.factor);
    cfg.projection.autoencoder = p.get<std::string>("autoencoder", "");
    p.finish();
  }
  if (o.has("loss")) cfg.loss = parse_enum(o.require<std::string>("loss"), kMatchNames, "attack loss");
  cfg.tv_weight = o.number("tv_weight", cfg.tv_weight);
  cfg.iterations = o.get<std::size_t>("iterations", cfg.iterations);
  cfg.lr_decay = o.get<bool>("lr_decay", cfg.lr_decay);
  if (o.has("adam")) {
    StrictObject a(o.raw("adam"), "attack.adam");
    cfg.adam.lr = a.number("lr", cfg.adam.lr);
    cfg.adam.beta1 = a.number("beta1", cfg.adam.beta1);
    cfg.adam.beta2 = a.number("beta2", cfg.adam.beta2);
    cfg.adam.eps = a.number("eps", cfg.adam.eps);
    a.finish();
  }
  if (o.has("update")) {
    cfg.update = parse_enum(o.require<std::string>("update"), kUpdateNames, "update model");
  }
  cfg.unroll_cap = o.get<std::size_t>("unroll_cap", cfg.unroll_cap);
  if (o.has("postprocess")) {
    const auto& list = o.raw("postprocess");
    if (!list.is_array()) throw ConfigError("attack.postprocess: expected an array");
    for (const auto& item : list) {
      StrictObject s(item, "attack.postprocess");
      PostStep step;
      step.kind = parse_enum(s.require<std::string>("kind"), kPostNames, "postprocess step");
      if (step.kind == PostKind::tv_denoise) {
        step.weight = s.number("weight", step.weight);
        step.steps = s.get<std::size_t>("steps", step.steps);
      }
      s.finish();
      cfg.postprocess.push_back(step);
    }
  }
  if (o.has("init")) {
    StrictObject i(o.raw("init"), "attack.init");
    const auto kind = i.get<std::string>("kind", "uniform01");
    if (kind == "uniform01") {
      cfg.init = InitKind::uniform01;
    } else if (kind == "constant") {
      cfg.init = InitKind::constant;
      cfg.init_value = i.number("value", cfg.init_value);
    } else {
      throw ConfigError("attack.init: unknown kind " + kind);
    }
    i.finish();
  }
  cfg.seed = o.get<std::uint64_t>("seed", cfg.seed);
  o.finish();
  cfg.validate();
  return cfg;
}

AttackConfig dlg_config() {
  AttackConfig cfg;
  cfg.projection.kind = ProjectionKind::identity;
  cfg.projection.factor = 1;
  cfg.loss = MatchKind::l2;
  cfg.iterations = 2000;
  return cfg;
}

AttackConfig invertgrad_config() {
  AttackConfig cfg = dlg_config();
  cfg.loss = MatchKind::cosine_tv;
  return cfg;
}

std::size_t VictimUpdate::steps() const {
  if (batch == 0 || examples == 0) throw ConfigError("victim batch and example count must be positive");
  return tau * ((examples + batch - 1) / batch);
}

UpdateModel resolve_update_model(UpdateModel mode, const VictimUpdate& victim,
                                 std::size_t unroll_cap) {
  if (mode != UpdateModel::automatic) return mode;
  return victim.steps() <= unroll_cap ? UpdateModel::unrolled : UpdateModel::single_step;
}

MatchKind resolve_match_kind(MatchKind kind, const obf::ObfuscationSpec& spec) {
  if (kind != MatchKind::automatic) return kind;
  if (spec.contains_sign()) return MatchKind::sign_match;
  return spec.is_identity() ? MatchKind::l2 : MatchKind::cosine_tv;
}

std::vector<ag::Tensor> dummy_gradient(const models::Model& model, ag::Tape& tape,
                                       const ParamVector& w0, const ag::Tensor& x,
                                       std::span<const int> labels, UpdateModel mode,
                                       const VictimUpdate& victim, std::size_t unroll_cap) {
  const std::size_t steps = victim.steps();
  mode = resolve_update_model(mode, victim, unroll_cap);
  models::ForwardOptions options;
  options.precode_deterministic = true;
  const std::vector<ag::Tensor> w = model.bind(tape, w0);
  if (mode == UpdateModel::single_step) {
    const ag::Tensor loss = model.loss(w, x, labels, options);
    auto g = tape.backward(loss, w, true);
    for (auto& t : g) t = ag::scale(t, victim.eta * double(steps));
    return g;
  }
  if (steps > unroll_cap) {
    throw ConfigError("unrolled dummy update needs " + std::to_string(steps) +
                      " steps, above the cap of " + std::to_string(unroll_cap));
  }
  std::vector<ag::Tensor> cur = w;
  for (std::size_t s = 0; s < steps; ++s) {
    const ag::Tensor loss = model.loss(cur, x, labels, options);
    const auto g = tape.backward(loss, cur, true);
    for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = cur[i] - ag::scale(g[i], victim.eta);
  }
  for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = w[i] - cur[i];
  return cur;
}

ag::Tensor total_variation(const ag::Tensor& images) {
  if (images.rank() != 4) throw ShapeError("total_variation expects [n, C, H, W]");
  const ag::Shape& shape = images.shape();
  const ag::Tensor dy = ag::gather(images, neighbour_index(shape, true), shape) - images;
  const ag::Tensor dx = ag::gather(images, neighbour_index(shape, false), shape) - images;
  const ag::Tensor mag = ag::sqrt(ag::add_scalar(ag::square(dy) + ag::square(dx), kTvEps));
  const ag::Tensor per_pixel = ag::add_scalar(mag, -std::sqrt(kTvEps));
  return ag::mean(per_pixel);
}

MatchLoss match_loss(MatchKind kind, std::span<const ag::Tensor> dummy,
                     const GradientVector& observed, const ag::Tensor& images, double tv_weight) {
  if (dummy.size() != observed.table().count()) {
    throw ShapeError("dummy gradient has " + std::to_string(dummy.size()) + " segments, observed " +
                     std::to_string(observed.table().count()));
  }
  const auto obs = observed.unflatten();
  for (std::size_t i = 0; i < dummy.size(); ++i) {
    if (dummy[i].shape() != obs[i].shape()) throw ShapeError("dummy and observed gradients differ in shape");
  }
  MatchLoss out;
  ag::Tensor acc;
  auto accumulate = [&](const ag::Tensor& t) { acc = acc.defined() ? acc + t : t; };
  switch (kind) {
    case MatchKind::automatic:
    case MatchKind::l2:
      for (std::size_t i = 0; i < dummy.size(); ++i) accumulate(ag::sum(ag::square(dummy[i] - obs[i])));
      out.value = acc;
      return out;
    case MatchKind::sign_match:
      for (std::size_t i = 0; i < dummy.size(); ++i) {
        std::vector<double> s = obs[i].to_vector();
        for (double& v : s) v = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
        accumulate(ag::sum(ag::square(ag::tanh(dummy[i]) - ag::Tensor(obs[i].shape(), std::move(s)))));
      }
      out.value = acc;
      return out;
    case MatchKind::cosine_tv: {
      ag::Tensor inner, sq;
      for (std::size_t i = 0; i < dummy.size(); ++i) {
        const ag::Tensor d = ag::dot(dummy[i], obs[i]);
        const ag::Tensor n = ag::sum(ag::square(dummy[i]));
        inner = inner.defined() ? inner + d : d;
        sq = sq.defined() ? sq + n : n;
      }
      const double obs_norm = observed.norm();
      const ag::Tensor tv = ag::scale(total_variation(images), tv_weight);
      if (sq.item() == 0.0 || obs_norm == 0.0) {
        out.degenerate = true;
        out.value = tv;
        return out;
      }
      const ag::Tensor cosine = ag::div(inner, ag::scale(ag::sqrt(sq), obs_norm));
      out.value = tv - cosine;
      return out;
    }
  }
  throw ConfigError("unhandled match loss");
}

std::vector<ag::Tensor> surrogate(const obf::ObfuscationSpec&, std::vector<ag::Tensor> dummy,
                                  const GradientVector&) {
  return dummy;
}

ag::Tensor hist_eq(const ag::Tensor& images) {
  if (images.rank() != 4) throw ShapeError("hist_eq expects [n, C, H, W]");
  std::vector<double> v = images.to_vector();
  const std::size_t plane = images.dim(2) * images.dim(3);
  for (std::size_t start = 0; start < v.size(); start += plane) {
    std::array<std::size_t, 256> hist{};
    for (std::size_t i = 0; i < plane; ++i) ++hist[data::quantize_pixel(std::clamp(v[start + i], 0.0, 1.0))];
    std::size_t occupied = 0;
    for (const auto h : hist) occupied += h > 0;
    if (occupied < 2) continue;
    std::array<std::size_t, 256> cdf{};
    std::size_t run = 0, cdf_min = 0;
    for (std::size_t b = 0; b < 256; ++b) {
      run += hist[b];
      cdf[b] = run;
      if (cdf_min == 0 && run > 0) cdf_min = run;
    }
    const double denom = double(plane - cdf_min);
    for (std::size_t i = 0; i < plane; ++i) {
      const auto b = data::quantize_pixel(std::clamp(v[start + i], 0.0, 1.0));
      v[start + i] = double(cdf[b] - cdf_min) / denom;
    }
  }
  return ag::Tensor(images.shape(), std::move(v));
}

ag::Tensor tv_denoise(const ag::Tensor& images, double weight, std::size_t steps) {
  constexpr double kStep = 0.1;
  const ag::Tensor target = values_of(images);
  std::vector<double> u = target.to_vector();
  if (weight > 0.0) {
    for (std::size_t s = 0; s < steps; ++s) {
      ag::Tape tape;
      const ag::Tensor x = tape.variable(ag::Tensor(images.shape(), u));
      const ag::Tensor energy =
          ag::scale(ag::sum(ag::square(x - target)), 0.5) +
          ag::scale(total_variation(x), weight * double(images.numel()));
      const ag::Tensor g = tape.backward(energy, x);
      for (std::size_t i = 0; i < u.size(); ++i) u[i] -= kStep * g[i];
    }
  }
  return clamp_values(ag::Tensor(images.shape(), std::move(u)));
}

ag::Tensor normalize_sign(const ag::Tensor& images) {
  if (images.rank() != 4) throw ShapeError("normalize_sign expects [n, C, H, W]");
  std::vector<double> v = images.to_vector();
  const std::size_t per = images.numel() / images.dim(0);
  for (std::size_t start = 0; start < v.size(); start += per) {
    double m = 0.0;
    for (std::size_t i = 0; i < per; ++i) m = std::max(m, std::abs(v[start + i]));
    for (std::size_t i = 0; i < per; ++i) {
      v[start + i] = m == 0.0 ? 0.5 : 0.5 + 0.5 * v[start + i] / m;
    }
  }
  return ag::Tensor(images.shape(), std::move(v));
}

ag::Tensor postprocess(const ag::Tensor& images, std::span<const PostStep> steps) {
  ag::Tensor x = values_of(images);
  if (steps.empty() || steps.front().kind != PostKind::normalize_sign) x = clamp_values(x);
  for (const auto& s : steps) {
    switch (s.kind) {
      case PostKind::none: x = clamp_values(x); break;
      case PostKind::hist_eq: x = hist_eq(clamp_values(x)); break;
      case PostKind::tv_denoise: x = tv_denoise(clamp_values(x), s.weight, s.steps); break;
      case PostKind::normalize_sign: x = normalize_sign(x); break;
    }
  }
  return clamp_values(x);
}

Projection build_projection(const ProjectionConfig& cfg, std::size_t channels, std::size_t height,
                            std::size_t width) {
  switch (cfg.kind) {
    case ProjectionKind::identity: return Projection::identity(channels, height, width);
    case ProjectionKind::bicubic: return Projection::bicubic(channels, height, width, cfg.factor);
    case ProjectionKind::autoencoder: {
      auto ae = read_autoencoder(io::read_container(cfg.autoencoder));
      if (ae.net.channels() != channels || ae.net.height() != height || ae.net.width() != width) {
        throw ConfigError("autoencoder " + cfg.autoencoder + " was trained for another image shape");
      }
      return Projection::autoencoder(std::move(ae));
    }
  }
  throw ConfigError("unhandled projection kind");
}

AttackResult rog_attack(const AttackConfig& cfg, const Projection& projection, const Observation& obs) {
  cfg.validate();
  const auto& spec = obs.model.spec();
  const std::size_t batch = obs.labels.size();
  if (batch == 0) throw ConfigError("attack needs at least one label");
  if (obs.gradient.size() != obs.model.parameter_count() || obs.params.size() != obs.model.parameter_count()) {
    throw ShapeError("observed tensors do not match the model");
  }

  AttackResult result;
  result.loss_kind = resolve_match_kind(cfg.loss, obs.spec);
  result.update = resolve_update_model(cfg.update, obs.victim, cfg.unroll_cap);
  result.d_z = projection.latent_size();

  const ag::Shape image_shape{batch, spec.channels, spec.height, spec.width};
  std::vector<double> x0(ag::numel(image_shape), cfg.init_value);
  if (cfg.init == InitKind::uniform01) {
    Rng rng = derive_stream(cfg.seed, "attack-init");
    for (double& v : x0) v = rng.uniform01();
  }
  const ag::Tensor z0 = projection.encode(ag::Tensor(image_shape, std::move(x0)));
  const ag::Shape z_shape = z0.shape();
  std::vector<double> z = z0.to_vector();
  std::vector<double> best_z = z;
  result.best_loss = std::numeric_limits<double>::infinity();
  Adam adam(cfg.adam, z.size());
  // Pixel-space latents are kept in the unit box directly so that
  // saturated pixels still receive gradient.
  const bool box_z = projection.kind() == ProjectionKind::identity;
  const auto lr_scale = [&](std::size_t it) {
    if (!cfg.lr_decay) return 1.0;
    const double n = double(cfg.iterations);
    const double t = double(it);
    if (t >= 7.0 * n / 8.0) return 1e-3;
    if (t >= 5.0 * n / 8.0) return 1e-2;
    if (t >= 3.0 * n / 8.0) return 1e-1;
    return 1.0;
  };

  for (std::size_t it = 0;; ++it) {
    ag::Tape tape;
    const ag::Tensor zt = tape.variable(ag::Tensor(z_shape, z));
    const ag::Tensor x = box_z ? projection.decode(zt) : ag::clamp(projection.decode(zt), 0.0, 1.0);
    auto dummy = dummy_gradient(obs.model, tape, obs.params, x, obs.labels, result.update,
                                obs.victim, cfg.unroll_cap);
    dummy = surrogate(obs.spec, std::move(dummy), obs.gradient);
    const MatchLoss loss = match_loss(result.loss_kind, dummy, obs.gradient, x, cfg.tv_weight);
    const double value = loss.value.item();
    result.degenerate_loss = result.degenerate_loss || loss.degenerate;
    result.history.push_back({it, value});
    if (it == 0) result.initial_loss = value;
    if (value < result.best_loss) {
      result.best_loss = value;
      result.best_iter = it;
      best_z = z;
    }
    if (it == cfg.iterations) break;
    if (!loss.value.on_tape()) break;  // nothing depends on z
    const ag::Tensor g = tape.backward(loss.value, zt);
    adam.step(z, g.values(), lr_scale(it));
    if (box_z) {
      for (double& v : z) v = std::clamp(v, 0.0, 1.0);
    }
  }

  result.initial = clamp_values(projection.decode(z0));
  const ag::Tensor raw = projection.decode(ag::Tensor(z_shape, best_z));
  result.decoded = clamp_values(raw);
  result.reconstruction = postprocess(raw, cfg.postprocess);
  result.state = {ag::Tensor(z_shape, z), adam.first_moment(), adam.second_moment(), adam.steps()};
  return result;
}

std::string history_csv(std::span<const HistoryPoint> history) {
  std::string out = "iter,grad_dist\n";
  for (const auto& h : history) {
    out += std::to_string(h.iter) + "," + metrics::format_number(h.grad_dist) + "\n";
  }
  return out;
}

}  // namespace gradlab::attack
