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


// Acceptance runner: one PASS/FAIL line per criterion. Arguments restrict
// the run to the named criteria (e.g. `acceptance A2 A6`).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "gradlab/attack.hpp"
#include "gradlab/data.hpp"
#include "gradlab/error.hpp"
#include "gradlab/fedsim.hpp"
#include "gradlab/gradcheck.hpp"
#include "gradlab/harness.hpp"
#include "gradlab/metrics.hpp"
#include "gradlab/models.hpp"
#include "gradlab/obfuscators.hpp"
#include "gradlab/ops.hpp"
#include "gradlab/rng.hpp"
#include "property_catalog.hpp"

namespace fs = std::filesystem;
using namespace gradlab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------- A1

Outcome a1() {
  constexpr double kTol = 1e-4;
  const auto cat = acceptance::property_catalog();
  double worst_grad = 0.0, worst_hvp = 0.0;
  std::string worst_grad_name, worst_hvp_name;
  std::size_t checked = 0, excluded = 0;
  for (const auto& entry : cat) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto c = entry.make(seed);
      const auto g = acceptance::check_first_order(c);
      checked += g.checked;
      excluded += g.excluded;
      if (g.error > worst_grad) {
        worst_grad = g.error;
        worst_grad_name = entry.name;
      }
      if (entry.second_order) {
        const double h = acceptance::check_second_order(c);
        if (h > worst_hvp) {
          worst_hvp = h;
          worst_hvp_name = entry.name;
        }
      }
    }
  }
  const bool pass = worst_grad < kTol && worst_hvp < kTol;
  return {pass, std::to_string(cat.size()) + " entries x 20 seeds, " + std::to_string(checked) +
                    " coordinates (" + std::to_string(excluded) + " at kinks); worst gradient rel err " +
                    fmt("%.2e", worst_grad) + " (" + worst_grad_name + "), worst Hv rel err " +
                    fmt("%.2e", worst_hvp) + " (" + worst_hvp_name + ")"};
}

// ---------------------------------------------------------------- A2

std::shared_ptr<const SegmentTable> flat_table(std::size_t n) {
  auto t = std::make_shared<SegmentTable>();
  t->append("g", {n});
  return t;
}

Outcome a2() {
  constexpr std::size_t kDraws = 1'000'000, kDim = 64;
  const auto table = flat_table(kDim);
  std::size_t violations = 0;
  double worst_z = 0.0;
  for (std::uint64_t v = 0; v < 10; ++v) {
    Rng init = derive_stream(2024, "a2-vector", v);
    GradientVector g = GradientVector::zeros(table);
    for (double& x : g.values()) x = init.normal();
    const obf::Qsgd q{3};
    Rng rng = derive_stream(2024, "a2-draws", v);
    std::vector<double> sum(kDim, 0.0), sq(kDim, 0.0);
    for (std::size_t d = 0; d < kDraws; ++d) {
      const GradientVector s = obf::qsgd_quantize(g, q, rng, false);
      for (std::size_t i = 0; i < kDim; ++i) {
        sum[i] += s[i];
        sq[i] += s[i] * s[i];
      }
    }
    for (std::size_t i = 0; i < kDim; ++i) {
      const double mean = sum[i] / double(kDraws);
      const double var = std::max(0.0, sq[i] / double(kDraws) - mean * mean);
      const double se = std::sqrt(var / double(kDraws));
      const double err = std::abs(mean - g[i]);
      if (se == 0.0) {
        if (err > 1e-12 * std::max(1.0, std::abs(g[i]))) ++violations;
        continue;
      }
      worst_z = std::max(worst_z, err / se);
      if (err > 4.0 * se) ++violations;
    }
  }
  return {violations == 0, "10 vectors x 64 coords, 1e6 draws; worst |mean-g|/SE " + fmt("%.2f", worst_z) +
                               ", violations " + std::to_string(violations)};
}

// ---------------------------------------------------------------- A3

bool on_grid(const GradientVector& in, const GradientVector& out, int bits, double kappa) {
  const int s = (1 << (bits - 1)) - 1;
  double acc = 0.0;
  for (double x : in.values()) acc += x * x;
  const double norm = std::sqrt(acc);
  const double step = kappa / s * norm;
  // A zero vector has the single grid point 0.
  if (norm == 0.0) return std::all_of(out.values().begin(), out.values().end(), [](double x) { return x == 0.0; });
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double sign = in[i] > 0.0 ? 1.0 : (in[i] < 0.0 ? -1.0 : 0.0);
    const double l = std::round(std::abs(out[i]) / step);
    if (l < 0 || l > s) return false;
    if (out[i] != sign * (step * l)) return false;
  }
  return true;
}

Outcome a3() {
  std::size_t failures = 0, checks = 0;
  for (std::uint64_t v = 0; v < 1000; ++v) {
    Rng rng = derive_stream(77, "a3", v);
    const std::size_t n = 1 + rng.below(200);
    const auto table = flat_table(n);
    GradientVector g = GradientVector::zeros(table);
    const double spread = std::exp(4.0 * (rng.uniform01() - 0.5));
    for (double& x : g.values()) x = spread * rng.normal();
    if (v % 10 == 0) g[rng.below(n)] = 0.0;
    const int bits = 2 + int(rng.below(7));
    const double kappa = 0.5 + rng.uniform01();

    ++checks;
    failures += !on_grid(g, obf::uniform_quantize(g, {bits, 2.0, kappa}, false), bits, kappa);
    ++checks;
    Rng qrng = derive_stream(77, "a3-qsgd", v);
    failures += !on_grid(g, obf::qsgd_quantize(g, {bits, 2.0, kappa}, qrng, false), bits, kappa);

    const double sparsity = rng.uniform01() * 0.99;
    const GradientVector t = obf::topk_sparsify(g, sparsity);
    const std::size_t k = std::min(n, std::size_t(std::ceil((1.0 - sparsity) * double(n) - 1e-9)));
    std::size_t support = 0;
    bool bit_equal = true;
    double min_kept = INFINITY, max_dropped = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (t[i] != 0.0) ++support;
      if (t[i] != 0.0 && t[i] != g[i]) bit_equal = false;
      if (t[i] != 0.0) min_kept = std::min(min_kept, std::abs(g[i]));
      else max_dropped = std::max(max_dropped, std::abs(g[i]));
    }
    // Zero-valued retained entries are invisible in the output.
    std::size_t zeros_in_top = 0;
    {
      std::vector<double> mags(n);
      for (std::size_t i = 0; i < n; ++i) mags[i] = std::abs(g[i]);
      std::sort(mags.rbegin(), mags.rend());
      for (std::size_t i = 0; i < k; ++i) zeros_in_top += mags[i] == 0.0;
    }
    ++checks;
    failures += !(support + zeros_in_top == k && bit_equal && (support == 0 || min_kept >= max_dropped));

    const GradientVector s1 = obf::sign_compress(g);
    ++checks;
    failures += !(obf::sign_compress(s1) == s1);
    GradientVector scaled = g;
    const double c = 0.01 + 100.0 * rng.uniform01();
    for (double& x : scaled.values()) x *= c;
    ++checks;
    failures += !(obf::sign_compress(scaled) == s1);
  }
  return {failures == 0, std::to_string(checks) + " contract checks over 1000 vectors, failures " +
                             std::to_string(failures)};
}

// ---------------------------------------------------------------- A4

Outcome a4() {
  auto table = std::make_shared<SegmentTable>();
  table->append("w1", {40, 25});
  table->append("b1", {40});
  table->append("w2", {10, 40});
  const std::size_t n = table->total();
  std::size_t norm_violations = 0;
  double worst_snr = 0.0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng = derive_stream(5, "a4", trial);
    std::vector<GradientVector> ex;
    for (int e = 0; e < 4; ++e) {
      GradientVector g = GradientVector::zeros(table);
      const double amp = std::exp(3.0 * rng.normal());
      for (double& x : g.values()) x = amp * rng.normal();
      ex.push_back(std::move(g));
    }
    const double clip = 0.1 + 2.0 * rng.uniform01();
    for (const auto& g : ex) {
      const auto c = obf::clip_per_layer(g, clip);
      for (std::size_t s = 0; s < table->count(); ++s) {
        if (c.segment_norm(s) > clip * (1.0 + 1e-12)) ++norm_violations;
      }
    }
    const double snr = -10.0 + 40.0 * rng.uniform01();
    Rng nrng = derive_stream(5, "a4-noise", trial);
    const auto r = obf::fedcdp(ex, {clip, snr}, nrng);
    double power = 0.0;
    for (double v : r.clipped_mean.values()) power += v * v;
    power /= double(n);
    const double implied = 10.0 * std::log10(power / (r.sigma * r.sigma * clip * clip));
    worst_snr = std::max(worst_snr, std::abs(implied - snr) / std::max(1.0, std::abs(snr)));
  }

  // Noise variance at 1e6 samples.
  auto big = std::make_shared<SegmentTable>();
  big->append("g", {1'000'000});
  GradientVector g = GradientVector::zeros(big);
  Rng rng = derive_stream(5, "a4-big");
  for (double& x : g.values()) x = 1e-3 * rng.normal();
  const double clip = 0.5, snr = 3.0;
  Rng nrng = derive_stream(5, "a4-big-noise");
  const auto r = obf::fedcdp(std::span<const GradientVector>(&g, 1), {clip, snr}, nrng);
  double m = 0.0, v = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) m += r.noisy[i] - r.clipped_mean[i];
  m /= double(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double d = r.noisy[i] - r.clipped_mean[i] - m;
    v += d * d;
  }
  v /= double(g.size() - 1);
  const double target = r.sigma * r.sigma * clip * clip;
  const double var_err = std::abs(v / target - 1.0);

  const bool pass = norm_violations == 0 && worst_snr <= 1e-12 && var_err <= 0.05;
  return {pass, "clip violations " + std::to_string(norm_violations) + ", worst SNR formula err " +
                    fmt("%.1e", worst_snr) + ", noise variance rel err " + fmt("%.4f", var_err)};
}

// ---------------------------------------------------------------- A5

Outcome a5() {
  const models::Model model(models::ModelSpec{});
  const auto train = data::synthetic_digits(12, 501);
  const auto test = data::synthetic_digits(8, 502);
  fed::FedConfig cfg;
  cfg.clients = 1;
  cfg.sampled = 1;
  cfg.rounds = 50;
  cfg.local = {0.05, 1, 16};
  cfg.checkpoint_rounds = {50};
  const auto init = model.init_params(503);
  const auto level = spdlog::get_level();
  spdlog::set_level(spdlog::level::warn);
  const auto r = fed::run_training(model, init, train, test, cfg, {}, 504);
  spdlog::set_level(level);
  ParamVector w = init;
  for (int step = 0; step < 50; ++step) {
    const auto g = model.gradient(w, train.all(), train.labels);
    for (std::size_t i = 0; i < g.size(); ++i) w[i] = w[i] - 0.05 * g[i];
  }
  const auto& fedw = r.checkpoints.back().second;
  std::size_t diff = 0;
  for (std::size_t i = 0; i < w.size(); ++i) diff += fedw[i] != w[i];
  return {diff == 0 && r.checkpoints.back().first == 50,
          "50 rounds x 1 full-batch step; differing parameters " + std::to_string(diff) + " of " +
              std::to_string(w.size())};
}

// ---------------------------------------------------------------- A6/A7/A10

struct DeskRun {
  double initial_psnr, final_psnr, ratio, loss_at_100;
};

DeskRun desk_attack(std::uint64_t seed, attack::ProjectionKind kind, std::size_t iterations,
                    const obf::ObfuscationSpec& spec) {
  const models::Model model(models::ModelSpec{});
  const auto pool = data::synthetic_digits(100, 7);
  const auto w = model.init_params(100 + seed);
  const std::vector<std::size_t> rows{seed * 8};
  const auto shard = pool.subset(rows);
  const fed::LocalConfig local{5e-3, 1, 1};
  auto [cap, truth] = fed::capture_victim(model, w, 0, shard, {0, 0}, local, spec, seed);
  attack::AttackConfig cfg;
  cfg.projection.kind = kind;
  cfg.projection.factor = kind == attack::ProjectionKind::bicubic ? 4 : 1;
  cfg.iterations = iterations;
  cfg.seed = seed;
  const auto projection = attack::build_projection(cfg.projection, 1, 28, 28);
  const auto run = harness::run_attack(cfg, projection, cap, &truth);
  const auto init_report = metrics::batch_report(truth.all(), run.result.initial);
  const auto& h = run.result.history;
  return {init_report.psnr.mean, run.report->psnr.mean, run.result.best_loss / run.result.initial_loss,
          h[std::min<std::size_t>(100, h.size() - 1)].grad_dist};
}

Outcome a6() {
  int ok = 0;
  std::string detail;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto r = desk_attack(s, attack::ProjectionKind::identity, 200, {});
    const bool pass = r.ratio <= 0.01 && r.final_psnr - r.initial_psnr >= 6.0;
    ok += pass;
    detail += " [" + fmt("%.1e", r.ratio) + ", +" + fmt("%.1f", r.final_psnr - r.initial_psnr) + " dB]";
  }
  return {ok >= 4, std::to_string(ok) + "/5 seeds with loss ratio <= 1% and +6 dB;" + detail};
}

Outcome a7() {
  double sum_b = 0.0, sum_i = 0.0;
  int strict = 0;
  std::string detail;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto b = desk_attack(s, attack::ProjectionKind::bicubic, 100, {});
    const auto i = desk_attack(s, attack::ProjectionKind::identity, 100, {});
    sum_b += b.loss_at_100;
    sum_i += i.loss_at_100;
    strict += b.loss_at_100 < i.loss_at_100;
    detail += " [" + fmt("%.2e", b.loss_at_100) + " vs " + fmt("%.2e", i.loss_at_100) + "]";
  }
  return {sum_b < sum_i && strict >= 4, "mean grad distance at iter 100: bicubic " + fmt("%.3e", sum_b / 5) +
                                             ", identity " + fmt("%.3e", sum_i / 5) + "; bicubic lower in " +
                                             std::to_string(strict) + "/5;" + detail};
}

Outcome a10() {
  bool pass = true;
  std::string detail;
  for (const auto& [name, stage] :
       std::vector<std::pair<std::string, obf::Stage>>{{"qsgd3", obf::Qsgd{3}}, {"topk0.95", obf::TopK{0.95}}}) {
    obf::ObfuscationSpec spec;
    spec.stages.push_back(stage);
    int ok = 0;
    detail += " " + name + ":";
    for (std::uint64_t s = 0; s < 5; ++s) {
      const auto r = desk_attack(s, attack::ProjectionKind::identity, 200, spec);
      ok += r.final_psnr - r.initial_psnr >= 3.0;
      detail += " +" + fmt("%.1f", r.final_psnr - r.initial_psnr);
    }
    detail += " (" + std::to_string(ok) + "/5)";
    pass = pass && ok >= 3;
  }
  return {pass, "PSNR gain over init in dB;" + detail};
}

// ---------------------------------------------------------------- A8/A9/A12

// Non-increasing, allowing one adjacent rise of at most 0.5 dB.
bool non_increasing(const std::vector<double>& v) {
  int inversions = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1]) {
      if (v[i] - v[i - 1] > 0.5) return false;
      ++inversions;
    }
  }
  return inversions <= 1;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ", ") + fmt("%.2f", x);
  return s;
}

harness::ExperimentConfig a8_config() {
  harness::ExperimentConfig cfg;
  cfg.fed.local.tau = 1;
  cfg.attack.projection = {attack::ProjectionKind::identity, 1, ""};
  cfg.attack.iterations = 200;
  cfg.sweep.batch = {1, 2, 4, 8};
  cfg.sweep.repeats = 3;
  cfg.seed = 8;
  return cfg;
}

const fs::path kWork = fs::temp_directory_path() / "gradlab_acceptance";

Outcome a8() {
  fs::remove_all(kWork / "a8_first");
  const auto r = harness::run_sweep(a8_config(), 1, kWork / "a8_first");
  std::vector<double> psnr;
  for (const auto& row : r.rows) psnr.push_back(row.psnr_mean);
  return {non_increasing(psnr), "mean PSNR for batch 1,2,4,8 over 3 seeds: " + join(psnr)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome a12() {
  const auto first = kWork / "a8_first";
  if (!fs::exists(first / "sweep.csv")) harness::run_sweep(a8_config(), 1, first);
  fs::remove_all(kWork / "a8_second");
  harness::run_sweep(a8_config(), 2, kWork / "a8_second");
  std::size_t files = 0, mismatches = 0, images = 0;
  std::set<std::string> seen;
  for (const auto& e : fs::recursive_directory_iterator(first)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), first);
    seen.insert(rel.string());
    ++files;
    images += e.path().extension() == ".pgm";
    if (slurp(e.path()) != slurp(kWork / "a8_second" / rel)) ++mismatches;
  }
  std::size_t second = 0;
  for (const auto& e : fs::recursive_directory_iterator(kWork / "a8_second")) second += e.is_regular_file();
  return {mismatches == 0 && second == files && files > 0,
          std::to_string(files) + " files (" + std::to_string(images) + " images) compared across two sweeps (1 and 2 threads), mismatches " +
              std::to_string(mismatches)};
}

Outcome a9() {
  harness::ExperimentConfig cfg;
  cfg.dataset.count = 2500;
  cfg.attack.projection = {attack::ProjectionKind::identity, 1, ""};
  cfg.attack.iterations = 200;
  cfg.victim.examples = 1;
  cfg.seed = 1;
  const std::vector<std::size_t> rounds{1, 10, 30};
  const models::Model model(cfg.model);
  const auto data = harness::load_datasets(cfg.dataset, cfg.model);
  const auto level = spdlog::get_level();
  spdlog::set_level(spdlog::level::warn);
  const auto fedstate = harness::prepare_federation(cfg, model, data, rounds);
  spdlog::set_level(level);
  const auto projection = attack::build_projection(cfg.attack.projection, 1, 28, 28);
  std::vector<double> psnr, norms;
  for (std::size_t k : rounds) {
    double p = 0.0, n = 0.0;
    for (std::size_t r = 0; r < 5; ++r) {
      const std::size_t client = harness::pick_victim(fedstate.partition, r, 1);
      const auto shard = data.train.subset(fedstate.partition.assignment[client]);
      auto [cap, truth] = fed::capture_victim(model, fedstate.at(k), k, shard, {client, 1}, cfg.fed.local,
                                              cfg.obfuscation, derive_seed(cfg.seed, "capture", r));
      auto ac = cfg.attack;
      ac.seed = derive_seed(cfg.seed, "attack", r);
      const auto run = harness::run_attack(ac, projection, cap, &truth);
      p += run.report->psnr.mean;
      n += cap.gradient.norm();
    }
    psnr.push_back(p / 5);
    norms.push_back(n / 5);
  }
  const bool norms_down = norms[0] > norms[1] && norms[1] > norms[2];
  std::string ns;
  for (double x : norms) ns += (ns.empty() ? "" : ", ") + fmt("%.4f", x);
  return {non_increasing(psnr) && norms_down,
          "rounds 1,10,30: mean PSNR " + join(psnr) + "; mean delta norm " + ns};
}

// ---------------------------------------------------------------- A11

Outcome a11() {
  std::vector<std::string> failed;
  const std::vector<double> zero(16, 0.0), tenth(16, 0.1);
  if (metrics::mse(zero, zero) != 0.0) failed.push_back("mse identical");
  if (std::abs(metrics::mse(zero, tenth) - 0.01) > 1e-17) failed.push_back("mse 0.01");
  if (std::abs(metrics::psnr_from_mse(0.01) - 20.0) > 1e-12) failed.push_back("psnr 20 dB");
  if (!std::isinf(metrics::psnr(zero, zero))) failed.push_back("psnr inf");
  const std::vector<double> half(64, 0.5), quarter(64, 0.25);
  const double c1 = metrics::kSsimC1, c2 = metrics::kSsimC2;
  const double closed = (2 * 0.125 + c1) * c2 / ((0.3125 + c1) * c2);
  if (std::abs(metrics::ssim(half, quarter, 1) - closed) > 1e-6) failed.push_back("ssim closed form");
  if (metrics::ssim(half, half, 1) != 1.0) failed.push_back("ssim identical");
  Rng rng(11);
  std::vector<double> x(256), y(256);
  double noise_psnr = 0.0;
  for (int pair = 0; pair < 20; ++pair) {
    for (auto& v : x) v = rng.uniform01();
    for (auto& v : y) v = rng.uniform01();
    noise_psnr += metrics::psnr(x, y) / 20.0;
    if (metrics::ssim(x, y, 1) != metrics::ssim(y, x, 1)) failed.push_back("ssim symmetry");
  }
  if (!(noise_psnr < 10.0)) failed.push_back("random-noise PSNR regime");
  const std::vector<std::string> a{"bird", "Robin", " tree", "sky"}, b{"robin", "bird", "tree ", "grass"};
  const std::vector<std::string> c{"x", "y"}, d{"z"};
  if (metrics::jaccard(a, b) != 0.6) failed.push_back("jaccard 0.6");
  if (metrics::jaccard(a, a) != 1.0) failed.push_back("jaccard identical");
  if (metrics::jaccard(c, d) != 0.0) failed.push_back("jaccard disjoint");
  if (metrics::jaccard({}, {}) != 1.0) failed.push_back("jaccard empty");
  std::string detail = failed.empty() ? "all metric examples hold; ssim closed form " + fmt("%.6f", closed) +
                                            ", noise PSNR " + fmt("%.2f", noise_psnr) + " dB"
                                      : "failed:";
  for (const auto& f : failed) detail += " " + f + ";";
  return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"A1", a1}, {"A2", a2}, {"A3", a3},  {"A4", a4},   {"A5", a5},   {"A6", a6},
      {"A7", a7}, {"A8", a8}, {"A9", a9}, {"A10", a10}, {"A11", a11}, {"A12", a12}};
  std::set<std::string> only(argv + 1, argv + argc);
  fs::create_directories(kWork);
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::printf("%s %s %s (%.1fs)\n", name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
