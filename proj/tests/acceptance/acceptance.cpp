/*
 * Copyright 2026 The DCD Authors.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. `--skip-ablation` drops the multi-seed comparison that
// accompanies criterion 7.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dcd/aspp.hpp"
#include "dcd/cbam.hpp"
#include "dcd/cli.hpp"
#include "dcd/gradcheck.hpp"
#include "dcd/io.hpp"
#include "dcd/loss.hpp"
#include "dcd/model.hpp"
#include "dcd/ops.hpp"
#include "dcd/train.hpp"

namespace fs = std::filesystem;
using namespace dcd;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

template <typename T>
bool bit_equal(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(T)) == 0;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dcd_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ------------------------------------------------------------ criterion 1

Outcome receptive_fields() {
  Outcome o{true, ""};
  const std::size_t expected[] = {13, 25, 37};
  const std::size_t rates[] = {6, 12, 18};
  for (int i = 0; i < 3; ++i) {
    const std::size_t rf = receptive_field({KernelTap{3, rates[i]}});
    o.pass = o.pass && rf == expected[i];
    o.detail += fmt("d=%zu->%zu ", rates[i], rf);
  }
  const std::size_t chained = receptive_field({KernelTap{3, 6}, KernelTap{3, 12}});
  o.pass = o.pass && chained == 37;
  o.detail += fmt("chain 6->12=%zu", chained);

  // The command surface reports the same numbers.
  std::ostringstream out;
  std::ostringstream err;
  const int status = run_cli({"rf", "--rates", "6,12,18"}, out, err);
  std::istringstream rows(out.str());
  std::string header;
  std::getline(rows, header);
  std::vector<std::size_t> branch;
  std::vector<std::size_t> chain;
  std::size_t r, k, b, c;
  while (rows >> r >> k >> b >> c) {
    branch.push_back(b);
    chain.push_back(c);
  }
  const bool cli_ok = status == 0 && branch == std::vector<std::size_t>{13, 25, 37} &&
                      chain.size() == 3 && chain[1] == 37;
  o.pass = o.pass && cli_ok;
  o.detail += cli_ok ? "; cli rf agrees" : "; cli rf disagrees";
  return o;
}

// ------------------------------------------------------------ criterion 2

Outcome empirical_receptive_field() {
  Rng rng(2024);
  std::size_t agree = 0;
  std::string failures;
  const std::size_t probes = 20;
  for (std::size_t p = 0; p < probes; ++p) {
    AsppSpec spec;
    spec.in_channels = 2;
    spec.inter = 2;
    spec.growth = 2;
    spec.out_channels = 2;
    spec.rates.clear();
    const std::size_t depth = 1 + rng.below(3);
    for (std::size_t i = 0; i < depth; ++i) spec.rates.push_back(1 + rng.below(4));
    DenseAsppBlock<double> block = make_dense_aspp<double>(rng, spec);
    // Strictly positive taps and inputs keep every ReLU open, so each tap
    // inside the field carries signal and none outside can.
    ParameterList<double> params;
    block.collect("aspp", params);
    for (auto& prm : params) {
      const bool is_bias = prm.name.size() >= 4 && prm.name.compare(prm.name.size() - 4, 4, "bias") == 0;
      for (double& v : prm.tensor.mutable_data()) v = is_bias ? 0.0 : rng.uniform(0.1, 1.0);
    }
    const std::size_t size = 40;
    Tensor<double> x({1, 2, size, size});
    for (double& v : x.mutable_data()) v = rng.uniform(0.5, 1.5);

    const std::size_t rf = dense_chain_receptive_field(spec.rates);
    const std::size_t radius = (rf - 1) / 2;
    const std::size_t cy = 13 + rng.below(14);
    const std::size_t cx = 13 + rng.below(14);
    auto probe = [&](const Tensor<double>& input) {
      NoGradScope<double> no_grad;
      return dense_aspp_forward(block, input).at(0, 0, cy, cx);
    };
    const double base = probe(x);

    // Just outside the field: one pixel beyond the radius on a random side.
    Tensor<double> outside = x.clone();
    const int side = static_cast<int>(rng.below(4));
    std::size_t oy = cy;
    std::size_t ox = cx;
    if (side == 0) oy = cy + radius + 1;
    if (side == 1) oy = cy - radius - 1;
    if (side == 2) ox = cx + radius + 1;
    if (side == 3) ox = cx - radius - 1;
    outside.mutable_data()[(0 * size + oy) * size + ox] += 10.0;
    const double after_outside = probe(outside);

    // The field corner is reachable, so the field is not overstated.
    Tensor<double> corner = x.clone();
    corner.mutable_data()[(1 * size + cy + radius) * size + cx + radius] += 10.0;
    const double after_corner = probe(corner);

    const bool ok = std::memcmp(&base, &after_outside, sizeof(double)) == 0 && after_corner != base;
    if (ok) {
      ++agree;
    } else {
      failures += fmt(" probe %zu (rf %zu)", p, rf);
    }
  }
  return {agree == probes, fmt("%zu/%zu probes bit-identical outside the field and sensitive at its corner%s",
                               agree, probes, failures.c_str())};
}

// ------------------------------------------------------------ criterion 3

Outcome gradient_suite() {
  const auto cases = run_gradcheck_suite(42);
  double worst = 0.0;
  std::string worst_name;
  std::size_t passed = 0;
  std::string failed;
  for (const auto& c : cases) {
    if (c.passed) ++passed;
    else failed += " " + c.name;
    if (c.result.max_rel_error >= worst) {
      worst = c.result.max_rel_error;
      worst_name = c.name;
    }
  }
  return {passed == cases.size(),
          fmt("%zu/%zu cases, worst %.2e (%s)%s", passed, cases.size(), worst, worst_name.c_str(),
              failed.empty() ? "" : (" failing:" + failed).c_str())};
}

// ------------------------------------------------------------ criterion 4

Outcome attention_properties() {
  Rng rng(4);
  std::size_t strict = 0;
  std::size_t chan_perm = 0;
  std::size_t spat_perm = 0;
  std::size_t zero_ok = 0;
  double zero_err = 0.0;
  const std::size_t trials = 100;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t channels = std::size_t{4} << rng.below(3);
    const std::size_t h = 3 + rng.below(6);
    const std::size_t w = 3 + rng.below(6);
    const Cbam<float> cbam = make_cbam<float>(rng, channels, 2 + 2 * rng.below(2));
    // Every tenth trial drives the gates into saturation.
    const double scale = t % 10 == 0 ? 1e4 : 2.0;
    Tensor<float> f({2, channels, h, w});
    for (float& v : f.mutable_data()) v = static_cast<float>(rng.uniform(-scale, scale));

    AttentionWeights<float> weights;
    cbam_forward(cbam, f, &weights);
    bool inside = true;
    for (float v : weights.m_c.data()) inside = inside && v > 0.0f && v < 1.0f;
    for (float v : weights.m_s.data()) inside = inside && v > 0.0f && v < 1.0f;
    strict += inside;

    // Same spatial permutation applied to every channel.
    std::vector<std::size_t> perm(h * w);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    Tensor<float> fs(f.shape());
    for (std::size_t nc = 0; nc < 2 * channels; ++nc) {
      for (std::size_t i = 0; i < h * w; ++i) {
        fs.mutable_data()[nc * h * w + perm[i]] = f.data()[nc * h * w + i];
      }
    }
    const auto ca = channel_attention(cbam.channel, f);
    const auto ca_perm = channel_attention(cbam.channel, fs);
    spat_perm += bit_equal(ca.m_c, ca_perm.m_c);

    // Channel permutation of the spatial-attention input.
    std::vector<std::size_t> cperm(channels);
    std::iota(cperm.begin(), cperm.end(), std::size_t{0});
    for (std::size_t i = cperm.size(); i > 1; --i) std::swap(cperm[i - 1], cperm[rng.below(i)]);
    Tensor<float> fc(ca.f_prime.shape());
    for (std::size_t n = 0; n < 2; ++n) {
      for (std::size_t c = 0; c < channels; ++c) {
        std::copy_n(ca.f_prime.data().begin() + static_cast<std::ptrdiff_t>((n * channels + c) * h * w), h * w,
                    fc.mutable_data().begin() + static_cast<std::ptrdiff_t>((n * channels + cperm[c]) * h * w));
      }
    }
    const auto sa = spatial_attention(cbam.spatial, ca.f_prime);
    const auto sa_perm = spatial_attention(cbam.spatial, fc);
    chan_perm += bit_equal(sa.m_s, sa_perm.m_s);

    // All-zero parameters: both gates are sigmoid(0) = 1/2.
    const Cbam<float> zero = make_cbam_zeros<float>(channels, 2);
    Tensor<float> g({1, channels, h, w});
    for (float& v : g.mutable_data()) v = static_cast<float>(rng.uniform(-3.0, 3.0));
    const Tensor<float> y = cbam_forward(zero, g);
    double err = 0.0;
    for (std::size_t i = 0; i < g.numel(); ++i) {
      err = std::max(err, std::abs(static_cast<double>(y.data()[i]) - 0.25 * g.data()[i]));
    }
    zero_err = std::max(zero_err, err);
    zero_ok += err <= 1e-6;
  }
  const bool pass = strict == trials && chan_perm == trials && spat_perm == trials && zero_ok == trials;
  return {pass, fmt("gates in (0,1): %zu/%zu; m_c spatial-perm exact: %zu/%zu; m_s channel-perm exact: "
                    "%zu/%zu; zero CBAM = 0.25x: %zu/%zu (max err %.1e)",
                    strict, trials, spat_perm, trials, chan_perm, trials, zero_ok, trials, zero_err)};
}

// ------------------------------------------------------------ criterion 5

SegMask random_mask(Rng& rng, std::size_t h, std::size_t w, std::size_t classes) {
  SegMask m(h, w);
  for (auto& v : m.labels) v = static_cast<std::uint8_t>(rng.below(classes));
  return m;
}

Tensor<double> one_hot_logits(const SegMask& m, double gain) {
  Tensor<double> t({1, 14, m.height, m.width}, 0.0);
  const std::size_t plane = m.height * m.width;
  for (std::size_t i = 0; i < plane; ++i) t.mutable_data()[m.labels[i] * plane + i] = gain;
  return t;
}

Outcome loss_identities() {
  Rng rng(5);
  std::string detail;
  bool pass = true;

  // CE at uniform logits.
  const SegMask target = random_mask(rng, 8, 8, 14);
  const std::vector<SegMask> targets{target};
  const double ce = ce_loss(Tensor<double>({1, 14, 8, 8}, 0.0), std::span<const SegMask>(targets)).item();
  const double ce_err = std::abs(ce - std::log(14.0));
  pass = pass && ce_err <= 1e-9;
  detail += fmt("CE(uniform)-ln14=%.1e; ", ce_err);

  // Dice at identical and disjoint hard masks, via saturated logits.
  SegMask a(8, 8);
  SegMask b(8, 8);
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    a.labels[i] = static_cast<std::uint8_t>(1 + i % 3);
    b.labels[i] = static_cast<std::uint8_t>(4 + i % 3);
  }
  const std::vector<SegMask> ta{a};
  const double dice_same = dice_loss(one_hot_logits(a, 60.0), std::span<const SegMask>(ta)).item();
  const double dice_disjoint = dice_loss(one_hot_logits(b, 60.0), std::span<const SegMask>(ta)).item();
  pass = pass && std::abs(dice_same) <= 2e-6 && std::abs(dice_disjoint - 1.0) <= 2e-6;
  detail += fmt("Dice same=%.1e disjoint=%.7f; ", dice_same, dice_disjoint);

  // DSC = 2 IoU / (1 + IoU) on hard masks.
  double dsc_err = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t h = 1 + rng.below(16);
    const std::size_t w = 1 + rng.below(16);
    const std::size_t classes = 2 + rng.below(13);
    ConfusionAccumulator acc;
    acc.add(random_mask(rng, h, w, classes), random_mask(rng, h, w, classes));
    for (std::size_t c = 0; c < 14; ++c) {
      const auto iou = acc.iou(c);
      const auto dice = acc.dice(c);
      if (iou.has_value() != dice.has_value()) dsc_err = INFINITY;
      if (iou) dsc_err = std::max(dsc_err, std::abs(*dice - 2.0 * *iou / (1.0 + *iou)));
    }
  }
  pass = pass && dsc_err <= 1e-12;
  detail += fmt("max|DSC-2IoU/(1+IoU)|=%.1e; ", dsc_err);

  // Accumulated mIoU against set arithmetic, exact.
  std::size_t exact = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t count = 1 + rng.below(3);
    const std::size_t h = 1 + rng.below(16);
    const std::size_t w = 1 + rng.below(16);
    const std::size_t classes = 2 + rng.below(13);
    ConfusionAccumulator acc;
    std::vector<std::set<std::size_t>> truth(14);
    std::vector<std::set<std::size_t>> pred(14);
    for (std::size_t k = 0; k < count; ++k) {
      const SegMask p = random_mask(rng, h, w, classes);
      const SegMask g = random_mask(rng, h, w, classes);
      acc.add(p, g);
      for (std::size_t i = 0; i < p.labels.size(); ++i) {
        pred[p.labels[i]].insert(k * 1024 + i);
        truth[g.labels[i]].insert(k * 1024 + i);
      }
    }
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 1; c < 14; ++c) {
      std::vector<std::size_t> inter;
      std::vector<std::size_t> uni;
      std::set_intersection(truth[c].begin(), truth[c].end(), pred[c].begin(), pred[c].end(),
                            std::back_inserter(inter));
      std::set_union(truth[c].begin(), truth[c].end(), pred[c].begin(), pred[c].end(),
                     std::back_inserter(uni));
      if (uni.empty()) continue;
      sum += static_cast<double>(inter.size()) / static_cast<double>(uni.size());
      ++present;
    }
    const auto miou = acc.miou();
    if (present == 0) {
      exact += !miou.has_value();
    } else {
      exact += miou.has_value() && *miou == sum / static_cast<double>(present);
    }
  }
  pass = pass && exact == 1000;
  detail += fmt("mIoU exact vs sets %zu/1000", exact);
  return {pass, detail};
}

// ------------------------------------------------------------ criterion 6

Outcome schedule_endpoints() {
  Rng rng(6);
  bool pass = true;
  std::string detail;
  const Schedule full_run{5e-6, 5e-4, 57600};
  const double start = cosine_lr(full_run, 0);
  const double end = cosine_lr(full_run, full_run.total_steps);
  pass = pass && start == 5e-4 && end == 5e-6;
  detail += fmt("lr(0)=%.17g lr(T)=%.17g; ", start, end);

  std::size_t violations = 0;
  for (std::uint64_t total : {600ull, 57600ull, 1000003ull}) {
    const Schedule s{5e-6, 5e-4, total};
    std::vector<std::uint64_t> ts{0, total};
    while (ts.size() < 10000) ts.push_back(rng.below(total + 1));
    std::sort(ts.begin(), ts.end());
    double prev = cosine_lr(s, ts[0]);
    for (std::uint64_t t : ts) {
      const double lr = cosine_lr(s, t);
      if (lr > prev || lr < s.lr_min || lr > s.lr_max) ++violations;
      prev = lr;
    }
  }
  pass = pass && violations == 0;
  detail += fmt("monotonicity violations over 3x10000 points: %zu", violations);
  return {pass, detail};
}

// ------------------------------------------------------------ criterion 7

ModelConfig toy_model(bool full) {
  ModelConfig c;
  c.input_size = 64;
  if (!full) {
    c.attention = false;
    c.aspp_mode = AsppMode::kPlain;
    c.dilation_rates = kPlainAsppRates;
  }
  return c;
}

double toy_run(std::uint64_t seed, bool full) {
  const ToySplit split = make_toy_split(seed, 400, 50, 64, 4);
  TrainSettings settings;
  settings.batch_size = 4;
  settings.epochs = 6;
  settings.max_steps = 600;
  settings.seed = seed;
  const TrainResult r = train(make_model<float>(toy_model(full), seed), settings, split.train, split.val);
  return r.best_val_miou;
}

Outcome toy_convergence(bool ablation) {
  const auto start = Clock::now();
  const double miou = toy_run(42, true);
  const double minutes = seconds_since(start) / 60.0;
  const bool pass = miou >= 0.90 && minutes <= 15.0;
  std::string detail = fmt("val mIoU %.4f after 600 steps in %.1f min", miou, minutes);
  if (ablation) {
    double full = miou;
    double plain = 0.0;
    for (std::uint64_t seed : {43ull, 44ull}) full += toy_run(seed, true);
    for (std::uint64_t seed : {42ull, 43ull, 44ull}) plain += toy_run(seed, false);
    full /= 3.0;
    plain /= 3.0;
    detail += fmt("; soft ablation over 3 seeds: dense+CBAM %.4f vs plain %.4f (%s)", full, plain,
                  full >= plain - 0.02 ? "holds within 0.02" : "does not hold");
  }
  return {pass, detail};
}

// ------------------------------------------------------------ criterion 8

Outcome determinism_and_round_trips() {
  const fs::path dir = scratch_dir("c8");
  Rng rng(8);
  bool pass = true;
  std::string detail;

  // Fixed-seed training twice, checkpoints compared byte for byte.
  RunConfig config;
  config.model.input_size = 32;
  config.train.batch_size = 4;
  config.train.epochs = 2;
  config.train.seed = 9;
  const ToySplit split = make_toy_split(9, 12, 4, 32, 3);
  for (int run = 0; run < 2; ++run) {
    TrainResult r = train(make_model<float>(config.model, config.train.seed), config.train, split.train,
                          split.val);
    save_checkpoint(dir / ("run" + std::to_string(run) + ".dcdt"), config, r.state.model.parameters());
  }
  const bool same_ckpt = read_file(dir / "run0.dcdt") == read_file(dir / "run1.dcdt");
  pass = pass && same_ckpt;
  detail += same_ckpt ? "training checkpoints identical; " : "training checkpoints DIFFER; ";

  // Checkpoint load/save is the identity on bytes and values.
  const Checkpoint ck = load_checkpoint(dir / "run0.dcdt");
  save_checkpoint(dir / "again.dcdt", ck.config, ck.parameters);
  const bool ckpt_rt = read_file(dir / "again.dcdt") == read_file(dir / "run0.dcdt") && ck.config == config;
  pass = pass && ckpt_rt;
  detail += ckpt_rt ? "checkpoint round-trip exact; " : "checkpoint round-trip BROKEN; ";

  // Tensors of both widths, including rank 0 and non-finite payloads.
  std::size_t tensor_ok = 0;
  const std::size_t tensor_cases = 100;
  for (std::size_t t = 0; t < tensor_cases; ++t) {
    Shape shape(rng.below(5));
    for (auto& d : shape) d = 1 + rng.below(5);
    Tensor<float> f(shape);
    Tensor<double> g(shape);
    for (std::size_t i = 0; i < f.numel(); ++i) {
      const std::uint64_t bits = rng.next_u64();
      std::uint32_t lo = static_cast<std::uint32_t>(bits);
      std::memcpy(&f.mutable_data()[i], &lo, sizeof lo);
      std::memcpy(&g.mutable_data()[i], &bits, sizeof bits);
    }
    write_tensor(dir / "f.dcdt", f);
    write_tensor(dir / "g.dcdt", g);
    tensor_ok += bit_equal(read_tensor<float>(dir / "f.dcdt"), f) && bit_equal(read_tensor<double>(dir / "g.dcdt"), g);
  }
  pass = pass && tensor_ok == tensor_cases;
  detail += fmt("tensors %zu/%zu; ", tensor_ok, tensor_cases);

  std::size_t mask_ok = 0;
  for (int t = 0; t < 50; ++t) {
    const SegMask m = random_mask(rng, 1 + rng.below(40), 1 + rng.below(40), 14);
    write_mask(dir / "m.pgm", m);
    mask_ok += read_mask(dir / "m.pgm") == m;
  }
  pass = pass && mask_ok == 50;
  detail += fmt("masks %zu/50; ", mask_ok);

  std::size_t config_ok = 0;
  for (int t = 0; t < 200; ++t) {
    RunConfig c;
    c.model.num_classes = 2 + rng.below(13);
    c.model.in_channels = 1 + rng.below(3);
    c.model.input_size = 16 * (1 + rng.below(8));
    for (auto& w : c.model.backbone_widths) w = 1 + rng.below(96);
    c.model.stage_depth = 1 + rng.below(3);
    c.model.attention = rng.below(2) == 1;
    c.model.cbam_reduction = 1;
    for (std::size_t r = 1; r <= c.model.backbone_widths[1]; ++r) {
      if (c.model.backbone_widths[1] % r == 0 && rng.below(3) == 0) c.model.cbam_reduction = r;
    }
    c.model.aspp_mode = rng.below(2) == 1 ? AsppMode::kPlain : AsppMode::kDense;
    c.model.dilation_rates.assign(1 + rng.below(5), 0);
    for (auto& r : c.model.dilation_rates) r = 1 + rng.below(24);
    c.model.aspp_inter = 1 + rng.below(200);
    c.model.aspp_growth = 1 + rng.below(100);
    c.model.aspp_out = 1 + rng.below(300);
    c.model.shallow_channels = 1 + rng.below(64);
    c.model.decoder_width = 1 + rng.below(128);
    c.train.batch_size = 1 + rng.below(16);
    c.train.epochs = 1 + rng.below(500);
    c.train.max_steps = rng.below(100000);
    c.train.lr_min = rng.uniform(0.0, 1e-3);
    c.train.lr_max = c.train.lr_min + rng.uniform(0.0, 1e-2);
    c.train.beta1 = rng.uniform(0.0, 0.999);
    c.train.beta2 = rng.uniform(0.0, 0.9999);
    c.train.adam_eps = rng.uniform(1e-12, 1e-6);
    c.train.seed = rng.next_u64();
    config_ok += parse_config(render_config(c)) == c;
  }
  pass = pass && config_ok == 200;
  detail += fmt("configs %zu/200", config_ok);
  fs::remove_all(dir);
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  bool ablation = true;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--skip-ablation") == 0) ablation = false;
  }
  struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "receptive-field exactness", receptive_fields},
      {2, "empirical receptive field", empirical_receptive_field},
      {3, "gradient suite (f64, rel err <= 1e-4)", gradient_suite},
      {4, "attention properties", attention_properties},
      {5, "loss and metric identities", loss_identities},
      {6, "schedule endpoints and monotonicity", schedule_endpoints},
      {7, "toy convergence (64x64, k=4, <=600 steps)", [ablation] { return toy_convergence(ablation); }},
      {8, "determinism and round-trips", determinism_and_round_trips},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(start);
    std::printf("%s criterion %d: %s: %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.title,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
