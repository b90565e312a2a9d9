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

#include "dcd/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "dcd/aspp.hpp"
#include "dcd/errors.hpp"
#include "dcd/gradcheck.hpp"
#include "dcd/io.hpp"
#include "dcd/loss.hpp"
#include "dcd/model.hpp"
#include "dcd/train.hpp"

namespace dcd {
namespace {

// A data directory either holds images/ and masks/ directly or a split
// subdirectory that does.
fs::path resolve_split(const fs::path& root, const char* split) {
  if (fs::is_directory(root / "masks")) return root;
  if (fs::is_directory(root / split / "masks")) return root / split;
  throw ContractError("no masks/ directory under " + root.string() + " or " +
                      (root / split).string());
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
};

struct EvalArgs {
  std::string checkpoint;
  std::string pred;
  std::string data;
  std::string config;
  std::size_t batch = 8;
};

struct PredictArgs {
  std::string checkpoint;
  std::string image;
  std::string mask_out;
  std::string overlay_out;
  std::string config;
  double alpha = 0.5;
};

struct SynthArgs {
  std::string out;
  std::size_t train = 400;
  std::size_t val = 50;
  std::size_t size = 64;
  std::size_t structures = 4;
};

int cmd_train(const TrainArgs& a, std::optional<std::uint64_t> seed, std::ostream& out) {
  RunConfig config = a.config.empty() ? RunConfig{} : load_config(a.config);
  if (seed) config.train.seed = *seed;
  const fs::path root(a.data);
  const Dataset train_set = load_dataset(resolve_split(root, "train"));
  Dataset val_set;
  if (fs::is_directory(root / "val" / "masks")) val_set = load_dataset(root / "val");
  for (const Sample& s : train_set) {
    if (s.image.dim(0) != config.model.in_channels || s.mask.height != config.model.input_size ||
        s.mask.width != config.model.input_size) {
      throw ContractError("train: sample extent " + shape_str(s.image.shape()) +
                          " does not match input_size " + std::to_string(config.model.input_size) +
                          " with " + std::to_string(config.model.in_channels) + " channel(s)");
    }
  }

  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_file(dir / "config.txt", render_config(config));
  std::ofstream log(dir / "train.log", std::ios::trunc);
  log << kLogHeader << '\n';
  out << kLogHeader << '\n';

  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochLog& e) {
    const std::string line = format_log_line(e);
    log << line << '\n' << std::flush;
    out << line << '\n' << std::flush;
  };
  hooks.on_best = [&](const DcdModel<float>& model, const EpochLog&) {
    save_checkpoint(dir / "best.dcdt", config, model.parameters());
  };
  DcdModel<float> model = make_model<float>(config.model, config.train.seed);
  TrainResult result = train(std::move(model), config.train, train_set, val_set, hooks);
  save_checkpoint(dir / "final.dcdt", config, result.state.model.parameters());
  char line[160];
  std::snprintf(line, sizeof line, "best val mIoU %.4f at epoch %zu after %llu steps\n",
                result.best_val_miou, result.best_epoch,
                static_cast<unsigned long long>(result.state.step));
  out << line;
  return 0;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const fs::path data = resolve_split(a.data, "val");
  ConfusionAccumulator acc;
  if (!a.pred.empty()) {
    for (const std::string& name : dataset_names(data)) {
      acc.add(read_mask(fs::path(a.pred) / name), read_mask(data / "masks" / name));
    }
  } else {
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    if (!a.config.empty()) require_same_model(load_config(a.config).model, ckpt.config.model);
    const DcdModel<float> model = model_from_checkpoint(ckpt);
    acc = evaluate(model, load_dataset(data), a.batch);
  }
  out << iou_report(acc);
  return 0;
}

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  if (!a.config.empty()) require_same_model(load_config(a.config).model, ckpt.config.model);
  const DcdModel<float> model = model_from_checkpoint(ckpt);
  const Tensor<float> image = read_image(a.image);
  if (image.dim(0) != model.config.in_channels) {
    throw ContractError("predict: model expects " + std::to_string(model.config.in_channels) +
                        " channel(s)");
  }
  const Tensor<float> batch = image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)});
  const SegMask mask = predict(model, batch).at(0);
  if (!a.mask_out.empty()) write_mask(a.mask_out, mask);
  if (!a.overlay_out.empty()) write_overlay(a.overlay_out, image, mask, a.alpha);
  std::vector<std::size_t> counts(kMaxClassIndex + 1, 0);
  for (std::uint8_t v : mask.labels) ++counts[v];
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) continue;
    const auto info = class_info(static_cast<std::uint8_t>(c));
    out << (info ? std::string(info->abbreviation) : std::string("bg")) << ' ' << counts[c] << '\n';
  }
  return 0;
}

int cmd_rf(const std::vector<std::size_t>& rates, std::size_t kernel, std::ostream& out) {
  std::vector<KernelTap> chain;
  char line[128];
  std::snprintf(line, sizeof line, "%-6s %-6s %-10s %s\n", "rate", "kernel", "branch_rf",
                "chained_rf");
  out << line;
  for (std::size_t r : rates) {
    chain.push_back({kernel, r});
    const std::size_t branch = receptive_field({KernelTap{kernel, r}});
    std::snprintf(line, sizeof line, "%-6zu %-6zu %-10zu %zu\n", r, kernel, branch,
                  receptive_field(chain));
    out << line;
  }
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::ostream& out) {
  bool ok = true;
  for (const GradSuiteCase& c : run_gradcheck_suite(seed)) {
    char line[256];
    std::snprintf(line, sizeof line, "%-4s %-36s max_rel=%.3e coords=%zu\n",
                  c.passed ? "ok" : "FAIL", c.name.c_str(), c.result.max_rel_error,
                  c.result.coords_checked);
    out << line;
    if (!c.passed) out << "     worst: " << c.result.worst << '\n';
    ok = ok && c.passed;
  }
  return ok ? 0 : 1;
}

int cmd_synth(const SynthArgs& a, std::uint64_t seed, std::ostream& out) {
  const ToySplit split = make_toy_split(seed, a.train, a.val, a.size, a.structures);
  const fs::path root(a.out);
  save_dataset(root / "train", split.train);
  save_dataset(root / "val", split.val);
  out << "wrote " << a.train << " train and " << a.val << " val scenes to " << root.string()
      << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dense-ASPP + CBAM segmentation toolkit", "dcd"};
  app.require_subcommand(1);
  std::uint64_t seed = 42;
  CLI::Option* seed_opt =
      app.add_option("--seed", seed, "seed for every random draw")->capture_default_str();

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoints");
  train_cmd->add_option("--config", ta.config, "key = value configuration file");
  train_cmd->add_option("--data", ta.data, "dataset root with train/ and val/")->required();
  train_cmd->add_option("--out", ta.out, "output directory")->required();
  CLI::Option* train_seed = train_cmd->add_option("--seed", seed, "overrides the config seed");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "per-structure IoU report");
  auto* ckpt_opt = eval_cmd->add_option("--checkpoint", ea.checkpoint, "model checkpoint");
  auto* pred_opt = eval_cmd->add_option("--pred", ea.pred, "directory of predicted masks");
  ckpt_opt->excludes(pred_opt);
  eval_cmd->add_option("--data", ea.data, "dataset directory")->required();
  eval_cmd->add_option("--config", ea.config, "expected model configuration");
  eval_cmd->add_option("--batch", ea.batch, "inference batch size")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", seed);

  PredictArgs pa;
  auto* predict_cmd = app.add_subcommand("predict", "segment one image");
  predict_cmd->add_option("--checkpoint", pa.checkpoint)->required();
  predict_cmd->add_option("--image", pa.image, "grey P5 image")->required();
  predict_cmd->add_option("--mask-out", pa.mask_out, "P5 class mask");
  predict_cmd->add_option("--overlay-out", pa.overlay_out, "P6 colour overlay");
  predict_cmd->add_option("--alpha", pa.alpha, "overlay opacity")->check(CLI::Range(0.0, 1.0));
  predict_cmd->add_option("--config", pa.config, "expected model configuration");
  predict_cmd->add_option("--seed", seed);

  std::vector<std::size_t> rates = kDenseAsppRates;
  std::size_t kernel = 3;
  auto* rf_cmd = app.add_subcommand("rf", "receptive fields of dilated branches");
  rf_cmd->add_option("--rates", rates, "comma-separated dilation rates")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  rf_cmd->add_option("--kernel", kernel, "odd kernel size");
  rf_cmd->add_option("--seed", seed);

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  grad_cmd->add_option("--seed", seed);

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset");
  synth_cmd->add_option("--out", sa.out, "dataset root")->required();
  synth_cmd->add_option("--train", sa.train, "training scenes");
  synth_cmd->add_option("--val", sa.val, "validation scenes");
  synth_cmd->add_option("--size", sa.size, "image side");
  synth_cmd->add_option("--structures", sa.structures, "structures per scene");
  synth_cmd->add_option("--seed", seed);

  std::vector<const char*> argv{"dcd"};
  for (const std::string& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const CLI::App* active = &app;
    for (CLI::App* sub : app.get_subcommands()) active = sub;
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      out << active->help();
      return 0;
    }
    err << "error: " << e.what() << "\n\n" << active->help();
    return 2;
  }

  const bool seed_given = seed_opt->count() > 0 || train_seed->count() > 0;
  try {
    if (*train_cmd) return cmd_train(ta, seed_given ? std::optional(seed) : std::nullopt, out);
    if (*eval_cmd) {
      if (ea.checkpoint.empty() && ea.pred.empty()) {
        throw ContractError("eval: need --checkpoint or --pred");
      }
      return cmd_eval(ea, out);
    }
    if (*predict_cmd) return cmd_predict(pa, out);
    if (*rf_cmd) return cmd_rf(rates, kernel, out);
    if (*grad_cmd) return cmd_gradcheck(seed, out);
    if (*synth_cmd) return cmd_synth(sa, seed, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace dcd
