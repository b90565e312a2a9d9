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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dcd/class_table.hpp"
#include "dcd/model.hpp"
#include "dcd/seg_mask.hpp"
#include "dcd/tensor.hpp"
#include "dcd/train.hpp"

namespace dcd {

namespace fs = std::filesystem;

// ------------------------------------------------------------------ tensors
//
// Record layout, all integers little-endian:
//   "DCDT" | version u8 (1) | dtype u8 (0 f32, 1 f64) | rank u8 |
//   rank x u32 extents | row-major payload

inline constexpr std::uint8_t kTensorFormatVersion = 1;

template <typename T>
void encode_tensor(std::string& out, const Tensor<T>& t);

// Decodes one record starting at `offset` and advances it past the record.
template <typename T>
Tensor<T> decode_tensor(std::string_view bytes, std::size_t& offset);

template <typename T>
void write_tensor(const fs::path& path, const Tensor<T>& t);

template <typename T>
Tensor<T> read_tensor(const fs::path& path);

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view bytes);

// ------------------------------------------------------------ configuration

struct RunConfig {
  ModelConfig model;
  TrainSettings train;

  bool operator==(const RunConfig&) const = default;
};

// "desk" is the default; "full" switches to full-resolution values.
RunConfig preset_config(std::string_view name);

// `key = value` lines, `#` starts a comment. Throws ParseError with the
// offending line for unknown keys and malformed or out-of-range values.
RunConfig parse_config(std::string_view text);

// Every key, one per line; parse_config(render_config(c)) == c.
std::string render_config(const RunConfig& config);

RunConfig load_config(const fs::path& path);

// -------------------------------------------------------------- checkpoints
//
//   u32 count | count x (u32 name length | name | tensor record) |
//   u32 config length | rendered config

struct Checkpoint {
  RunConfig config;
  ParameterList<float> parameters;
};

void save_checkpoint(const fs::path& path, const RunConfig& config,
                     const ParameterList<float>& parameters);
Checkpoint load_checkpoint(const fs::path& path);

// Rebuilds the model a checkpoint describes. Throws ContractError naming
// the first parameter whose name or shape disagrees with the architecture.
DcdModel<float> model_from_checkpoint(const Checkpoint& ckpt);

// Throws ContractError listing the differing keys.
void require_same_model(const ModelConfig& expected, const ModelConfig& stored);

// ------------------------------------------------------------------- images

// Binary P5 with maxval 255, one byte per class index.
void write_mask(const fs::path& path, const SegMask& mask);
SegMask read_mask(const fs::path& path);

// Grey image [1 x H x W] or [H x W] in [0, 1], stored as 8-bit P5.
void write_image(const fs::path& path, const Tensor<float>& image);
// Returns [1 x H x W] scaled by 1 / maxval.
Tensor<float> read_image(const fs::path& path);

// Binary P6: (1 - alpha) grey + alpha class colour; background stays grey.
void write_overlay(const fs::path& path, const Tensor<float>& image, const SegMask& mask,
                   double alpha);

struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Rgb> pixels;
};

RgbImage read_ppm(const fs::path& path);

// ----------------------------------------------------------------- datasets
//
// <dir>/images/<name>.pgm paired with <dir>/masks/<name>.pgm.

void save_dataset(const fs::path& dir, const Dataset& data);
Dataset load_dataset(const fs::path& dir);

// Sorted file stems under <dir>/masks.
std::vector<std::string> dataset_names(const fs::path& dir);

}  // namespace dcd
