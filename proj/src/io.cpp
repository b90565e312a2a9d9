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

#include "dcd/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "dcd/errors.hpp"

namespace dcd {

// ---------------------------------------------------------------- raw bytes

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string() + " for reading");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

namespace {

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFFu));
  }
}

template <typename U>
U get_le(std::string_view bytes, std::size_t& offset, const char* what) {
  if (bytes.size() < offset + sizeof(U)) {
    throw FormatError(std::string("truncated ") + what, offset);
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  offset += sizeof(U);
  return value;
}

template <typename T>
using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

template <typename T>
constexpr std::uint8_t dtype_code() {
  return sizeof(T) == 4 ? 0 : 1;
}

}  // namespace

// ------------------------------------------------------------------ tensors

template <typename T>
void encode_tensor(std::string& out, const Tensor<T>& t) {
  if (t.rank() > 255) throw ContractError("encode_tensor: rank above 255");
  out.append("DCDT", 4);
  out.push_back(static_cast<char>(kTensorFormatVersion));
  out.push_back(static_cast<char>(dtype_code<T>()));
  out.push_back(static_cast<char>(t.rank()));
  for (std::size_t d : t.shape()) {
    if (d > 0xFFFFFFFFu) throw ContractError("encode_tensor: extent exceeds 32 bits");
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  out.reserve(out.size() + t.numel() * sizeof(T));
  for (T v : t.data()) put_le<Bits<T>>(out, std::bit_cast<Bits<T>>(v));
}

template <typename T>
Tensor<T> decode_tensor(std::string_view bytes, std::size_t& offset) {
  const std::size_t start = offset;
  if (bytes.size() < start + 7) throw FormatError("truncated DCDT header", start);
  if (bytes.substr(start, 4) != "DCDT") {
    throw FormatError("bad magic '" + std::string(bytes.substr(start, 4)) + "', expected 'DCDT'",
                      start);
  }
  const auto version = static_cast<std::uint8_t>(bytes[start + 4]);
  if (version != kTensorFormatVersion) {
    throw FormatError("unsupported DCDT version " + std::to_string(version), start + 4);
  }
  const auto dtype = static_cast<std::uint8_t>(bytes[start + 5]);
  if (dtype > 1) throw FormatError("unknown DCDT dtype " + std::to_string(dtype), start + 5);
  if (dtype != dtype_code<T>()) {
    throw FormatError(std::string("DCDT dtype is ") + (dtype == 0 ? "f32" : "f64") +
                          ", requested " + (dtype_code<T>() == 0 ? "f32" : "f64"),
                      start + 5);
  }
  const std::size_t rank = static_cast<std::uint8_t>(bytes[start + 6]);
  offset = start + 7;
  Shape shape(rank);
  for (std::size_t i = 0; i < rank; ++i) shape[i] = get_le<std::uint32_t>(bytes, offset, "DCDT extents");
  const std::size_t count = shape_numel(shape);
  if (bytes.size() - offset < count * sizeof(T)) {
    throw FormatError("truncated DCDT payload: need " + std::to_string(count * sizeof(T)) +
                          " bytes, have " + std::to_string(bytes.size() - offset),
                      offset);
  }
  std::vector<T> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = std::bit_cast<T>(get_le<Bits<T>>(bytes, offset, "DCDT payload"));
  }
  return Tensor<T>(std::move(shape), std::move(values));
}

template <typename T>
void write_tensor(const fs::path& path, const Tensor<T>& t) {
  std::string bytes;
  encode_tensor(bytes, t);
  write_file(path, bytes);
}

template <typename T>
Tensor<T> read_tensor(const fs::path& path) {
  const std::string bytes = read_file(path);
  std::size_t offset = 0;
  Tensor<T> t = decode_tensor<T>(bytes, offset);
  if (offset != bytes.size()) throw FormatError("trailing bytes after DCDT record", offset);
  return t;
}

template void encode_tensor<float>(std::string&, const Tensor<float>&);
template void encode_tensor<double>(std::string&, const Tensor<double>&);
template Tensor<float> decode_tensor<float>(std::string_view, std::size_t&);
template Tensor<double> decode_tensor<double>(std::string_view, std::size_t&);
template void write_tensor<float>(const fs::path&, const Tensor<float>&);
template void write_tensor<double>(const fs::path&, const Tensor<double>&);
template Tensor<float> read_tensor<float>(const fs::path&);
template Tensor<double> read_tensor<double>(const fs::path&);

// ------------------------------------------------------------ configuration

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::size_t parse_size(std::string_view v, const std::string& key, int line) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ParseError("'" + key + "' expects a non-negative integer, got '" + std::string(v) + "'",
                     line);
  }
  return out;
}

double parse_real(std::string_view v, const std::string& key, int line) {
  double out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ParseError("'" + key + "' expects a finite number, got '" + std::string(v) + "'", line);
  }
  return out;
}

std::vector<std::size_t> parse_list(std::string_view v, const std::string& key, int line) {
  std::vector<std::size_t> out;
  while (true) {
    const auto comma = v.find(',');
    out.push_back(parse_size(trim(v.substr(0, comma)), key, line));
    if (comma == std::string_view::npos) break;
    v = v.substr(comma + 1);
  }
  return out;
}

bool parse_bool(std::string_view v, const std::string& key, int line) {
  if (v == "on" || v == "true" || v == "yes" || v == "1") return true;
  if (v == "off" || v == "false" || v == "no" || v == "0") return false;
  throw ParseError("'" + key + "' expects on/off, got '" + std::string(v) + "'", line);
}

std::string join(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

std::string real_str(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void require(bool ok, const std::string& message, int line) {
  if (!ok) throw ParseError(message, line);
}

using Pairs = std::vector<std::pair<std::string, std::string>>;

Pairs model_pairs(const ModelConfig& m) {
  return {
      {"num_classes", std::to_string(m.num_classes)},
      {"in_channels", std::to_string(m.in_channels)},
      {"input_size", std::to_string(m.input_size)},
      {"backbone_widths", join(m.backbone_widths)},
      {"stage_depth", std::to_string(m.stage_depth)},
      {"attention", m.attention ? "on" : "off"},
      {"cbam_reduction", std::to_string(m.cbam_reduction)},
      {"aspp_mode", m.aspp_mode == AsppMode::kDense ? "dense" : "plain"},
      {"dilation_rates", join(m.dilation_rates)},
      {"aspp_inter", std::to_string(m.aspp_inter)},
      {"aspp_growth", std::to_string(m.aspp_growth)},
      {"aspp_out", std::to_string(m.aspp_out)},
      {"shallow_channels", std::to_string(m.shallow_channels)},
      {"decoder_width", std::to_string(m.decoder_width)},
  };
}

Pairs train_pairs(const TrainSettings& t) {
  return {
      {"batch_size", std::to_string(t.batch_size)},
      {"epochs", std::to_string(t.epochs)},
      {"max_steps", std::to_string(t.max_steps)},
      {"lr_min", real_str(t.lr_min)},
      {"lr_max", real_str(t.lr_max)},
      {"beta1", real_str(t.beta1)},
      {"beta2", real_str(t.beta2)},
      {"adam_eps", real_str(t.adam_eps)},
      {"seed", std::to_string(t.seed)},
  };
}

void apply(RunConfig& c, const std::string& key, std::string_view v, int line) {
  ModelConfig& m = c.model;
  TrainSettings& t = c.train;
  auto positive = [&](std::size_t x) {
    require(x > 0, "'" + key + "' must be >= 1", line);
    return x;
  };
  if (key == "num_classes") {
    m.num_classes = parse_size(v, key, line);
    require(m.num_classes >= 2 && m.num_classes <= kMaxClassIndex + 1u,
            "'num_classes' must lie in [2, 14]", line);
  } else if (key == "in_channels") {
    m.in_channels = positive(parse_size(v, key, line));
  } else if (key == "input_size") {
    m.input_size = positive(parse_size(v, key, line));
    require(m.input_size % kDeepStride == 0, "'input_size' must be a multiple of 16", line);
  } else if (key == "backbone_widths") {
    m.backbone_widths = parse_list(v, key, line);
    require(m.backbone_widths.size() == 4, "'backbone_widths' needs 4 values", line);
    for (std::size_t w : m.backbone_widths) positive(w);
  } else if (key == "stage_depth") {
    m.stage_depth = positive(parse_size(v, key, line));
  } else if (key == "attention") {
    m.attention = parse_bool(v, key, line);
  } else if (key == "cbam_reduction") {
    m.cbam_reduction = positive(parse_size(v, key, line));
  } else if (key == "aspp_mode") {
    if (v == "dense") {
      m.aspp_mode = AsppMode::kDense;
    } else if (v == "plain") {
      m.aspp_mode = AsppMode::kPlain;
    } else {
      throw ParseError("'aspp_mode' expects dense or plain, got '" + std::string(v) + "'", line);
    }
  } else if (key == "dilation_rates") {
    m.dilation_rates = parse_list(v, key, line);
    for (std::size_t r : m.dilation_rates) positive(r);
  } else if (key == "aspp_inter") {
    m.aspp_inter = positive(parse_size(v, key, line));
  } else if (key == "aspp_growth") {
    m.aspp_growth = positive(parse_size(v, key, line));
  } else if (key == "aspp_out") {
    m.aspp_out = positive(parse_size(v, key, line));
  } else if (key == "shallow_channels") {
    m.shallow_channels = positive(parse_size(v, key, line));
  } else if (key == "decoder_width") {
    m.decoder_width = positive(parse_size(v, key, line));
  } else if (key == "batch_size") {
    t.batch_size = positive(parse_size(v, key, line));
  } else if (key == "epochs") {
    t.epochs = positive(parse_size(v, key, line));
  } else if (key == "max_steps") {
    t.max_steps = parse_size(v, key, line);
  } else if (key == "lr_min") {
    t.lr_min = parse_real(v, key, line);
    require(t.lr_min >= 0, "'lr_min' must be >= 0", line);
  } else if (key == "lr_max") {
    t.lr_max = parse_real(v, key, line);
    require(t.lr_max >= 0, "'lr_max' must be >= 0", line);
  } else if (key == "beta1" || key == "beta2") {
    const double b = parse_real(v, key, line);
    require(b >= 0 && b < 1, "'" + key + "' must lie in [0, 1)", line);
    (key == "beta1" ? t.beta1 : t.beta2) = b;
  } else if (key == "adam_eps") {
    t.adam_eps = parse_real(v, key, line);
    require(t.adam_eps > 0, "'adam_eps' must be > 0", line);
  } else if (key == "seed") {
    t.seed = parse_size(v, key, line);
  } else {
    throw ParseError("unknown key '" + key + "'", line);
  }
}

struct Line {
  int number;
  std::string key;
  std::string_view value;
};

}  // namespace

RunConfig preset_config(std::string_view name) {
  RunConfig c;
  if (name == "desk") return c;
  if (name == "full") {
    c.model.input_size = 512;
    c.model.backbone_widths = {64, 256, 728, 2048};
    c.model.decoder_width = 256;
    c.train.batch_size = 8;
    c.train.epochs = 400;
    return c;
  }
  throw ContractError("unknown preset '" + std::string(name) + "' (expected desk or full)");
}

RunConfig parse_config(std::string_view text) {
  std::vector<Line> lines;
  int number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++number;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    raw = trim(raw);
    if (raw.empty()) continue;
    const auto eq = raw.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", number);
    const std::string key(trim(raw.substr(0, eq)));
    const std::string_view value = trim(raw.substr(eq + 1));
    if (key.empty()) throw ParseError("missing key before '='", number);
    if (value.empty()) throw ParseError("missing value for '" + key + "'", number);
    lines.push_back(Line{number, key, value});
  }

  // The preset seeds the defaults wherever it appears; explicit keys win.
  RunConfig c;
  for (const Line& l : lines) {
    if (l.key != "preset") continue;
    try {
      c = preset_config(l.value);
    } catch (const ContractError& e) {
      throw ParseError(e.what(), l.number);
    }
  }
  bool rates_given = false;
  std::map<std::string, int> seen;
  for (const Line& l : lines) {
    if (auto [it, fresh] = seen.emplace(l.key, l.number); !fresh) {
      throw ParseError("duplicate key '" + l.key + "' (first on line " + std::to_string(it->second) + ")",
                       l.number);
    }
    if (l.key == "preset") continue;
    apply(c, l.key, l.value, l.number);
    rates_given = rates_given || l.key == "dilation_rates";
  }
  if (!rates_given && c.model.aspp_mode == AsppMode::kPlain) c.model.dilation_rates = kPlainAsppRates;

  const int last = number;
  if (c.train.lr_min > c.train.lr_max) {
    throw ParseError("lr_min exceeds lr_max", seen.count("lr_min") ? seen["lr_min"] : last);
  }
  try {
    c.model.validate();
  } catch (const ContractError& e) {
    throw ParseError(e.what(), last);
  }
  return c;
}

std::string render_config(const RunConfig& config) {
  std::string out = "# model\n";
  for (const auto& [k, v] : model_pairs(config.model)) out += k + " = " + v + "\n";
  out += "# training\n";
  for (const auto& [k, v] : train_pairs(config.train)) out += k + " = " + v + "\n";
  return out;
}

RunConfig load_config(const fs::path& path) { return parse_config(read_file(path)); }

void require_same_model(const ModelConfig& expected, const ModelConfig& stored) {
  if (expected == stored) return;
  const Pairs a = model_pairs(expected);
  const Pairs b = model_pairs(stored);
  std::string diff;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].second != b[i].second) {
      diff += "\n  " + a[i].first + ": expected " + a[i].second + ", checkpoint has " + b[i].second;
    }
  }
  throw ContractError("config mismatch between configuration and checkpoint:" + diff);
}

// -------------------------------------------------------------- checkpoints

void save_checkpoint(const fs::path& path, const RunConfig& config,
                     const ParameterList<float>& parameters) {
  std::string bytes;
  put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(parameters.size()));
  for (const auto& p : parameters) {
    put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(p.name.size()));
    bytes += p.name;
    encode_tensor(bytes, p.tensor);
  }
  const std::string text = render_config(config);
  put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(text.size()));
  bytes += text;
  write_file(path, bytes);
}

Checkpoint load_checkpoint(const fs::path& path) {
  const std::string bytes = read_file(path);
  std::size_t offset = 0;
  Checkpoint ckpt;
  const std::uint32_t count = get_le<std::uint32_t>(bytes, offset, "checkpoint entry count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = get_le<std::uint32_t>(bytes, offset, "checkpoint name length");
    if (bytes.size() - offset < len) throw FormatError("truncated checkpoint name", offset);
    std::string name = bytes.substr(offset, len);
    offset += len;
    Tensor<float> t = decode_tensor<float>(bytes, offset);
    ckpt.parameters.push_back({std::move(name), std::move(t)});
  }
  const std::uint32_t len = get_le<std::uint32_t>(bytes, offset, "checkpoint config length");
  if (bytes.size() - offset != len) throw FormatError("checkpoint config block length mismatch", offset);
  try {
    ckpt.config = parse_config(std::string_view(bytes).substr(offset));
  } catch (const ParseError& e) {
    throw FormatError(std::string("checkpoint config block: ") + e.what(), offset);
  }
  return ckpt;
}

DcdModel<float> model_from_checkpoint(const Checkpoint& ckpt) {
  DcdModel<float> model = make_model<float>(ckpt.config.model, ckpt.config.train.seed);
  ParameterList<float> params = model.parameters();
  if (params.size() != ckpt.parameters.size()) {
    throw ContractError("config mismatch: architecture has " + std::to_string(params.size()) +
                        " parameter tensors, checkpoint has " +
                        std::to_string(ckpt.parameters.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& stored = ckpt.parameters[i];
    if (params[i].name != stored.name || params[i].tensor.shape() != stored.tensor.shape()) {
      throw ContractError("config mismatch: expected " + params[i].name + " " +
                          shape_str(params[i].tensor.shape()) + ", checkpoint has " + stored.name +
                          " " + shape_str(stored.tensor.shape()));
    }
    std::copy(stored.tensor.data().begin(), stored.tensor.data().end(),
              params[i].tensor.mutable_data().begin());
  }
  return model;
}

// ------------------------------------------------------------------- images

namespace {

struct Pnm {
  std::size_t width = 0;
  std::size_t height = 0;
  unsigned maxval = 0;
  std::size_t data_offset = 0;
};

Pnm parse_pnm_header(std::string_view bytes, std::string_view magic) {
  if (bytes.substr(0, 2) != magic) {
    throw FormatError("expected binary " + std::string(magic) + " header", 0);
  }
  std::size_t pos = 2;
  auto next_number = [&](const char* what) -> std::size_t {
    while (pos < bytes.size()) {
      const char ch = bytes[pos];
      if (ch == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(bytes.data() + pos, bytes.data() + bytes.size(), value);
    if (ec != std::errc()) throw FormatError(std::string("bad ") + what + " in header", start);
    pos = static_cast<std::size_t>(ptr - bytes.data());
    return value;
  };
  Pnm h;
  h.width = next_number("width");
  h.height = next_number("height");
  const std::size_t maxval_at = pos;
  const std::size_t maxval = next_number("maxval");
  if (maxval == 0 || maxval > 255) {
    throw FormatError("only 8-bit maps are supported, maxval " + std::to_string(maxval), maxval_at);
  }
  h.maxval = static_cast<unsigned>(maxval);
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError("missing whitespace after maxval", pos);
  }
  h.data_offset = pos + 1;
  return h;
}

void check_payload(std::string_view bytes, const Pnm& h, std::size_t channels) {
  const std::size_t need = h.width * h.height * channels;
  if (bytes.size() - h.data_offset < need) {
    throw FormatError("truncated pixel data: need " + std::to_string(need) + " bytes", h.data_offset);
  }
}

std::string pnm_header(const char* magic, std::size_t width, std::size_t height) {
  return std::string(magic) + "\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
}

// Accepts [H x W] or [1 x H x W].
std::pair<std::size_t, std::size_t> image_extent(const Tensor<float>& image) {
  if (image.rank() == 2) return {image.dim(0), image.dim(1)};
  if (image.rank() == 3 && image.dim(0) == 1) return {image.dim(1), image.dim(2)};
  throw DimensionError("grey image must be H x W or 1 x H x W, got " + shape_str(image.shape()));
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void write_mask(const fs::path& path, const SegMask& mask) {
  if (mask.labels.size() != mask.height * mask.width) {
    throw DimensionError("write_mask: label count does not match extent");
  }
  for (std::uint8_t v : mask.labels) {
    if (v > kMaxClassIndex) {
      throw ContractError("write_mask: class index " + std::to_string(v) + " exceeds 13");
    }
  }
  std::string bytes = pnm_header("P5", mask.width, mask.height);
  bytes.append(reinterpret_cast<const char*>(mask.labels.data()), mask.labels.size());
  write_file(path, bytes);
}

SegMask read_mask(const fs::path& path) {
  const std::string bytes = read_file(path);
  const Pnm h = parse_pnm_header(bytes, "P5");
  check_payload(bytes, h, 1);
  SegMask mask(h.height, h.width);
  std::vector<std::size_t> bad_at;
  std::vector<unsigned> bad_values;
  for (std::size_t i = 0; i < mask.labels.size(); ++i) {
    const auto v = static_cast<std::uint8_t>(bytes[h.data_offset + i]);
    if (v > kMaxClassIndex) {
      if (std::find(bad_values.begin(), bad_values.end(), v) == bad_values.end()) {
        bad_values.push_back(v);
        bad_at.push_back(i);
      }
      continue;
    }
    mask.labels[i] = v;
  }
  if (!bad_values.empty()) {
    std::string list;
    for (std::size_t i = 0; i < bad_values.size(); ++i) {
      list += (i ? ", " : "") + std::to_string(bad_values[i]) + " (first at row " +
              std::to_string(bad_at[i] / h.width) + ", col " + std::to_string(bad_at[i] % h.width) + ")";
    }
    throw ContractError("read_mask: " + path.string() + " holds pixel values above 13: " + list);
  }
  return mask;
}

void write_image(const fs::path& path, const Tensor<float>& image) {
  const auto [height, width] = image_extent(image);
  std::string bytes = pnm_header("P5", width, height);
  for (float v : image.data()) bytes.push_back(static_cast<char>(to_byte(v)));
  write_file(path, bytes);
}

Tensor<float> read_image(const fs::path& path) {
  const std::string bytes = read_file(path);
  const Pnm h = parse_pnm_header(bytes, "P5");
  check_payload(bytes, h, 1);
  std::vector<float> values(h.width * h.height);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = static_cast<float>(static_cast<std::uint8_t>(bytes[h.data_offset + i])) /
                static_cast<float>(h.maxval);
  }
  return Tensor<float>(Shape{1, h.height, h.width}, std::move(values));
}

void write_overlay(const fs::path& path, const Tensor<float>& image, const SegMask& mask,
                   double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractError("write_overlay: alpha must lie in [0, 1]");
  const auto [height, width] = image_extent(image);
  if (height != mask.height || width != mask.width) {
    throw DimensionError("write_overlay: image " + std::to_string(height) + "x" +
                         std::to_string(width) + " vs mask " + std::to_string(mask.height) + "x" +
                         std::to_string(mask.width));
  }
  std::string bytes = pnm_header("P6", width, height);
  const auto pixels = image.data();
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double grey = to_byte(pixels[i]);
    const std::uint8_t label = mask.labels[i];
    if (label == 0) {
      for (int ch = 0; ch < 3; ++ch) bytes.push_back(static_cast<char>(grey));
      continue;
    }
    const Rgb c = class_color(label);
    for (double channel : {double(c.r), double(c.g), double(c.b)}) {
      const double v = (1.0 - alpha) * grey + alpha * channel;
      bytes.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(v))));
    }
  }
  write_file(path, bytes);
}

RgbImage read_ppm(const fs::path& path) {
  const std::string bytes = read_file(path);
  const Pnm h = parse_pnm_header(bytes, "P6");
  check_payload(bytes, h, 3);
  RgbImage img{h.height, h.width, std::vector<Rgb>(h.width * h.height)};
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const std::size_t o = h.data_offset + 3 * i;
    img.pixels[i] = Rgb{static_cast<std::uint8_t>(bytes[o]), static_cast<std::uint8_t>(bytes[o + 1]),
                        static_cast<std::uint8_t>(bytes[o + 2])};
  }
  return img;
}

// ----------------------------------------------------------------- datasets

void save_dataset(const fs::path& dir, const Dataset& data) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  for (std::size_t i = 0; i < data.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%05zu.pgm", i);
    write_image(dir / "images" / name, data[i].image);
    write_mask(dir / "masks" / name, data[i].mask);
  }
}

std::vector<std::string> dataset_names(const fs::path& dir) {
  const fs::path masks = dir / "masks";
  if (!fs::is_directory(masks)) throw ContractError("dataset: missing directory " + masks.string());
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(masks)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

Dataset load_dataset(const fs::path& dir) {
  Dataset data;
  for (const std::string& name : dataset_names(dir)) {
    Sample s{read_image(dir / "images" / name), read_mask(dir / "masks" / name)};
    if (s.image.dim(1) != s.mask.height || s.image.dim(2) != s.mask.width) {
      throw DimensionError("dataset: image and mask extents differ for " + name);
    }
    data.push_back(std::move(s));
  }
  return data;
}

}  // namespace dcd
