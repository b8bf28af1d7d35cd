// Copyright 2026 The UR2M Authors. All Rights Reserved.
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

// The .ucm model file:
//
//   bytes 0..7    magic "UR2MUCM\0"
//   bytes 8..15   header length N, uint64 little-endian
//   next N bytes  JSON header (format, version, kind, config, pipeline,
//                 tensor table, blob_size)
//   remainder     little-endian tensor blob
//
// Tensor table entries: name, shape, dtype (f32 | i8), offset, nbytes and,
// for i8 tensors, scale and zero_point.

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ur2m/baselines.hpp"
#include "ur2m/cascade_model.hpp"
#include "ur2m/errors.hpp"
#include "ur2m/pipeline.hpp"
#include "ur2m/quantize.hpp"

namespace ur2m::io {

inline constexpr char kMagic[8] = {'U', 'R', '2', 'M', 'U', 'C', 'M', '\0'};
inline constexpr int kFormatVersion = 1;

enum class ModelKind { kCascade, kQuantized, kBaseline };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kCascade: return "cascade";
    case ModelKind::kQuantized: return "quantized";
    case ModelKind::kBaseline: return "baseline";
  }
  return "?";
}

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put_le(std::string& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_le(const char* p) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

struct BlobWriter {
  std::string blob;
  nlohmann::ordered_json table = nlohmann::ordered_json::array();

  void add_f32(const std::string& name, const Tensor<float>& t) {
    const std::size_t offset = blob.size();
    for (float v : t.values()) put_le(blob, v);
    table.push_back({{"name", name}, {"shape", t.shape()}, {"dtype", "f32"},
                     {"offset", offset}, {"nbytes", blob.size() - offset}});
  }
  void add_i8(const quant::QuantizedTensor& q) {
    const std::size_t offset = blob.size();
    for (std::int8_t v : q.values) blob.push_back(static_cast<char>(v));
    table.push_back({{"name", q.name}, {"shape", q.shape}, {"dtype", "i8"},
                     {"offset", offset}, {"nbytes", blob.size() - offset},
                     {"scale", q.params.scale}, {"zero_point", q.params.zero_point}});
  }
};

inline std::string assemble(nlohmann::ordered_json header, BlobWriter& w) {
  header["tensors"] = w.table;
  header["blob_size"] = w.blob.size();
  const std::string text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint64_t>(out, text.size());
  out += text;
  out += w.blob;
  return out;
}

struct TensorEntry {
  std::string name;
  Shape shape;
  std::string dtype;
  std::size_t offset = 0;
  std::size_t nbytes = 0;
  quant::QuantParams params;
};

}  // namespace detail

// Parsed file: header plus a view of the blob, with every table entry
// checked against the blob bounds.
struct ParsedFile {
  nlohmann::json header;
  std::string blob;
  std::map<std::string, detail::TensorEntry> tensors;

  ModelKind kind() const {
    const auto k = header.at("kind").get<std::string>();
    if (k == "cascade") return ModelKind::kCascade;
    if (k == "quantized") return ModelKind::kQuantized;
    if (k == "baseline") return ModelKind::kBaseline;
    throw FormatError("model file: unknown kind '" + k + "'");
  }

  const detail::TensorEntry& entry(const std::string& name) const {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw InconsistentHeaderError("model file: tensor '" + name + "' missing");
    return it->second;
  }

  // Fills `t` (whose shape comes from the config) from tensor `name`.
  void read_f32(const std::string& name, Tensor<float>& t) const {
    const auto& e = entry(name);
    if (e.dtype != "f32") throw InconsistentHeaderError("model file: tensor '" + name + "' is not f32");
    if (e.shape != t.shape()) {
      throw InconsistentHeaderError("model file: tensor '" + name + "' has shape " +
                                    shape_str(e.shape) + ", config implies " + shape_str(t.shape()));
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = detail::get_le<float>(blob.data() + e.offset + 4 * i);
    }
  }

  quant::QuantizedTensor read_i8(const std::string& name, const Shape& expected) const {
    const auto& e = entry(name);
    if (e.dtype != "i8") throw InconsistentHeaderError("model file: tensor '" + name + "' is not i8");
    if (e.shape != expected) {
      throw InconsistentHeaderError("model file: tensor '" + name + "' has shape " +
                                    shape_str(e.shape) + ", config implies " + shape_str(expected));
    }
    quant::QuantizedTensor q;
    q.name = name;
    q.shape = e.shape;
    q.params = e.params;
    q.values.resize(e.nbytes);
    std::memcpy(q.values.data(), blob.data() + e.offset, e.nbytes);
    return q;
  }
};

inline ParsedFile parse(const std::string& bytes) {
  if (bytes.size() < 16) throw TruncatedFileError("model file: shorter than its preamble");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("model file: bad magic (not a .ucm file)");
  }
  const auto header_len = detail::get_le<std::uint64_t>(bytes.data() + 8);
  if (header_len > bytes.size() - 16) {
    throw TruncatedFileError("model file: header declares " + std::to_string(header_len) +
                             " bytes, file has " + std::to_string(bytes.size() - 16));
  }
  ParsedFile f;
  try {
    f.header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: malformed header: ") + e.what());
  }
  try {
    if (f.header.at("format").get<std::string>() != "ucm") throw FormatError("model file: not a ucm header");
    const int version = f.header.at("version").get<int>();
    if (version != kFormatVersion) {
      throw VersionMismatchError("model file: format version " + std::to_string(version) +
                                 ", this build reads version " + std::to_string(kFormatVersion));
    }
    const auto blob_size = f.header.at("blob_size").get<std::size_t>();
    const std::size_t available = bytes.size() - 16 - header_len;
    if (available < blob_size) {
      throw TruncatedFileError("model file: blob has " + std::to_string(available) + " of " +
                               std::to_string(blob_size) + " bytes");
    }
    if (available > blob_size) throw InconsistentHeaderError("model file: trailing bytes after blob");
    f.blob = bytes.substr(16 + header_len);
    for (const auto& j : f.header.at("tensors")) {
      detail::TensorEntry e;
      e.name = j.at("name").get<std::string>();
      e.shape = j.at("shape").get<Shape>();
      e.dtype = j.at("dtype").get<std::string>();
      e.offset = j.at("offset").get<std::size_t>();
      e.nbytes = j.at("nbytes").get<std::size_t>();
      const std::size_t width = e.dtype == "f32" ? 4 : e.dtype == "i8" ? 1 : 0;
      if (width == 0) throw InconsistentHeaderError("model file: tensor '" + e.name + "' has unknown dtype");
      if (shape_elements(e.shape) * width != e.nbytes) {
        throw InconsistentHeaderError("model file: tensor '" + e.name + "' shape " +
                                      shape_str(e.shape) + " disagrees with nbytes " +
                                      std::to_string(e.nbytes));
      }
      if (e.offset > blob_size || e.nbytes > blob_size - e.offset) {
        throw InconsistentHeaderError("model file: tensor '" + e.name + "' extends past the blob");
      }
      if (e.dtype == "i8") {
        e.params.scale = j.at("scale").get<double>();
        e.params.zero_point = j.at("zero_point").get<int>();
      }
      if (!f.tensors.emplace(e.name, e).second) {
        throw InconsistentHeaderError("model file: duplicate tensor '" + e.name + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: header field error: ") + e.what());
  }
  return f;
}

namespace detail {

inline nlohmann::ordered_json base_header(ModelKind kind, const BackboneConfig& cfg,
                                          const InputPipeline& pipeline) {
  nlohmann::ordered_json h;
  h["format"] = "ucm";
  h["version"] = kFormatVersion;
  h["kind"] = to_string(kind);
  h["config"] = cfg;
  h["pipeline"] = pipeline;
  return h;
}

inline void check_table_size(const ParsedFile& f, std::size_t expected) {
  if (f.tensors.size() != expected) {
    throw InconsistentHeaderError("model file: tensor table has " + std::to_string(f.tensors.size()) +
                                  " entries, config implies " + std::to_string(expected));
  }
}

inline BackboneConfig read_config(const ParsedFile& f) {
  try {
    auto cfg = backbone_from_json(f.header.at("config"));
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: bad config: ") + e.what());
  } catch (const ConfigError& e) {
    throw InconsistentHeaderError(std::string("model file: ") + e.what());
  }
}

inline InputPipeline read_pipeline(const ParsedFile& f) {
  try {
    return pipeline_from_json(f.header.at("pipeline"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: bad pipeline: ") + e.what());
  }
}

inline void expect_kind(const ParsedFile& f, ModelKind k) {
  if (f.kind() != k) {
    throw ModelMismatchError("model file holds a '" + to_string(f.kind()) + "' model, expected '" +
                             to_string(k) + "'");
  }
}

}  // namespace detail

// ---- cascade (f32) --------------------------------------------------------

inline std::string serialize(const CascadeModel<float>& m) {
  detail::BlobWriter w;
  for (const auto& [name, t] : m.named_tensors()) w.add_f32(name, *t);
  return detail::assemble(detail::base_header(ModelKind::kCascade, m.config, m.pipeline), w);
}

inline CascadeModel<float> deserialize_cascade(const ParsedFile& f) {
  detail::expect_kind(f, ModelKind::kCascade);
  auto m = build_model<float>(detail::read_config(f), 0);
  m.pipeline = detail::read_pipeline(f);
  auto params = m.parameters();
  detail::check_table_size(f, params.size());
  for (auto& p : params) f.read_f32(p.name, *p.tensor);
  return m;
}

inline CascadeModel<float> deserialize_cascade(const std::string& bytes) {
  return deserialize_cascade(parse(bytes));
}

// ---- quantized ------------------------------------------------------------

struct QuantizedFile {
  quant::QuantizedModel model;
  InputPipeline pipeline;
};

inline std::string serialize(const quant::QuantizedModel& q, const InputPipeline& pipeline) {
  const auto& fm = q.float_model();
  auto header = detail::base_header(ModelKind::kQuantized, fm.config, pipeline);
  nlohmann::ordered_json acts = nlohmann::ordered_json::array();
  for (const auto& [name, p] : q.activations) {
    acts.push_back({{"name", name}, {"scale", p.scale}, {"zero_point", p.zero_point}});
  }
  header["activations"] = acts;
  detail::BlobWriter w;
  std::map<std::string, const quant::QuantizedTensor*> by_name;
  for (const auto& t : q.weights) by_name[t.name] = &t;
  for (const auto& [name, t] : fm.named_tensors()) {
    if (quant::is_weight_name(name)) {
      w.add_i8(*by_name.at(name));
    } else {
      w.add_f32(name, *t);
    }
  }
  return detail::assemble(header, w);
}

inline QuantizedFile deserialize_quantized(const ParsedFile& f) {
  detail::expect_kind(f, ModelKind::kQuantized);
  auto base = build_model<float>(detail::read_config(f), 0);
  QuantizedFile out;
  out.pipeline = detail::read_pipeline(f);
  base.pipeline = out.pipeline;
  auto params = base.parameters();
  detail::check_table_size(f, params.size());
  for (auto& p : params) {
    if (quant::is_weight_name(p.name)) {
      out.model.weights.push_back(f.read_i8(p.name, p.tensor->shape()));
    } else {
      f.read_f32(p.name, *p.tensor);
    }
  }
  try {
    for (const auto& a : f.header.at("activations")) {
      out.model.activations[a.at("name").get<std::string>()] = {a.at("scale").get<double>(),
                                                                a.at("zero_point").get<int>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: bad activation table: ") + e.what());
  }
  out.model.bind(std::move(base));
  return out;
}

// ---- baselines ------------------------------------------------------------

inline std::string serialize(const baseline::Bundle& b) {
  if (b.members.empty()) throw InvariantError("baseline bundle has no members");
  auto header = detail::base_header(ModelKind::kBaseline, b.members.front().backbone.config, b.pipeline);
  header["baseline"] = {{"kind", baseline::to_string(b.kind)},
                        {"members", b.members.size()},
                        {"aug_copies", b.augment.copies},
                        {"aug_sigma", b.augment.sigma},
                        {"aug_seed", b.augment.seed}};
  detail::BlobWriter w;
  for (std::size_t k = 0; k < b.members.size(); ++k) {
    for (const auto& [name, t] : b.members[k].named_tensors()) {
      w.add_f32("member" + std::to_string(k) + "/" + name, *t);
    }
  }
  return detail::assemble(header, w);
}

inline baseline::Bundle deserialize_baseline(const ParsedFile& f) {
  detail::expect_kind(f, ModelKind::kBaseline);
  const auto cfg = detail::read_config(f);
  baseline::Bundle b;
  b.pipeline = detail::read_pipeline(f);
  std::size_t members = 0;
  try {
    const auto& j = f.header.at("baseline");
    b.kind = baseline::parse_kind(j.at("kind").get<std::string>());
    members = j.at("members").get<std::size_t>();
    b.augment.copies = j.at("aug_copies").get<std::size_t>();
    b.augment.sigma = j.at("aug_sigma").get<double>();
    b.augment.seed = j.at("aug_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: bad baseline section: ") + e.what());
  }
  std::size_t expected = 0;
  for (std::size_t k = 0; k < members; ++k) {
    auto m = baseline::build_softmax_model<float>(cfg, 0);
    auto params = m.parameters();
    expected += params.size();
    for (auto& p : params) f.read_f32("member" + std::to_string(k) + "/" + p.name, *p.tensor);
    b.members.push_back(std::move(m));
  }
  detail::check_table_size(f, expected);
  return b;
}

// ---- files ----------------------------------------------------------------

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create '" + path.parent_path().string() + "': " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline ParsedFile load(const std::filesystem::path& path) { return parse(read_file(path)); }

}  // namespace ur2m::io
