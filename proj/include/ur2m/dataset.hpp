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

#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ur2m/errors.hpp"

namespace ur2m::data {

enum class Split : std::uint8_t { kTrain, kTest };

inline const char* split_name(Split s) { return s == Split::kTrain ? "train" : "test"; }

struct Sample {
  std::vector<float> signal;
  std::vector<std::uint8_t> labels;  // one bit per event
  Split split = Split::kTrain;
};

// Fixed-length multi-event time-series dataset. The binary view for event c
// is simply labels[c] of each sample.
struct Dataset {
  std::string name;
  double sample_rate = 0.0;
  std::vector<std::string> events;
  std::size_t signal_len = 0;
  std::vector<Sample> samples;

  std::size_t event_count() const { return events.size(); }

  std::vector<std::size_t> indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].split == split) out.push_back(i);
    }
    return out;
  }

  std::size_t positives(std::size_t event, Split split) const {
    std::size_t n = 0;
    for (const auto& s : samples) n += s.split == split && s.labels[event];
    return n;
  }

  Dataset subset(Split split) const {
    Dataset out = *this;
    out.samples.clear();
    for (const auto& s : samples) {
      if (s.split == split) out.samples.push_back(s);
    }
    return out;
  }

  void validate() const {
    if (events.empty()) throw DataError("dataset '" + name + "': no events");
    if (!(sample_rate > 0)) throw DataError("dataset '" + name + "': sample_rate must be > 0");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& s = samples[i];
      if (s.signal.size() != signal_len) {
        throw DataError("dataset '" + name + "': sample " + std::to_string(i) +
                        " has " + std::to_string(s.signal.size()) +
                        " values, expected " + std::to_string(signal_len));
      }
      if (s.labels.size() != events.size()) {
        throw DataError("dataset '" + name + "': sample " + std::to_string(i) +
                        " has " + std::to_string(s.labels.size()) + " labels, expected " +
                        std::to_string(events.size()));
      }
      for (auto b : s.labels) {
        if (b > 1) throw DataError("dataset '" + name + "': label outside {0,1}");
      }
    }
  }
};

// ---- on-disk format: manifest.json + one CSV per split ---------------------
// CSV row: split-relative id, C label bits, then signal_len values.

constexpr int kDatasetFormatVersion = 1;

namespace detail {

inline void append_float(std::string& out, float v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

template <typename Num>
Num parse_number(std::string_view tok, const std::string& where) {
  Num v{};
  const char* b = tok.data();
  const char* e = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) {
    throw DataError(where + ": cannot parse '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace detail

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::ordered_json manifest;
  manifest["format_version"] = kDatasetFormatVersion;
  manifest["name"] = ds.name;
  manifest["sample_rate"] = ds.sample_rate;
  manifest["events"] = ds.events;
  manifest["signal_len"] = ds.signal_len;
  manifest["splits"] = {{"train", "train.csv"}, {"test", "test.csv"}};
  {
    std::ofstream f(dir / "manifest.json", std::ios::binary);
    if (!f) throw IoError("cannot write " + (dir / "manifest.json").string());
    f << manifest.dump(2) << '\n';
  }
  for (Split split : {Split::kTrain, Split::kTest}) {
    const auto path = dir / (std::string(split_name(split)) + ".csv");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    std::string line;
    std::size_t id = 0;
    for (const auto& s : ds.samples) {
      if (s.split != split) continue;
      line.clear();
      line += std::to_string(id++);
      for (auto b : s.labels) {
        line += ',';
        line += b ? '1' : '0';
      }
      for (float v : s.signal) {
        line += ',';
        detail::append_float(line, v);
      }
      line += '\n';
      f << line;
    }
  }
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream mf(manifest_path);
  if (!mf) throw DataError("cannot open dataset manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mf);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  Dataset ds;
  try {
    if (manifest.value("format_version", kDatasetFormatVersion) != kDatasetFormatVersion) {
      throw DataError("unsupported dataset format_version");
    }
    ds.name = manifest.at("name").get<std::string>();
    ds.sample_rate = manifest.at("sample_rate").get<double>();
    ds.events = manifest.at("events").get<std::vector<std::string>>();
    ds.signal_len = manifest.at("signal_len").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  const std::size_t n_events = ds.events.size();
  const auto& splits = manifest.at("splits");
  for (Split split : {Split::kTrain, Split::kTest}) {
    const char* key = split_name(split);
    if (!splits.contains(key)) continue;
    const auto path = dir / splits.at(key).get<std::string>();
    std::ifstream f(path);
    if (!f) throw DataError("cannot open split file " + path.string());
    std::string line;
    std::size_t row = 0;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      const std::string where = path.filename().string() + ":" + std::to_string(row + 1);
      Sample s;
      s.split = split;
      s.labels.reserve(n_events);
      s.signal.reserve(ds.signal_len);
      std::size_t col = 0;
      std::size_t start = 0;
      while (start <= line.size()) {
        std::size_t end = line.find(',', start);
        if (end == std::string::npos) end = line.size();
        std::string_view tok(line.data() + start, end - start);
        if (col == 0) {
          if (detail::parse_number<std::size_t>(tok, where) != row) {
            throw DataError(where + ": row id out of sequence");
          }
        } else if (col <= n_events) {
          const int bit = detail::parse_number<int>(tok, where);
          if (bit != 0 && bit != 1) throw DataError(where + ": label outside {0,1}");
          s.labels.push_back(static_cast<std::uint8_t>(bit));
        } else {
          s.signal.push_back(detail::parse_number<float>(tok, where));
        }
        ++col;
        start = end + 1;
      }
      if (s.labels.size() != n_events || s.signal.size() != ds.signal_len) {
        throw DataError(where + ": expected " + std::to_string(1 + n_events + ds.signal_len) +
                        " columns, got " + std::to_string(col));
      }
      ds.samples.push_back(std::move(s));
      ++row;
    }
  }
  ds.validate();
  return ds;
}

}  // namespace ur2m::data
