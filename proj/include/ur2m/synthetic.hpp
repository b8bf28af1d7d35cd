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

// Synthetic event data, SMOTE upsampling and signal corruptions.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ur2m/dataset.hpp"

namespace ur2m::data {

struct SyntheticConfig {
  std::size_t events = 3;
  std::size_t n_per_event = 200;    // train samples per event
  std::size_t test_count = 0;       // test samples in total, round-robin labels
  double snr_db_min = -5.0;
  double snr_db_max = 20.0;         // +inf allowed: noise-free
  std::uint64_t seed = 0;
  double sample_rate = 4000.0;
  double duration_s = 1.0;
  double burst_min_fraction = 0.5;  // shortest burst, as a fraction of duration
  std::vector<double> frequencies;  // empty: 250 Hz * (c + 1)

  std::vector<double> event_frequencies() const {
    if (!frequencies.empty()) return frequencies;
    std::vector<double> f(events);
    for (std::size_t c = 0; c < events; ++c) f[c] = 250.0 * static_cast<double>(c + 1);
    return f;
  }
};

namespace detail {

inline std::vector<float> tone_burst(std::mt19937_64& rng, std::size_t len,
                                     double freq, double sample_rate,
                                     double burst_min_fraction, double snr_db) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double frac = burst_min_fraction + (1.0 - burst_min_fraction) * unit(rng);
  const auto burst = std::max<std::size_t>(1, static_cast<std::size_t>(frac * static_cast<double>(len)));
  const auto start = static_cast<std::size_t>(unit(rng) * static_cast<double>(len - burst + 1));
  const double phase = 2.0 * std::numbers::pi * unit(rng);
  // Noise power relative to the tone's average power over the whole signal.
  const double signal_power = 0.5 * static_cast<double>(burst) / static_cast<double>(len);
  const double sigma = std::isinf(snr_db) && snr_db > 0
                           ? 0.0
                           : std::sqrt(signal_power / std::pow(10.0, snr_db / 10.0));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<float> x(len);
  for (std::size_t t = 0; t < len; ++t) {
    double v = 0.0;
    if (t >= start && t < start + burst) {
      v = std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(t) / sample_rate + phase);
    }
    if (sigma > 0.0) v += sigma * noise(rng);
    x[t] = static_cast<float>(v);
  }
  return x;
}

}  // namespace detail

// Event c is a sinusoid burst at its own frequency plus white noise at a
// per-sample SNR drawn uniformly (in dB) from the configured range.
inline Dataset gen_synthetic(const SyntheticConfig& cfg) {
  if (cfg.events < 2) throw ConfigError("gen_synthetic: need at least 2 events");
  if (!(cfg.snr_db_min <= cfg.snr_db_max) || std::isnan(cfg.snr_db_min)) {
    throw ConfigError("gen_synthetic: invalid snr range");
  }
  if (!(cfg.sample_rate > 0) || !(cfg.duration_s > 0)) {
    throw ConfigError("gen_synthetic: sample_rate and duration must be > 0");
  }
  if (cfg.burst_min_fraction <= 0 || cfg.burst_min_fraction > 1) {
    throw ConfigError("gen_synthetic: burst_min_fraction must be in (0,1]");
  }
  const auto freqs = cfg.event_frequencies();
  if (freqs.size() != cfg.events) {
    throw ConfigError("gen_synthetic: " + std::to_string(freqs.size()) +
                      " frequencies for " + std::to_string(cfg.events) + " events");
  }
  const double nyquist = cfg.sample_rate / 2.0;
  for (std::size_t c = 0; c < freqs.size(); ++c) {
    if (!(freqs[c] > 0) || freqs[c] >= nyquist) {
      throw ConfigError("gen_synthetic: event " + std::to_string(c) + " frequency " +
                        std::to_string(freqs[c]) + " Hz is not below Nyquist (" +
                        std::to_string(nyquist) + " Hz)");
    }
  }

  Dataset ds;
  ds.name = "synthetic";
  ds.sample_rate = cfg.sample_rate;
  ds.signal_len = static_cast<std::size_t>(std::lround(cfg.sample_rate * cfg.duration_s));
  for (std::size_t c = 0; c < cfg.events; ++c) ds.events.push_back("event" + std::to_string(c));

  std::mt19937_64 rng(cfg.seed);
  auto draw_snr = [&]() {
    if (cfg.snr_db_min == cfg.snr_db_max) return cfg.snr_db_min;
    std::uniform_real_distribution<double> d(cfg.snr_db_min, cfg.snr_db_max);
    return d(rng);
  };
  auto make = [&](std::size_t c, Split split) {
    Sample s;
    s.split = split;
    s.labels.assign(cfg.events, 0);
    s.labels[c] = 1;
    const double snr = draw_snr();
    s.signal = detail::tone_burst(rng, ds.signal_len, freqs[c], cfg.sample_rate,
                                  cfg.burst_min_fraction, snr);
    return s;
  };
  for (std::size_t c = 0; c < cfg.events; ++c) {
    for (std::size_t i = 0; i < cfg.n_per_event; ++i) ds.samples.push_back(make(c, Split::kTrain));
  }
  for (std::size_t i = 0; i < cfg.test_count; ++i) {
    ds.samples.push_back(make(i % cfg.events, Split::kTest));
  }
  return ds;
}

// SMOTE in the signal domain over the train split. Synthetic samples are
// labelled positive for `event` only.
inline Dataset smote_upsample(const Dataset& ds, std::size_t event,
                              std::size_t target_count, std::size_t k,
                              std::uint64_t seed) {
  if (event >= ds.event_count()) {
    throw ConfigError("smote: event index " + std::to_string(event) + " out of range");
  }
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    if (s.split == Split::kTrain && s.labels[event]) pos.push_back(i);
  }
  if (pos.size() < 2) {
    throw DataError("smote: event " + std::to_string(event) + " has " +
                    std::to_string(pos.size()) + " positive(s); need at least 2");
  }
  Dataset out = ds;
  if (target_count <= pos.size()) return out;
  k = std::clamp<std::size_t>(k, 1, pos.size() - 1);

  auto dist2 = [&](std::size_t a, std::size_t b) {
    const auto& x = ds.samples[a].signal;
    const auto& y = ds.samples[b].signal;
    double d = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
      const double e = static_cast<double>(x[t]) - static_cast<double>(y[t]);
      d += e * e;
    }
    return d;
  };
  std::vector<std::vector<std::size_t>> neighbours(pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t j = 0; j < pos.size(); ++j) {
      if (j != i) cand.emplace_back(dist2(pos[i], pos[j]), pos[j]);
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    for (std::size_t j = 0; j < k; ++j) neighbours[i].push_back(cand[j].second);
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_base(0, pos.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_nn(0, k - 1);
  std::uniform_real_distribution<double> gap(0.0, 1.0);
  for (std::size_t n = pos.size(); n < target_count; ++n) {
    const std::size_t b = pick_base(rng);
    const auto& x = ds.samples[pos[b]].signal;
    const auto& nn = ds.samples[neighbours[b][pick_nn(rng)]].signal;
    const double u = gap(rng);
    Sample s;
    s.split = Split::kTrain;
    s.labels.assign(ds.event_count(), 0);
    s.labels[event] = 1;
    s.signal.resize(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
      s.signal[t] = static_cast<float>(x[t] + u * (static_cast<double>(nn[t]) - x[t]));
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

enum class Corruption { kZeroMask, kGaussian };

inline double rms(std::span<const float> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

// zero_mask: param is the fraction of the signal zeroed as one contiguous
// window. gaussian: param is the absolute noise standard deviation.
inline std::vector<float> corrupt(std::span<const float> signal, Corruption mode,
                                  double param, std::uint64_t seed) {
  std::vector<float> out(signal.begin(), signal.end());
  std::mt19937_64 rng(seed);
  if (mode == Corruption::kZeroMask) {
    if (!(param >= 0.0 && param <= 1.0)) {
      throw DomainError("corrupt: zero_mask fraction " + std::to_string(param) +
                        " outside [0,1]");
    }
    const auto len = static_cast<std::size_t>(std::lround(param * static_cast<double>(out.size())));
    if (len == 0) return out;
    std::uniform_int_distribution<std::size_t> start_d(0, out.size() - len);
    const std::size_t start = start_d(rng);
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(start),
              out.begin() + static_cast<std::ptrdiff_t>(start + len), 0.0f);
    return out;
  }
  if (!(param >= 0.0) || !std::isfinite(param)) {
    throw DomainError("corrupt: gaussian sigma " + std::to_string(param) + " must be >= 0");
  }
  if (param == 0.0) return out;
  std::normal_distribution<double> noise(0.0, param);
  for (auto& v : out) v = static_cast<float>(v + noise(rng));
  return out;
}

}  // namespace ur2m::data
