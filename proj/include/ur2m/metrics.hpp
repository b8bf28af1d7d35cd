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

// Calibration metrics over probability rows: accuracy, Brier (summed over
// classes, so a confidently wrong binary prediction scores 2), NLL and
// 10-bin expected calibration error.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "ur2m/errors.hpp"

namespace ur2m::metrics {

inline constexpr std::size_t kEceBins = 10;
inline constexpr double kNllClamp = 1e-7;

struct CalibrationReport {
  std::size_t n = 0;
  double accuracy = 0.0;
  double brier = 0.0;
  double nll = 0.0;
  double ece = 0.0;
};

// Lowest index wins ties.
inline std::size_t argmax(const std::vector<double>& p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

inline CalibrationReport calibration(const std::vector<std::vector<double>>& probs,
                                     const std::vector<std::size_t>& labels,
                                     std::size_t bins = kEceBins) {
  if (probs.size() != labels.size()) {
    throw DimensionError("metrics: " + std::to_string(probs.size()) + " rows vs " +
                         std::to_string(labels.size()) + " labels");
  }
  if (bins == 0) throw ConfigError("metrics: ECE needs at least one bin");
  CalibrationReport r;
  r.n = probs.size();
  if (r.n == 0) return r;
  std::vector<double> bin_conf(bins, 0.0), bin_hit(bins, 0.0), bin_n(bins, 0.0);
  for (std::size_t i = 0; i < r.n; ++i) {
    const auto& p = probs[i];
    const std::size_t y = labels[i];
    if (p.empty() || y >= p.size()) throw DimensionError("metrics: label outside the probability row");
    const std::size_t pred = argmax(p);
    const double conf = p[pred];
    const double hit = pred == y ? 1.0 : 0.0;
    r.accuracy += hit;
    for (std::size_t c = 0; c < p.size(); ++c) {
      const double d = p[c] - (c == y ? 1.0 : 0.0);
      r.brier += d * d;
    }
    r.nll -= std::log(std::clamp(p[y], kNllClamp, 1.0));
    const auto b = std::min(bins - 1, static_cast<std::size_t>(conf * static_cast<double>(bins)));
    bin_conf[b] += conf;
    bin_hit[b] += hit;
    bin_n[b] += 1.0;
  }
  const double n = static_cast<double>(r.n);
  r.accuracy /= n;
  r.brier /= n;
  r.nll /= n;
  for (std::size_t b = 0; b < bins; ++b) {
    if (bin_n[b] > 0) r.ece += std::abs(bin_hit[b] - bin_conf[b]) / n;
  }
  return r;
}

// Binary rows [1 - p, p] with the event label as class index.
inline CalibrationReport binary_calibration(const std::vector<double>& p_event,
                                            const std::vector<std::size_t>& labels,
                                            std::size_t bins = kEceBins) {
  std::vector<std::vector<double>> rows;
  rows.reserve(p_event.size());
  for (double p : p_event) rows.push_back({1.0 - p, p});
  return calibration(rows, labels, bins);
}

// Predictive entropy of one probability row (natural log).
inline double predictive_entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0) h -= v * std::log(v);
  }
  return h;
}

}  // namespace ur2m::metrics
