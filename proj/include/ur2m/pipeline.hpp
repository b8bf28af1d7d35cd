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

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

#include "ur2m/dataset.hpp"
#include "ur2m/mfcc.hpp"
#include "ur2m/tensor.hpp"

namespace ur2m {

// Signal -> model input: MFCC features standardised per coefficient with
// statistics fitted on the training split. Stored inside model files so a
// model can be evaluated on raw signals.
struct InputPipeline {
  signal::FeatureConfig features;
  std::vector<float> mean;     // per MFCC coefficient
  std::vector<float> inv_std;  // per MFCC coefficient

  Tensor<float> operator()(std::span<const float> signal) const {
    return apply(signal::extract_mfcc(signal, features));
  }

  Tensor<float> apply(Tensor<float> mfcc) const {
    if (mean.empty()) return mfcc;
    const std::size_t rows = mfcc.dim(1), cols = mfcc.dim(2);
    if (rows != mean.size()) {
      throw DimensionError("input pipeline: " + std::to_string(rows) +
                           " coefficients vs " + std::to_string(mean.size()) + " statistics");
    }
    for (std::size_t k = 0; k < rows; ++k) {
      for (std::size_t t = 0; t < cols; ++t) {
        auto& v = mfcc.at(0, k, t);
        v = (v - mean[k]) * inv_std[k];
      }
    }
    return mfcc;
  }

  std::array<std::size_t, 3> input_shape(std::size_t signal_len) const {
    return {1, features.n_mfcc, features.frames_for(signal_len)};
  }
};

inline InputPipeline fit_pipeline(const data::Dataset& ds,
                                  const signal::FeatureConfig& features) {
  InputPipeline p;
  p.features = features;
  p.features.sample_rate = ds.sample_rate;
  const signal::MfccExtractor extract(p.features);
  const std::size_t k_n = p.features.n_mfcc;
  std::vector<double> sum(k_n, 0.0), sq(k_n, 0.0);
  std::size_t count = 0;
  for (const auto& s : ds.samples) {
    if (s.split != data::Split::kTrain) continue;
    const auto f = extract(std::span<const float>(s.signal));
    for (std::size_t k = 0; k < k_n; ++k) {
      for (std::size_t t = 0; t < f.dim(2); ++t) {
        const double v = f.at(0, k, t);
        sum[k] += v;
        sq[k] += v * v;
      }
    }
    count += f.dim(2);
  }
  if (count == 0) throw DataError("fit_pipeline: training split is empty");
  p.mean.resize(k_n);
  p.inv_std.resize(k_n);
  for (std::size_t k = 0; k < k_n; ++k) {
    const double m = sum[k] / static_cast<double>(count);
    const double var = std::max(sq[k] / static_cast<double>(count) - m * m, 0.0);
    p.mean[k] = static_cast<float>(m);
    p.inv_std[k] = static_cast<float>(1.0 / std::sqrt(var + 1e-8));
  }
  return p;
}

// Featurised split: one model input and one label vector per sample.
struct FeatureSet {
  std::vector<Tensor<float>> inputs;
  std::vector<std::vector<std::uint8_t>> labels;
  std::size_t events = 0;

  std::size_t size() const { return inputs.size(); }
};

inline FeatureSet featurize(const data::Dataset& ds, data::Split split,
                            const InputPipeline& pipeline) {
  FeatureSet fs;
  fs.events = ds.event_count();
  const signal::MfccExtractor extract(pipeline.features);
  for (const auto& s : ds.samples) {
    if (s.split != split) continue;
    fs.inputs.push_back(pipeline.apply(extract(std::span<const float>(s.signal))));
    fs.labels.push_back(s.labels);
  }
  return fs;
}

inline void to_json(nlohmann::ordered_json& j, const InputPipeline& p) {
  j = nlohmann::ordered_json{{"sample_rate", p.features.sample_rate},
                             {"frame_len_ms", p.features.frame_len_ms},
                             {"hop_ms", p.features.hop_ms},
                             {"n_mels", p.features.n_mels},
                             {"n_mfcc", p.features.n_mfcc},
                             {"mean", p.mean},
                             {"inv_std", p.inv_std}};
}

inline InputPipeline pipeline_from_json(const nlohmann::json& j) {
  InputPipeline p;
  p.features.sample_rate = j.at("sample_rate").get<double>();
  p.features.frame_len_ms = j.at("frame_len_ms").get<double>();
  p.features.hop_ms = j.at("hop_ms").get<double>();
  p.features.n_mels = j.at("n_mels").get<std::size_t>();
  p.features.n_mfcc = j.at("n_mfcc").get<std::size_t>();
  p.mean = j.at("mean").get<std::vector<float>>();
  p.inv_std = j.at("inv_std").get<std::vector<float>>();
  return p;
}

}  // namespace ur2m
