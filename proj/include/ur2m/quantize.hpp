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

// Post-training int8 quantization, simulated: int8 weights (per-tensor
// symmetric) and calibrated per-tensor affine activations, with
// quantize-dequantize around every conv / linear and f32 accumulation.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "ur2m/cascade_model.hpp"
#include "ur2m/errors.hpp"

namespace ur2m::quant {

inline constexpr int kQMin = -128;
inline constexpr int kQMax = 127;

struct QuantParams {
  double scale = 1.0;
  int zero_point = 0;

  // Round half away from zero, then clamp.
  std::int8_t quantize(double x) const {
    const double q = std::round(x / scale) + zero_point;
    return static_cast<std::int8_t>(std::clamp(q, double(kQMin), double(kQMax)));
  }
  double dequantize(std::int8_t q) const { return (static_cast<int>(q) - zero_point) * scale; }
};

// Symmetric weights: zero point 0, scale = max|w| / 127 (1 for all-zero).
template <typename Range>
QuantParams symmetric_params(const Range& values) {
  double m = 0.0;
  for (auto v : values) m = std::max(m, std::abs(static_cast<double>(v)));
  return {m > 0.0 ? m / kQMax : 1.0, 0};
}

// Affine activations from an observed [lo, hi], widened to contain 0.
inline QuantParams affine_params(double lo, double hi) {
  lo = std::min(lo, 0.0);
  hi = std::max(hi, 0.0);
  if (!(hi > lo)) return {1.0, 0};
  const double scale = (hi - lo) / double(kQMax - kQMin);
  const double zp = std::round(kQMin - lo / scale);
  return {scale, static_cast<int>(std::clamp(zp, double(kQMin), double(kQMax)))};
}

struct QuantizedTensor {
  std::string name;
  Shape shape;
  std::vector<std::int8_t> values;
  QuantParams params;

  std::vector<float> dequantized() const {
    std::vector<float> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      out[i] = static_cast<float>(params.dequantize(values[i]));
    }
    return out;
  }
};

inline QuantizedTensor quantize_tensor(const std::string& name, const Tensor<float>& w) {
  QuantizedTensor q;
  q.name = name;
  q.shape = w.shape();
  q.params = symmetric_params(w.values());
  q.values.reserve(w.size());
  for (float v : w.values()) q.values.push_back(q.params.quantize(v));
  return q;
}

inline bool is_weight_name(const std::string& name) {
  return name.size() > 7 && name.compare(name.size() - 7, 7, ".weight") == 0;
}

class QuantizedModel {
 public:
  std::vector<QuantizedTensor> weights;           // every conv / linear weight
  std::map<std::string, QuantParams> activations;  // hook name -> params

  // Rebuilds the float execution model from int8 weights and f32 biases.
  void bind(CascadeModel<float> base) {
    model_ = std::move(base);
    std::map<std::string, const QuantizedTensor*> by_name;
    for (const auto& q : weights) by_name[q.name] = &q;
    for (auto& p : model_.parameters()) {
      if (!is_weight_name(p.name)) continue;
      const auto it = by_name.find(p.name);
      if (it == by_name.end()) throw InvariantError("quantized model: missing weight " + p.name);
      if (it->second->shape != p.tensor->shape()) {
        throw InvariantError("quantized model: shape mismatch for " + p.name);
      }
      p.tensor->values() = it->second->dequantized();
    }
  }

  const CascadeModel<float>& float_model() const { return model_; }
  const BackboneConfig& backbone_config() const { return model_.config; }

  StageOutput<float> run_stage(std::size_t s, const Tensor<float>& x) const {
    const ActivationHook<float> hook = [this](const std::string& name, Tensor<float>& a) {
      const auto it = activations.find(name);
      if (it == activations.end()) throw InvariantError("quantized model: uncalibrated activation " + name);
      for (auto& v : a.data()) v = static_cast<float>(it->second.dequantize(it->second.quantize(v)));
    };
    return model_.run_stage(s, x, &hook);
  }

  std::vector<StageOutput<float>> forward(const Tensor<float>& x, Depth depth) const {
    std::vector<StageOutput<float>> outs;
    Tensor<float> h = x;
    for (std::size_t s = 0; s <= stage_index(depth); ++s) {
      outs.push_back(run_stage(s, h));
      h = outs.back().features;
    }
    return outs;
  }

  // Bytes of the int8 weight payload.
  std::size_t int8_weight_bytes() const {
    std::size_t n = 0;
    for (const auto& q : weights) n += q.values.size();
    return n;
  }
  // int8 weights + f32 biases + one f32 scale and one int32 zero point per
  // quantized tensor.
  std::size_t total_param_bytes() const {
    std::size_t n = int8_weight_bytes() + weights.size() * 8;
    for (const auto& [name, t] : model_.named_tensors()) {
      if (!is_weight_name(name)) n += t->size() * sizeof(float);
    }
    return n;
  }

 private:
  CascadeModel<float> model_;
};

// Observed [min, max] of every hooked activation over a calibration set,
// evaluated through all three stages.
inline std::map<std::string, std::pair<double, double>> calibrate_ranges(
    const CascadeModel<float>& model, const std::vector<Tensor<float>>& calibration) {
  if (calibration.empty()) throw DataError("quantize: empty calibration set");
  std::map<std::string, std::pair<double, double>> ranges;
  const ActivationHook<float> observe = [&ranges](const std::string& name, Tensor<float>& a) {
    auto [it, inserted] = ranges.try_emplace(name, std::numeric_limits<double>::infinity(),
                                             -std::numeric_limits<double>::infinity());
    for (float v : a.values()) {
      it->second.first = std::min(it->second.first, double(v));
      it->second.second = std::max(it->second.second, double(v));
    }
  };
  for (const auto& x : calibration) model.forward(x, Depth::kDeep, &observe);
  return ranges;
}

inline QuantizedModel quantize_model(const CascadeModel<float>& model,
                                     const std::vector<Tensor<float>>& calibration) {
  QuantizedModel q;
  for (const auto& [name, ranges] : calibrate_ranges(model, calibration)) {
    q.activations[name] = affine_params(ranges.first, ranges.second);
  }
  for (const auto& [name, t] : model.named_tensors()) {
    if (is_weight_name(name)) q.weights.push_back(quantize_tensor(name, *t));
  }
  q.bind(model);
  return q;
}

}  // namespace ur2m::quant
