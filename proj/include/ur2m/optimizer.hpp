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
#include <string>
#include <vector>

#include "ur2m/tensor.hpp"

namespace ur2m::nn {

enum class OptimizerKind { kSgd, kAdam };

// Optimizer state. Moment buffers are bound to the parameter list on the
// first step; later steps must pass parameters of the same shapes.
class Optimizer {
 public:
  explicit Optimizer(OptimizerKind kind = OptimizerKind::kAdam, double lr = 1e-3,
                     double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : kind_(kind), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (!(lr > 0)) throw ConfigError("optimizer: lr must be > 0");
  }

  OptimizerKind kind() const { return kind_; }
  double lr() const { return lr_; }
  std::uint64_t steps() const { return steps_; }

  template <typename T>
  void step(std::span<const ParamRef<T>> params) {
    for (const auto& p : params) {
      if (p.tensor->grad().size() != p.tensor->size()) {
        throw DimensionError("optimizer: parameter '" + p.name +
                             "' has no gradient buffer");
      }
      for (T g : p.tensor->grad()) {
        if (!std::isfinite(g)) {
          throw TrainingError("optimizer: non-finite gradient in parameter '" +
                              p.name + "'");
        }
      }
    }
    ++steps_;
    if (kind_ == OptimizerKind::kSgd) {
      for (const auto& p : params) {
        auto data = p.tensor->data();
        auto grad = p.tensor->grad();
        for (std::size_t i = 0; i < data.size(); ++i) {
          data[i] -= static_cast<T>(lr_ * grad[i]);
        }
      }
      return;
    }
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.tensor->size(), 0.0);
        v_.emplace_back(p.tensor->size(), 0.0);
      }
    }
    if (m_.size() != params.size()) {
      throw DimensionError("optimizer: parameter count changed from " +
                           std::to_string(m_.size()) + " to " +
                           std::to_string(params.size()));
    }
    const double t = static_cast<double>(steps_);
    const double bc1 = 1.0 - std::pow(beta1_, t);
    const double bc2 = 1.0 - std::pow(beta2_, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto data = params[k].tensor->data();
      auto grad = params[k].tensor->grad();
      auto& m = m_[k];
      auto& v = v_[k];
      if (m.size() != data.size()) {
        throw DimensionError("optimizer: moment buffer for '" + params[k].name +
                             "' does not match parameter shape");
      }
      for (std::size_t i = 0; i < data.size(); ++i) {
        const double g = grad[i];
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        data[i] -= static_cast<T>(lr_ * m_hat / (std::sqrt(v_hat) + eps_));
      }
    }
  }

  template <typename T>
  void step(const std::vector<ParamRef<T>>& params) {
    step(std::span<const ParamRef<T>>(params));
  }

 private:
  OptimizerKind kind_;
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t steps_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace ur2m::nn
