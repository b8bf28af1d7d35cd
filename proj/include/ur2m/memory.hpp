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

// Cost model: parameter bytes (persistent storage) and peak live activation
// bytes (working memory) from tensor liveness over a sequential layer graph.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ur2m/cascade_model.hpp"
#include "ur2m/quantize.hpp"

namespace ur2m::cost {

struct TensorInfo {
  std::string name;
  std::size_t bytes = 0;
};

struct LayerOp {
  std::string name;
  std::vector<std::size_t> inputs;   // tensor ids
  std::vector<std::size_t> outputs;  // tensor ids
};

// Ops execute in list order. A tensor is live from the op producing it
// (graph inputs: from op 0) through its last consumer; tensors never
// consumed stay live until the final op.
struct LayerGraph {
  std::vector<TensorInfo> tensors;
  std::vector<LayerOp> ops;

  std::size_t add_tensor(std::string name, std::size_t bytes) {
    tensors.push_back({std::move(name), bytes});
    return tensors.size() - 1;
  }

  struct Interval {
    std::size_t begin = 0, end = 0;
  };

  std::vector<Interval> liveness() const {
    const std::size_t n_ops = ops.size();
    std::vector<Interval> live(tensors.size());
    std::vector<bool> produced(tensors.size(), false), consumed(tensors.size(), false);
    for (std::size_t i = 0; i < n_ops; ++i) {
      for (std::size_t t : ops[i].outputs) {
        if (t >= tensors.size()) throw InvariantError("layer graph: bad tensor id in " + ops[i].name);
        live[t].begin = i;
        produced[t] = true;
      }
      for (std::size_t t : ops[i].inputs) {
        if (t >= tensors.size()) throw InvariantError("layer graph: bad tensor id in " + ops[i].name);
        live[t].end = i;
        consumed[t] = true;
      }
    }
    for (std::size_t t = 0; t < tensors.size(); ++t) {
      if (!produced[t]) live[t].begin = 0;
      if (!consumed[t]) live[t].end = n_ops ? n_ops - 1 : 0;
    }
    return live;
  }

  std::size_t peak_bytes() const {
    const auto live = liveness();
    std::size_t peak = 0;
    for (std::size_t i = 0; i < std::max<std::size_t>(ops.size(), 1); ++i) {
      std::size_t sum = 0;
      for (std::size_t t = 0; t < tensors.size(); ++t) {
        if (live[t].begin <= i && i <= live[t].end) sum += tensors[t].bytes;
      }
      peak = std::max(peak, sum);
    }
    return peak;
  }
};

// Layer graph of the cascade up to `depth`; ReLUs run in place, each head
// reads its stage's pooled vector.
inline LayerGraph cascade_graph(const BackboneConfig& cfg, Depth depth, std::size_t elem_bytes) {
  LayerGraph g;
  const auto [c_in, h, w] = cfg.input_shape;
  const std::size_t l = cfg.channels;
  const std::size_t map_bytes = l * h * w * elem_bytes;
  std::size_t x = g.add_tensor("input", c_in * h * w * elem_bytes);
  const std::size_t stem_out = g.add_tensor("stem.out", map_bytes);
  g.ops.push_back({"stem", {x}, {stem_out}});
  x = stem_out;
  for (std::size_t s = 0; s <= stage_index(depth); ++s) {
    for (std::size_t b = cfg.stage_begin(s); b < cfg.stage_end(s); ++b) {
      const std::string p = "block" + std::to_string(b);
      for (const char* part : {".expand", ".depthwise", ".project"}) {
        const std::size_t y = g.add_tensor(p + part + ".out", map_bytes);
        g.ops.push_back({p + part, {x}, {y}});
        x = y;
      }
    }
    const std::size_t pooled = g.add_tensor("pool" + std::to_string(s), l * elem_bytes);
    g.ops.push_back({"pool" + std::to_string(s), {x}, {pooled}});
    for (std::size_t c = 0; c < cfg.events; ++c) {
      const std::string name = "head" + std::to_string(s) + "." + std::to_string(c);
      const std::size_t z = g.add_tensor(name + ".logits", 2 * elem_bytes);
      g.ops.push_back({name, {pooled}, {z}});
    }
  }
  return g;
}

struct CostReport {
  std::size_t param_count = 0;
  std::size_t param_bytes = 0;
  std::size_t peak_activation_bytes = 0;  // deep path
  std::array<std::uint64_t, kStages> macs{};
  std::array<std::size_t, kStages> peak_by_depth{};
};

inline CostReport estimate_memory(const CascadeModel<float>& model) {
  CostReport r;
  r.param_count = model.param_count();
  r.param_bytes = r.param_count * sizeof(float);
  for (std::size_t s = 0; s < kStages; ++s) {
    r.macs[s] = count_macs(model.config, static_cast<Depth>(s));
    r.peak_by_depth[s] = cascade_graph(model.config, static_cast<Depth>(s), sizeof(float)).peak_bytes();
  }
  r.peak_activation_bytes = r.peak_by_depth.back();
  return r;
}

inline CostReport estimate_memory(const quant::QuantizedModel& q) {
  const auto& cfg = q.backbone_config();
  CostReport r;
  r.param_count = q.float_model().param_count();
  r.param_bytes = q.total_param_bytes();
  for (std::size_t s = 0; s < kStages; ++s) {
    r.macs[s] = count_macs(cfg, static_cast<Depth>(s));
    r.peak_by_depth[s] = cascade_graph(cfg, static_cast<Depth>(s), 1).peak_bytes();
  }
  r.peak_activation_bytes = r.peak_by_depth.back();
  return r;
}

}  // namespace ur2m::cost
