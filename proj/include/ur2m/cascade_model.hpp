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

// Nested three-exit backbone: a 3x3 stem followed by O depthwise blocks
// (1x1 -> 3x3 depthwise -> 1x1, ReLU after each conv, constant width L)
// split into shallow / medium / deep stages. Every stage carries C
// independent evidence heads (global average pool -> linear L -> 2).

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ur2m/evidence.hpp"
#include "ur2m/layers.hpp"
#include "ur2m/pipeline.hpp"
#include "ur2m/tensor.hpp"

namespace ur2m {

inline constexpr std::array<std::size_t, 12> kChannelGrid{32,  64,  96,  128, 160, 192,
                                                          224, 256, 320, 384, 448, 512};
inline constexpr std::array<std::size_t, 5> kBlockGrid{3, 4, 5, 6, 7};
inline constexpr std::size_t kStages = 3;

enum class Depth : std::size_t { kShallow = 0, kMedium = 1, kDeep = 2 };

inline std::size_t stage_index(Depth d) { return static_cast<std::size_t>(d); }

// floor(O/3) blocks per stage; the remainder goes to the deepest stages.
inline std::array<std::size_t, 3> default_partition(std::size_t blocks) {
  std::array<std::size_t, 3> p{};
  p.fill(blocks / 3);
  std::size_t rem = blocks % 3;
  for (std::size_t s = kStages; rem > 0; --s, --rem) ++p[s - 1];
  return p;
}

struct BackboneConfig {
  std::size_t channels = 32;  // L
  std::size_t blocks = 3;     // O
  std::array<std::size_t, 3> partition{1, 1, 1};
  std::array<std::size_t, 3> input_shape{1, 10, 24};  // (C_in, H, W)
  std::size_t events = 1;                             // C
  bool off_grid = false;  // allow test-scale L and O outside the search grid

  static BackboneConfig make(std::size_t channels, std::size_t blocks,
                             std::array<std::size_t, 3> input_shape, std::size_t events,
                             bool off_grid = false) {
    BackboneConfig c;
    c.channels = channels;
    c.blocks = blocks;
    c.partition = default_partition(blocks);
    c.input_shape = input_shape;
    c.events = events;
    c.off_grid = off_grid;
    return c;
  }

  std::size_t stage_begin(std::size_t s) const {
    std::size_t b = 0;
    for (std::size_t i = 0; i < s; ++i) b += partition[i];
    return b;
  }
  std::size_t stage_end(std::size_t s) const { return stage_begin(s) + partition[s]; }

  void validate() const {
    if (events == 0) throw ConfigError("backbone: events must be >= 1");
    if (channels == 0) throw ConfigError("backbone: channels must be >= 1");
    if (input_shape[0] == 0 || input_shape[1] == 0 || input_shape[2] == 0) {
      throw ConfigError("backbone: input shape has a zero dimension");
    }
    if (!off_grid) {
      if (std::find(kChannelGrid.begin(), kChannelGrid.end(), channels) == kChannelGrid.end()) {
        throw ConfigError("backbone: channels L=" + std::to_string(channels) +
                          " not in the search grid (use the off-grid override)");
      }
      if (blocks < 3 || blocks > 7) {
        throw ConfigError("backbone: block count O=" + std::to_string(blocks) +
                          " outside [3,7] (use the off-grid override)");
      }
    } else if (blocks == 0) {
      throw ConfigError("backbone: block count must be >= 1");
    }
    if (partition[0] + partition[1] + partition[2] != blocks) {
      throw ConfigError("backbone: stage partition does not sum to O=" + std::to_string(blocks));
    }
    const bool allow_empty_stage = off_grid && blocks < kStages;
    for (auto p : partition) {
      if (p == 0 && !allow_empty_stage) {
        throw ConfigError("backbone: every stage needs at least one block");
      }
    }
  }

  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

inline void to_json(nlohmann::ordered_json& j, const BackboneConfig& c) {
  j = nlohmann::ordered_json{{"channels", c.channels},       {"blocks", c.blocks},
                             {"partition", c.partition},     {"input_shape", c.input_shape},
                             {"events", c.events},           {"off_grid", c.off_grid}};
}

inline BackboneConfig backbone_from_json(const nlohmann::json& j) {
  BackboneConfig c;
  c.channels = j.at("channels").get<std::size_t>();
  c.blocks = j.at("blocks").get<std::size_t>();
  c.partition = j.at("partition").get<std::array<std::size_t, 3>>();
  c.input_shape = j.at("input_shape").get<std::array<std::size_t, 3>>();
  c.events = j.at("events").get<std::size_t>();
  c.off_grid = j.value("off_grid", false);
  return c;
}

// ---- cost accounting ------------------------------------------------------

// MACs of one constant-width block on an H x W map: H W L (2L + 9).
inline std::uint64_t block_macs(std::size_t channels, std::size_t h, std::size_t w) {
  const std::uint64_t l = channels;
  return static_cast<std::uint64_t>(h) * w * l * (2 * l + 9);
}

// MACs to produce every exit up to and including `depth`: stem, blocks of
// the computed stages, and per stage one shared pooling pass plus C linear
// heads.
inline std::uint64_t count_macs(const BackboneConfig& c, Depth depth) {
  const std::uint64_t h = c.input_shape[1], w = c.input_shape[2], l = c.channels;
  std::uint64_t macs = h * w * l * 9 * c.input_shape[0];
  for (std::size_t s = 0; s <= stage_index(depth); ++s) {
    macs += c.partition[s] * block_macs(c.channels, c.input_shape[1], c.input_shape[2]);
    macs += l * h * w;                 // average pool
    macs += c.events * 2 * l;          // heads
  }
  return macs;
}

inline std::uint64_t count_params(const BackboneConfig& c) {
  const std::uint64_t l = c.channels;
  const std::uint64_t stem = 9 * c.input_shape[0] * l + l;
  const std::uint64_t block = 2 * (l * l + l) + 9 * l + l;
  const std::uint64_t heads = kStages * c.events * (2 * l + 2);
  return stem + c.blocks * block + heads;
}

// ---- model ----------------------------------------------------------------

template <std::floating_point T>
struct DepthwiseBlock {
  nn::Conv2d<T> expand;     // 1x1, L -> L
  nn::Conv2d<T> depthwise;  // 3x3, groups = L
  nn::Conv2d<T> project;    // 1x1, L -> L
};

template <std::floating_point T>
struct StageOutput {
  std::size_t stage = 0;
  Tensor<T> features;                          // (L, H, W)
  std::vector<std::array<T, 2>> logits;        // (event, no-event) per head
  std::vector<edl::BetaEvidence<T>> evidence;  // one per event
};

// Observes or rewrites activations: called with every conv / linear input
// and with each head's logits. Used for calibration and fake quantization.
template <std::floating_point T>
using ActivationHook = std::function<void(const std::string& name, Tensor<T>& activation)>;

template <std::floating_point T>
class CascadeModel {
 public:
  BackboneConfig config;
  InputPipeline pipeline;
  nn::Conv2d<T> stem;
  std::vector<DepthwiseBlock<T>> blocks;
  std::array<std::vector<nn::Linear<T>>, 3> heads;

  // Activations cached by a training forward pass of one stage.
  struct BlockCache {
    Tensor<T> y1, y2, y3;  // post-ReLU outputs of the three convs
  };
  struct StageCache {
    Tensor<T> input;
    Tensor<T> stem_out;  // stage 0 only
    std::vector<BlockCache> blocks;
    Tensor<T> pooled;
    std::vector<std::array<T, 2>> logits;

    const Tensor<T>& features() const {
      if (!blocks.empty()) return blocks.back().y3;
      return stem_out.empty() ? input : stem_out;
    }
  };

  StageOutput<T> run_stage(std::size_t s, const Tensor<T>& input,
                           const ActivationHook<T>* hook = nullptr) const {
    StageOutput<T> out;
    out.stage = s;
    Tensor<T> x = input;
    if (s == 0) {
      check_input(x);
      x = nn::relu(stem.forward(observe(hook, "stem", x)));
    }
    for (std::size_t b = config.stage_begin(s); b < config.stage_end(s); ++b) {
      const auto& blk = blocks[b];
      const std::string prefix = "block" + std::to_string(b);
      x = nn::relu(blk.expand.forward(observe(hook, prefix + ".expand", x)));
      x = nn::relu(blk.depthwise.forward(observe(hook, prefix + ".depthwise", x)));
      x = nn::relu(blk.project.forward(observe(hook, prefix + ".project", x)));
    }
    out.features = std::move(x);
    const Tensor<T> pooled = nn::global_avg_pool(out.features);
    for (std::size_t c = 0; c < config.events; ++c) {
      const std::string name = head_name(s, c);
      Tensor<T> z = heads[s][c].forward(observe(hook, name, pooled));
      if (hook) (*hook)(name + ".logits", z);
      out.logits.push_back({z[0], z[1]});
      out.evidence.push_back(edl::evidence_from_logits(z[0], z[1]));
    }
    return out;
  }

  std::vector<StageOutput<T>> forward(const Tensor<T>& x, Depth depth,
                                      const ActivationHook<T>* hook = nullptr) const {
    std::vector<StageOutput<T>> outs;
    const Tensor<T>* input = &x;
    for (std::size_t s = 0; s <= stage_index(depth); ++s) {
      outs.push_back(run_stage(s, *input, hook));
      input = &outs.back().features;
    }
    return outs;
  }

  StageCache forward_stage_cached(std::size_t s, const Tensor<T>& input) const {
    StageCache cache;
    cache.input = input;
    const Tensor<T>* x = &cache.input;
    if (s == 0) {
      check_input(input);
      cache.stem_out = nn::relu(stem.forward(input));
      x = &cache.stem_out;
    }
    for (std::size_t b = config.stage_begin(s); b < config.stage_end(s); ++b) {
      const auto& blk = blocks[b];
      BlockCache bc;
      bc.y1 = nn::relu(blk.expand.forward(*x));
      bc.y2 = nn::relu(blk.depthwise.forward(bc.y1));
      bc.y3 = nn::relu(blk.project.forward(bc.y2));
      cache.blocks.push_back(std::move(bc));
      x = &cache.blocks.back().y3;
    }
    cache.pooled = nn::global_avg_pool(cache.features());
    for (std::size_t c = 0; c < config.events; ++c) {
      const Tensor<T> z = heads[s][c].forward(cache.pooled);
      cache.logits.push_back({z[0], z[1]});
    }
    return cache;
  }

  // Backpropagates head-logit gradients (and optionally a gradient arriving
  // from the next stage) through stage s, accumulating parameter gradients.
  // Returns the gradient with respect to the stage input when requested.
  Tensor<T> backward_stage(std::size_t s, const StageCache& cache,
                           std::span<const std::array<T, 2>> grad_logits,
                           const Tensor<T>* grad_features = nullptr,
                           bool need_input_grad = false) {
    const Tensor<T>& features = cache.features();
    Tensor<T> grad_pooled({config.channels});
    for (std::size_t c = 0; c < config.events; ++c) {
      Tensor<T> gz({2});
      gz[0] = grad_logits[c][0];
      gz[1] = grad_logits[c][1];
      const Tensor<T> gp = heads[s][c].backward(cache.pooled, gz);
      for (std::size_t i = 0; i < gp.size(); ++i) grad_pooled[i] += gp[i];
    }
    Tensor<T> g = nn::global_avg_pool_backward(features.shape(), grad_pooled);
    if (grad_features) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += (*grad_features)[i];
    }
    const std::size_t begin = config.stage_begin(s);
    for (std::size_t k = cache.blocks.size(); k-- > 0;) {
      auto& blk = blocks[begin + k];
      const auto& bc = cache.blocks[k];
      const Tensor<T>& block_in =
          k > 0 ? cache.blocks[k - 1].y3 : (s == 0 ? cache.stem_out : cache.input);
      g = blk.project.backward(bc.y2, nn::relu_backward(bc.y3, std::move(g)));
      g = blk.depthwise.backward(bc.y1, nn::relu_backward(bc.y2, std::move(g)));
      const bool need = k > 0 || s == 0 || need_input_grad;
      g = blk.expand.backward(block_in, nn::relu_backward(bc.y1, std::move(g)), need);
    }
    if (s == 0) {
      g = stem.backward(cache.input, nn::relu_backward(cache.stem_out, std::move(g)),
                        need_input_grad);
    }
    return g;
  }

  std::vector<ParamRef<T>> stage_parameters(std::size_t s) {
    std::vector<ParamRef<T>> ps;
    if (s == 0) {
      ps.push_back({"stem.weight", &stem.weight});
      ps.push_back({"stem.bias", &stem.bias});
    }
    for (std::size_t b = config.stage_begin(s); b < config.stage_end(s); ++b) {
      const std::string p = "block" + std::to_string(b);
      ps.push_back({p + ".expand.weight", &blocks[b].expand.weight});
      ps.push_back({p + ".expand.bias", &blocks[b].expand.bias});
      ps.push_back({p + ".depthwise.weight", &blocks[b].depthwise.weight});
      ps.push_back({p + ".depthwise.bias", &blocks[b].depthwise.bias});
      ps.push_back({p + ".project.weight", &blocks[b].project.weight});
      ps.push_back({p + ".project.bias", &blocks[b].project.bias});
    }
    for (std::size_t c = 0; c < config.events; ++c) {
      ps.push_back({head_name(s, c) + ".weight", &heads[s][c].weight});
      ps.push_back({head_name(s, c) + ".bias", &heads[s][c].bias});
    }
    return ps;
  }

  std::vector<ParamRef<T>> parameters() {
    std::vector<ParamRef<T>> all;
    for (std::size_t s = 0; s < kStages; ++s) {
      auto ps = stage_parameters(s);
      all.insert(all.end(), ps.begin(), ps.end());
    }
    return all;
  }

  // (name, tensor) pairs in canonical order; used by serialization.
  std::vector<std::pair<std::string, const Tensor<T>*>> named_tensors() const {
    auto* self = const_cast<CascadeModel*>(this);
    std::vector<std::pair<std::string, const Tensor<T>*>> out;
    for (const auto& p : self->parameters()) out.emplace_back(p.name, p.tensor);
    return out;
  }

  void set_requires_grad(bool on) {
    for (auto& p : parameters()) p.tensor->set_requires_grad(on);
  }
  void zero_grad() {
    for (auto& p : parameters()) p.tensor->zero_grad();
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named_tensors()) n += t->size();
    return n;
  }

  template <std::floating_point U>
  CascadeModel<U> cast() const {
    CascadeModel<U> m;
    m.config = config;
    m.pipeline = pipeline;
    auto conv = [](const nn::Conv2d<T>& c) {
      return nn::Conv2d<U>{c.weight.template cast<U>(), c.bias.template cast<U>(), c.groups,
                           c.padding};
    };
    m.stem = conv(stem);
    for (const auto& b : blocks) {
      m.blocks.push_back({conv(b.expand), conv(b.depthwise), conv(b.project)});
    }
    for (std::size_t s = 0; s < kStages; ++s) {
      for (const auto& h : heads[s]) {
        m.heads[s].push_back({h.weight.template cast<U>(), h.bias.template cast<U>()});
      }
    }
    return m;
  }

  static std::string head_name(std::size_t s, std::size_t c) {
    return "head" + std::to_string(s) + "." + std::to_string(c);
  }

 private:
  void check_input(const Tensor<T>& x) const {
    const Shape want{config.input_shape[0], config.input_shape[1], config.input_shape[2]};
    if (x.shape() != want) {
      throw DimensionError("cascade forward: input shape " + shape_str(x.shape()) +
                           " does not match model input " + shape_str(want));
    }
  }
  static const Tensor<T>& observe(const ActivationHook<T>* hook, const std::string& name,
                                  const Tensor<T>& x) {
    if (!hook) return x;
    thread_local Tensor<T> scratch;
    scratch = x;
    (*hook)(name, scratch);
    return scratch;
  }
};

namespace detail {

template <std::floating_point T>
Tensor<T> kaiming_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> d(-bound, bound);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(d(rng));
  return t;
}

template <std::floating_point T>
nn::Conv2d<T> make_conv(std::size_t c_in, std::size_t c_out, std::size_t k,
                        std::size_t groups, std::mt19937_64& rng) {
  nn::Conv2d<T> conv;
  conv.groups = groups;
  conv.padding = nn::Padding::kSame;
  conv.weight = kaiming_uniform<T>({c_out, c_in / groups, k, k}, c_in / groups * k * k, rng);
  conv.bias = Tensor<T>({c_out});
  return conv;
}

}  // namespace detail

// Conv layers: Kaiming-uniform (fan-in) weights, zero biases, drawn in a
// fixed order (stem, then blocks). Heads start with zero weights and a unit
// bias on both logits: every head emits alpha = beta = 2 for any input, and
// the ReLU evidence units begin in their active region.
inline constexpr double kHeadBiasInit = 1.0;

template <std::floating_point T = float>
CascadeModel<T> build_model(const BackboneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  CascadeModel<T> m;
  m.config = cfg;
  const std::size_t l = cfg.channels;
  m.stem = detail::make_conv<T>(cfg.input_shape[0], l, 3, 1, rng);
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    DepthwiseBlock<T> blk;
    blk.expand = detail::make_conv<T>(l, l, 1, 1, rng);
    blk.depthwise = detail::make_conv<T>(l, l, 3, l, rng);
    blk.project = detail::make_conv<T>(l, l, 1, 1, rng);
    m.blocks.push_back(std::move(blk));
  }
  for (std::size_t s = 0; s < kStages; ++s) {
    for (std::size_t c = 0; c < cfg.events; ++c) {
      nn::Linear<T> head;
      head.weight = Tensor<T>({2, l});
      head.bias = Tensor<T>({2}, static_cast<T>(kHeadBiasInit));
      m.heads[s].push_back(std::move(head));
    }
  }
  return m;
}

}  // namespace ur2m
