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

// Softmax baselines: a single deep backbone with one C-way softmax head,
// a deep ensemble of such models, and test-time jitter augmentation.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ur2m/cascade_model.hpp"
#include "ur2m/layers.hpp"
#include "ur2m/optimizer.hpp"
#include "ur2m/pipeline.hpp"
#include "ur2m/train.hpp"

namespace ur2m::baseline {

enum class Kind { kSoftmaxSingle, kDeepEnsemble, kInputAug };

inline std::string to_string(Kind k) {
  switch (k) {
    case Kind::kSoftmaxSingle: return "softmax_single";
    case Kind::kDeepEnsemble: return "deep_ensemble";
    case Kind::kInputAug: return "input_aug";
  }
  return "?";
}

inline Kind parse_kind(const std::string& s) {
  if (s == "softmax_single") return Kind::kSoftmaxSingle;
  if (s == "deep_ensemble") return Kind::kDeepEnsemble;
  if (s == "input_aug") return Kind::kInputAug;
  throw ConfigError("unknown baseline '" + s +
                    "' (expected softmax_single|deep_ensemble|input_aug)");
}

inline constexpr std::size_t kEnsembleMembers = 5;
inline constexpr std::size_t kAugCopies = 5;
inline constexpr double kAugSigma = 0.03;

// Target class of a label vector: index of the first active event.
inline std::size_t target_class(const std::vector<std::uint8_t>& labels) {
  const auto it = std::find(labels.begin(), labels.end(), std::uint8_t{1});
  if (it == labels.end()) throw DataError("softmax baseline: sample without an active event");
  return static_cast<std::size_t>(it - labels.begin());
}

// Stem + all blocks + global pooling + linear L -> C + softmax. The backbone
// is stored as a cascade model whose evidence heads are unused.
template <std::floating_point T>
struct SoftmaxModel {
  CascadeModel<T> backbone;
  nn::Linear<T> classifier;

  std::vector<T> logits(const Tensor<T>& x) const {
    Tensor<T> h = x;
    for (std::size_t s = 0; s < kStages; ++s) h = backbone.run_stage(s, h).features;
    const Tensor<T> z = classifier.forward(nn::global_avg_pool(h));
    return z.values();
  }

  std::vector<double> probabilities(const Tensor<T>& x) const {
    const auto z = logits(x);
    Tensor<T> zt({z.size()}, std::vector<T>(z));
    const Tensor<T> p = nn::softmax(zt);
    return {p.values().begin(), p.values().end()};
  }

  std::vector<ParamRef<T>> parameters() {
    std::vector<ParamRef<T>> ps;
    for (auto& p : backbone.parameters()) {
      if (p.name.rfind("head", 0) != 0) ps.push_back(p);
    }
    ps.push_back({"classifier.weight", &classifier.weight});
    ps.push_back({"classifier.bias", &classifier.bias});
    return ps;
  }

  std::vector<std::pair<std::string, const Tensor<T>*>> named_tensors() const {
    std::vector<std::pair<std::string, const Tensor<T>*>> out;
    for (const auto& p : const_cast<SoftmaxModel*>(this)->parameters()) {
      out.emplace_back(p.name, p.tensor);
    }
    return out;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named_tensors()) n += t->size();
    return n;
  }
};

template <std::floating_point T = float>
SoftmaxModel<T> build_softmax_model(const BackboneConfig& cfg, std::uint64_t seed) {
  SoftmaxModel<T> m;
  m.backbone = build_model<T>(cfg, seed);
  std::mt19937_64 rng(seed ^ 0x5f0f7a3bULL);
  m.classifier.weight = detail::kaiming_uniform<T>({cfg.events, cfg.channels}, cfg.channels, rng);
  m.classifier.bias = Tensor<T>({cfg.events});
  return m;
}

namespace detail {

// Mean cross-entropy over the batch; accumulates parameter gradients.
template <std::floating_point T>
double softmax_loss_and_grad(SoftmaxModel<T>& m, const std::vector<const Tensor<T>*>& xs,
                             const std::vector<std::size_t>& targets) {
  using Cache = typename CascadeModel<T>::StageCache;
  const double scale = 1.0 / static_cast<double>(xs.size());
  const std::size_t events = m.backbone.config.events;
  const std::vector<std::array<T, 2>> no_head_grad(events, {T(0), T(0)});
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::array<Cache, kStages> caches;
    const Tensor<T>* h = xs[i];
    for (std::size_t s = 0; s < kStages; ++s) {
      caches[s] = m.backbone.forward_stage_cached(s, *h);
      h = &caches[s].features();
    }
    const Tensor<T>& pooled = caches[kStages - 1].pooled;
    const Tensor<T> p = nn::softmax(m.classifier.forward(pooled));
    const std::size_t y = targets[i];
    total += -std::log(std::max(static_cast<double>(p[y]), 1e-12)) * scale;
    Tensor<T> gz({events});
    for (std::size_t c = 0; c < events; ++c) {
      gz[c] = static_cast<T>((static_cast<double>(p[c]) - (c == y ? 1.0 : 0.0)) * scale);
    }
    const Tensor<T> g_pooled = m.classifier.backward(pooled, gz);
    Tensor<T> g = nn::global_avg_pool_backward(caches[kStages - 1].features().shape(), g_pooled);
    for (std::size_t s = kStages; s-- > 0;) {
      g = m.backbone.backward_stage(s, caches[s], no_head_grad, &g, s > 0);
    }
  }
  return total;
}

}  // namespace detail

// One training run with cross-entropy; early stopping on validation
// accuracy (ties broken by validation loss), best checkpoint restored.
template <std::floating_point T>
train::PhaseReport train_softmax(SoftmaxModel<T>& m, const FeatureSet& data,
                                 const train::TrainHyper& hyper) {
  hyper.validate();
  if (data.events != m.backbone.config.events) {
    throw ModelMismatchError("softmax baseline: data/model event count mismatch");
  }
  const auto holdout = train::stratified_split(data.labels, hyper.val_fraction, hyper.seed);
  if (holdout.train.empty()) throw DataError("softmax baseline: empty training split");
  std::vector<Tensor<T>> inputs;
  std::vector<std::size_t> targets;
  for (std::size_t i = 0; i < data.size(); ++i) {
    inputs.push_back(data.inputs[i].template cast<T>());
    targets.push_back(target_class(data.labels[i]));
  }
  const auto& monitor = holdout.val.empty() ? holdout.train : holdout.val;

  for (auto& p : m.backbone.parameters()) p.tensor->set_requires_grad(true);
  m.classifier.weight.set_requires_grad(true);
  m.classifier.bias.set_requires_grad(true);
  auto params = m.parameters();
  nn::Optimizer opt(nn::OptimizerKind::kAdam, hyper.lr);

  auto evaluate = [&]() {
    std::size_t hit = 0;
    double loss = 0.0;
    for (std::size_t i : monitor) {
      const auto p = m.probabilities(inputs[i]);
      const auto pred = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
      hit += pred == targets[i];
      loss -= std::log(std::max(p[targets[i]], 1e-12));
    }
    const double n = static_cast<double>(monitor.size());
    return std::pair{loss / n, static_cast<double>(hit) / n};
  };
  auto snapshot = [&]() {
    std::vector<std::vector<T>> snap;
    for (const auto& p : params) snap.push_back(p.tensor->values());
    return snap;
  };

  train::PhaseReport rep;
  rep.best_val_accuracy = -1.0;
  rep.best_val_loss = std::numeric_limits<double>::infinity();
  auto best = snapshot();
  std::size_t since_best = 0;
  std::mt19937_64 rng(hyper.seed * 31 + 11);
  std::vector<std::size_t> order = holdout.train;
  for (std::size_t epoch = 0; epoch < hyper.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t end = std::min(order.size(), start + hyper.batch_size);
      std::vector<const Tensor<T>*> xs;
      std::vector<std::size_t> ys;
      for (std::size_t j = start; j < end; ++j) {
        xs.push_back(&inputs[order[j]]);
        ys.push_back(targets[order[j]]);
      }
      for (auto& p : params) p.tensor->zero_grad();
      const double loss = detail::softmax_loss_and_grad(m, xs, ys);
      if (!std::isfinite(loss)) {
        throw TrainingError("softmax baseline: non-finite loss at epoch " + std::to_string(epoch));
      }
      opt.step(params);
      epoch_loss += loss;
      ++batches;
    }
    rep.final_train_loss = epoch_loss / static_cast<double>(batches);
    rep.epochs_run = epoch + 1;
    const auto [val_loss, acc] = evaluate();
    if (acc > rep.best_val_accuracy || (acc == rep.best_val_accuracy && val_loss < rep.best_val_loss)) {
      rep.best_val_accuracy = acc;
      rep.best_val_loss = val_loss;
      rep.best_epoch = epoch;
      best = snapshot();
      since_best = 0;
    } else if (++since_best >= hyper.patience) {
      rep.stopped_early = true;
      break;
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) params[k].tensor->values() = best[k];
  for (auto& p : params) p.tensor->set_requires_grad(false);
  return rep;
}

struct AugmentConfig {
  std::size_t copies = kAugCopies;
  double sigma = kAugSigma;  // absolute, signal domain
  std::uint64_t seed = 0;
};

// A trained baseline: one member (softmax_single, input_aug) or five
// (deep_ensemble), plus the feature pipeline they share.
struct Bundle {
  Kind kind = Kind::kSoftmaxSingle;
  InputPipeline pipeline;
  std::vector<SoftmaxModel<float>> members;
  AugmentConfig augment;

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& m : members) n += m.param_count();
    return n;
  }

  // Mean class probabilities for one raw signal. `sample_key` makes the
  // input_aug jitter deterministic per sample.
  std::vector<double> predict(std::span<const float> signal, std::uint64_t sample_key) const {
    if (members.empty()) throw InvariantError("baseline bundle has no members");
    const std::size_t events = members.front().backbone.config.events;
    std::vector<double> mean(events, 0.0);
    auto accumulate = [&](const Tensor<float>& x, double w) {
      for (const auto& m : members) {
        const auto p = m.probabilities(x);
        for (std::size_t c = 0; c < events; ++c) mean[c] += w * p[c];
      }
    };
    const double per_member = 1.0 / static_cast<double>(members.size());
    if (kind != Kind::kInputAug) {
      accumulate(pipeline(signal), per_member);
      return mean;
    }
    std::mt19937_64 rng(augment.seed * 0x9e3779b97f4a7c15ULL + sample_key);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double w = per_member / static_cast<double>(augment.copies);
    std::vector<float> jittered(signal.size());
    for (std::size_t k = 0; k < augment.copies; ++k) {
      for (std::size_t i = 0; i < signal.size(); ++i) {
        jittered[i] = static_cast<float>(signal[i] + augment.sigma * noise(rng));
      }
      accumulate(pipeline(jittered), w);
    }
    return mean;
  }
};

inline Bundle train_baseline(Kind kind, const BackboneConfig& cfg, const InputPipeline& pipeline,
                             const FeatureSet& data, const train::TrainHyper& hyper) {
  Bundle b;
  b.kind = kind;
  b.pipeline = pipeline;
  b.augment.seed = hyper.seed;
  const std::size_t n = kind == Kind::kDeepEnsemble ? kEnsembleMembers : 1;
  for (std::size_t k = 0; k < n; ++k) {
    train::TrainHyper h = hyper;
    h.seed = hyper.seed + k;
    auto m = build_softmax_model<float>(cfg, h.seed);
    try {
      train_softmax(m, data, h);
    } catch (const TrainingError& e) {
      throw TrainingError(to_string(kind) + " member " + std::to_string(k) + ": " + e.what());
    }
    b.members.push_back(std::move(m));
  }
  return b;
}

}  // namespace ur2m::baseline
