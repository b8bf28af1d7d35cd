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

// Training of the cascade model: the stage-wise (cascade) schedule with one
// optimizer per exit, joint training, and deep-exit-only candidate training
// used by the architecture search.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ur2m/cascade_model.hpp"
#include "ur2m/evidence.hpp"
#include "ur2m/optimizer.hpp"
#include "ur2m/pipeline.hpp"

namespace ur2m::train {

struct TrainHyper {
  std::size_t max_epochs = 30;  // per phase
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::size_t patience = 5;     // epochs without validation improvement
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  edl::LossConfig loss;
  bool freeze = true;           // cascade: freeze earlier stages

  void validate() const {
    if (max_epochs == 0) throw ConfigError("train: max_epochs must be >= 1");
    if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
    if (!(lr > 0)) throw ConfigError("train: lr must be > 0");
    if (val_fraction < 0 || val_fraction >= 1) throw ConfigError("train: val_fraction in [0,1)");
    loss.validate();
  }
};

// Stratified hold-out: within each distinct label vector, a seeded shuffle
// and the first round(fraction * n) samples go to validation.
struct HoldOut {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

inline HoldOut stratified_split(const std::vector<std::vector<std::uint8_t>>& labels,
                                double fraction, std::uint64_t seed) {
  std::map<std::vector<std::uint8_t>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  std::mt19937_64 rng(seed);
  HoldOut h;
  for (auto& [key, idx] : groups) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(idx.size())));
    h.val.insert(h.val.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    h.train.insert(h.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  }
  std::sort(h.train.begin(), h.train.end());
  std::sort(h.val.begin(), h.val.end());
  return h;
}

// Fraction of correct (sample, event) binary decisions at one exit.
template <std::floating_point T>
double pooled_accuracy(const std::vector<StageOutput<T>>& outs_at_exit,
                       const std::vector<std::vector<std::uint8_t>>& labels) {
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < outs_at_exit.size(); ++i) {
    for (std::size_t c = 0; c < labels[i].size(); ++c) {
      hit += edl::predict(outs_at_exit[i].evidence[c]).label == labels[i][c];
      ++total;
    }
  }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

// Which part of the model a training run updates. Stages before
// `first_stage` are frozen and evaluated once; `exits` lists the heads whose
// loss is optimised; the last listed exit drives early stopping.
struct TrainScope {
  std::size_t first_stage = 0;
  std::size_t last_stage = 2;
  std::vector<std::size_t> exits{2};
};

struct PhaseReport {
  std::size_t phase = 0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;  // at the best epoch
  double best_val_loss = 0.0;
  double final_train_loss = 0.0;
  bool stopped_early = false;
};

struct TrainReport {
  std::vector<PhaseReport> phases;
};

namespace detail {

template <std::floating_point T>
std::vector<ParamRef<T>> scope_parameters(CascadeModel<T>& model, const TrainScope& scope) {
  std::vector<ParamRef<T>> out;
  for (std::size_t s = scope.first_stage; s <= scope.last_stage; ++s) {
    const bool exit_trained =
        std::find(scope.exits.begin(), scope.exits.end(), s) != scope.exits.end();
    for (auto& p : model.stage_parameters(s)) {
      const bool is_head = p.name.rfind("head", 0) == 0;
      if (!is_head || exit_trained) out.push_back(p);
    }
  }
  return out;
}

// Inputs of stage `first_stage`, computed with the frozen earlier stages.
template <std::floating_point T>
std::vector<Tensor<T>> frozen_inputs(const CascadeModel<T>& model, const FeatureSet& data,
                                     const std::vector<std::size_t>& idx, std::size_t first_stage) {
  std::vector<Tensor<T>> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) {
    Tensor<T> x = data.inputs[i].template cast<T>();
    for (std::size_t s = 0; s < first_stage; ++s) x = model.run_stage(s, x).features;
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace detail

// Forward + backward of the scoped loss on a batch; accumulates parameter
// gradients (mean over batch and events, summed over exits) and returns the
// loss. Exposed for gradient checking.
template <std::floating_point T>
double scoped_loss_and_grad(CascadeModel<T>& model, const TrainScope& scope,
                            const std::vector<const Tensor<T>*>& inputs,
                            const std::vector<const std::vector<std::uint8_t>*>& labels,
                            double lambda) {
  using Cache = typename CascadeModel<T>::StageCache;
  const std::size_t n = inputs.size();
  const std::size_t events = model.config.events;
  const std::size_t n_stages = scope.last_stage - scope.first_stage + 1;
  std::vector<std::vector<Cache>> caches(n, std::vector<Cache>(n_stages));
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor<T>* x = inputs[i];
    for (std::size_t k = 0; k < n_stages; ++k) {
      caches[i][k] = model.forward_stage_cached(scope.first_stage + k, *x);
      x = &caches[i][k].features();
    }
  }
  // grads[i][k] = dL/dlogits for sample i at scoped stage k
  std::vector<std::vector<std::vector<std::array<T, 2>>>> grads(
      n, std::vector<std::vector<std::array<T, 2>>>(
             n_stages, std::vector<std::array<T, 2>>(events, {T(0), T(0)})));
  double total = 0.0;
  for (std::size_t e : scope.exits) {
    const std::size_t k = e - scope.first_stage;
    std::vector<std::array<T, 2>> logits;
    std::vector<std::uint8_t> flat_labels;
    for (std::size_t i = 0; i < n; ++i) {
      logits.insert(logits.end(), caches[i][k].logits.begin(), caches[i][k].logits.end());
      flat_labels.insert(flat_labels.end(), labels[i]->begin(), labels[i]->end());
    }
    const auto r = edl::edl_loss<T>(logits, flat_labels, lambda);
    total += r.value;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < events; ++c) grads[i][k][c] = r.grad[i * events + c];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    Tensor<T> g_next;
    for (std::size_t k = n_stages; k-- > 0;) {
      const std::size_t s = scope.first_stage + k;
      const bool need_input = k > 0;
      g_next = model.backward_stage(s, caches[i][k], grads[i][k],
                                    g_next.empty() ? nullptr : &g_next, need_input);
    }
  }
  return total;
}

// Runs one training phase over `scope` with its own Adam optimizer and early
// stopping on validation accuracy of the last scoped exit; restores the
// best checkpoint of the trained parameters.
template <std::floating_point T>
PhaseReport train_scope(CascadeModel<T>& model, const TrainScope& scope, const FeatureSet& data,
                        const HoldOut& holdout, const TrainHyper& hyper, std::uint64_t phase_seed) {
  hyper.validate();
  if (holdout.train.empty()) throw DataError("train: empty training split");
  model.set_requires_grad(true);
  auto params = detail::scope_parameters(model, scope);
  nn::Optimizer opt(nn::OptimizerKind::kAdam, hyper.lr);

  const auto train_in = detail::frozen_inputs(model, data, holdout.train, scope.first_stage);
  const bool have_val = !holdout.val.empty();
  const auto& monitor_idx = have_val ? holdout.val : holdout.train;
  const auto val_in = detail::frozen_inputs(model, data, monitor_idx, scope.first_stage);
  std::vector<std::vector<std::uint8_t>> val_labels;
  for (std::size_t i : monitor_idx) val_labels.push_back(data.labels[i]);
  const std::size_t monitor_exit = scope.exits.back();

  // Checkpoints are ranked by validation accuracy, ties broken by the
  // validation loss at the full regularizer weight (comparable across the
  // annealing ramp).
  auto evaluate = [&]() {
    std::vector<StageOutput<T>> outs;
    outs.reserve(val_in.size());
    for (const auto& x : val_in) {
      Tensor<T> h = x;
      StageOutput<T> o;
      for (std::size_t s = scope.first_stage; s <= monitor_exit; ++s) {
        o = model.run_stage(s, h);
        h = o.features;
      }
      outs.push_back(std::move(o));
    }
    std::vector<std::array<T, 2>> logits;
    std::vector<std::uint8_t> flat;
    for (std::size_t i = 0; i < outs.size(); ++i) {
      logits.insert(logits.end(), outs[i].logits.begin(), outs[i].logits.end());
      flat.insert(flat.end(), val_labels[i].begin(), val_labels[i].end());
    }
    const double loss = edl::edl_loss<T>(logits, flat, hyper.loss.lambda).value;
    return std::pair{loss, pooled_accuracy(outs, val_labels)};
  };
  auto snapshot = [&]() {
    std::vector<std::vector<T>> snap;
    for (const auto& p : params) snap.push_back(p.tensor->values());
    return snap;
  };

  PhaseReport rep;
  rep.phase = monitor_exit;
  rep.best_val_accuracy = -1.0;
  rep.best_val_loss = std::numeric_limits<double>::infinity();
  auto best = snapshot();
  std::size_t since_best = 0;
  std::mt19937_64 rng(phase_seed);
  std::vector<std::size_t> order(train_in.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < hyper.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double lambda = hyper.loss.lambda_at(epoch);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t end = std::min(order.size(), start + hyper.batch_size);
      std::vector<const Tensor<T>*> xs;
      std::vector<const std::vector<std::uint8_t>*> ys;
      for (std::size_t j = start; j < end; ++j) {
        xs.push_back(&train_in[order[j]]);
        ys.push_back(&data.labels[holdout.train[order[j]]]);
      }
      model.zero_grad();
      const double loss = scoped_loss_and_grad(model, scope, xs, ys, lambda);
      if (!std::isfinite(loss)) {
        throw TrainingError("train: non-finite loss in phase " + std::to_string(monitor_exit) +
                            " at epoch " + std::to_string(epoch));
      }
      opt.step(params);
      epoch_loss += loss;
      ++batches;
    }
    rep.final_train_loss = epoch_loss / static_cast<double>(batches);
    rep.epochs_run = epoch + 1;
    const auto [val_loss, acc] = evaluate();
    const bool better = acc > rep.best_val_accuracy ||
                        (acc == rep.best_val_accuracy && val_loss < rep.best_val_loss);
    if (better) {
      rep.best_val_loss = val_loss;
      rep.best_val_accuracy = acc;
      rep.best_epoch = epoch;
      best = snapshot();
      since_best = 0;
    } else if (++since_best >= hyper.patience) {
      rep.stopped_early = true;
      break;
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) params[k].tensor->values() = best[k];
  model.set_requires_grad(false);
  return rep;
}

// Stage-wise training: phase s trains the stage-s blocks (plus the stem in
// phase 0) and the stage-s heads with optimizer s; earlier stages are frozen
// and their feature maps are the phase input. With freeze=false, phase s
// instead trains stages 0..s jointly on the summed loss of exits 0..s.
template <std::floating_point T>
TrainReport cascade_train(CascadeModel<T>& model, const FeatureSet& data, const TrainHyper& hyper) {
  hyper.validate();
  if (data.events != model.config.events) {
    throw ModelMismatchError("cascade_train: data has " + std::to_string(data.events) +
                             " events, model has " + std::to_string(model.config.events));
  }
  const auto holdout = stratified_split(data.labels, hyper.val_fraction, hyper.seed);
  TrainReport report;
  for (std::size_t s = 0; s < kStages; ++s) {
    TrainScope scope;
    scope.last_stage = s;
    if (hyper.freeze) {
      scope.first_stage = s;
      scope.exits = {s};
    } else {
      scope.first_stage = 0;
      scope.exits.clear();
      for (std::size_t e = 0; e <= s; ++e) scope.exits.push_back(e);
    }
    try {
      report.phases.push_back(train_scope(model, scope, data, holdout, hyper, hyper.seed * 31 + s + 1));
    } catch (const TrainingError& e) {
      throw TrainingError("cascade phase " + std::to_string(s) + ": " + e.what());
    }
  }
  return report;
}

// Deep-exit-only training of a fresh candidate (architecture search).
struct CandidateResult {
  CascadeModel<float> model;
  double val_accuracy = 0.0;
  PhaseReport report;
};

inline CandidateResult train_candidate(const BackboneConfig& cfg, const FeatureSet& data,
                                       const TrainHyper& hyper) {
  CandidateResult r;
  r.model = build_model<float>(cfg, hyper.seed);
  const auto holdout = stratified_split(data.labels, hyper.val_fraction, hyper.seed);
  TrainScope scope;  // stages 0..2, deep exit only
  r.report = train_scope(r.model, scope, data, holdout, hyper, hyper.seed * 31 + 7);
  r.val_accuracy = r.report.best_val_accuracy;
  return r;
}

}  // namespace ur2m::train
