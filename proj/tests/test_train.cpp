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

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "ur2m/baselines.hpp"
#include "ur2m/exits.hpp"
#include "ur2m/serialize.hpp"
#include "ur2m/train.hpp"
#include "fixtures.hpp"
#include "gradient_oracle.hpp"
#include "test_util.hpp"

namespace ur2m::train {
namespace {

using test::random_tensor;

TEST(GradientTest, CascadeLossMatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u}) EXPECT_LE(test::worst_cascade_gradient_error(seed), 1e-4) << seed;
}

TEST(SplitTest, StratifiedAndDisjoint) {
  std::vector<std::vector<std::uint8_t>> labels;
  for (int i = 0; i < 60; ++i) labels.push_back({static_cast<std::uint8_t>(i % 3 == 0), static_cast<std::uint8_t>(i % 3 != 0)});
  const auto h = stratified_split(labels, 0.1, 4);
  EXPECT_EQ(h.val.size(), 6u);
  EXPECT_EQ(h.train.size(), 54u);
  std::set<std::size_t> all(h.train.begin(), h.train.end());
  for (std::size_t v : h.val) EXPECT_TRUE(all.insert(v).second);
  std::size_t first = 0;
  for (std::size_t v : h.val) first += labels[v][0];
  EXPECT_EQ(first, 2u);
  EXPECT_EQ(stratified_split(labels, 0.1, 4).val, h.val);
}

TEST(TrainTest, PhaseZeroLeavesLaterStagesUntouched) {
  const auto task = test::make_task(1, 20, 0);
  auto cfg = BackboneConfig::make(16, 3, task.pipeline.input_shape(task.dataset.signal_len), 3, true);
  auto m = build_model<float>(cfg, 3);
  const auto init = m;
  TrainHyper hyper;
  hyper.max_epochs = 2;
  const auto holdout = stratified_split(task.train.labels, hyper.val_fraction, 0);
  train_scope(m, TrainScope{0, 0, {0}}, task.train, holdout, hyper, 1);
  auto* mm = &m;
  auto* ii = const_cast<CascadeModel<float>*>(&init);
  for (std::size_t s = 1; s < kStages; ++s) {
    const auto a = mm->stage_parameters(s);
    const auto b = ii->stage_parameters(s);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(*a[k].tensor, *b[k].tensor) << a[k].name;
  }
  EXPECT_NE(m.stem.weight, init.stem.weight);
  EXPECT_NE(m.heads[0][0].weight, init.heads[0][0].weight);
}

TEST(TrainTest, LaterPhasesLeaveEarlierStagesUntouched) {
  const auto task = test::make_task(2, 20, 0);
  auto cfg = BackboneConfig::make(16, 3, task.pipeline.input_shape(task.dataset.signal_len), 3, true);
  auto m = build_model<float>(cfg, 4);
  TrainHyper hyper;
  hyper.max_epochs = 2;
  const auto holdout = stratified_split(task.train.labels, hyper.val_fraction, 0);
  train_scope(m, TrainScope{0, 0, {0}}, task.train, holdout, hyper, 1);
  const auto after0 = io::serialize(m);
  auto snapshot_stage0 = m;
  train_scope(m, TrainScope{1, 1, {1}}, task.train, holdout, hyper, 2);
  const auto a = m.stage_parameters(0);
  const auto b = snapshot_stage0.stage_parameters(0);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(*a[k].tensor, *b[k].tensor) << a[k].name;
  EXPECT_NE(io::serialize(m), after0);
}

TEST(TrainTest, EarlyStoppingHaltsAfterPatience) {
  const auto task = test::make_task(3, 10, 0);
  auto cfg = BackboneConfig::make(16, 3, task.pipeline.input_shape(task.dataset.signal_len), 3, true);
  auto m = build_model<float>(cfg, 5);
  TrainHyper hyper;
  hyper.lr = 1e-30;  // parameters cannot move, so validation never improves
  hyper.max_epochs = 30;
  hyper.patience = 5;
  const auto holdout = stratified_split(task.train.labels, hyper.val_fraction, 0);
  const auto rep = train_scope(m, TrainScope{0, 2, {2}}, task.train, holdout, hyper, 1);
  EXPECT_TRUE(rep.stopped_early);
  EXPECT_EQ(rep.best_epoch, 0u);
  EXPECT_EQ(rep.epochs_run, 6u);
}

TEST(TrainTest, SeparableDataIsLearned) {
  const auto task = test::make_task(4, 60, 0, 3, 15.0, 25.0);
  const auto cfg = BackboneConfig::make(32, 3, task.pipeline.input_shape(task.dataset.signal_len), 3);
  TrainHyper hyper;
  hyper.max_epochs = 20;
  const auto r = train_candidate(cfg, task.train, hyper);
  EXPECT_GE(r.val_accuracy, 0.95);
  EXPECT_LE(r.report.epochs_run, 20u);
}

TEST(TrainTest, FixedSeedIsReproducible) {
  const auto task = test::make_task(5, 20, 0);
  const auto cfg = BackboneConfig::make(16, 3, task.pipeline.input_shape(task.dataset.signal_len), 3, true);
  TrainHyper hyper;
  hyper.max_epochs = 3;
  hyper.seed = 9;
  auto a = build_model<float>(cfg, 9);
  auto b = build_model<float>(cfg, 9);
  const auto ra = cascade_train(a, task.train, hyper);
  const auto rb = cascade_train(b, task.train, hyper);
  EXPECT_EQ(io::serialize(a), io::serialize(b));
  for (std::size_t s = 0; s < kStages; ++s) {
    EXPECT_EQ(ra.phases[s].best_val_accuracy, rb.phases[s].best_val_accuracy);
  }
}

TEST(TrainTest, SingleEventTrainsThreeHeads) {
  auto task = test::make_task(6, 20, 0, 2);
  // keep event 0 only
  for (auto& y : task.train.labels) y.resize(1);
  task.train.events = 1;
  const auto cfg = BackboneConfig::make(16, 3, task.pipeline.input_shape(task.dataset.signal_len), 1, true);
  auto m = build_model<float>(cfg, 1);
  const auto init = m;
  TrainHyper hyper;
  hyper.max_epochs = 2;
  const auto rep = cascade_train(m, task.train, hyper);
  EXPECT_EQ(rep.phases.size(), 3u);
  std::size_t heads = 0;
  for (std::size_t s = 0; s < kStages; ++s) {
    heads += m.heads[s].size();
    EXPECT_NE(m.heads[s][0].weight, init.heads[s][0].weight) << s;
  }
  EXPECT_EQ(heads, 3u);
}

TEST(TrainTest, EventCountMismatchAndBadHyper) {
  const auto task = test::make_task(7, 5, 0);
  const auto cfg = BackboneConfig::make(16, 3, task.pipeline.input_shape(task.dataset.signal_len), 2, true);
  auto m = build_model<float>(cfg, 1);
  EXPECT_THROW(cascade_train(m, task.train, TrainHyper{}), ModelMismatchError);
  TrainHyper bad;
  bad.lr = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = TrainHyper{};
  bad.loss.lambda = -1;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(TrainTest, NonFiniteInputsRaiseTrainingError) {
  auto task = test::make_task(8, 5, 0);
  task.train.inputs[0][0] = std::numeric_limits<float>::quiet_NaN();
  const auto cfg = BackboneConfig::make(16, 3, task.pipeline.input_shape(task.dataset.signal_len), 3, true);
  auto m = build_model<float>(cfg, 1);
  TrainHyper hyper;
  hyper.max_epochs = 1;
  hyper.val_fraction = 0.0;
  EXPECT_THROW(cascade_train(m, task.train, hyper), TrainingError);
}

// Deeper exits are not catastrophically worse than the shallow one.
TEST(TrainTest, DeepExitNotWorseThanShallow) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto task = test::make_task(100 + seed, 80, 120);
    const auto cfg = BackboneConfig::make(16, 3, task.pipeline.input_shape(task.dataset.signal_len), 3, true);
    auto m = build_model<float>(cfg, seed);
    TrainHyper hyper;
    hyper.seed = seed;
    cascade_train(m, task.train, hyper);
    std::vector<StageOutput<float>> shallow, deep;
    for (const auto& x : task.test.inputs) {
      auto outs = m.forward(x, Depth::kDeep);
      shallow.push_back(outs[0]);
      deep.push_back(outs[2]);
    }
    const double a0 = pooled_accuracy(shallow, task.test.labels);
    const double a2 = pooled_accuracy(deep, task.test.labels);
    EXPECT_GE(a2, a0 - 0.05) << "seed " << seed << " shallow " << a0 << " deep " << a2;
  }
}

// ---- softmax baselines ----------------------------------------------------

TEST(BaselineTest, EnsembleParamsAreFiveTimesSingle) {
  const auto task = test::make_task(9, 10, 0);
  const auto cfg = BackboneConfig::make(16, 3, task.pipeline.input_shape(task.dataset.signal_len), 3, true);
  TrainHyper hyper;
  hyper.max_epochs = 1;
  const auto single = baseline::train_baseline(baseline::Kind::kSoftmaxSingle, cfg, task.pipeline, task.train, hyper);
  const auto ens = baseline::train_baseline(baseline::Kind::kDeepEnsemble, cfg, task.pipeline, task.train, hyper);
  EXPECT_EQ(ens.members.size(), 5u);
  EXPECT_EQ(ens.param_count(), 5 * single.param_count());
  // no evidential heads in a softmax model
  for (const auto& [name, t] : single.members[0].named_tensors()) EXPECT_NE(name.rfind("head", 0), 0u) << name;
}

TEST(BaselineTest, IdenticalMembersAndZeroJitterMatchSingle) {
  const auto task = test::make_task(10, 5, 6);
  const auto cfg = BackboneConfig::make(16, 3, task.pipeline.input_shape(task.dataset.signal_len), 3, true);
  baseline::Bundle single;
  single.pipeline = task.pipeline;
  single.members.push_back(baseline::build_softmax_model<float>(cfg, 3));
  auto ens = single;
  ens.kind = baseline::Kind::kDeepEnsemble;
  for (int k = 0; k < 4; ++k) ens.members.push_back(single.members[0]);
  auto aug = single;
  aug.kind = baseline::Kind::kInputAug;
  aug.augment.sigma = 0.0;
  for (const auto& s : task.dataset.samples) {
    const auto p = single.predict(s.signal, 0);
    const auto pe = ens.predict(s.signal, 0);
    const auto pa = aug.predict(s.signal, 0);
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_NEAR(pe[c], p[c], 1e-12);
      EXPECT_NEAR(pa[c], p[c], 1e-12);
    }
    EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-6);
  }
}

TEST(BaselineTest, SoftmaxGradientMatchesFiniteDifferences) {
  const auto cfg = BackboneConfig::make(8, 2, {1, 4, 5}, 3, true);
  auto m = baseline::build_softmax_model<double>(cfg, 2);
  std::mt19937_64 rng(3);
  std::vector<Tensor<double>> xs{random_tensor<double>({1, 4, 5}, rng), random_tensor<double>({1, 4, 5}, rng)};
  const std::vector<std::size_t> ys{1, 2};
  std::vector<const Tensor<double>*> xp{&xs[0], &xs[1]};
  // zero biases put dead units exactly on the ReLU kink, where differences are one-sided
  for (auto& p : m.parameters()) {
    if (p.name.find(".bias") != std::string::npos) *p.tensor = random_tensor<double>(p.tensor->shape(), rng, 0.1);
  }
  for (auto& p : m.parameters()) p.tensor->set_requires_grad(true);
  for (auto& p : m.parameters()) p.tensor->zero_grad();
  baseline::detail::softmax_loss_and_grad(m, xp, ys);
  // the probes below accumulate into every gradient buffer, so copy first
  std::vector<std::vector<double>> analytic;
  for (auto& p : m.parameters()) analytic.emplace_back(p.tensor->grad().begin(), p.tensor->grad().end());
  const double h = 1e-6;
  auto params = m.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    auto& t = *p.tensor;
    const auto& g = analytic[k];
    for (std::size_t i = 0; i < t.size(); i += 7) {
      const double keep = t[i];
      t[i] = keep + h;
      const double up = baseline::detail::softmax_loss_and_grad(m, xp, ys);
      t[i] = keep - h;
      const double dn = baseline::detail::softmax_loss_and_grad(m, xp, ys);
      t[i] = keep;
      EXPECT_LE(test::rel_err(g[i], (up - dn) / (2 * h)), 1e-4) << p.name << "[" << i << "]";
    }
  }
}

TEST(BaselineTest, KindNamesAndTargets) {
  for (auto k : {baseline::Kind::kSoftmaxSingle, baseline::Kind::kDeepEnsemble, baseline::Kind::kInputAug}) {
    EXPECT_EQ(baseline::parse_kind(baseline::to_string(k)), k);
  }
  EXPECT_THROW(baseline::parse_kind("bayes"), ConfigError);
  EXPECT_EQ(baseline::target_class({0, 0, 1}), 2u);
  EXPECT_THROW(baseline::target_class({0, 0, 0}), DataError);
}

}  // namespace
}  // namespace ur2m::train
