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

// Synthetic task shared by the training-level suites.

#pragma once

#include "ur2m/pipeline.hpp"
#include "ur2m/synthetic.hpp"

namespace ur2m::test {

struct Task {
  data::Dataset dataset;
  InputPipeline pipeline;
  FeatureSet train;
  FeatureSet test;
};

inline Task make_task(std::uint64_t seed, std::size_t n_per_event, std::size_t test_count,
                      std::size_t events = 3, double snr_min = -5.0, double snr_max = 20.0) {
  data::SyntheticConfig cfg;
  cfg.events = events;
  cfg.n_per_event = n_per_event;
  cfg.test_count = test_count;
  cfg.snr_db_min = snr_min;
  cfg.snr_db_max = snr_max;
  cfg.seed = seed;
  Task t;
  t.dataset = data::gen_synthetic(cfg);
  t.pipeline = fit_pipeline(t.dataset, signal::FeatureConfig{});
  t.train = featurize(t.dataset, data::Split::kTrain, t.pipeline);
  t.test = featurize(t.dataset, data::Split::kTest, t.pipeline);
  return t;
}

}  // namespace ur2m::test
