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

// Exhaustive (channels x blocks) architecture search scored by accuracy per
// normalized cost.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "ur2m/cascade_model.hpp"
#include "ur2m/errors.hpp"
#include "ur2m/format.hpp"
#include "ur2m/train.hpp"

namespace ur2m::search {

enum class ScoreDenominator { kMacs, kBlocks };

inline std::string to_string(ScoreDenominator d) {
  return d == ScoreDenominator::kMacs ? "macs" : "blocks";
}

inline ScoreDenominator parse_denominator(const std::string& s) {
  if (s == "macs") return ScoreDenominator::kMacs;
  if (s == "blocks") return ScoreDenominator::kBlocks;
  throw ConfigError("unknown score denominator '" + s + "' (expected macs|blocks)");
}

struct SearchSpace {
  std::vector<std::size_t> channels{kChannelGrid.begin(), kChannelGrid.end()};
  std::vector<std::size_t> blocks{kBlockGrid.begin(), kBlockGrid.end()};

  void validate() const {
    if (channels.empty() || blocks.empty()) throw ConfigError("search: empty grid");
  }
  std::size_t size() const { return channels.size() * blocks.size(); }
};

struct CandidateRow {
  BackboneConfig config;
  double accuracy = 0.0;
  std::uint64_t macs = 0;
  double normalized_cost = 0.0;
  double score = 0.0;
  bool ok = true;
  std::string error;
};

struct SearchResult {
  std::vector<CandidateRow> table;  // grid order: channels outer, blocks inner
  std::size_t best = 0;
  std::uint64_t seed = 0;
  ScoreDenominator denominator = ScoreDenominator::kMacs;

  const BackboneConfig& best_config() const { return table.at(best).config; }
};

// Maps a candidate configuration to its validation accuracy; throwing marks
// the candidate failed.
using CandidateEvaluator = std::function<double(const BackboneConfig&)>;

// Index of the highest score; the first in grid order wins ties.
inline std::size_t argmax_score(const std::vector<CandidateRow>& table) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < table.size(); ++i) {
    if (table[i].score > table[best].score) best = i;
  }
  return best;
}

inline SearchResult run_search(const SearchSpace& space, const BackboneConfig& base,
                               const CandidateEvaluator& evaluate, ScoreDenominator denom,
                               std::size_t jobs = 1, std::uint64_t seed = 0) {
  space.validate();
  SearchResult result;
  result.seed = seed;
  result.denominator = denom;
  for (std::size_t l : space.channels) {
    for (std::size_t o : space.blocks) {
      CandidateRow row;
      row.config = BackboneConfig::make(l, o, base.input_shape, base.events, base.off_grid);
      row.config.validate();
      row.macs = count_macs(row.config, Depth::kDeep);
      result.table.push_back(std::move(row));
    }
  }
  auto cost = [&](const CandidateRow& r) {
    return denom == ScoreDenominator::kMacs ? static_cast<double>(r.macs)
                                            : static_cast<double>(r.config.blocks);
  };
  double min_cost = std::numeric_limits<double>::infinity();
  for (const auto& r : result.table) min_cost = std::min(min_cost, cost(r));

  auto run_one = [&](CandidateRow& row) {
    try {
      row.accuracy = evaluate(row.config);
      if (!std::isfinite(row.accuracy)) throw TrainingError("non-finite accuracy");
    } catch (const std::exception& e) {
      row.ok = false;
      row.accuracy = 0.0;
      row.error = e.what();
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, result.table.size()));
  if (jobs == 1) {
    for (auto& row : result.table) run_one(row);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (std::size_t j = 0; j < jobs; ++j) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < result.table.size(); i = next++) run_one(result.table[i]);
      });
    }
    for (auto& w : workers) w.join();
  }

  bool any_ok = false;
  for (auto& row : result.table) {
    row.normalized_cost = cost(row) / min_cost;
    row.score = row.ok ? row.accuracy / row.normalized_cost : 0.0;
    any_ok = any_ok || row.ok;
  }
  if (!any_ok) {
    throw TrainingError("search: all " + std::to_string(result.table.size()) +
                        " candidates failed; first error: " + result.table.front().error);
  }
  result.best = argmax_score(result.table);
  return result;
}

// Evaluator that trains each candidate on the deep exit only.
inline CandidateEvaluator training_evaluator(const FeatureSet& data, const train::TrainHyper& hyper) {
  return [&data, hyper](const BackboneConfig& cfg) {
    return train::train_candidate(cfg, data, hyper).val_accuracy;
  };
}

inline void write_table_csv(std::ostream& os, const SearchResult& r) {
  os << "channels,blocks,accuracy,macs,normalized_cost,score,status\n";
  for (const auto& row : r.table) {
    os << row.config.channels << ',' << row.config.blocks << ',' << fmt_real(row.accuracy) << ','
       << row.macs << ',' << fmt_real(row.normalized_cost) << ',' << fmt_real(row.score) << ','
       << (row.ok ? "ok" : "failed") << '\n';
  }
}

}  // namespace ur2m::search
