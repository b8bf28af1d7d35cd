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

// Uncertainty-thresholded early-exit inference.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "ur2m/cascade_model.hpp"
#include "ur2m/evidence.hpp"
#include "ur2m/format.hpp"

namespace ur2m::runtime {

enum class ExitRule { kAllHeads, kAnyHead, kPerHead };

inline std::string to_string(ExitRule r) {
  switch (r) {
    case ExitRule::kAllHeads: return "all_heads";
    case ExitRule::kAnyHead: return "any_head";
    case ExitRule::kPerHead: return "per_head";
  }
  return "?";
}

inline ExitRule parse_rule(const std::string& s) {
  if (s == "all_heads") return ExitRule::kAllHeads;
  if (s == "any_head") return ExitRule::kAnyHead;
  if (s == "per_head") return ExitRule::kPerHead;
  throw ConfigError("unknown exit rule '" + s + "' (expected all_heads|any_head|per_head)");
}

struct ExitPolicy {
  double tau = 0.0;
  ExitRule rule = ExitRule::kAllHeads;

  void validate() const {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("exit policy: tau must lie in [0,1]");
  }
};

// Anything that can evaluate one stage of the cascade: the float model and
// the fake-quantized model.
template <typename R>
concept StageRunner = requires(const R& r, std::size_t s, const Tensor<float>& x) {
  { r.run_stage(s, x) } -> std::same_as<StageOutput<float>>;
  { r.backbone_config() } -> std::convertible_to<const BackboneConfig&>;
};

struct FloatRunner {
  const CascadeModel<float>& model;
  StageOutput<float> run_stage(std::size_t s, const Tensor<float>& x) const {
    return model.run_stage(s, x);
  }
  const BackboneConfig& backbone_config() const { return model.config; }
};

struct EventDecision {
  std::uint8_t label = 0;
  double uncertainty = 1.0;
  double probability = 0.5;
  std::size_t stage = 0;  // stage that finalized this event
};

struct SampleTrace {
  std::size_t exit_stage = 0;  // deepest stage computed
  std::vector<EventDecision> events;
  std::uint64_t macs = 0;
  std::vector<StageOutput<float>> stages;  // filled when requested
};

struct InferenceTrace {
  ExitPolicy policy;
  std::vector<SampleTrace> samples;

  std::array<double, kStages> exit_rates() const {
    std::array<double, kStages> r{};
    for (const auto& s : samples) r[s.exit_stage] += 1.0;
    for (auto& v : r) v = samples.empty() ? 0.0 : v / static_cast<double>(samples.size());
    return r;
  }
  double mean_macs() const {
    double m = 0.0;
    for (const auto& s : samples) m += static_cast<double>(s.macs);
    return samples.empty() ? 0.0 : m / static_cast<double>(samples.size());
  }
};

namespace detail {

inline EventDecision decide(const edl::BetaEvidence<float>& ev, std::size_t stage) {
  const auto p = edl::predict(ev);
  return {static_cast<std::uint8_t>(p.label), static_cast<double>(p.uncertainty), static_cast<double>(p.probability), stage};
}

inline void check_finite(const StageOutput<float>& o) {
  for (const auto& z : o.logits) {
    if (!std::isfinite(z[0]) || !std::isfinite(z[1])) {
      throw InvariantError("inference: non-finite head output at stage " + std::to_string(o.stage));
    }
  }
}

}  // namespace detail

template <StageRunner R>
SampleTrace infer_sample(const R& runner, const Tensor<float>& x, const ExitPolicy& policy,
                         bool keep_stages = false) {
  policy.validate();
  const BackboneConfig& cfg = runner.backbone_config();
  const std::size_t events = cfg.events;
  SampleTrace t;
  t.events.resize(events);
  std::vector<bool> done(events, false);
  Tensor<float> h = x;
  for (std::size_t s = 0; s < kStages; ++s) {
    StageOutput<float> o = runner.run_stage(s, h);
    detail::check_finite(o);
    t.exit_stage = s;
    const bool last = s + 1 == kStages;
    bool stop = false;
    if (policy.rule == ExitRule::kPerHead) {
      bool all_done = true;
      for (std::size_t c = 0; c < events; ++c) {
        if (done[c]) continue;
        const auto d = detail::decide(o.evidence[c], s);
        if (last || d.uncertainty <= policy.tau) {
          t.events[c] = d;
          done[c] = true;
        } else {
          all_done = false;
        }
      }
      stop = all_done;
    } else {
      double u_max = 0.0, u_min = 1.0;
      std::vector<EventDecision> ds;
      for (std::size_t c = 0; c < events; ++c) {
        ds.push_back(detail::decide(o.evidence[c], s));
        u_max = std::max(u_max, ds.back().uncertainty);
        u_min = std::min(u_min, ds.back().uncertainty);
      }
      const double u = policy.rule == ExitRule::kAllHeads ? u_max : u_min;
      stop = last || u <= policy.tau;
      if (stop) t.events = std::move(ds);
    }
    if (keep_stages) t.stages.push_back(o);
    if (stop) break;
    h = std::move(o.features);
  }
  t.macs = count_macs(cfg, static_cast<Depth>(t.exit_stage));
  return t;
}

template <StageRunner R>
InferenceTrace infer_with_exits(const R& runner, const std::vector<Tensor<float>>& inputs,
                                const ExitPolicy& policy, bool keep_stages = false) {
  InferenceTrace trace;
  trace.policy = policy;
  trace.samples.reserve(inputs.size());
  for (const auto& x : inputs) trace.samples.push_back(infer_sample(runner, x, policy, keep_stages));
  return trace;
}

inline InferenceTrace infer_with_exits(const CascadeModel<float>& model,
                                       const std::vector<Tensor<float>>& inputs,
                                       const ExitPolicy& policy, bool keep_stages = false) {
  return infer_with_exits(FloatRunner{model}, inputs, policy, keep_stages);
}

// sample_id, exit_stage, then y/u/p per event, then macs.
inline void write_trace_csv(std::ostream& os, const InferenceTrace& t, std::size_t events) {
  os << "sample_id,exit_stage";
  for (std::size_t c = 0; c < events; ++c) os << ",y" << c << ",u" << c << ",p" << c;
  os << ",macs\n";
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    const auto& s = t.samples[i];
    os << i << ',' << s.exit_stage;
    for (const auto& e : s.events) {
      os << ',' << int(e.label) << ',' << fmt_real(e.uncertainty) << ',' << fmt_real(e.probability);
    }
    os << ',' << s.macs << '\n';
  }
}

}  // namespace ur2m::runtime
