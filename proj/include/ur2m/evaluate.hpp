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

// System-level evaluation: calibration of the evidential cascade and the
// softmax baselines, robustness under signal corruption, and the
// threshold sweep.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "ur2m/baselines.hpp"
#include "ur2m/cascade_model.hpp"
#include "ur2m/dataset.hpp"
#include "ur2m/exits.hpp"
#include "ur2m/format.hpp"
#include "ur2m/metrics.hpp"
#include "ur2m/synthetic.hpp"

namespace ur2m::eval {

// Raw signals with their per-event labels.
struct SignalSet {
  std::vector<std::vector<float>> signals;
  std::vector<std::vector<std::uint8_t>> labels;
  std::size_t events = 0;

  std::size_t size() const { return signals.size(); }
};

inline SignalSet signals_of(const data::Dataset& ds, data::Split split) {
  SignalSet s;
  s.events = ds.event_count();
  for (const auto& smp : ds.samples) {
    if (smp.split != split) continue;
    s.signals.push_back(smp.signal);
    s.labels.push_back(smp.labels);
  }
  return s;
}

// Corruption level: zero_mask takes the masked fraction; gaussian takes the
// noise standard deviation as a multiple of each signal's RMS.
struct CorruptionLevel {
  data::Corruption mode = data::Corruption::kGaussian;
  double level = 0.0;
};

inline std::string corruption_name(data::Corruption m) {
  return m == data::Corruption::kZeroMask ? "zero_mask" : "gaussian";
}

inline SignalSet corrupt_all(const SignalSet& in, const CorruptionLevel& c, std::uint64_t seed) {
  SignalSet out = in;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto& x = in.signals[i];
    const double param = c.mode == data::Corruption::kGaussian ? c.level * data::rms(x) : c.level;
    out.signals[i] = data::corrupt(x, c.mode, param, seed + i);
  }
  return out;
}

inline std::vector<Tensor<float>> features_of(const InputPipeline& p, const SignalSet& s) {
  std::vector<Tensor<float>> out;
  out.reserve(s.size());
  for (const auto& x : s.signals) out.push_back(p(x));
  return out;
}

// Per-(sample, event) binary outcome.
struct Decision {
  double probability = 0.5;  // of the event
  double uncertainty = 1.0;
  std::uint8_t predicted = 0;
  std::uint8_t label = 0;
};

struct SystemReport {
  std::string kind;
  metrics::CalibrationReport pooled;
  std::vector<metrics::CalibrationReport> per_event;
  double mean_uncertainty = 0.0;
  double mean_entropy = 0.0;                        // baselines only
  std::array<double, kStages> exit_rates{0, 0, 1};  // evidential cascade only
  double mean_macs = 0.0;
  std::vector<std::vector<Decision>> decisions;     // [sample][event]
};

inline void summarize(SystemReport& r, std::size_t events) {
  std::vector<double> pooled_p;
  std::vector<std::size_t> pooled_y;
  std::vector<std::vector<double>> ev_p(events);
  std::vector<std::vector<std::size_t>> ev_y(events);
  double u = 0.0;
  std::size_t n = 0;
  for (const auto& row : r.decisions) {
    for (std::size_t c = 0; c < events; ++c) {
      const auto& d = row[c];
      pooled_p.push_back(d.probability);
      pooled_y.push_back(d.label);
      ev_p[c].push_back(d.probability);
      ev_y[c].push_back(d.label);
      u += d.uncertainty;
      ++n;
    }
  }
  r.pooled = metrics::binary_calibration(pooled_p, pooled_y);
  r.per_event.clear();
  for (std::size_t c = 0; c < events; ++c) r.per_event.push_back(metrics::binary_calibration(ev_p[c], ev_y[c]));
  r.mean_uncertainty = n ? u / static_cast<double>(n) : 0.0;
}

// Evidential cascade with early exits; probabilities are the Beta means at
// the exit that finalized each event.
template <runtime::StageRunner R>
SystemReport evaluate_cascade(const R& runner, const std::vector<Tensor<float>>& inputs,
                              const std::vector<std::vector<std::uint8_t>>& labels,
                              const runtime::ExitPolicy& policy, runtime::InferenceTrace* trace_out = nullptr) {
  if (inputs.size() != labels.size()) throw DimensionError("evaluate: inputs vs labels count");
  const std::size_t events = runner.backbone_config().events;
  const auto trace = runtime::infer_with_exits(runner, inputs, policy);
  SystemReport r;
  r.kind = "ur2m";
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (labels[i].size() != events) throw ModelMismatchError("evaluate: label width differs from model events");
    std::vector<Decision> row;
    for (std::size_t c = 0; c < events; ++c) {
      const auto& e = trace.samples[i].events[c];
      row.push_back({e.probability, e.uncertainty, e.label, labels[i][c]});
    }
    r.decisions.push_back(std::move(row));
  }
  r.exit_rates = trace.exit_rates();
  r.mean_macs = trace.mean_macs();
  summarize(r, events);
  if (trace_out) *trace_out = trace;
  return r;
}

inline SystemReport evaluate_cascade(const CascadeModel<float>& model, const SignalSet& set,
                                     const runtime::ExitPolicy& policy,
                                     runtime::InferenceTrace* trace_out = nullptr) {
  return evaluate_cascade(runtime::FloatRunner{model}, features_of(model.pipeline, set), set.labels,
                          policy, trace_out);
}

// Softmax baselines: the event probability of event c is the c-th entry of
// the mean class distribution; uncertainty proxy = 1 - max probability.
inline SystemReport evaluate_baseline(const baseline::Bundle& b, const SignalSet& set) {
  if (b.members.empty()) throw InvariantError("evaluate: empty baseline bundle");
  const std::size_t events = b.members.front().backbone.config.events;
  if (set.events != events) throw ModelMismatchError("evaluate: baseline/data event count mismatch");
  SystemReport r;
  r.kind = baseline::to_string(b.kind);
  double entropy = 0.0;
  const double macs = static_cast<double>(count_macs(b.members.front().backbone.config, Depth::kDeep));
  const double passes = static_cast<double>(b.members.size()) *
                        (b.kind == baseline::Kind::kInputAug ? static_cast<double>(b.augment.copies) : 1.0);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto p = b.predict(set.signals[i], i);
    const double u = 1.0 - *std::max_element(p.begin(), p.end());
    entropy += metrics::predictive_entropy(p);
    std::vector<Decision> row;
    for (std::size_t c = 0; c < events; ++c) {
      row.push_back({p[c], u, static_cast<std::uint8_t>(p[c] > 0.5 ? 1 : 0), set.labels[i][c]});
    }
    r.decisions.push_back(std::move(row));
  }
  summarize(r, events);
  r.mean_entropy = set.size() ? entropy / static_cast<double>(set.size()) : 0.0;
  r.mean_macs = macs * passes;
  return r;
}

// ---- robustness -----------------------------------------------------------

struct RobustnessLevel {
  CorruptionLevel corruption;
  double accuracy = 0.0;
  double nll = 0.0;
  double mean_uncertainty = 0.0;
  double mean_u_correct = 0.0;
  double mean_u_incorrect = 0.0;
  std::size_t n_correct = 0;
  std::size_t n_incorrect = 0;
  std::size_t flips = 0;  // decisions differing from the first (clean) level
};

struct RobustnessReport {
  runtime::ExitPolicy policy;
  std::vector<RobustnessLevel> levels;
};

inline RobustnessReport robustness_eval(const CascadeModel<float>& model, const SignalSet& clean,
                                        const std::vector<CorruptionLevel>& grid,
                                        const runtime::ExitPolicy& policy, std::uint64_t seed) {
  if (grid.empty() || grid.front().level != 0.0) {
    throw ConfigError("robustness: the corruption grid must start with level 0 (clean)");
  }
  RobustnessReport rep;
  rep.policy = policy;
  std::vector<std::vector<Decision>> reference;
  for (const auto& c : grid) {
    const SignalSet set = c.level == 0.0 ? clean : corrupt_all(clean, c, seed);
    const auto r = evaluate_cascade(model, set, policy);
    RobustnessLevel lv;
    lv.corruption = c;
    lv.accuracy = r.pooled.accuracy;
    lv.nll = r.pooled.nll;
    lv.mean_uncertainty = r.mean_uncertainty;
    double uc = 0.0, ui = 0.0;
    for (std::size_t i = 0; i < r.decisions.size(); ++i) {
      for (std::size_t k = 0; k < r.decisions[i].size(); ++k) {
        const auto& d = r.decisions[i][k];
        if (d.predicted == d.label) {
          uc += d.uncertainty;
          ++lv.n_correct;
        } else {
          ui += d.uncertainty;
          ++lv.n_incorrect;
        }
        if (!reference.empty() && reference[i][k].predicted != d.predicted) ++lv.flips;
      }
    }
    lv.mean_u_correct = lv.n_correct ? uc / static_cast<double>(lv.n_correct) : 0.0;
    lv.mean_u_incorrect = lv.n_incorrect ? ui / static_cast<double>(lv.n_incorrect) : 0.0;
    if (reference.empty()) reference = r.decisions;
    rep.levels.push_back(lv);
  }
  return rep;
}

// ---- threshold sweep ------------------------------------------------------

struct ProfileRow {
  double tau = 0.0;
  std::array<double, kStages> exit_rates{};
  double mean_macs = 0.0;
  double accuracy = 0.0;
  double nll = 0.0;
  double mean_uncertainty = 0.0;
};

namespace detail {

// Replays precomputed stage outputs, so a sweep evaluates the network once
// per sample.
struct ReplayRunner {
  const std::vector<StageOutput<float>>* outs;
  const BackboneConfig* cfg;
  StageOutput<float> run_stage(std::size_t s, const Tensor<float>&) const { return (*outs)[s]; }
  const BackboneConfig& backbone_config() const { return *cfg; }
};

}  // namespace detail

inline std::vector<double> parse_tau_grid(const std::string& spec) {
  // start:stop:step
  const auto a = spec.find(':');
  const auto b = spec.find(':', a == std::string::npos ? a : a + 1);
  if (a == std::string::npos || b == std::string::npos) {
    throw ConfigError("tau grid '" + spec + "' must be start:stop:step");
  }
  double lo = 0, hi = 0, step = 0;
  try {
    lo = std::stod(spec.substr(0, a));
    hi = std::stod(spec.substr(a + 1, b - a - 1));
    step = std::stod(spec.substr(b + 1));
  } catch (const std::exception&) {
    throw ConfigError("tau grid '" + spec + "' has a non-numeric field");
  }
  if (!(step > 0) || lo < 0 || hi > 1 || lo > hi) {
    throw ConfigError("tau grid '" + spec + "' must satisfy 0 <= start <= stop <= 1, step > 0");
  }
  std::vector<double> g;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  for (std::size_t k = 0; k <= n; ++k) {
    const double v = lo + static_cast<double>(k) * step;
    g.push_back(std::min(hi, std::round(v * 1e12) / 1e12));
  }
  return g;
}

inline std::vector<ProfileRow> exit_profile(const CascadeModel<float>& model,
                                            const std::vector<Tensor<float>>& inputs,
                                            const std::vector<std::vector<std::uint8_t>>& labels,
                                            const std::vector<double>& taus, runtime::ExitRule rule,
                                            std::size_t jobs = 1) {
  std::vector<std::vector<StageOutput<float>>> all;
  all.reserve(inputs.size());
  for (const auto& x : inputs) all.push_back(model.forward(x, Depth::kDeep));
  std::vector<ProfileRow> rows(taus.size());
  auto run = [&](std::size_t k) {
    runtime::ExitPolicy policy{taus[k], rule};
    policy.validate();
    SystemReport r;
    r.kind = "ur2m";
    runtime::InferenceTrace trace;
    trace.policy = policy;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      detail::ReplayRunner replay{&all[i], &model.config};
      trace.samples.push_back(runtime::infer_sample(replay, inputs[i], policy));
      std::vector<Decision> row;
      for (std::size_t c = 0; c < model.config.events; ++c) {
        const auto& e = trace.samples.back().events[c];
        row.push_back({e.probability, e.uncertainty, e.label, labels[i][c]});
      }
      r.decisions.push_back(std::move(row));
    }
    summarize(r, model.config.events);
    rows[k] = {taus[k], trace.exit_rates(), trace.mean_macs(), r.pooled.accuracy, r.pooled.nll,
               r.mean_uncertainty};
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, taus.size()));
  if (jobs == 1) {
    for (std::size_t k = 0; k < taus.size(); ++k) run(k);
  } else {
    std::vector<std::thread> workers;
    for (std::size_t j = 0; j < jobs; ++j) {
      workers.emplace_back([&, j] {
        for (std::size_t k = j; k < taus.size(); k += jobs) run(k);
      });
    }
    for (auto& w : workers) w.join();
  }
  // Larger thresholds can only move exits earlier.
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (taus[k] >= taus[k - 1] && rows[k].mean_macs > rows[k - 1].mean_macs) {
      throw InvariantError("exit profile: mean MACs increased between tau=" + fmt_real(taus[k - 1]) +
                           " and tau=" + fmt_real(taus[k]));
    }
  }
  return rows;
}

// ---- export ---------------------------------------------------------------

inline nlohmann::ordered_json to_json(const metrics::CalibrationReport& r) {
  return {{"n", r.n}, {"accuracy", r.accuracy}, {"brier", r.brier}, {"nll", r.nll}, {"ece", r.ece}};
}

inline nlohmann::ordered_json to_json(const SystemReport& r) {
  nlohmann::ordered_json j;
  j["kind"] = r.kind;
  j["pooled"] = to_json(r.pooled);
  j["per_event"] = nlohmann::ordered_json::array();
  for (const auto& e : r.per_event) j["per_event"].push_back(to_json(e));
  j["mean_uncertainty"] = r.mean_uncertainty;
  if (r.kind != "ur2m") j["mean_predictive_entropy"] = r.mean_entropy;
  j["exit_rates"] = r.exit_rates;
  j["mean_macs"] = r.mean_macs;
  return j;
}

inline void write_reports_csv(std::ostream& os, const std::vector<SystemReport>& reports) {
  os << "system,scope,n,accuracy,brier,nll,ece,mean_uncertainty,mean_macs\n";
  for (const auto& r : reports) {
    auto line = [&](const std::string& scope, const metrics::CalibrationReport& c) {
      os << r.kind << ',' << scope << ',' << c.n << ',' << fmt_real(c.accuracy) << ','
         << fmt_real(c.brier) << ',' << fmt_real(c.nll) << ',' << fmt_real(c.ece) << ','
         << fmt_real(r.mean_uncertainty) << ',' << fmt_real(r.mean_macs) << '\n';
    };
    line("pooled", r.pooled);
    for (std::size_t c = 0; c < r.per_event.size(); ++c) line("event" + std::to_string(c), r.per_event[c]);
  }
}

inline nlohmann::ordered_json to_json(const RobustnessReport& r) {
  nlohmann::ordered_json j;
  j["tau"] = r.policy.tau;
  j["rule"] = runtime::to_string(r.policy.rule);
  j["levels"] = nlohmann::ordered_json::array();
  for (const auto& l : r.levels) {
    j["levels"].push_back({{"corruption", corruption_name(l.corruption.mode)},
                           {"level", l.corruption.level},
                           {"accuracy", l.accuracy},
                           {"nll", l.nll},
                           {"mean_uncertainty", l.mean_uncertainty},
                           {"mean_u_correct", l.mean_u_correct},
                           {"mean_u_incorrect", l.mean_u_incorrect},
                           {"n_correct", l.n_correct},
                           {"n_incorrect", l.n_incorrect},
                           {"flips", l.flips}});
  }
  return j;
}

inline void write_profile_csv(std::ostream& os, const std::vector<ProfileRow>& rows) {
  os << "tau,exit_shallow,exit_medium,exit_deep,mean_macs,accuracy,nll,mean_uncertainty\n";
  for (const auto& r : rows) {
    os << fmt_real(r.tau) << ',' << fmt_real(r.exit_rates[0]) << ',' << fmt_real(r.exit_rates[1]) << ','
       << fmt_real(r.exit_rates[2]) << ',' << fmt_real(r.mean_macs) << ',' << fmt_real(r.accuracy) << ','
       << fmt_real(r.nll) << ',' << fmt_real(r.mean_uncertainty) << '\n';
  }
}

inline nlohmann::ordered_json profile_json(const std::vector<ProfileRow>& rows) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    j.push_back({{"tau", r.tau}, {"exit_rates", r.exit_rates}, {"mean_macs", r.mean_macs},
                 {"accuracy", r.accuracy}, {"nll", r.nll}, {"mean_uncertainty", r.mean_uncertainty}});
  }
  return j;
}

}  // namespace ur2m::eval
