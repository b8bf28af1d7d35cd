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

// Beta / Dirichlet evidence: belief masses, uncertainty, entropy and the
// entropy-regularised evidential losses.
//
// Binary class indices follow the label convention: index 0 is "no event",
// index 1 is "event". Argmax ties go to the lowest index.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ur2m/errors.hpp"

namespace ur2m::edl {

// ---- special functions -----------------------------------------------------

inline double digamma(double x) {
  if (!(x > 0)) throw DomainError("digamma: argument must be > 0");
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double r = 1.0 / x, r2 = r * r;
  return acc + std::log(x) - 0.5 * r -
         r2 * (1.0 / 12 - r2 * (1.0 / 120 - r2 * (1.0 / 252 - r2 * (1.0 / 240 - r2 * (1.0 / 132)))));
}

inline double trigamma(double x) {
  if (!(x > 0)) throw DomainError("trigamma: argument must be > 0");
  double acc = 0.0;
  while (x < 10.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double r = 1.0 / x, r2 = r * r;
  return acc + r + 0.5 * r2 +
         r * r2 * (1.0 / 6 - r2 * (1.0 / 30 - r2 * (1.0 / 42 - r2 * (1.0 / 30 - r2 * (5.0 / 66)))));
}

// Beta(a, b) density, used by quadrature checks.
inline double beta_pdf(double p, double a, double b) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  const double log_b = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  return std::exp((a - 1.0) * std::log(p) + (b - 1.0) * std::log1p(-p) - log_b);
}

// ---- evidence types --------------------------------------------------------

template <std::floating_point T>
struct BetaEvidence {
  T alpha = 1;  // event
  T beta = 1;   // no event

  T strength() const { return alpha + beta; }
  void validate() const {
    if (!(alpha >= T(1)) || !(beta >= T(1))) {
      throw InvariantError("beta evidence requires alpha, beta >= 1 (got " +
                           std::to_string(alpha) + ", " + std::to_string(beta) + ")");
    }
  }
};

template <std::floating_point T>
struct BetaPrediction {
  T belief_event;     // b1 = (alpha - 1) / S
  T belief_no_event;  // b2 = (beta - 1) / S
  T uncertainty;      // u = 2 / S
  T probability;      // mean event probability alpha / S
  int label;          // 1 iff alpha > beta
};

template <std::floating_point T>
struct DirichletEvidence {
  std::vector<T> alpha;

  T strength() const { return std::accumulate(alpha.begin(), alpha.end(), T(0)); }
  void validate() const {
    if (alpha.empty()) throw InvariantError("dirichlet evidence: empty alpha");
    for (T a : alpha) {
      if (!(a >= T(1))) {
        throw InvariantError("dirichlet evidence requires alpha >= 1 (got " +
                             std::to_string(a) + ")");
      }
    }
  }
};

template <std::floating_point T>
struct DirichletPrediction {
  std::vector<T> belief;
  std::vector<T> probability;
  T uncertainty;
  std::size_t label;
};

// ReLU head outputs plus one: alpha from the event logit, beta from the
// no-event logit.
template <std::floating_point T>
BetaEvidence<T> evidence_from_logits(T z_event, T z_no_event) {
  return {std::max(z_event, T(0)) + T(1), std::max(z_no_event, T(0)) + T(1)};
}

template <std::floating_point T>
BetaPrediction<T> predict(const BetaEvidence<T>& ev) {
  ev.validate();
  const T s = ev.strength();
  BetaPrediction<T> p{};
  p.belief_event = (ev.alpha - T(1)) / s;
  p.belief_no_event = (ev.beta - T(1)) / s;
  p.uncertainty = T(2) / s;
  p.probability = ev.alpha / s;
  p.label = ev.alpha > ev.beta ? 1 : 0;
  return p;
}

template <std::floating_point T>
DirichletPrediction<T> predict(const DirichletEvidence<T>& ev) {
  ev.validate();
  const T s = ev.strength();
  DirichletPrediction<T> p{};
  p.belief.resize(ev.alpha.size());
  p.probability.resize(ev.alpha.size());
  for (std::size_t c = 0; c < ev.alpha.size(); ++c) {
    p.belief[c] = (ev.alpha[c] - T(1)) / s;
    p.probability[c] = ev.alpha[c] / s;
  }
  p.uncertainty = static_cast<T>(ev.alpha.size()) / s;
  p.label = static_cast<std::size_t>(
      std::max_element(p.probability.begin(), p.probability.end()) - p.probability.begin());
  return p;
}

// ---- entropy ---------------------------------------------------------------

// Differential entropy of Dir(alpha):
//   ln B(alpha) + (S - C) psi(S) - sum_c (alpha_c - 1) psi(alpha_c).
inline double dirichlet_entropy(std::span<const double> alpha) {
  if (alpha.empty()) throw DomainError("dirichlet_entropy: empty alpha");
  double s = 0.0, log_b = 0.0, tail = 0.0;
  for (double a : alpha) {
    if (!(a > 0)) throw DomainError("dirichlet_entropy: alpha must be > 0");
    s += a;
    log_b += std::lgamma(a);
    tail += (a - 1.0) * digamma(a);
  }
  log_b -= std::lgamma(s);
  const double c = static_cast<double>(alpha.size());
  return log_b + (s - c) * digamma(s) - tail;
}

inline double beta_entropy(double a, double b) {
  const std::array<double, 2> alpha{a, b};
  return dirichlet_entropy(alpha);
}

// dH/dalpha_k = (S - C) psi'(S) - (alpha_k - 1) psi'(alpha_k).
inline std::vector<double> dirichlet_entropy_grad(std::span<const double> alpha) {
  double s = 0.0;
  for (double a : alpha) {
    if (!(a > 0)) throw DomainError("dirichlet_entropy: alpha must be > 0");
    s += a;
  }
  const double c = static_cast<double>(alpha.size());
  const double shared = (s - c) * trigamma(s);
  std::vector<double> g(alpha.size());
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    g[k] = shared - (alpha[k] - 1.0) * trigamma(alpha[k]);
  }
  return g;
}

// ---- losses ----------------------------------------------------------------

struct LossConfig {
  double lambda = 0.1;
  std::size_t anneal_epochs = 10;  // linear ramp 0 -> lambda; 0 disables

  double lambda_at(std::size_t epoch) const {
    if (anneal_epochs == 0) return lambda;
    return lambda * std::min(1.0, static_cast<double>(epoch) / static_cast<double>(anneal_epochs));
  }
  void validate() const {
    if (!std::isfinite(lambda) || lambda < 0) throw ConfigError("loss: lambda must be finite and >= 0");
  }
};

inline constexpr double kProbClamp = 1e-7;

// BCE(alpha/S, y) - lambda * H(Beta(alpha, beta)) for one event and its
// gradient with respect to (alpha, beta).
struct BetaLossTerm {
  double value;
  double d_alpha;
  double d_beta;
};

inline BetaLossTerm beta_loss_term(double alpha, double beta, int y, double lambda) {
  if (y != 0 && y != 1) throw DataError("edl_loss: label outside {0,1}");
  const double s = alpha + beta;
  const double p_raw = alpha / s;
  const double p = std::clamp(p_raw, kProbClamp, 1.0 - kProbClamp);
  const bool clamped = p != p_raw;
  BetaLossTerm t{};
  t.value = y ? -std::log(p) : -std::log1p(-p);
  double d_p = clamped ? 0.0 : (y ? -1.0 / p : 1.0 / (1.0 - p));
  t.d_alpha = d_p * beta / (s * s);
  t.d_beta = -d_p * alpha / (s * s);
  if (lambda != 0.0) {
    const std::array<double, 2> a{alpha, beta};
    t.value -= lambda * dirichlet_entropy(a);
    const auto g = dirichlet_entropy_grad(a);
    t.d_alpha -= lambda * g[0];
    t.d_beta -= lambda * g[1];
  }
  return t;
}

// Mean over samples and events of the per-event term, with gradients with
// respect to the head logits (event, no-event) of every (sample, event).
// Logits and labels are row-major (sample, event).
template <std::floating_point T>
struct EdlLossResult {
  double value = 0.0;
  std::vector<std::array<T, 2>> grad;
};

template <std::floating_point T>
EdlLossResult<T> edl_loss(std::span<const std::array<T, 2>> logits,
                          std::span<const std::uint8_t> labels, double lambda) {
  if (logits.size() != labels.size()) {
    throw DimensionError("edl_loss: " + std::to_string(logits.size()) + " logit pairs vs " +
                         std::to_string(labels.size()) + " labels");
  }
  EdlLossResult<T> r;
  r.grad.resize(logits.size());
  if (logits.empty()) return r;
  const double scale = 1.0 / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z1 = logits[i][0], z2 = logits[i][1];
    const double alpha = std::max(z1, 0.0) + 1.0;
    const double beta = std::max(z2, 0.0) + 1.0;
    const auto t = beta_loss_term(alpha, beta, labels[i], lambda);
    r.value += t.value * scale;
    r.grad[i][0] = static_cast<T>(z1 > 0 ? t.d_alpha * scale : 0.0);
    r.grad[i][1] = static_cast<T>(z2 > 0 ? t.d_beta * scale : 0.0);
  }
  return r;
}

// Multiclass variant: mean of CE(alpha/S, y) - lambda * H(Dir(alpha)), with
// gradient with respect to alpha. `targets` is the class index per sample.
struct DirichletLossResult {
  double value = 0.0;
  std::vector<std::vector<double>> grad_alpha;
};

inline DirichletLossResult dirichlet_edl_loss(const std::vector<std::vector<double>>& alphas,
                                              std::span<const std::size_t> targets,
                                              double lambda) {
  if (alphas.size() != targets.size()) {
    throw DimensionError("dirichlet_edl_loss: sample count mismatch");
  }
  DirichletLossResult r;
  if (alphas.empty()) return r;
  const double scale = 1.0 / static_cast<double>(alphas.size());
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    const auto& a = alphas[i];
    if (targets[i] >= a.size()) throw DataError("dirichlet_edl_loss: target out of range");
    const double s = std::accumulate(a.begin(), a.end(), 0.0);
    const std::size_t y = targets[i];
    const double p_raw = a[y] / s;
    const double p = std::clamp(p_raw, kProbClamp, 1.0 - kProbClamp);
    r.value += -std::log(p) * scale;
    std::vector<double> g(a.size(), 0.0);
    if (p == p_raw) {
      // d(-ln(a_y / S))/da_k = 1/S - [k == y] / a_y
      for (std::size_t k = 0; k < a.size(); ++k) g[k] = 1.0 / s - (k == y ? 1.0 / a[y] : 0.0);
    }
    if (lambda != 0.0) {
      r.value -= lambda * dirichlet_entropy(a) * scale;
      const auto gh = dirichlet_entropy_grad(a);
      for (std::size_t k = 0; k < a.size(); ++k) g[k] -= lambda * gh[k];
    }
    for (auto& v : g) v *= scale;
    r.grad_alpha.push_back(std::move(g));
  }
  return r;
}

}  // namespace ur2m::edl
