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

// MFCC front end: hamming window -> |FFT| -> HTK mel filterbank -> log ->
// orthonormal DCT-II. Frames are taken without centering or padding.

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "ur2m/tensor.hpp"

namespace ur2m::signal {

inline bool is_power_of_two(std::size_t n) { return n && !(n & (n - 1)); }

inline std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// In-place iterative radix-2 Cooley-Tukey.
inline void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) {
    throw DomainError("fft: length " + std::to_string(n) +
                      " is not a power of two");
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

inline std::vector<std::complex<double>> fft(std::span<const double> x) {
  std::vector<std::complex<double>> a(x.begin(), x.end());
  fft_inplace(a);
  return a;
}

// Magnitudes of bins 0..n/2.
inline std::vector<double> magnitude_spectrum(std::span<const double> frame,
                                              std::size_t n_fft) {
  std::vector<std::complex<double>> a(n_fft);
  for (std::size_t i = 0; i < frame.size() && i < n_fft; ++i) a[i] = frame[i];
  fft_inplace(a);
  std::vector<double> mag(n_fft / 2 + 1);
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(a[k]);
  return mag;
}

inline std::vector<double> hamming_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n == 1) return w;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                  static_cast<double>(n - 1));
  }
  return w;
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// Row-major (n_mels, n_fft/2+1) triangular filters equally spaced on the mel
// axis between 0 Hz and Nyquist.
inline std::vector<std::vector<double>> mel_filterbank(std::size_t n_mels,
                                                       std::size_t n_fft,
                                                       double sample_rate) {
  const std::size_t n_bins = n_fft / 2 + 1;
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t m = 0; m < edges.size(); ++m) {
    edges[m] = mel_to_hz(mel_hi * static_cast<double>(m) /
                         static_cast<double>(n_mels + 1));
  }
  std::vector<std::vector<double>> bank(n_mels, std::vector<double>(n_bins, 0.0));
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    double row_sum = 0.0;
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = sample_rate * static_cast<double>(k) / static_cast<double>(n_fft);
      double v = 0.0;
      if (f > lo && f <= mid) {
        v = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        v = (hi - f) / (hi - mid);
      }
      bank[m][k] = v;
      row_sum += v;
    }
    if (!(row_sum > 0.0)) {
      throw ConfigError("mel_filterbank: filter " + std::to_string(m) +
                        " covers no FFT bin; reduce n_mels or raise n_fft");
    }
  }
  return bank;
}

// Orthonormal DCT-II, first n_out rows of the n_in x n_in matrix.
inline std::vector<std::vector<double>> dct2_matrix(std::size_t n_out,
                                                    std::size_t n_in) {
  std::vector<std::vector<double>> m(n_out, std::vector<double>(n_in));
  const double n = static_cast<double>(n_in);
  for (std::size_t k = 0; k < n_out; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (std::size_t i = 0; i < n_in; ++i) {
      m[k][i] = scale * std::cos(std::numbers::pi * static_cast<double>(k) *
                                 (static_cast<double>(i) + 0.5) / n);
    }
  }
  return m;
}

struct FeatureConfig {
  double sample_rate = 4000.0;
  double frame_len_ms = 80.0;
  double hop_ms = 40.0;
  std::size_t n_mels = 20;
  std::size_t n_mfcc = 10;

  std::size_t frame_samples() const {
    return static_cast<std::size_t>(std::lround(sample_rate * frame_len_ms / 1000.0));
  }
  std::size_t hop_samples() const {
    return static_cast<std::size_t>(std::lround(sample_rate * hop_ms / 1000.0));
  }
  std::size_t n_fft() const { return next_power_of_two(frame_samples()); }
  std::size_t frames_for(std::size_t signal_len) const {
    if (signal_len < frame_samples()) return 0;
    return (signal_len - frame_samples()) / hop_samples() + 1;
  }

  void validate() const {
    if (!(sample_rate > 0)) throw ConfigError("feature config: sample_rate must be > 0");
    if (frame_samples() == 0 || hop_samples() == 0) {
      throw ConfigError("feature config: frame and hop must span >= 1 sample");
    }
    if (hop_samples() > frame_samples()) {
      throw ConfigError("feature config: hop exceeds frame length");
    }
    if (n_mfcc == 0 || n_mfcc > n_mels) {
      throw ConfigError("feature config: need 0 < n_mfcc <= n_mels");
    }
  }
};

// Precomputed window, filterbank and DCT for one configuration.
class MfccExtractor {
 public:
  explicit MfccExtractor(const FeatureConfig& cfg)
      : cfg_(cfg),
        window_((cfg.validate(), hamming_window(cfg.frame_samples()))),
        bank_(mel_filterbank(cfg.n_mels, cfg.n_fft(), cfg.sample_rate)),
        dct_(dct2_matrix(cfg.n_mfcc, cfg.n_mels)) {}

  const FeatureConfig& config() const { return cfg_; }

  // Returns a (1, n_mfcc, frames) tensor.
  template <typename Sample>
  Tensor<float> operator()(std::span<const Sample> signal) const {
    const std::size_t frame = cfg_.frame_samples();
    const std::size_t hop = cfg_.hop_samples();
    if (signal.size() < frame) {
      throw DataError("extract_mfcc: signal of " + std::to_string(signal.size()) +
                      " samples is shorter than one frame (" +
                      std::to_string(frame) + ")");
    }
    const std::size_t frames = cfg_.frames_for(signal.size());
    Tensor<float> out({1, cfg_.n_mfcc, frames});
    std::vector<double> buf(frame);
    std::vector<double> logmel(cfg_.n_mels);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t i = 0; i < frame; ++i) {
        buf[i] = static_cast<double>(signal[t * hop + i]) * window_[i];
      }
      const auto mag = magnitude_spectrum(buf, cfg_.n_fft());
      for (std::size_t m = 0; m < cfg_.n_mels; ++m) {
        double e = 0.0;
        for (std::size_t k = 0; k < mag.size(); ++k) e += bank_[m][k] * mag[k];
        logmel[m] = std::log(e + 1e-10);
      }
      for (std::size_t k = 0; k < cfg_.n_mfcc; ++k) {
        double c = 0.0;
        for (std::size_t m = 0; m < cfg_.n_mels; ++m) c += dct_[k][m] * logmel[m];
        out.at(0, k, t) = static_cast<float>(c);
      }
    }
    return out;
  }

 private:
  FeatureConfig cfg_;
  std::vector<double> window_;
  std::vector<std::vector<double>> bank_;
  std::vector<std::vector<double>> dct_;
};

template <typename Sample>
Tensor<float> extract_mfcc(std::span<const Sample> signal, const FeatureConfig& cfg) {
  return MfccExtractor(cfg)(signal);
}

}  // namespace ur2m::signal
