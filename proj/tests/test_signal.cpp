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

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>

#include "ur2m/dataset.hpp"
#include "ur2m/mfcc.hpp"
#include "ur2m/pipeline.hpp"
#include "ur2m/synthetic.hpp"

namespace ur2m {
namespace {

std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(a), std::sin(a));
    }
    out[k] = acc;
  }
  return out;
}

TEST(FftTest, ImpulseHasFlatMagnitude) {
  const std::vector<double> x{1, 0, 0, 0};
  const auto y = signal::fft(x);
  ASSERT_EQ(y.size(), 4u);
  for (const auto& v : y) EXPECT_NEAR(std::abs(v), 1.0, 1e-15);
}

TEST(FftTest, MatchesNaiveDft) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d;
  std::vector<double> x(256);
  for (auto& v : x) v = d(rng);
  const auto fast = signal::fft(x);
  const auto slow = naive_dft(x);
  double worst = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) worst = std::max(worst, std::abs(fast[k] - slow[k]));
  EXPECT_LE(worst, 1e-9);
}

TEST(FftTest, NonPowerOfTwoRejected) {
  std::vector<std::complex<double>> a(6);
  EXPECT_THROW(signal::fft_inplace(a), Error);
}

TEST(MelTest, FiltersAreTriangularAndCoverTheBand) {
  const auto bank = signal::mel_filterbank(20, 512, 4000.0);
  ASSERT_EQ(bank.size(), 20u);
  for (const auto& row : bank) {
    ASSERT_EQ(row.size(), 257u);
    double peak = 0.0;
    std::size_t rises = 0, falls = 0;
    for (std::size_t k = 0; k < row.size(); ++k) {
      EXPECT_GE(row[k], 0.0);
      EXPECT_LE(row[k], 1.0);
      peak = std::max(peak, row[k]);
      if (k > 0 && row[k] > row[k - 1]) rises += falls > 0;  // rise after a fall breaks unimodality
      if (k > 0 && row[k] < row[k - 1]) ++falls;
    }
    EXPECT_GT(peak, 0.0);
    EXPECT_EQ(rises, 0u);
  }
  EXPECT_THROW(signal::mel_filterbank(200, 64, 4000.0), ConfigError);
}

TEST(MelTest, MelScaleRoundTrip) {
  for (double hz : {0.0, 100.0, 1000.0, 1999.0}) {
    EXPECT_NEAR(signal::mel_to_hz(signal::hz_to_mel(hz)), hz, 1e-9);
  }
  EXPECT_NEAR(signal::hz_to_mel(1000.0), 1000.0, 0.5);
}

TEST(DctTest, SquareMatrixIsOrthonormal) {
  const std::size_t n = 20;
  const auto m = signal::dct2_matrix(n, n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += m[a][i] * m[b][i];
      EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-12);
    }
  }
}

TEST(MfccTest, ShapeAndDeterminism) {
  signal::FeatureConfig cfg;
  std::vector<float> x(4000);
  std::mt19937_64 rng(1);
  std::normal_distribution<float> d;
  for (auto& v : x) v = d(rng);
  const auto a = signal::extract_mfcc<float>(x, cfg);
  const auto b = signal::extract_mfcc<float>(x, cfg);
  EXPECT_EQ(a.shape(), (Shape{1, 10, cfg.frames_for(4000)}));
  EXPECT_EQ(a, b);
  EXPECT_TRUE(a.all_finite());
  std::vector<float> short_signal(10);
  EXPECT_THROW(signal::extract_mfcc<float>(short_signal, cfg), DataError);
}

data::Dataset toy_dataset(std::size_t positives, std::size_t len, std::uint64_t seed) {
  data::Dataset ds;
  ds.name = "toy";
  ds.sample_rate = 100;
  ds.events = {"a", "b"};
  ds.signal_len = len;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(-1, 1);
  for (std::size_t i = 0; i < positives; ++i) {
    data::Sample s;
    s.labels = {1, 0};
    for (std::size_t t = 0; t < len; ++t) s.signal.push_back(d(rng));
    ds.samples.push_back(s);
  }
  data::Sample neg;
  neg.labels = {0, 1};
  neg.signal.assign(len, 5.0f);
  ds.samples.push_back(neg);
  return ds;
}

TEST(SmoteTest, TwoPositivesStayOnTheSegment) {
  auto ds = toy_dataset(2, 6, 4);
  const auto out = data::smote_upsample(ds, 0, 12, 5, 9);
  ASSERT_EQ(out.samples.size(), ds.samples.size() + 10);
  const auto& p = ds.samples[0].signal;
  const auto& q = ds.samples[1].signal;
  for (std::size_t i = ds.samples.size(); i < out.samples.size(); ++i) {
    const auto& s = out.samples[i].signal;
    // s = p + u (q - p) with one u shared by every coordinate
    const double u = (s[0] - p[0]) / (q[0] - p[0]);
    EXPECT_GE(u, -1e-6);
    EXPECT_LE(u, 1 + 1e-6);
    for (std::size_t t = 0; t < s.size(); ++t) EXPECT_NEAR(s[t], p[t] + u * (q[t] - p[t]), 1e-5);
  }
}

TEST(SmoteTest, TargetCountAndBoundingBox) {
  const auto ds = toy_dataset(10, 8, 5);
  const auto out = data::smote_upsample(ds, 0, 40, 5, 1);
  EXPECT_EQ(out.samples.size() - ds.samples.size(), 30u);
  EXPECT_EQ(out.positives(0, data::Split::kTrain), 40u);
  for (std::size_t t = 0; t < 8; ++t) {
    float lo = 1e9f, hi = -1e9f;
    for (std::size_t i = 0; i < 10; ++i) {
      lo = std::min(lo, ds.samples[i].signal[t]);
      hi = std::max(hi, ds.samples[i].signal[t]);
    }
    for (std::size_t i = ds.samples.size(); i < out.samples.size(); ++i) {
      EXPECT_GE(out.samples[i].signal[t], lo - 1e-6f);
      EXPECT_LE(out.samples[i].signal[t], hi + 1e-6f);
      EXPECT_EQ(out.samples[i].labels, (std::vector<std::uint8_t>{1, 0}));
    }
  }
}

TEST(SmoteTest, TooFewPositivesIsADataError) {
  const auto ds = toy_dataset(1, 4, 6);
  EXPECT_THROW(data::smote_upsample(ds, 0, 5, 5, 0), DataError);
  EXPECT_THROW(data::smote_upsample(ds, 7, 5, 5, 0), ConfigError);
}

TEST(SyntheticTest, CountsAndColumnSums) {
  data::SyntheticConfig cfg;
  cfg.events = 3;
  cfg.n_per_event = 200;
  const auto ds = data::gen_synthetic(cfg);
  EXPECT_EQ(ds.indices(data::Split::kTrain).size(), 600u);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(ds.positives(c, data::Split::kTrain), 200u);
  EXPECT_EQ(ds.signal_len, 4000u);
}

TEST(SyntheticTest, NoiseFreeBurstPeaksAtItsFrequency) {
  data::SyntheticConfig cfg;
  cfg.events = 3;
  cfg.n_per_event = 2;
  cfg.snr_db_min = cfg.snr_db_max = std::numeric_limits<double>::infinity();
  cfg.duration_s = 1.024;  // 4096 samples: one FFT bin per 4000/4096 Hz
  const auto ds = data::gen_synthetic(cfg);
  const auto freqs = cfg.event_frequencies();
  for (const auto& s : ds.samples) {
    std::vector<double> x(s.signal.begin(), s.signal.end());
    const auto spec = signal::fft(x);
    std::size_t best = 1;
    for (std::size_t k = 1; k < spec.size() / 2; ++k) {
      if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
    }
    std::size_t c = 0;
    while (!s.labels[c]) ++c;
    const double hz = static_cast<double>(best) * cfg.sample_rate / static_cast<double>(x.size());
    EXPECT_NEAR(hz, freqs[c], cfg.sample_rate / static_cast<double>(x.size()));
  }
}

TEST(SyntheticTest, InvalidConfigurations) {
  data::SyntheticConfig cfg;
  cfg.events = 1;
  EXPECT_THROW(data::gen_synthetic(cfg), ConfigError);
  cfg.events = 3;
  cfg.frequencies = {100, 200, 2500};
  EXPECT_THROW(data::gen_synthetic(cfg), ConfigError);
}

TEST(DatasetTest, SaveLoadIsByteIdenticalAndLossless) {
  data::SyntheticConfig cfg;
  cfg.n_per_event = 5;
  cfg.test_count = 6;
  cfg.seed = 7;
  const auto ds = data::gen_synthetic(cfg);
  const auto root = std::filesystem::temp_directory_path() / "ur2m_dataset_test";
  std::filesystem::remove_all(root);
  data::save_dataset(ds, root / "a");
  data::save_dataset(data::gen_synthetic(cfg), root / "b");
  for (const char* f : {"manifest.json", "train.csv", "test.csv"}) {
    std::ifstream a(root / "a" / f, std::ios::binary), b(root / "b" / f, std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), {});
    const std::string sb((std::istreambuf_iterator<char>(b)), {});
    EXPECT_FALSE(sa.empty());
    EXPECT_EQ(sa, sb) << f;
  }
  const auto back = data::load_dataset(root / "a");
  ASSERT_EQ(back.samples.size(), ds.samples.size());
  EXPECT_EQ(back.events, ds.events);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    EXPECT_EQ(back.samples[i].signal, ds.samples[i].signal);
    EXPECT_EQ(back.samples[i].labels, ds.samples[i].labels);
    EXPECT_EQ(back.samples[i].split, ds.samples[i].split);
  }
  std::filesystem::remove_all(root);
  EXPECT_THROW(data::load_dataset(root / "missing"), Error);
}

TEST(CorruptionTest, ZeroMaskAndZeroSigma) {
  std::vector<float> x(100, 2.0f);
  EXPECT_EQ(data::corrupt(x, data::Corruption::kZeroMask, 1.0, 3), std::vector<float>(100, 0.0f));
  EXPECT_EQ(data::corrupt(x, data::Corruption::kGaussian, 0.0, 3), x);
  const auto half = data::corrupt(x, data::Corruption::kZeroMask, 0.5, 3);
  EXPECT_EQ(std::count(half.begin(), half.end(), 0.0f), 50);
  EXPECT_THROW(data::corrupt(x, data::Corruption::kZeroMask, 1.5, 3), DomainError);
  EXPECT_THROW(data::corrupt(x, data::Corruption::kGaussian, -1.0, 3), DomainError);
}

TEST(CorruptionTest, GaussianMeanAbsoluteIsHalfNormal) {
  const double sigma = 0.03;
  std::vector<float> x(10000, 0.25f);
  const auto y = data::corrupt(x, data::Corruption::kGaussian, sigma, 11);
  double mad = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mad += std::abs(static_cast<double>(y[i]) - x[i]);
  mad /= static_cast<double>(x.size());
  const double expected = sigma * std::sqrt(2.0 / std::numbers::pi);
  EXPECT_NEAR(mad, expected, 0.1 * expected);
}

TEST(PipelineTest, StandardizesTrainFeatures) {
  data::SyntheticConfig cfg;
  cfg.n_per_event = 10;
  const auto ds = data::gen_synthetic(cfg);
  const auto p = fit_pipeline(ds, signal::FeatureConfig{});
  const auto fs = featurize(ds, data::Split::kTrain, p);
  ASSERT_EQ(fs.size(), 30u);
  for (std::size_t k = 0; k < p.features.n_mfcc; ++k) {
    double sum = 0.0, sq = 0.0, n = 0.0;
    for (const auto& x : fs.inputs) {
      for (std::size_t t = 0; t < x.dim(2); ++t) {
        sum += x.at(0, k, t);
        sq += static_cast<double>(x.at(0, k, t)) * x.at(0, k, t);
        n += 1;
      }
    }
    EXPECT_NEAR(sum / n, 0.0, 1e-3);
    EXPECT_NEAR(sq / n, 1.0, 1e-2);
  }
  EXPECT_EQ(p.input_shape(ds.signal_len), (std::array<std::size_t, 3>{1, 10, fs.inputs[0].dim(2)}));
}

}  // namespace
}  // namespace ur2m
