// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Dry source signals for synthetic scenes.

#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ctr/common/error.hpp"
#include "ctr/signal/wav_io.hpp"
#include "ctr/signal/waveform.hpp"

namespace ctr {

enum class SourceKind { kSpeechShaped, kWhiteBursts, kWav };

inline SourceKind ParseSourceKind(const std::string& s) {
  if (s == "speech") return SourceKind::kSpeechShaped;
  if (s == "bursts") return SourceKind::kWhiteBursts;
  if (s == "wav") return SourceKind::kWav;
  throw ConfigError("unknown source kind '" + s + "' (expected speech, bursts or wav)");
}

inline const char* SourceKindName(SourceKind k) {
  switch (k) {
    case SourceKind::kSpeechShaped: return "speech";
    case SourceKind::kWhiteBursts: return "bursts";
    case SourceKind::kWav: return "wav";
  }
  return "speech";
}

// Syllable-like noise: each 80-300 ms syllable is white noise through two
// AR(2) resonators with freshly drawn formants, shaped by a Hann envelope
// with a random level; 20% of slots are pauses. The result is sparse in
// time and frequency, like speech.
inline std::vector<double> SpeechShapedNoise(std::size_t length, int sample_rate, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> dur(0.08, 0.3);
  std::uniform_real_distribution<double> f1(250.0, 900.0), f2(900.0, 0.4 * sample_rate);
  std::uniform_real_distribution<double> level_db(-12.0, 0.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> x(length, 0.0);
  std::size_t n = 0;
  while (n < length) {
    const auto len = static_cast<std::size_t>(dur(rng) * sample_rate);
    const bool pause = unit(rng) < 0.2;
    double a[2][2];
    for (int k = 0; k < 2; ++k) {
      const double theta = 2.0 * std::numbers::pi * (k == 0 ? f1(rng) : f2(rng)) / sample_rate;
      const double radius = 0.97;
      a[k][0] = 2.0 * radius * std::cos(theta);
      a[k][1] = -radius * radius;
    }
    const double gain = std::pow(10.0, level_db(rng) / 20.0);
    double s1[2] = {0, 0}, s2[2] = {0, 0};
    for (std::size_t i = 0; i < len && n < length; ++i, ++n) {
      const double e = normal(rng);
      double out = 0.0;
      for (int k = 0; k < 2; ++k) {
        const double y = e + a[k][0] * s1[k] + a[k][1] * s2[k];
        s2[k] = s1[k];
        s1[k] = y;
        out += y;
      }
      const double env = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (i + 0.5) / len);
      x[n] = pause ? 0.0 : gain * env * out;
    }
  }
  return x;
}

// White noise in 50-300 ms bursts separated by 20-150 ms pauses.
inline std::vector<double> WhiteBursts(std::size_t length, int sample_rate, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> on(0.05, 0.3), off(0.02, 0.15);
  std::vector<double> x(length, 0.0);
  std::size_t n = 0;
  while (n < length) {
    const auto burst = static_cast<std::size_t>(on(rng) * sample_rate);
    for (std::size_t i = 0; i < burst && n < length; ++i, ++n) x[n] = normal(rng);
    n += static_cast<std::size_t>(off(rng) * sample_rate);
  }
  return x;
}

// Loops or truncates a WAV file to `length` samples.
inline std::vector<double> WavSource(const std::string& path, std::size_t length, int sample_rate) {
  const Waveform w = ReadWav(path);
  if (w.sample_rate != sample_rate)
    throw DataError("source " + path + " is " + std::to_string(w.sample_rate) + " Hz, scene is " +
                    std::to_string(sample_rate) + " Hz");
  if (w.samples.empty()) throw DataError("source " + path + " is empty");
  std::vector<double> x(length);
  for (std::size_t n = 0; n < length; ++n) x[n] = w.samples[n % w.samples.size()];
  return x;
}

/// Scales x to unit population standard deviation (no-op for a silent signal).
inline void NormalizeUnitStd(std::vector<double>& x) {
  const double s = StdDev(x);
  if (s > 0.0)
    for (double& v : x) v /= s;
}

}  // namespace ctr
