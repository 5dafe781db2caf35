// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Synthetic acoustic paths: time-domain room responses (fractional-delay
// direct path plus sparse decaying reflections) and random subband filters.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ctr/common/error.hpp"
#include "ctr/common/types.hpp"

namespace ctr {

inline constexpr double kSpeedOfSound = 343.0;

// Amplitude envelope of a T60 decay after `seconds`: 60 dB of energy over t60.
inline double DecayEnvelope(double seconds, double t60) { return std::pow(10.0, -3.0 * seconds / t60); }

struct SparseFir {
  std::vector<std::size_t> index;
  std::vector<double> value;

  std::size_t length() const { return index.empty() ? 0 : index.back() + 1; }

  std::vector<double> Dense() const {
    std::vector<double> h(length(), 0.0);
    for (std::size_t i = 0; i < index.size(); ++i) h[index[i]] += value[i];
    return h;
  }
};

struct RoomFirConfig {
  double max_length_s = 0.6;
  double reflections_per_s = 1000.0;
  // Reflection amplitude relative to the direct-path gain before decay.
  double reflection_scale = 0.3;
  int interp_taps = 33;
};

namespace detail {

// Hann-windowed sinc delay kernel. Integer delays give a single unit tap.
inline void AddFractionalDelay(std::vector<double>& h, double delay_samples, double gain, int taps) {
  const double rounded = std::round(delay_samples);
  if (std::abs(delay_samples - rounded) < 1e-12) {
    const auto at = static_cast<std::size_t>(rounded);
    if (at >= h.size()) h.resize(at + 1, 0.0);
    h[at] += gain;
    return;
  }
  const int half = taps / 2;
  const long centre = static_cast<long>(std::floor(delay_samples));
  for (long n = centre - half + 1; n <= centre + half; ++n) {
    if (n < 0) continue;
    const double x = static_cast<double>(n) - delay_samples;
    const double sinc = std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
    const double win = 0.5 + 0.5 * std::cos(std::numbers::pi * x / (half + 1));
    if (static_cast<std::size_t>(n) >= h.size()) h.resize(n + 1, 0.0);
    h[n] += gain * sinc * win;
  }
}

}  // namespace detail

// Direct path at `delay_s` with amplitude `gain`, then reflections at random
// positions after it. Positions and normal draws do not depend on t60, so for
// a fixed rng state the reverberant energy grows strictly with t60.
inline SparseFir BuildRoomFir(double gain, double delay_s, double t60, int sample_rate, const RoomFirConfig& cfg,
                              std::mt19937_64& rng) {
  if (!(t60 > 0.0) || sample_rate <= 0 || delay_s < 0.0) throw ConfigError("invalid room response parameters");
  std::vector<double> dense;
  detail::AddFractionalDelay(dense, delay_s * sample_rate, gain, cfg.interp_taps);
  const double direct = delay_s * sample_rate;
  const auto total = static_cast<std::size_t>(cfg.max_length_s * sample_rate);
  const auto count = static_cast<std::size_t>(cfg.reflections_per_s * cfg.max_length_s);
  const std::size_t first = static_cast<std::size_t>(std::ceil(direct)) + 1;

  std::map<std::size_t, double> taps;
  SparseFir fir;
  for (std::size_t i = 0; i < dense.size(); ++i)
    if (dense[i] != 0.0) taps[i] += dense[i];
  if (total > first && count > 0) {
    std::uniform_int_distribution<std::size_t> pos(first, total - 1);
    std::normal_distribution<double> amp(0.0, 1.0);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t at = pos(rng);
      const double a = amp(rng);
      const double lag_s = (static_cast<double>(at) - direct) / sample_rate;
      taps[at] += gain * cfg.reflection_scale * a * DecayEnvelope(lag_s, t60);
    }
  }
  for (const auto& [i, v] : taps) {
    fir.index.push_back(i);
    fir.value.push_back(v);
  }
  return fir;
}

// Linear convolution truncated to the input length.
inline std::vector<double> ApplyFir(const SparseFir& fir, std::span<const double> x) {
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t k = 0; k < fir.index.size(); ++k) {
    const std::size_t d = fir.index[k];
    const double v = fir.value[k];
    for (std::size_t n = d; n < x.size(); ++n) out[n] += v * x[n - d];
  }
  return out;
}

// Energy of the response beyond the direct-path interpolation kernel.
inline double ReverberantEnergy(const SparseFir& fir, double delay_s, int sample_rate, int interp_taps = 33) {
  const double edge = delay_s * sample_rate + interp_taps / 2;
  double e = 0.0;
  for (std::size_t i = 0; i < fir.index.size(); ++i)
    if (static_cast<double>(fir.index[i]) > edge) e += fir.value[i] * fir.value[i];
  return e;
}

/// Unit direct tap, everything else zero: the identity subband filter.
inline Eigen::MatrixXcd IdentitySubbandTaps(int bins, int past_taps, int future_taps) {
  Eigen::MatrixXcd taps = Eigen::MatrixXcd::Zero(bins, past_taps + future_taps);
  taps.col(past_taps - 1).setOnes();
  return taps;
}

struct SubbandTapConfig {
  // Tail magnitude relative to the direct tap before decay.
  double tail_scale = 0.25;
  // Ratio cap between the direct tap and every other tap.
  double direct_dominance = 3.0;
};

// Random subband filter [bin, tap] with window [t - past + 1, t + future].
// Tap past-1 is the direct path gain * exp(i w tau) (so the image carries the
// phase of a tau-second delay); tap past-1-l holds the l-frame tail with a
// T60 decay; future taps model leakage. Every non-direct tap is clamped to
// |direct| / direct_dominance.
inline Eigen::MatrixXcd RandomSubbandTaps(int bins, int past_taps, int future_taps, double gain, double delay_s,
                                          double t60, int hop, int sample_rate, const SubbandTapConfig& cfg,
                                          std::mt19937_64& rng) {
  if (past_taps < 1 || future_taps < 0 || bins < 1) throw ConfigError("invalid subband filter shape");
  if (!(t60 > 0.0)) throw ConfigError("t60 must be positive");
  const int fft_size = 2 * (bins - 1);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  Eigen::MatrixXcd taps(bins, past_taps + future_taps);
  const double cap = gain / cfg.direct_dominance;
  for (int f = 0; f < bins; ++f) {
    const double omega = 2.0 * std::numbers::pi * f * sample_rate / std::max(fft_size, 1);
    taps(f, past_taps - 1) = gain * std::polar(1.0, omega * delay_s);
    for (int k = 0; k < past_taps + future_taps; ++k) {
      if (k == past_taps - 1) continue;
      const int lag = std::abs(past_taps - 1 - k);
      const double decay = DecayEnvelope(static_cast<double>(lag) * hop / sample_rate, t60);
      Complex v(normal(rng), normal(rng));
      v *= gain * cfg.tail_scale * decay;
      if (std::abs(v) > cap) v *= cap / std::abs(v);
      taps(f, k) = v;
    }
  }
  return taps;
}

}  // namespace ctr
