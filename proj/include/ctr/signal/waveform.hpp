// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ctr/common/error.hpp"

namespace ctr {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 0;

  Waveform() = default;
  Waveform(std::vector<double> s, int sr) : samples(std::move(s)), sample_rate(sr) {}

  std::size_t size() const { return samples.size(); }
  std::span<const double> view() const { return samples; }

  void Validate() const {
    if (sample_rate <= 0) throw DataError("waveform sample rate must be positive");
    if (samples.empty()) throw DataError("waveform must hold at least one sample");
    for (double v : samples)
      if (!std::isfinite(v)) throw DataError("waveform contains non-finite samples");
  }
};

inline double Energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

inline double Dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot product of unequal lengths");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Population standard deviation.
inline double StdDev(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(x.size()));
}

}  // namespace ctr
