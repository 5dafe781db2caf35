// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Short-time Fourier analysis/synthesis with a sqrt-Hann window.
//
// Framing: the signal is zero-padded by (win - hop) samples at the front and
// by at least as much at the back, so that every original sample is covered
// by the same number of windows. Frame t then spans original samples
// [t * hop - pad, t * hop - pad + win). Synthesis is weighted overlap-add
// with the analysis window, normalized by the summed squared window, which
// makes istft(stft(x)) == x up to rounding for any length.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "ctr/common/error.hpp"
#include "ctr/common/types.hpp"
#include "ctr/signal/waveform.hpp"

namespace ctr {

enum class WindowType { kSqrtHann, kHann, kRectangular };

struct StftConfig {
  double win_ms = 16.0;
  double hop_ms = 8.0;
  WindowType window = WindowType::kSqrtHann;

  bool operator==(const StftConfig&) const = default;
};

/// Sample-domain framing derived from a StftConfig at one sample rate.
struct StftGeometry {
  int sample_rate = 0;
  int win = 0;
  int hop = 0;
  int fft_size = 0;
  int pad = 0;

  int bins() const { return fft_size / 2 + 1; }

  Eigen::Index FramesFor(std::size_t length) const {
    const long padded = static_cast<long>(length) + 2L * pad;
    const long extra = std::max(0L, padded - win);
    return 1 + (extra + hop - 1) / hop;
  }

  // Original-sample range [first, last) touched by frame t, before clipping
  // to the signal bounds.
  long FrameBegin(Eigen::Index t) const { return static_cast<long>(t) * hop - pad; }
  long FrameEnd(Eigen::Index t) const { return FrameBegin(t) + win; }
};

namespace detail {

inline int MsToSamples(double ms, int sample_rate, const char* what) {
  const double exact = ms * sample_rate / 1000.0;
  const double rounded = std::round(exact);
  if (!(ms > 0.0) || std::abs(exact - rounded) > 1e-9 || rounded < 1.0)
    throw ConfigError(std::string("stft ") + what + " of " + std::to_string(ms) +
                      " ms is not a whole number of samples at " +
                      std::to_string(sample_rate) + " Hz");
  return static_cast<int>(rounded);
}

}  // namespace detail

inline StftGeometry ResolveGeometry(const StftConfig& cfg, int sample_rate) {
  if (sample_rate <= 0) throw ConfigError("sample rate must be positive");
  StftGeometry g;
  g.sample_rate = sample_rate;
  g.win = detail::MsToSamples(cfg.win_ms, sample_rate, "window");
  g.hop = detail::MsToSamples(cfg.hop_ms, sample_rate, "hop");
  if (g.hop > g.win || g.win % g.hop != 0)
    throw ConfigError("stft hop must divide the window length");
  if (g.win % 2 != 0) throw ConfigError("stft window length must be even");
  g.fft_size = g.win;
  g.pad = g.win - g.hop;
  return g;
}

inline std::vector<double> MakeWindow(WindowType type, int length) {
  std::vector<double> w(length);
  for (int n = 0; n < length; ++n) {
    const double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
    switch (type) {
      case WindowType::kSqrtHann: w[n] = std::sqrt(hann); break;
      case WindowType::kHann: w[n] = hann; break;
      case WindowType::kRectangular: w[n] = 1.0; break;
    }
  }
  return w;
}

/// Complex STFT; values are indexed [frame, bin].
struct Spectrogram {
  Eigen::MatrixXcd values;
  StftConfig config;
  int sample_rate = 0;
  std::size_t original_length = 0;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index bins() const { return values.cols(); }
};

// Holds window and FFT plans for one geometry. The plan cache inside
// Eigen::FFT is mutable, so one instance must not be used from two threads
// at once; the free functions below build their own.
class Stft {
 public:
  Stft(const StftConfig& cfg, int sample_rate)
      : cfg_(cfg), geo_(ResolveGeometry(cfg, sample_rate)), window_(MakeWindow(cfg.window, geo_.win)) {
    fft_.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    frame_.resize(geo_.fft_size);
    spec_.resize(geo_.bins());
  }

  const StftGeometry& geometry() const { return geo_; }
  const StftConfig& config() const { return cfg_; }
  const std::vector<double>& window() const { return window_; }

  Eigen::MatrixXcd ForwardMatrix(std::span<const double> x) const {
    const Eigen::Index frames = geo_.FramesFor(x.size());
    // Filled as [bin, frame] so each frame is contiguous, then transposed.
    Eigen::MatrixXcd out_t(geo_.bins(), frames);
    const long n = static_cast<long>(x.size());
    for (Eigen::Index t = 0; t < frames; ++t) {
      const long begin = geo_.FrameBegin(t);
      for (int k = 0; k < geo_.win; ++k) {
        const long idx = begin + k;
        frame_[k] = (idx >= 0 && idx < n) ? x[idx] * window_[k] : 0.0;
      }
      fft_.fwd(out_t.col(t).data(), frame_.data(), geo_.fft_size);
    }
    return out_t.transpose();
  }

  Spectrogram Forward(const Waveform& w) const {
    if (w.sample_rate != geo_.sample_rate)
      throw ConfigError("stft configured for " + std::to_string(geo_.sample_rate) +
                        " Hz but waveform is " + std::to_string(w.sample_rate) + " Hz");
    Spectrogram s;
    s.values = ForwardMatrix(w.samples);
    s.config = cfg_;
    s.sample_rate = w.sample_rate;
    s.original_length = w.size();
    return s;
  }

  std::vector<double> InverseMatrix(const Eigen::MatrixXcd& values, std::size_t length) const {
    CheckShape(values, length);
    const long n = static_cast<long>(length);
    std::vector<double> acc(length, 0.0);
    std::vector<double> norm(length, 0.0);
    const Eigen::MatrixXcd values_t = values.transpose();
    for (Eigen::Index t = 0; t < values.rows(); ++t) {
      std::copy_n(values_t.col(t).data(), geo_.bins(), spec_.begin());
      // The real inverse only sees the real part of DC and Nyquist.
      spec_.front().imag(0.0);
      spec_.back().imag(0.0);
      fft_.inv(frame_.data(), spec_.data(), geo_.fft_size);
      const long begin = geo_.FrameBegin(t);
      for (int k = 0; k < geo_.win; ++k) {
        const long idx = begin + k;
        if (idx < 0 || idx >= n) continue;
        acc[idx] += frame_[k] * window_[k];
        norm[idx] += window_[k] * window_[k];
      }
    }
    for (long i = 0; i < n; ++i) acc[i] = norm[i] > 1e-12 ? acc[i] / norm[i] : 0.0;
    return acc;
  }

  Waveform Inverse(const Spectrogram& s, std::size_t length) const {
    return Waveform(InverseMatrix(s.values, length), geo_.sample_rate);
  }

  // Adjoint of InverseMatrix under <A, B> = Re sum conj(A) B. Maps a
  // time-domain gradient onto the spectrogram (d/dRe + i d/dIm).
  Eigen::MatrixXcd InverseAdjoint(std::span<const double> grad) const {
    const std::size_t length = grad.size();
    const Eigen::Index frames = geo_.FramesFor(length);
    const long n = static_cast<long>(length);
    std::vector<double> norm(length, 0.0);
    for (Eigen::Index t = 0; t < frames; ++t) {
      const long begin = geo_.FrameBegin(t);
      for (int k = 0; k < geo_.win; ++k) {
        const long idx = begin + k;
        if (idx >= 0 && idx < n) norm[idx] += window_[k] * window_[k];
      }
    }
    Eigen::MatrixXcd out(frames, geo_.bins());
    const double inv_n = 1.0 / geo_.fft_size;
    for (Eigen::Index t = 0; t < frames; ++t) {
      const long begin = geo_.FrameBegin(t);
      for (int k = 0; k < geo_.win; ++k) {
        const long idx = begin + k;
        frame_[k] = (idx >= 0 && idx < n && norm[idx] > 1e-12) ? grad[idx] * window_[k] / norm[idx] : 0.0;
      }
      fft_.fwd(spec_.data(), frame_.data(), geo_.fft_size);
      const int last = geo_.bins() - 1;
      for (int f = 0; f <= last; ++f) {
        const double scale = (f == 0 || f == last) ? inv_n : 2.0 * inv_n;
        Complex v = spec_[f] * scale;
        if (f == 0 || f == last) v.imag(0.0);
        out(t, f) = v;
      }
    }
    return out;
  }

 private:
  void CheckShape(const Eigen::MatrixXcd& values, std::size_t length) const {
    if (values.cols() != geo_.bins())
      throw DimensionError("spectrogram has " + std::to_string(values.cols()) + " bins, expected " +
                           std::to_string(geo_.bins()));
    if (length == 0 || values.rows() != geo_.FramesFor(length))
      throw DimensionError("spectrogram with " + std::to_string(values.rows()) +
                           " frames cannot be inverted to " + std::to_string(length) + " samples");
  }

  StftConfig cfg_;
  StftGeometry geo_;
  std::vector<double> window_;
  mutable Eigen::FFT<double> fft_;
  mutable std::vector<double> frame_;
  mutable std::vector<Complex> spec_;
};

inline Spectrogram stft(const Waveform& w, const StftConfig& cfg) {
  return Stft(cfg, w.sample_rate).Forward(w);
}

inline Waveform istft(const Spectrogram& s, std::size_t length) {
  return Stft(s.config, s.sample_rate).Inverse(s, length);
}

}  // namespace ctr
