// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Mixture-constraint losses, activity muting and the speaker-activity loss.
//
// Receivers follow the FilterEstimate layout: close-talk mics [0, C), then
// far-field mics [C, C + P). Each close-talk reconstruction uses the wearer's
// estimate unfiltered plus FCP images of everybody else; far-field
// reconstructions filter every speaker.

#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctr/common/error.hpp"
#include "ctr/fcp/fcp.hpp"
#include "ctr/scene/activity.hpp"
#include "ctr/signal/stft.hpp"
#include "ctr/signal/subband.hpp"

namespace ctr {

enum class Objective { kFAbs, kL2 };

inline Objective ParseObjective(const std::string& s) {
  if (s == "f-abs") return Objective::kFAbs;
  if (s == "l2") return Objective::kL2;
  throw ConfigError("unknown objective '" + s + "' (expected f-abs or l2)");
}
inline const char* ObjectiveName(Objective o) { return o == Objective::kFAbs ? "f-abs" : "l2"; }

namespace detail {

inline void CheckSameShape(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("spectrogram shapes differ: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

}  // namespace detail

/// sum(|dRe| + |dIm| + ||Y| - |Y_hat||) / sum |Y|, summed over t then f.
inline double FDiv(const Eigen::MatrixXcd& y, const Eigen::MatrixXcd& y_hat) {
  detail::CheckSameShape(y, y_hat);
  double num = 0.0, den = 0.0;
  for (Eigen::Index f = 0; f < y.cols(); ++f) {
    for (Eigen::Index t = 0; t < y.rows(); ++t) {
      const Complex a = y(t, f), b = y_hat(t, f);
      num += std::abs(a.real() - b.real()) + std::abs(a.imag() - b.imag()) + std::abs(Magnitude(a) - Magnitude(b));
      den += Magnitude(a);
    }
  }
  if (!(den > 0.0)) throw DataError("F distance undefined for an all-zero reference spectrogram");
  return num / den;
}

/// sum |Y - Y_hat|^2 / sum |Y|^2; the squared-error counterpart of FDiv.
inline double L2Div(const Eigen::MatrixXcd& y, const Eigen::MatrixXcd& y_hat) {
  detail::CheckSameShape(y, y_hat);
  const double den = y.squaredNorm();
  if (!(den > 0.0)) throw DataError("l2 distance undefined for an all-zero reference spectrogram");
  return (y - y_hat).squaredNorm() / den;
}

inline double Distance(Objective objective, const Eigen::MatrixXcd& y, const Eigen::MatrixXcd& y_hat) {
  return objective == Objective::kFAbs ? FDiv(y, y_hat) : L2Div(y, y_hat);
}

// Reconstruction of receiver r from the estimates and filters.
inline Eigen::MatrixXcd ReconstructReceiver(int r, const std::vector<Eigen::MatrixXcd>& estimates,
                                            const FilterEstimate& filters) {
  const int C = static_cast<int>(estimates.size());
  if (C != filters.num_speakers()) throw DimensionError("estimate count does not match the filter set");
  if (r < 0 || r >= filters.num_receivers()) throw DimensionError("receiver index out of range");
  Eigen::MatrixXcd out = r < C ? estimates[r] : Eigen::MatrixXcd::Zero(estimates[0].rows(), estimates[0].cols());
  for (int c = 0; c < C; ++c) {
    if (c == r) continue;
    detail::CheckSameShape(estimates[c], out);
    out += SubbandConvolve(filters.At(r, c), filters.past_taps(), estimates[c]);
  }
  return out;
}

inline double McLossCloseTalk(int c, const Eigen::MatrixXcd& y_c, const std::vector<Eigen::MatrixXcd>& estimates,
                              const FilterEstimate& filters, Objective objective = Objective::kFAbs) {
  if (c < 0 || c >= filters.num_speakers()) throw DimensionError("close-talk mic index out of range");
  return Distance(objective, y_c, ReconstructReceiver(c, estimates, filters));
}

// p indexes far-field mics, i.e. receiver C + p.
inline double McLossFarField(int p, const Eigen::MatrixXcd& y_p, const std::vector<Eigen::MatrixXcd>& estimates,
                             const FilterEstimate& filters, Objective objective = Objective::kFAbs) {
  if (p < 0 || p >= filters.num_far_mics()) throw DimensionError("far-field mic index out of range");
  return Distance(objective, y_p, ReconstructReceiver(filters.num_speakers() + p, estimates, filters));
}

struct LossBreakdown {
  std::vector<double> mc_close;
  std::vector<double> mc_far;
  std::vector<double> sa;
  double alpha = 0.0;
  double beta = 0.0;
  double total = 0.0;

  void Recompute() {
    const auto sum = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); };
    total = sum(mc_close) + alpha * sum(mc_far) + beta * sum(sa);
  }
};

/// alpha, defaulting to 1/P. Without far-field mics there is no default.
inline double ResolveAlpha(std::optional<double> alpha, int num_far_mics) {
  if (alpha) {
    if (!(*alpha >= 0.0) || !std::isfinite(*alpha)) throw ConfigError("loss.alpha must be finite and >= 0");
    return *alpha;
  }
  if (num_far_mics == 0) throw ConfigError("loss.alpha defaults to 1/P, which is undefined without far-field mics");
  return 1.0 / num_far_mics;
}

// `mixtures` are receiver spectrograms in receiver order.
inline LossBreakdown McTotal(const std::vector<Eigen::MatrixXcd>& estimates,
                             const std::vector<Eigen::MatrixXcd>& mixtures, const FilterEstimate& filters,
                             std::optional<double> alpha, Objective objective = Objective::kFAbs) {
  const int C = filters.num_speakers(), P = filters.num_far_mics();
  if (static_cast<int>(mixtures.size()) != C + P) throw DimensionError("one mixture per receiver is required");
  LossBreakdown out;
  out.alpha = ResolveAlpha(alpha, P);
  for (int c = 0; c < C; ++c) out.mc_close.push_back(McLossCloseTalk(c, mixtures[c], estimates, filters, objective));
  for (int p = 0; p < P; ++p) out.mc_far.push_back(McLossFarField(p, mixtures[C + p], estimates, filters, objective));
  out.Recompute();
  return out;
}

// Frame- and speaker-level activity derived from sample-domain d(c).
struct ActivityMask {
  std::vector<std::vector<std::uint8_t>> frame_active;  // D(c, t)
  std::vector<std::uint8_t> speaker_active;             // E(c)
  double min_active_s = 0.1;
};

// D(c, t) = 1 iff frame t's window, placed on the original samples (padding
// included), touches any active sample. E(c) = 1 iff at least
// min_active_s * sample_rate samples are active.
inline ActivityMask BuildActivityMask(const std::vector<ActivityVector>& activity, const StftGeometry& geo,
                                      std::size_t length, double min_active_s = 0.1) {
  ActivityMask mask;
  mask.min_active_s = min_active_s;
  const Eigen::Index frames = geo.FramesFor(length);
  const double needed = min_active_s * geo.sample_rate;
  for (const auto& d : activity) {
    if (d.size() != length)
      throw DimensionError("activity has " + std::to_string(d.size()) + " samples, signal " + std::to_string(length));
    std::vector<std::size_t> prefix(length + 1, 0);
    for (std::size_t n = 0; n < length; ++n) prefix[n + 1] = prefix[n] + (d[n] ? 1 : 0);
    std::vector<std::uint8_t> rows(frames, 0);
    for (Eigen::Index t = 0; t < frames; ++t) {
      const long lo = std::clamp<long>(geo.FrameBegin(t), 0, static_cast<long>(length));
      const long hi = std::clamp<long>(geo.FrameEnd(t), 0, static_cast<long>(length));
      rows[t] = prefix[hi] > prefix[lo] ? 1 : 0;
    }
    mask.frame_active.push_back(std::move(rows));
    mask.speaker_active.push_back(static_cast<double>(prefix[length]) >= needed ? 1 : 0);
  }
  return mask;
}

/// R_hat(c, t, f) = Z_hat(c, t, f) * D(c, t) * E(c).
inline Eigen::MatrixXcd Mute(const Eigen::MatrixXcd& z_hat, const ActivityMask& mask, int c) {
  if (c < 0 || c >= static_cast<int>(mask.frame_active.size())) throw DimensionError("speaker index out of range");
  const auto& rows = mask.frame_active[c];
  if (static_cast<Eigen::Index>(rows.size()) != z_hat.rows())
    throw DimensionError("activity mask frame count does not match the estimate");
  if (!mask.speaker_active[c]) return Eigen::MatrixXcd::Zero(z_hat.rows(), z_hat.cols());
  Eigen::MatrixXcd out = z_hat;
  for (Eigen::Index t = 0; t < out.rows(); ++t)
    if (!rows[t]) out.row(t).setZero();
  return out;
}

inline std::vector<Eigen::MatrixXcd> MuteAll(const std::vector<Eigen::MatrixXcd>& estimates, const ActivityMask& mask) {
  std::vector<Eigen::MatrixXcd> out;
  for (std::size_t c = 0; c < estimates.size(); ++c) out.push_back(Mute(estimates[c], mask, static_cast<int>(c)));
  return out;
}

// (||z_hat (1 - d)||_1 / ||y (1 - d)||_1) * (N - ||d||_1) / N, and 0 when d
// has no silent samples.
inline double SaLoss(std::span<const double> z_hat, std::span<const double> y, const ActivityVector& d,
                     int speaker = 0) {
  const std::size_t n = d.size();
  if (z_hat.size() != n || y.size() != n)
    throw DimensionError("speaker-activity loss needs estimate, mixture and activity of equal length");
  double num = 0.0, den = 0.0;
  std::size_t silent = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i]) continue;
    ++silent;
    num += std::abs(z_hat[i]);
    den += std::abs(y[i]);
  }
  if (silent == 0 || num == 0.0) return 0.0;
  if (!(den > 0.0))
    throw DataError("speaker-activity loss undefined for speaker " + std::to_string(speaker) +
                    ": mixture is silent where the speaker is inactive but the estimate is not");
  return num / den * static_cast<double>(silent) / static_cast<double>(n);
}

// MC over the muted estimates plus beta * sum_c SA over istft of the
// unmuted estimates. `close_talk` holds the C close-talk mixture waveforms.
inline LossBreakdown TotalLoss(const std::vector<Eigen::MatrixXcd>& estimates,
                               const std::vector<Eigen::MatrixXcd>& mixtures,
                               const std::vector<std::vector<double>>& close_talk, const FilterEstimate& filters,
                               const std::vector<ActivityVector>& activity, const Stft& stft,
                               std::optional<double> alpha, double beta, Objective objective = Objective::kFAbs) {
  const int C = filters.num_speakers();
  if (static_cast<int>(close_talk.size()) != C || static_cast<int>(activity.size()) != C)
    throw DimensionError("one close-talk waveform and activity vector per speaker is required");
  const std::size_t length = close_talk.front().size();
  const ActivityMask mask = BuildActivityMask(activity, stft.geometry(), length);
  LossBreakdown out = McTotal(MuteAll(estimates, mask), mixtures, filters, alpha, objective);
  out.beta = beta;
  for (int c = 0; c < C; ++c) {
    const std::vector<double> z = stft.InverseMatrix(estimates[c], length);
    out.sa.push_back(SaLoss(z, close_talk[c], activity[c], c));
  }
  out.Recompute();
  return out;
}

}  // namespace ctr
