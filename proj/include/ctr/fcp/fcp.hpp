// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Forward convolutive prediction: per-frequency weighted least squares that
// relates a source estimate to the mixture at one receiver, and the filtered
// source ("FCP image") it yields.
//
// For receiver r, speaker c and bin f the filter minimizes
//
//   sum_t |Y_r(t,f) - g^H z(t,f)|^2 / lambda_r(t,f)
//
// where z(t,f) stacks source frames [t - past + 1, t + future]. The closed
// form is g = R^{-1} p with R = sum_t z z^H / lambda, p = sum_t z Y^* / lambda.

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "ctr/common/error.hpp"
#include "ctr/common/parallel.hpp"
#include "ctr/signal/subband.hpp"

namespace ctr {

struct FcpConfig {
  int past_taps = 8;    // I; window includes the current frame
  int future_taps = 0;  // J
  double xi = 1e-3;
  // Relative diagonal loading: R += diag_load * trace(R) / (I + J) * Id.
  double diag_load = 1e-5;

  int taps() const { return past_taps + future_taps; }

  void Validate() const {
    if (past_taps < 1) throw ConfigError("fcp.past_taps must be >= 1");
    if (future_taps < 0) throw ConfigError("fcp.future_taps must be >= 0");
    if (!(xi > 0.0)) throw ConfigError("fcp.xi must be > 0");
    if (!(diag_load >= 0.0)) throw ConfigError("fcp.diag_load must be >= 0");
  }
};

/// lambda(t,f) = xi * max|Y|^2 + |Y(t,f)|^2, used for every speaker at this receiver.
inline Eigen::MatrixXd FcpWeights(const Eigen::MatrixXcd& y, double xi) {
  if (y.size() == 0) throw DimensionError("fcp weights of an empty spectrogram");
  if (!(xi > 0.0)) throw ConfigError("fcp.xi must be > 0");
  const Eigen::MatrixXd power = y.cwiseAbs2();
  const double peak = power.maxCoeff();
  if (!(peak > 0.0)) throw DataError("fcp weights undefined for an all-zero mixture");
  return (power.array() + xi * peak).matrix();
}

// Per-bin weighted residual of the regression; the quantity EstimateFilter
// minimizes at bin f.
inline double FcpObjective(const Eigen::MatrixXcd& z_hat, const Eigen::MatrixXcd& y, const Eigen::MatrixXd& weights,
                           const Eigen::VectorXcd& taps, int past_taps, Eigen::Index f) {
  const Eigen::Index frames = y.rows();
  double acc = 0.0;
  for (Eigen::Index t = 0; t < frames; ++t) {
    Complex pred(0.0, 0.0);
    for (Eigen::Index k = 0; k < taps.size(); ++k) {
      const Eigen::Index s = t - past_taps + 1 + k;
      if (s >= 0 && s < frames) pred += std::conj(taps(k)) * z_hat(s, f);
    }
    acc += std::norm(y(t, f) - pred) / weights(t, f);
  }
  return acc;
}

/// Closed-form FCP filter for every bin. Returns taps as [bin, tap].
inline Eigen::MatrixXcd EstimateFilter(const Eigen::MatrixXcd& z_hat, const Eigen::MatrixXcd& y,
                                       const Eigen::MatrixXd& weights, const FcpConfig& cfg) {
  cfg.Validate();
  if (z_hat.rows() != y.rows() || z_hat.cols() != y.cols())
    throw DimensionError("source estimate and mixture spectrograms differ in shape");
  if (weights.rows() != y.rows() || weights.cols() != y.cols())
    throw DimensionError("fcp weights do not match the mixture shape");
  const int taps = cfg.taps();
  const Eigen::Index frames = y.rows();
  if (frames < taps)
    throw DimensionError("fcp needs at least " + std::to_string(taps) + " frames, got " + std::to_string(frames));

  Eigen::MatrixXcd out(y.cols(), taps);
  // Shifted source frames as [Re | Im] so the normal equations are a real
  // product. With s = a + ib:
  //   sum_t s_j conj(s_k) / w = (AA + BB) + i (BA - AB)
  //   sum_t s_j conj(y) / w   = (A yr + B yi) + i (B yr - A yi)
  Eigen::MatrixXd stacked(frames, 2 * taps);
  Eigen::MatrixXcd normal(taps, taps);
  Eigen::VectorXcd rhs(taps);
  for (Eigen::Index f = 0; f < y.cols(); ++f) {
    stacked.setZero();
    for (int k = 0; k < taps; ++k) {
      const Eigen::Index offset = k - cfg.past_taps + 1;
      const Eigen::Index t0 = std::max<Eigen::Index>(0, -offset);
      const Eigen::Index t1 = std::min<Eigen::Index>(frames, frames - offset);
      if (t1 <= t0) continue;
      const auto src = z_hat.col(f).segment(t0 + offset, t1 - t0);
      stacked.col(k).segment(t0, t1 - t0) = src.real();
      stacked.col(taps + k).segment(t0, t1 - t0) = src.imag();
    }
    const Eigen::VectorXd inv_w = weights.col(f).cwiseInverse();
    const Eigen::MatrixXd gram = stacked.transpose() * (inv_w.asDiagonal() * stacked);
    normal.real() = gram.topLeftCorner(taps, taps) + gram.bottomRightCorner(taps, taps);
    normal.imag() = gram.bottomLeftCorner(taps, taps) - gram.topRightCorner(taps, taps);
    const Eigen::VectorXd vr = stacked.transpose() * inv_w.cwiseProduct(y.col(f).real());
    const Eigen::VectorXd vi = stacked.transpose() * inv_w.cwiseProduct(y.col(f).imag());
    rhs.real() = vr.head(taps) + vi.tail(taps);
    rhs.imag() = vr.tail(taps) - vi.head(taps);
    const double trace = normal.trace().real();
    if (cfg.diag_load > 0.0) {
      if (trace <= 0.0) {
        // Silent source bin: nothing to regress on.
        out.row(f).setZero();
        continue;
      }
      normal.diagonal().array() += cfg.diag_load * trace / taps;
    }
    Eigen::LLT<Eigen::MatrixXcd> llt(normal);
    const bool singular = llt.info() != Eigen::Success || !(trace > 0.0) ||
                          (cfg.diag_load == 0.0 && llt.rcond() < 1e3 * taps * Eigen::NumTraits<double>::epsilon());
    if (singular)
      throw NumericalError("singular fcp normal matrix at frequency bin " + std::to_string(f));
    out.row(f) = llt.solve(rhs).transpose();
  }
  return out;
}

/// X^FCP(t,f) = g(f)^H z(t,f); zero beyond spectrogram edges.
inline Eigen::MatrixXcd FcpImage(const Eigen::MatrixXcd& taps, int past_taps, const Eigen::MatrixXcd& z_hat) {
  return SubbandConvolve(taps, past_taps, z_hat);
}

// Filters for every (receiver, speaker) pair that needs one. Receivers
// [0, C) are the close-talk microphones, [C, C + P) the far-field ones; the
// wearer's own close-talk pair (r == c) is never filtered.
class FilterEstimate {
 public:
  FilterEstimate() = default;
  FilterEstimate(int num_speakers, int num_far_mics, int past_taps, int future_taps)
      : num_speakers_(num_speakers),
        num_far_(num_far_mics),
        past_(past_taps),
        future_(future_taps),
        taps_(static_cast<std::size_t>((num_speakers + num_far_mics) * num_speakers)) {}

  int num_speakers() const { return num_speakers_; }
  int num_far_mics() const { return num_far_; }
  int num_receivers() const { return num_speakers_ + num_far_; }
  int past_taps() const { return past_; }
  int future_taps() const { return future_; }

  bool Has(int r, int c) const { return InRange(r, c) && taps_[Index(r, c)].has_value(); }

  const Eigen::MatrixXcd& At(int r, int c) const {
    if (!Has(r, c))
      throw ConfigError("missing filter for receiver " + std::to_string(r) + ", speaker " + std::to_string(c));
    return *taps_[Index(r, c)];
  }

  void Set(int r, int c, Eigen::MatrixXcd taps) {
    if (!InRange(r, c)) throw DimensionError("filter index out of range");
    if (taps.cols() != past_ + future_) throw DimensionError("filter tap count does not match the estimate");
    taps_[Index(r, c)] = std::move(taps);
  }

 private:
  bool InRange(int r, int c) const { return r >= 0 && r < num_receivers() && c >= 0 && c < num_speakers_; }
  std::size_t Index(int r, int c) const { return static_cast<std::size_t>(r * num_speakers_ + c); }

  int num_speakers_ = 0;
  int num_far_ = 0;
  int past_ = 1;
  int future_ = 0;
  std::vector<std::optional<Eigen::MatrixXcd>> taps_;
};

// Estimates all cross filters: every c' != c at close-talk mic c, every
// speaker at each far mic. `sources` are the (possibly muted) estimates,
// `mixtures` the receiver spectrograms in receiver order.
inline FilterEstimate EstimateAllFilters(const std::vector<Eigen::MatrixXcd>& sources,
                                         const std::vector<Eigen::MatrixXcd>& mixtures, int num_speakers,
                                         const FcpConfig& cfg, int num_threads = 1) {
  const int num_receivers = static_cast<int>(mixtures.size());
  if (static_cast<int>(sources.size()) != num_speakers || num_receivers < num_speakers)
    throw DimensionError("filter estimation needs one source per speaker and a close-talk mic per speaker");
  std::vector<Eigen::MatrixXd> weights(num_receivers);
  for (int r = 0; r < num_receivers; ++r) weights[r] = FcpWeights(mixtures[r], cfg.xi);

  std::vector<std::pair<int, int>> pairs;
  for (int r = 0; r < num_receivers; ++r)
    for (int c = 0; c < num_speakers; ++c)
      if (r != c) pairs.emplace_back(r, c);
  std::vector<Eigen::MatrixXcd> results(pairs.size());
  ParallelFor(pairs.size(), num_threads, [&](std::size_t i) {
    const auto [r, c] = pairs[i];
    results[i] = EstimateFilter(sources[c], mixtures[r], weights[r], cfg);
  });
  FilterEstimate est(num_speakers, num_receivers - num_speakers, cfg.past_taps, cfg.future_taps);
  for (std::size_t i = 0; i < pairs.size(); ++i) est.Set(pairs[i].first, pairs[i].second, std::move(results[i]));
  return est;
}

}  // namespace ctr
