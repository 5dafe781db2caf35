// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Separation metrics: scale-invariant SDR, SDR against an FIR projection of
// the reference, and permutation-resolved scoring.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctr/common/error.hpp"
#include "ctr/signal/waveform.hpp"

namespace ctr {

// Scores are clamped to +-kMetricCapDb; a perfect estimate reports the cap.
inline constexpr double kMetricCapDb = 120.0;

namespace detail {

inline double RatioDb(double signal, double distortion) {
  if (signal <= 0.0) return -kMetricCapDb;
  if (distortion <= 0.0) return kMetricCapDb;
  return std::clamp(10.0 * std::log10(signal / distortion), -kMetricCapDb, kMetricCapDb);
}

inline void CheckPair(std::span<const double> est, std::span<const double> ref) {
  if (est.size() != ref.size())
    throw DimensionError("estimate has " + std::to_string(est.size()) + " samples, reference " +
                         std::to_string(ref.size()));
  if (!(Energy(ref) > 0.0)) throw DataError("reference signal is all zero");
}

}  // namespace detail

/// 10 log10(|a ref|^2 / |est - a ref|^2) with a = <est, ref> / |ref|^2.
inline double SiSdr(std::span<const double> est, std::span<const double> ref) {
  detail::CheckPair(est, ref);
  const double scale = Dot(est, ref) / Energy(ref);
  double target = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double t = scale * ref[i];
    target += t * t;
    noise += (est[i] - t) * (est[i] - t);
  }
  return detail::RatioDb(target, noise);
}

// SDR where the allowed distortion-free part is the best `proj_taps`-tap
// causal FIR filtering of the reference (least squares, linear convolution
// truncated to the signal length).
inline double SdrProj(std::span<const double> est, std::span<const double> ref, int proj_taps = 512) {
  detail::CheckPair(est, ref);
  if (proj_taps < 1) throw ConfigError("projection needs at least one tap");
  const long n = static_cast<long>(ref.size());
  const long taps = std::min<long>(proj_taps, n);

  // gram(i, j) = sum_t ref[t - i] ref[t - j]. Row 0 is computed directly;
  // gram(i, j) = gram(i - 1, j - 1) - ref[n - i] ref[n - j] fills the rest.
  Eigen::MatrixXd gram(taps, taps);
  for (long j = 0; j < taps; ++j) {
    double acc = 0.0;
    for (long t = j; t < n; ++t) acc += ref[t] * ref[t - j];
    gram(0, j) = acc;
  }
  for (long i = 1; i < taps; ++i)
    for (long j = i; j < taps; ++j) gram(i, j) = gram(i - 1, j - 1) - ref[n - i] * ref[n - j];
  for (long i = 0; i < taps; ++i)
    for (long j = 0; j < i; ++j) gram(i, j) = gram(j, i);

  Eigen::VectorXd rhs(taps);
  for (long i = 0; i < taps; ++i) {
    double acc = 0.0;
    for (long t = i; t < n; ++t) acc += est[t] * ref[t - i];
    rhs(i) = acc;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  Eigen::VectorXd h;
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    h = ldlt.solve(rhs);
  } else {
    h = gram.completeOrthogonalDecomposition().solve(rhs);
  }

  double target = 0.0, noise = 0.0;
  for (long t = 0; t < n; ++t) {
    double p = 0.0;
    for (long i = 0; i < taps && i <= t; ++i) p += h(i) * ref[t - i];
    target += p * p;
    noise += (est[t] - p) * (est[t] - p);
  }
  return detail::RatioDb(target, noise);
}

enum class Metric { kSiSdr, kSdr };

inline double Score(Metric metric, std::span<const double> est, std::span<const double> ref, int proj_taps = 512) {
  return metric == Metric::kSiSdr ? SiSdr(est, ref) : SdrProj(est, ref, proj_taps);
}

struct ScoreReport {
  // Indexed by reference speaker.
  std::vector<int> assignment;  // estimate index matched to each reference
  std::vector<double> si_sdr;
  std::vector<double> sdr;
  std::vector<double> si_sdr_mixture;  // empty unless mixtures were given
  std::vector<double> sdr_mixture;
  std::vector<double> si_sdr_delta;
  std::vector<double> sdr_delta;

  double mean_si_sdr() const { return Mean(si_sdr); }
  double mean_sdr() const { return Mean(sdr); }

  static double Mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  }
};

// Exhaustive search over estimate-to-reference assignments (C <= 6) that
// maximizes the mean metric. Ties keep the lexicographically first
// permutation. Returns assignment[ref] = est.
inline std::vector<int> PermuteResolve(const std::vector<std::vector<double>>& est_set,
                                       const std::vector<std::vector<double>>& ref_set, Metric metric,
                                       int proj_taps = 512) {
  const std::size_t count = ref_set.size();
  if (est_set.size() != count) throw DimensionError("estimate and reference sets differ in size");
  if (count == 0) throw DimensionError("empty reference set");
  if (count > 6) throw ConfigError("permutation search supports at most 6 speakers");
  Eigen::MatrixXd pair(count, count);
  for (std::size_t r = 0; r < count; ++r)
    for (std::size_t e = 0; e < count; ++e) pair(r, e) = Score(metric, est_set[e], ref_set[r], proj_taps);

  std::vector<int> perm(count);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_score = -std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t r = 0; r < count; ++r) s += pair(r, perm[r]);
    if (s > best_score) {
      best_score = s;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Scores estimates against references. With resolve_permutation false the
// identity assignment is used (solver outputs are anchored to their mics).
inline ScoreReport Evaluate(const std::vector<std::vector<double>>& est_set,
                            const std::vector<std::vector<double>>& ref_set,
                            const std::vector<std::vector<double>>* mixtures = nullptr,
                            bool resolve_permutation = true, int proj_taps = 512) {
  ScoreReport report;
  const std::size_t count = ref_set.size();
  if (est_set.size() != count) throw DimensionError("estimate and reference sets differ in size");
  if (resolve_permutation) {
    report.assignment = PermuteResolve(est_set, ref_set, Metric::kSiSdr, proj_taps);
  } else {
    report.assignment.resize(count);
    std::iota(report.assignment.begin(), report.assignment.end(), 0);
  }
  for (std::size_t r = 0; r < count; ++r) {
    const auto& est = est_set[report.assignment[r]];
    report.si_sdr.push_back(SiSdr(est, ref_set[r]));
    report.sdr.push_back(SdrProj(est, ref_set[r], proj_taps));
    if (mixtures) {
      if (mixtures->size() != count) throw DimensionError("one mixture per reference is required");
      report.si_sdr_mixture.push_back(SiSdr((*mixtures)[r], ref_set[r]));
      report.sdr_mixture.push_back(SdrProj((*mixtures)[r], ref_set[r], proj_taps));
      report.si_sdr_delta.push_back(report.si_sdr.back() - report.si_sdr_mixture.back());
      report.sdr_delta.push_back(report.sdr.back() - report.sdr_mixture.back());
    }
  }
  return report;
}

}  // namespace ctr
