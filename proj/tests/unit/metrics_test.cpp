// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ctr/metrics/metrics.hpp"

namespace ctr {
namespace {

std::vector<double> Noise(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> x(n);
  for (double& v : x) v = normal(rng);
  return x;
}

std::vector<double> Add(const std::vector<double>& a, const std::vector<double>& b, double wb = 1.0) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + wb * b[i];
  return out;
}

TEST(SiSdr, PerfectEstimateHitsCap) {
  std::mt19937_64 rng(1);
  const auto ref = Noise(1000, rng);
  EXPECT_EQ(SiSdr(ref, ref), kMetricCapDb);
  std::vector<double> scaled(ref);
  for (double& v : scaled) v *= -3.0;
  EXPECT_EQ(SiSdr(scaled, ref), kMetricCapDb);
  EXPECT_EQ(SiSdr(std::vector<double>(1000, 0.0), ref), -kMetricCapDb);
}

TEST(SiSdr, OrthogonalNoiseAtTenDb) {
  std::mt19937_64 rng(2);
  const auto ref = Noise(4000, rng);
  auto noise = Noise(4000, rng);
  // Project out the reference, then set the energy to a tenth.
  const double k = Dot(noise, ref) / Energy(ref);
  for (std::size_t i = 0; i < noise.size(); ++i) noise[i] -= k * ref[i];
  const double g = std::sqrt(0.1 * Energy(ref) / Energy(noise));
  EXPECT_NEAR(SiSdr(Add(ref, noise, g), ref), 10.0, 1e-9);
}

TEST(SiSdr, ScaleInvariant) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> gain(0.01, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto ref = Noise(300, rng);
    const auto est = Add(ref, Noise(300, rng), 0.5);
    const double base = SiSdr(est, ref);
    std::vector<double> scaled(est), ref_scaled(ref);
    const double a = gain(rng), b = gain(rng);
    for (double& v : scaled) v *= a;
    for (double& v : ref_scaled) v *= b;
    EXPECT_NEAR(SiSdr(scaled, ref), base, 1e-9);
    EXPECT_NEAR(SiSdr(est, ref_scaled), base, 1e-9);
  }
}

TEST(SiSdr, Errors) {
  EXPECT_THROW(SiSdr(std::vector<double>(5, 1.0), std::vector<double>(4, 1.0)), DimensionError);
  EXPECT_THROW(SiSdr(std::vector<double>(5, 1.0), std::vector<double>(5, 0.0)), DataError);
  EXPECT_THROW(SdrProj(std::vector<double>(5, 1.0), std::vector<double>(5, 1.0), 0), ConfigError);
}

TEST(SdrProj, DelayedReferenceIsDistortionFree) {
  std::mt19937_64 rng(4);
  const auto ref = Noise(8000, rng);
  std::vector<double> est(ref.size(), 0.0);
  for (std::size_t i = 37; i < ref.size(); ++i) est[i] = 0.8 * ref[i - 37] - 0.3 * ref[i - 36];
  EXPECT_GE(SdrProj(est, ref, 512), 60.0);
  // SI-SDR has no filter to absorb the delay.
  EXPECT_LT(SiSdr(est, ref), 0.0);
}

TEST(SdrProj, SingleTapEqualsSiSdr) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ref = Noise(500, rng);
    const auto est = Add(ref, Noise(500, rng), 0.3 + 0.1 * trial);
    EXPECT_NEAR(SdrProj(est, ref, 1), SiSdr(est, ref), 1e-9);
  }
}

// Explicit convolution matrix solved by QR.
double SdrProjOracle(const std::vector<double>& est, const std::vector<double>& ref, int taps) {
  const auto n = static_cast<Eigen::Index>(ref.size());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, taps);
  for (Eigen::Index t = 0; t < n; ++t)
    for (int i = 0; i < taps && i <= t; ++i) x(t, i) = ref[t - i];
  const Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(est.data(), n);
  const Eigen::VectorXd h = x.householderQr().solve(e);
  const Eigen::VectorXd p = x * h;
  return 10.0 * std::log10(p.squaredNorm() / (e - p).squaredNorm());
}

TEST(SdrProj, MatchesLeastSquaresOracle) {
  std::mt19937_64 rng(6);
  for (int taps : {2, 5, 16, 40}) {
    const auto ref = Noise(600, rng);
    std::vector<double> est = Noise(600, rng, 0.4);
    for (std::size_t t = 3; t < est.size(); ++t) est[t] += ref[t] - 0.5 * ref[t - 3];
    EXPECT_NEAR(SdrProj(est, ref, taps), SdrProjOracle(est, ref, taps), 1e-7) << taps;
  }
}

TEST(SdrProj, NeverBelowSiSdr) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto ref = Noise(400, rng);
    const auto est = Add(Noise(400, rng), ref, 0.2 * trial);
    EXPECT_GE(SdrProj(est, ref, 32), SiSdr(est, ref) - 1e-9);
  }
}

TEST(SdrProj, TapsLongerThanSignal) {
  std::mt19937_64 rng(8);
  const auto ref = Noise(20, rng), est = Noise(20, rng);
  EXPECT_NO_THROW(SdrProj(est, ref, 512));
}

std::vector<std::vector<double>> Refs(int count, std::size_t n, std::mt19937_64& rng) {
  std::vector<std::vector<double>> refs;
  for (int c = 0; c < count; ++c) refs.push_back(Noise(n, rng));
  return refs;
}

TEST(Permutation, RecoversShuffle) {
  std::mt19937_64 rng(9);
  for (int count = 1; count <= 5; ++count) {
    const auto refs = Refs(count, 800, rng);
    std::vector<int> order(count);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    // est[e] is a noisy copy of refs[order[e]].
    std::vector<std::vector<double>> est(count);
    for (int e = 0; e < count; ++e) est[e] = Add(refs[order[e]], Noise(800, rng), 0.3);
    const auto assign = PermuteResolve(est, refs, Metric::kSiSdr);
    for (int e = 0; e < count; ++e) EXPECT_EQ(assign[order[e]], e);
  }
}

TEST(Permutation, SingleSpeakerIsIdentity) {
  std::mt19937_64 rng(10);
  const auto refs = Refs(1, 100, rng);
  EXPECT_EQ(PermuteResolve({Noise(100, rng)}, refs, Metric::kSdr), std::vector<int>{0});
}

// Recursive enumeration, independent of std::next_permutation.
void Enumerate(const Eigen::MatrixXd& pair, std::vector<int>& perm, std::vector<bool>& used, double acc, double& best) {
  const auto r = static_cast<Eigen::Index>(perm.size());
  if (r == pair.rows()) {
    best = std::max(best, acc);
    return;
  }
  for (Eigen::Index e = 0; e < pair.cols(); ++e) {
    if (used[e]) continue;
    used[e] = true;
    perm.push_back(static_cast<int>(e));
    Enumerate(pair, perm, used, acc + pair(r, e), best);
    perm.pop_back();
    used[e] = false;
  }
}

TEST(Permutation, MatchesEnumerationOracle) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> pick(2, 4);
  for (int trial = 0; trial < 100; ++trial) {
    const int count = pick(rng);
    const auto refs = Refs(count, 200, rng);
    std::vector<std::vector<double>> est;
    for (int e = 0; e < count; ++e) {
      auto x = Noise(200, rng);
      for (int r = 0; r < count; ++r) x = Add(x, refs[r], std::uniform_real_distribution<double>(0, 1)(rng));
      est.push_back(std::move(x));
    }
    Eigen::MatrixXd pair(count, count);
    for (int r = 0; r < count; ++r)
      for (int e = 0; e < count; ++e) pair(r, e) = SiSdr(est[e], refs[r]);
    std::vector<int> perm;
    std::vector<bool> used(count, false);
    double best = -1e300;
    Enumerate(pair, perm, used, 0.0, best);
    const auto assign = PermuteResolve(est, refs, Metric::kSiSdr);
    double got = 0.0;
    for (int r = 0; r < count; ++r) got += pair(r, assign[r]);
    EXPECT_NEAR(got, best, 1e-9);
    std::vector<int> sorted(assign);
    std::sort(sorted.begin(), sorted.end());
    for (int r = 0; r < count; ++r) EXPECT_EQ(sorted[r], r);
  }
}

TEST(Permutation, InvariantToEstimateOrder) {
  std::mt19937_64 rng(12);
  const auto refs = Refs(4, 300, rng);
  std::vector<std::vector<double>> est;
  for (int e = 0; e < 4; ++e) est.push_back(Add(refs[e], Noise(300, rng), 0.8));
  const auto base = Evaluate(est, refs);
  const std::vector<int> order = {3, 1, 0, 2};
  std::vector<std::vector<double>> shuffled(4);
  for (int k = 0; k < 4; ++k) shuffled[k] = est[order[k]];
  const auto moved = Evaluate(shuffled, refs);
  for (int r = 0; r < 4; ++r) {
    EXPECT_EQ(order[moved.assignment[r]], base.assignment[r]);
    EXPECT_DOUBLE_EQ(moved.si_sdr[r], base.si_sdr[r]);
    EXPECT_DOUBLE_EQ(moved.sdr[r], base.sdr[r]);
  }
}

TEST(Permutation, Limits) {
  std::mt19937_64 rng(13);
  EXPECT_THROW(PermuteResolve(Refs(7, 10, rng), Refs(7, 10, rng), Metric::kSiSdr), ConfigError);
  EXPECT_THROW(PermuteResolve(Refs(2, 10, rng), Refs(3, 10, rng), Metric::kSiSdr), DimensionError);
}

TEST(Evaluate, MixtureDeltas) {
  std::mt19937_64 rng(14);
  const auto refs = Refs(2, 1000, rng);
  const std::vector<std::vector<double>> mix = {Add(refs[0], refs[1], 0.5), Add(refs[1], refs[0], 0.5)};
  const std::vector<std::vector<double>> est = {Add(refs[0], refs[1], 0.1), Add(refs[1], refs[0], 0.1)};
  const ScoreReport rep = Evaluate(est, refs, &mix, false, 64);
  ASSERT_EQ(rep.si_sdr_delta.size(), 2u);
  for (int r = 0; r < 2; ++r) {
    EXPECT_EQ(rep.assignment[r], r);
    EXPECT_DOUBLE_EQ(rep.si_sdr_delta[r], rep.si_sdr[r] - rep.si_sdr_mixture[r]);
    EXPECT_GT(rep.si_sdr_delta[r], 10.0);
  }
  EXPECT_DOUBLE_EQ(rep.mean_si_sdr(), 0.5 * (rep.si_sdr[0] + rep.si_sdr[1]));
}

}  // namespace
}  // namespace ctr
