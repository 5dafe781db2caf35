// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ctr/fcp/fcp.hpp"
#include "ctr/scene/scene.hpp"
#include "ctr/signal/subband.hpp"

namespace ctr {
namespace {

Eigen::MatrixXcd RandomComplex(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXcd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = Complex(normal(rng), normal(rng));
  return m;
}

Eigen::MatrixXd RandomPositive(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 3.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = u(rng);
  return m;
}

FcpConfig Taps(int past, int future, double diag_load = 0.0) {
  FcpConfig cfg;
  cfg.past_taps = past;
  cfg.future_taps = future;
  cfg.diag_load = diag_load;
  return cfg;
}

SceneConfig NoiselessScene(int speakers, int far, std::uint64_t seed) {
  SceneConfig cfg;
  cfg.num_speakers = speakers;
  cfg.num_far_mics = far;
  cfg.duration_s = 2.0;
  cfg.noise_snr_range = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  cfg.past_taps = 3;
  cfg.future_taps = 0;
  cfg.seed = seed;
  return cfg;
}

TEST(FcpWeights, WorkedExample) {
  Eigen::MatrixXcd y(1, 2);
  y << Complex(2.0, 0.0), Complex(0.0, 0.0);  // max power 4
  const Eigen::MatrixXd w = FcpWeights(y, 1e-3);
  EXPECT_DOUBLE_EQ(w(0, 1), 0.004);
  EXPECT_DOUBLE_EQ(w(0, 0), 4.004);
}

TEST(FcpWeights, ConstantUnitMagnitude) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> phase(-3.0, 3.0);
  Eigen::MatrixXcd y(6, 5);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = std::polar(1.0, phase(rng));
  const Eigen::MatrixXd w = FcpWeights(y, 1e-3);
  for (Eigen::Index i = 0; i < w.size(); ++i) EXPECT_NEAR(w(i), 1.001, 1e-15);
}

TEST(FcpWeights, MatchesScalarLoop) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXcd y = RandomComplex(20, 9, rng);
  const double xi = 3e-3;
  double peak = 0.0;
  for (Eigen::Index t = 0; t < y.rows(); ++t)
    for (Eigen::Index f = 0; f < y.cols(); ++f) peak = std::max(peak, std::norm(y(t, f)));
  const Eigen::MatrixXd w = FcpWeights(y, xi);
  for (Eigen::Index t = 0; t < y.rows(); ++t)
    for (Eigen::Index f = 0; f < y.cols(); ++f) EXPECT_DOUBLE_EQ(w(t, f), xi * peak + std::norm(y(t, f)));
  EXPECT_GE(w.minCoeff(), xi * peak);
}

TEST(FcpWeights, DegenerateInputs) {
  EXPECT_THROW(FcpWeights(Eigen::MatrixXcd::Zero(4, 3), 1e-3), DataError);
  EXPECT_THROW(FcpWeights(Eigen::MatrixXcd::Ones(4, 3), 0.0), ConfigError);
}

TEST(EstimateFilter, SelfRegressionIsUnitTap) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXcd z = RandomComplex(50, 7, rng);
  for (double diag : {0.0, 1e-5}) {
    const Eigen::MatrixXcd g = EstimateFilter(z, z, RandomPositive(50, 7, rng), Taps(1, 0, diag));
    for (Eigen::Index f = 0; f < g.rows(); ++f) EXPECT_NEAR(std::abs(g(f, 0) - 1.0), 0.0, diag > 0 ? 2e-5 : 1e-12);
  }
}

// Noiseless single-speaker scenes: the far-field image is an exact subband
// convolution, so regression on the dry source returns the stored taps.
TEST(EstimateFilter, ExactRecoveryOnSubbandScene) {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const Scene s = SynthScene(NoiselessScene(1, 1, seed));
    const Eigen::MatrixXcd& truth = s.subband_filters[1][0];
    const Eigen::MatrixXcd& y = s.mixture_spec[1];
    for (auto [past, future] : {std::pair{3, 0}, std::pair{5, 2}}) {
      const FcpConfig cfg = Taps(past, future);
      const Eigen::MatrixXcd g = EstimateFilter(s.dry_spec[0], y, FcpWeights(y, cfg.xi), cfg);
      Eigen::MatrixXcd embedded = Eigen::MatrixXcd::Zero(g.rows(), g.cols());
      embedded.middleCols(past - s.past_taps, truth.cols()) = truth;
      EXPECT_LT((g - embedded).norm() / embedded.norm(), 1e-8) << seed << " I=" << past;
      const Eigen::MatrixXcd image = FcpImage(g, past, s.dry_spec[0]);
      EXPECT_LT((image - s.image_spec[1][0]).norm() / s.image_spec[1][0].norm(), 1e-8);
      EXPECT_LT((y - image).norm() / y.norm(), 1e-8);
    }
  }
}

// Weighting only changes the solution when the fit is inexact.
TEST(EstimateFilter, ExactFitIndependentOfWeights) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXcd z = RandomComplex(60, 5, rng);
  const Eigen::MatrixXcd taps = RandomComplex(5, 3, rng);
  const Eigen::MatrixXcd y = SubbandConvolve(taps, 2, z);
  const FcpConfig cfg = Taps(2, 1);
  const Eigen::MatrixXcd a = EstimateFilter(z, y, RandomPositive(60, 5, rng), cfg);
  const Eigen::MatrixXcd b = EstimateFilter(z, y, RandomPositive(60, 5, rng), cfg);
  EXPECT_LT((a - taps).norm() / taps.norm(), 1e-10);
  EXPECT_LT((b - taps).norm() / taps.norm(), 1e-10);
}

TEST(EstimateFilter, ScaleEquivariance) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXcd z = RandomComplex(80, 6, rng), y = RandomComplex(80, 6, rng);
  const Eigen::MatrixXd w = FcpWeights(y, 1e-3);
  for (double diag : {0.0, 1e-5}) {
    const FcpConfig cfg = Taps(4, 1, diag);
    const Eigen::MatrixXcd g = EstimateFilter(z, y, w, cfg);
    for (double a : {-2.5, 0.01, 7.0}) {
      const Eigen::MatrixXcd ga = EstimateFilter(a * z, y, w, cfg);
      EXPECT_LT((ga - g / a).norm() / (g / a).norm(), 1e-10) << a;
      const Eigen::MatrixXcd image = FcpImage(g, 4, z), image_a = FcpImage(ga, 4, a * z);
      EXPECT_LT((image_a - image).norm() / image.norm(), 1e-10);
    }
  }
}

TEST(EstimateFilter, PerturbationNeverLowersObjective) {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXcd z = RandomComplex(40, 4, rng), y = RandomComplex(40, 4, rng);
  const Eigen::MatrixXd w = FcpWeights(y, 1e-3);
  const FcpConfig cfg = Taps(3, 1);
  const Eigen::MatrixXcd g = EstimateFilter(z, y, w, cfg);
  for (Eigen::Index f = 0; f < g.rows(); ++f) {
    const Eigen::VectorXcd best = g.row(f).transpose();
    const double base = FcpObjective(z, y, w, best, cfg.past_taps, f);
    for (Eigen::Index k = 0; k < best.size(); ++k) {
      for (Complex step : {Complex(1e-3, 0), Complex(-1e-3, 0), Complex(0, 1e-3), Complex(0, -1e-3)}) {
        Eigen::VectorXcd moved = best;
        moved(k) += step;
        EXPECT_GE(FcpObjective(z, y, w, moved, cfg.past_taps, f), base) << f << "," << k;
      }
    }
  }
}

// Independent oracle: solve the weighted least squares with a QR on the
// explicitly scaled design matrix.
TEST(EstimateFilter, MatchesWeightedLeastSquaresOracle) {
  std::mt19937_64 rng(7);
  const Eigen::Index frames = 30, bins = 3;
  const int past = 2, future = 1, K = past + future;
  const Eigen::MatrixXcd z = RandomComplex(frames, bins, rng), y = RandomComplex(frames, bins, rng);
  const Eigen::MatrixXd w = RandomPositive(frames, bins, rng);
  const Eigen::MatrixXcd g = EstimateFilter(z, y, w, Taps(past, future));
  for (Eigen::Index f = 0; f < bins; ++f) {
    // y(t) ~ sum_k conj(g_k) z(t - past + 1 + k), i.e. A h = y with h = conj(g).
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(frames, K);
    Eigen::VectorXcd b(frames);
    for (Eigen::Index t = 0; t < frames; ++t) {
      const double s = 1.0 / std::sqrt(w(t, f));
      for (int k = 0; k < K; ++k) {
        const Eigen::Index src = t - past + 1 + k;
        if (src >= 0 && src < frames) A(t, k) = s * z(src, f);
      }
      b(t) = s * y(t, f);
    }
    const Eigen::VectorXcd h = A.colPivHouseholderQr().solve(b);
    EXPECT_LT((g.row(f).transpose() - h.conjugate()).norm() / h.norm(), 1e-10);
  }
}

TEST(EstimateFilter, SingularBinNamedWithoutLoading) {
  std::mt19937_64 rng(8);
  Eigen::MatrixXcd z = RandomComplex(20, 5, rng);
  z.col(2).setZero();
  const Eigen::MatrixXcd y = RandomComplex(20, 5, rng);
  try {
    EstimateFilter(z, y, FcpWeights(y, 1e-3), Taps(2, 0, 0.0));
    FAIL() << "expected a numerical error";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("bin 2"), std::string::npos) << e.what();
  }
  // With loading the silent bin gets zero taps.
  const Eigen::MatrixXcd g = EstimateFilter(z, y, FcpWeights(y, 1e-3), Taps(2, 0, 1e-5));
  EXPECT_EQ(g.row(2).norm(), 0.0);
  EXPECT_TRUE(g.allFinite());
}

TEST(EstimateFilter, ShapeErrors) {
  const Eigen::MatrixXcd a = Eigen::MatrixXcd::Ones(10, 3), b = Eigen::MatrixXcd::Ones(10, 4);
  EXPECT_THROW(EstimateFilter(a, b, Eigen::MatrixXd::Ones(10, 4), Taps(1, 0)), DimensionError);
  // Fewer frames than taps.
  EXPECT_THROW(EstimateFilter(a.topRows(2), a.topRows(2), Eigen::MatrixXd::Ones(2, 3), Taps(3, 0)), DimensionError);
  FcpConfig bad = Taps(0, 0);
  EXPECT_THROW(EstimateFilter(a, a, Eigen::MatrixXd::Ones(10, 3), bad), ConfigError);
}

// Error of taps recovered under 20 dB noise shrinks as more frames are seen.
TEST(EstimateFilter, NoisyRecoveryImprovesWithFrames) {
  const int past = 3, bins = 8, trials = 20;
  std::vector<double> mean_err;
  for (Eigen::Index frames : {50, 200, 800}) {
    double acc = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
      std::mt19937_64 rng(100 + trial);
      const Eigen::MatrixXcd taps = RandomComplex(bins, past, rng);
      const Eigen::MatrixXcd z = RandomComplex(frames, bins, rng);
      const Eigen::MatrixXcd clean = SubbandConvolve(taps, past, z);
      const double noise_scale = std::sqrt(clean.squaredNorm() / clean.size() / 100.0 / 2.0);
      const Eigen::MatrixXcd y = clean + noise_scale * RandomComplex(frames, bins, rng);
      const FcpConfig cfg = Taps(past, 0, 1e-5);
      const Eigen::MatrixXcd g = EstimateFilter(z, y, FcpWeights(y, cfg.xi), cfg);
      acc += (g - taps).norm() / taps.norm() / trials;
    }
    mean_err.push_back(acc);
  }
  EXPECT_GT(mean_err[0], mean_err[1]);
  EXPECT_GT(mean_err[1], mean_err[2]);
}

TEST(FcpImage, UnitTapIsIdentity) {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXcd z = RandomComplex(25, 6, rng);
  EXPECT_EQ(FcpImage(Eigen::MatrixXcd::Ones(6, 1), 1, z), z);
  // Unit tap at the current frame inside a wider window.
  Eigen::MatrixXcd taps = Eigen::MatrixXcd::Zero(6, 4);
  taps.col(2).setOnes();
  EXPECT_EQ(FcpImage(taps, 3, z), z);
}

TEST(FilterEstimate, LayoutAndMissingPairs) {
  FilterEstimate est(2, 1, 2, 0);
  EXPECT_EQ(est.num_receivers(), 3);
  EXPECT_FALSE(est.Has(0, 0));
  EXPECT_THROW(est.At(1, 0), ConfigError);
  EXPECT_THROW(est.Set(0, 1, Eigen::MatrixXcd::Ones(4, 3)), DimensionError);
  EXPECT_THROW(est.Set(3, 0, Eigen::MatrixXcd::Ones(4, 2)), DimensionError);
  est.Set(2, 1, Eigen::MatrixXcd::Ones(4, 2));
  EXPECT_TRUE(est.Has(2, 1));
}

TEST(EstimateAllFilters, CoversCrossPairsAndIsThreadDeterministic) {
  const Scene s = SynthScene(NoiselessScene(2, 2, 21));
  const FcpConfig cfg = Taps(3, 0, 1e-5);
  const FilterEstimate one = EstimateAllFilters(s.dry_spec, s.mixture_spec, 2, cfg, 1);
  const FilterEstimate four = EstimateAllFilters(s.dry_spec, s.mixture_spec, 2, cfg, 4);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 2; ++c) {
      EXPECT_EQ(one.Has(r, c), r != c);
      if (r != c) {
        EXPECT_EQ(one.At(r, c), four.At(r, c));
      }
    }
  }
}

}  // namespace
}  // namespace ctr
