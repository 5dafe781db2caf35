// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ctr/metrics/metrics.hpp"
#include "ctr/scene/activity.hpp"
#include "ctr/scene/room.hpp"
#include "ctr/scene/scene.hpp"
#include "ctr/scene/sources.hpp"

namespace ctr {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SceneConfig SmallScene(std::uint64_t seed, int speakers = 2, int far = 1) {
  SceneConfig cfg;
  cfg.num_speakers = speakers;
  cfg.num_far_mics = far;
  cfg.duration_s = 2.0;
  cfg.seed = seed;
  return cfg;
}

TEST(Scene, SingleSpeakerNoiselessIsIdentity) {
  SceneConfig cfg = SmallScene(1, 1, 0);
  cfg.noise_snr_range = {kInf, kInf};
  for (SceneMode mode : {SceneMode::kSubbandExact, SceneMode::kTimeDomain}) {
    cfg.mode = mode;
    const Scene s = SynthScene(cfg);
    ASSERT_EQ(s.mixtures.size(), 1u);
    EXPECT_EQ(s.mixture_spec[0], s.dry_spec[0]);
    double err = 0.0;
    for (std::size_t n = 0; n < s.length; ++n) err = std::max(err, std::abs(s.mixtures[0].samples[n] - s.dry[0].samples[n]));
    EXPECT_LT(err, 1e-12) << SceneModeName(mode);
  }
}

// Loop oracle for a 3-tap window: out(t) = sum_k conj(g_k) z(t - A + 1 + k).
TEST(Scene, SubbandImagesMatchConvolutionOracle) {
  SceneConfig cfg = SmallScene(2, 2, 2);
  cfg.past_taps = 2;
  cfg.future_taps = 1;
  const Scene s = SynthScene(cfg);
  for (int r = 0; r < s.num_receivers(); ++r) {
    for (int c = 0; c < s.num_speakers; ++c) {
      const Eigen::MatrixXcd& g = s.subband_filters[r][c];
      const Eigen::MatrixXcd& z = s.dry_spec[c];
      ASSERT_EQ(g.cols(), 3);
      for (Eigen::Index f = 0; f < z.cols(); ++f) {
        for (Eigen::Index t = 0; t < z.rows(); ++t) {
          Complex acc(0.0, 0.0);
          for (int k = 0; k < 3; ++k) {
            const Eigen::Index src = t - 2 + 1 + k;
            if (src >= 0 && src < z.rows()) acc += std::conj(g(f, k)) * z(src, f);
          }
          ASSERT_EQ(s.image_spec[r][c](t, f), acc) << r << c << " " << t << "," << f;
        }
      }
    }
  }
}

TEST(Scene, OwnMicIsUnfiltered) {
  const Scene s = SynthScene(SmallScene(3, 3, 1));
  for (int c = 0; c < 3; ++c) EXPECT_EQ(s.image_spec[c][c], s.dry_spec[c]);
}

TEST(Scene, MixtureIdentityInSpectrogramAndTime) {
  for (SceneMode mode : {SceneMode::kSubbandExact, SceneMode::kTimeDomain}) {
    SceneConfig cfg = SmallScene(4, 3, 2);
    cfg.mode = mode;
    const Scene s = SynthScene(cfg);
    for (int r = 0; r < s.num_receivers(); ++r) {
      Eigen::MatrixXcd sum = s.noise_spec[r];
      std::vector<double> wave = s.noise[r].samples;
      for (int c = 0; c < s.num_speakers; ++c) {
        sum += s.image_spec[r][c];
        for (std::size_t n = 0; n < s.length; ++n) wave[n] += s.images[r][c].samples[n];
      }
      EXPECT_LT((sum - s.mixture_spec[r]).norm() / s.mixture_spec[r].norm(), 1e-12);
      double err = 0.0, ref = 0.0;
      for (std::size_t n = 0; n < s.length; ++n) {
        err += std::pow(wave[n] - s.mixtures[r].samples[n], 2);
        ref += std::pow(s.mixtures[r].samples[n], 2);
      }
      EXPECT_LT(std::sqrt(err / ref), 1e-10) << SceneModeName(mode) << " r=" << r;
    }
  }
}

TEST(Scene, DryStftIsCanonical) {
  const Scene s = SynthScene(SmallScene(5));
  const Stft stft(s.stft, s.sample_rate);
  for (int c = 0; c < s.num_speakers; ++c) EXPECT_EQ(stft.ForwardMatrix(s.dry[c].samples), s.dry_spec[c]);
}

TEST(Scene, DirectTapDominates) {
  SceneConfig cfg = SmallScene(6, 3, 2);
  cfg.t60_range = {0.5, 0.5};
  cfg.subband.tail_scale = 2.0;  // force clamping
  const Scene s = SynthScene(cfg);
  for (int r = 0; r < s.num_receivers(); ++r) {
    for (int c = 0; c < s.num_speakers; ++c) {
      if (r == c) continue;
      const Eigen::MatrixXcd& g = s.subband_filters[r][c];
      for (Eigen::Index f = 0; f < g.rows(); ++f) {
        const double direct = std::abs(g(f, s.past_taps - 1));
        for (Eigen::Index k = 0; k < g.cols(); ++k)
          if (k != s.past_taps - 1) {
            EXPECT_LE(3.0 * std::abs(g(f, k)), direct * (1 + 1e-12));
          }
      }
    }
  }
}

TEST(Scene, DeterministicForSeed) {
  for (SceneMode mode : {SceneMode::kSubbandExact, SceneMode::kTimeDomain}) {
    SceneConfig cfg = SmallScene(7);
    cfg.mode = mode;
    cfg.overlap_style = OverlapStyle::kSparse;
    cfg.target_input_sisdr_db = 14.7;
    const Scene a = SynthScene(cfg), b = SynthScene(cfg);
    for (int r = 0; r < a.num_receivers(); ++r) {
      EXPECT_EQ(a.mixtures[r].samples, b.mixtures[r].samples);
      EXPECT_EQ(a.mixture_spec[r], b.mixture_spec[r]);
    }
    EXPECT_EQ(a.activity, b.activity);
    cfg.seed = 8;
    EXPECT_NE(SynthScene(cfg).mixtures[0].samples, a.mixtures[0].samples);
  }
}

TEST(Scene, CalibratedInputSiSdr) {
  for (std::uint64_t seed : {10u, 11u, 12u}) {
    SceneConfig cfg = SmallScene(seed);
    cfg.duration_s = 4.0;
    cfg.target_input_sisdr_db = 14.7;
    const Scene s = SynthScene(cfg);
    for (int c = 0; c < s.num_speakers; ++c)
      EXPECT_NEAR(SiSdr(s.mixtures[c].samples, s.dry[c].samples), 14.7, 0.05) << seed << " c=" << c;
  }
}

TEST(Scene, NoiseFollowsSampledSnr) {
  const Scene s = SynthScene(SmallScene(13));
  for (int r = 0; r < s.num_receivers(); ++r) {
    std::vector<double> speech(s.length, 0.0);
    for (int c = 0; c < s.num_speakers; ++c)
      for (std::size_t n = 0; n < s.length; ++n) speech[n] += s.images[r][c].samples[n];
    const double snr = 10.0 * std::log10(Energy(speech) / Energy(s.noise[r].samples));
    EXPECT_NEAR(snr, s.noise_snr_db[r], 1e-9);
    EXPECT_GE(s.noise_snr_db[r], 20.0);
    EXPECT_LE(s.noise_snr_db[r], 30.0);
  }
}

TEST(Scene, SourcesAreSilentOutsideActivity) {
  SceneConfig cfg = SmallScene(14);
  cfg.duration_s = 6.0;
  cfg.overlap_style = OverlapStyle::kSparse;
  const Scene s = SynthScene(cfg);
  for (int c = 0; c < s.num_speakers; ++c)
    for (std::size_t n = 0; n < s.length; ++n)
      if (!s.activity[c][n]) {
        ASSERT_EQ(s.dry[c].samples[n], 0.0);
      }
}

TEST(Scene, ConfigErrors) {
  SceneConfig cfg = SmallScene(0);
  cfg.duration_s = 0.01;  // 80 samples -> 3 frames < 8 taps
  EXPECT_THROW(SynthScene(cfg), ConfigError);
  cfg = SmallScene(0);
  cfg.sample_rate = 44100;
  EXPECT_THROW(SynthScene(cfg), ConfigError);
  cfg = SmallScene(0);
  cfg.t60_range = {0.5, 0.2};
  EXPECT_THROW(SynthScene(cfg), ConfigError);
  cfg = SmallScene(0);
  cfg.num_speakers = 0;
  EXPECT_THROW(SynthScene(cfg), ConfigError);
  cfg = SmallScene(0);
  cfg.source = SourceKind::kWav;
  EXPECT_THROW(SynthScene(cfg), ConfigError);
}

TEST(Scene, TrueFiltersLayout) {
  const Scene s = SynthScene(SmallScene(15, 2, 1));
  const FilterEstimate g = s.TrueFilters();
  EXPECT_FALSE(g.Has(0, 0));
  EXPECT_EQ(g.At(2, 1), s.subband_filters[2][1]);
  SceneConfig cfg = SmallScene(15);
  cfg.mode = SceneMode::kTimeDomain;
  EXPECT_THROW(SynthScene(cfg).TrueFilters(), ConfigError);
}

TEST(RoomFir, DirectOnlyScalesSource) {
  RoomFirConfig cfg;
  cfg.reflections_per_s = 0.0;
  std::mt19937_64 rng(1);
  const SparseFir fir = BuildRoomFir(0.4, 0.0, 0.3, 8000, cfg, rng);
  ASSERT_EQ(fir.index.size(), 1u);
  std::vector<double> x(100);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.1 * i);
  const auto y = ApplyFir(fir, x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y[i], 0.4 * x[i]);
}

TEST(RoomFir, IntegerDelayShiftsSource) {
  RoomFirConfig cfg;
  cfg.reflections_per_s = 0.0;
  std::mt19937_64 rng(2);
  const SparseFir fir = BuildRoomFir(1.0, 5.0 / 8000.0, 0.3, 8000, cfg, rng);
  std::vector<double> x(50, 0.0);
  x[0] = 1.0;
  const auto y = ApplyFir(fir, x);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], i == 5 ? 1.0 : 0.0, 1e-12);
}

// A fractional delay keeps the band-limited energy near the requested gain.
TEST(RoomFir, FractionalDelayPreservesLowFrequencies) {
  RoomFirConfig cfg;
  cfg.reflections_per_s = 0.0;
  std::mt19937_64 rng(3);
  const double delay = 10.4;
  const SparseFir fir = BuildRoomFir(1.0, delay / 8000.0, 0.3, 8000, cfg, rng);
  // Response to a slow sinusoid equals the delayed sinusoid.
  std::vector<double> x(400);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.05 * i);
  const auto y = ApplyFir(fir, x);
  for (std::size_t i = 100; i < 300; ++i) EXPECT_NEAR(y[i], std::sin(0.05 * (i - delay)), 5e-3);
}

TEST(RoomFir, ReverberantEnergyGrowsWithT60) {
  RoomFirConfig cfg;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 a(seed), b(seed);
    const double delay = 0.003;
    const SparseFir short_fir = BuildRoomFir(0.5, delay, 0.2, 8000, cfg, a);
    const SparseFir long_fir = BuildRoomFir(0.5, delay, 0.5, 8000, cfg, b);
    const double e_short = ReverberantEnergy(short_fir, delay, 8000), e_long = ReverberantEnergy(long_fir, delay, 8000);
    EXPECT_GT(e_long, e_short) << seed;
    // Reflections start after the direct tap, so the tap itself is shared.
    EXPECT_EQ(short_fir.index.front(), long_fir.index.front());
    EXPECT_EQ(short_fir.value.front(), long_fir.value.front());
  }
}

// Mixture energy = image energies + noise energy + the cross terms, and the
// cross terms of independent sources are small.
TEST(TimeDomainScene, EnergyAdditivity) {
  for (std::uint64_t seed : {20u, 21u, 22u}) {
    SceneConfig cfg = SmallScene(seed);
    cfg.mode = SceneMode::kTimeDomain;
    cfg.duration_s = 4.0;
    const Scene s = SynthScene(cfg);
    for (int r = 0; r < s.num_receivers(); ++r) {
      std::vector<std::vector<double>> parts;
      for (int c = 0; c < s.num_speakers; ++c) parts.push_back(s.images[r][c].samples);
      parts.push_back(s.noise[r].samples);
      double diag = 0.0, cross = 0.0;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        diag += Energy(parts[i]);
        for (std::size_t j = i + 1; j < parts.size(); ++j) cross += 2.0 * Dot(parts[i], parts[j]);
      }
      const double total = Energy(s.mixtures[r].samples);
      EXPECT_NEAR(total, diag + cross, 1e-9 * total);
      EXPECT_LT(std::abs(total - diag) / total, 0.1) << seed << " r=" << r;
    }
  }
}

int CountOverlap(const std::vector<ActivityVector>& d, std::size_t n) {
  int k = 0;
  for (const auto& v : d) k += v[n] ? 1 : 0;
  return k;
}

TEST(Activity, FullOverlapIsAllOnes) {
  std::mt19937_64 rng(1);
  ActivityConfig cfg;
  cfg.overlap_ratio = 1.0;
  const auto d = GenerateConversationActivity(cfg, 3, 16000, 8000, rng);
  for (const auto& v : d)
    for (auto x : v) EXPECT_EQ(x, 1);
}

TEST(Activity, ZeroOverlapIsDisjoint) {
  ActivityConfig cfg;
  cfg.overlap_ratio = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const auto d = GenerateConversationActivity(cfg, 3, 80000, 8000, rng);
    for (std::size_t n = 0; n < 80000; ++n) ASSERT_LE(CountOverlap(d, n), 1);
  }
}

TEST(Activity, OverlapRatioHitsTarget) {
  ActivityConfig cfg;
  cfg.overlap_ratio = 0.25;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 20 * 8000;
    const auto d = GenerateConversationActivity(cfg, 2, n, 8000, rng);
    std::size_t any = 0, multi = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const int k = CountOverlap(d, i);
      any += k >= 1;
      multi += k >= 2;
    }
    EXPECT_NEAR(static_cast<double>(multi) / any, 0.25, 0.05) << seed;
    EXPECT_DOUBLE_EQ(OverlapRatio(d), static_cast<double>(multi) / any);
  }
}

TEST(Activity, GapsProduceSilence) {
  ActivityConfig cfg;
  cfg.overlap_ratio = 0.0;
  cfg.gap_probability = 1.0;
  std::mt19937_64 rng(3);
  const auto d = GenerateConversationActivity(cfg, 2, 80000, 8000, rng);
  std::size_t silent = 0;
  for (std::size_t n = 0; n < 80000; ++n) silent += CountOverlap(d, n) == 0;
  EXPECT_GT(silent, 0u);
}

TEST(Activity, IntervalRoundTrip) {
  const ActivityVector d = {0, 1, 1, 0, 0, 1, 0, 1, 1};
  const auto iv = ActivityToIntervals(d);
  ASSERT_EQ(iv.size(), 3u);
  EXPECT_EQ(iv[0], (Interval{1, 3}));
  EXPECT_EQ(iv[2], (Interval{7, 9}));
  EXPECT_EQ(IntervalsToActivity(iv, d.size()), d);
}

TEST(Activity, IntervalErrors) {
  EXPECT_THROW(IntervalsToActivity({{3, 5}, {4, 6}}, 10), DataError);
  EXPECT_THROW(IntervalsToActivity({{5, 3}}, 10), DataError);
  EXPECT_THROW(IntervalsToActivity({{5, 11}}, 10), DataError);
  EXPECT_THROW(IntervalsToActivity({{6, 8}, {1, 2}}, 10), DataError);
}

TEST(Sources, GeneratorsAreFiniteAndSeeded) {
  for (int fs : {8000, 16000}) {
    std::mt19937_64 a(5), b(5);
    const auto x = SpeechShapedNoise(fs, fs, a), y = SpeechShapedNoise(fs, fs, b);
    EXPECT_EQ(x, y);
    for (double v : x) ASSERT_TRUE(std::isfinite(v));
    EXPECT_GT(Energy(x), 0.0);
    std::mt19937_64 c(6);
    const auto w = WhiteBursts(fs, fs, c);
    EXPECT_GT(Energy(w), 0.0);
  }
  std::vector<double> x = {1.0, 3.0, 5.0};
  NormalizeUnitStd(x);
  EXPECT_NEAR(StdDev(x), 1.0, 1e-15);
  EXPECT_THROW(ParseSourceKind("pink"), ConfigError);
}

}  // namespace
}  // namespace ctr
