// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Synthetic meeting scenes: C speakers, each wearing a close-talk microphone,
// plus P far-field microphones. Receivers are ordered close-talk first.
//
// Two renderers share the geometry sampling:
//   subband-exact: every image is a subband convolution of the dry source
//     spectrogram, so the narrowband model holds with zero error. The
//     spectrogram is the canonical signal here; waveforms are its istft.
//   time-domain: images are FIR convolutions of the dry waveform and
//     spectrograms are computed from the rendered waveforms.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctr/common/error.hpp"
#include "ctr/fcp/fcp.hpp"
#include "ctr/metrics/metrics.hpp"
#include "ctr/scene/activity.hpp"
#include "ctr/scene/room.hpp"
#include "ctr/scene/sources.hpp"
#include "ctr/signal/stft.hpp"
#include "ctr/signal/subband.hpp"
#include "ctr/signal/waveform.hpp"

namespace ctr {

enum class SceneMode { kSubbandExact, kTimeDomain };
enum class OverlapStyle { kFull, kSparse };

inline SceneMode ParseSceneMode(const std::string& s) {
  if (s == "subband" || s == "subband-exact") return SceneMode::kSubbandExact;
  if (s == "time" || s == "time-domain") return SceneMode::kTimeDomain;
  throw ConfigError("unknown scene mode '" + s + "' (expected subband-exact or time-domain)");
}
inline const char* SceneModeName(SceneMode m) {
  return m == SceneMode::kSubbandExact ? "subband-exact" : "time-domain";
}
inline OverlapStyle ParseOverlapStyle(const std::string& s) {
  if (s == "full") return OverlapStyle::kFull;
  if (s == "sparse") return OverlapStyle::kSparse;
  throw ConfigError("unknown overlap style '" + s + "' (expected full or sparse)");
}
inline const char* OverlapStyleName(OverlapStyle s) { return s == OverlapStyle::kFull ? "full" : "sparse"; }

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  double Sample(std::mt19937_64& rng) const {
    if (lo == hi) return lo;
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  void Validate(const std::string& name, bool allow_infinite = false) const {
    const bool finite = std::isfinite(lo) && std::isfinite(hi);
    if (std::isnan(lo) || std::isnan(hi) || lo > hi || (!finite && !allow_infinite) || !(lo > 0.0))
      throw ConfigError(name + " must be a non-empty positive range");
  }
};

struct SceneConfig {
  SceneMode mode = SceneMode::kSubbandExact;
  int num_speakers = 2;
  int num_far_mics = 1;
  int sample_rate = 8000;
  double duration_s = 4.0;
  Range t60_range{0.2, 0.5};
  Range close_talk_dist_range{0.1, 0.3};
  // Distance from a speaker to somebody else's close-talk microphone.
  Range cross_dist_range{0.8, 1.6};
  Range far_dist_range{1.0, 2.0};
  // Per-mic SNR against the speech at that mic; +inf disables noise.
  Range noise_snr_range{20.0, 30.0};
  OverlapStyle overlap_style = OverlapStyle::kFull;
  ActivityConfig activity{0.25};
  std::uint64_t seed = 0;

  StftConfig stft;
  int past_taps = 8;  // A
  int future_taps = 0;  // B
  SubbandTapConfig subband;
  RoomFirConfig room;

  SourceKind source = SourceKind::kSpeechShaped;
  std::vector<std::string> source_paths;  // one per speaker for SourceKind::kWav
  // When finite, cross-talk at every close-talk mic is rescaled so the
  // mixture's SI-SDR against its wearer's speech hits this value.
  double target_input_sisdr_db = std::numeric_limits<double>::quiet_NaN();

  void Validate() const {
    if (num_speakers < 1) throw ConfigError("scene needs at least one speaker");
    if (num_far_mics < 0) throw ConfigError("far-field mic count must be >= 0");
    if (sample_rate != 8000 && sample_rate != 16000) throw ConfigError("sample rate must be 8000 or 16000 Hz");
    if (!(duration_s > 0.0)) throw ConfigError("scene duration must be positive");
    if (past_taps < 1 || future_taps < 0) throw ConfigError("scene filter taps need A >= 1, B >= 0");
    t60_range.Validate("t60_range");
    close_talk_dist_range.Validate("close_talk_dist_range");
    cross_dist_range.Validate("cross_dist_range");
    far_dist_range.Validate("far_dist_range");
    noise_snr_range.Validate("noise_snr_range", true);
    activity.Validate();
    if (source == SourceKind::kWav && static_cast<int>(source_paths.size()) != num_speakers)
      throw ConfigError("wav sources need one path per speaker");
  }
};

struct Scene {
  SceneMode mode = SceneMode::kSubbandExact;
  int num_speakers = 0;
  int num_far_mics = 0;
  int sample_rate = 0;
  StftConfig stft;
  int past_taps = 1;
  int future_taps = 0;
  std::uint64_t seed = 0;
  std::size_t length = 0;

  std::vector<Waveform> dry;              // [c], zero outside activity
  std::vector<Eigen::MatrixXcd> dry_spec;  // [c]
  // Subband mode: filters[r][c] as [bin, tap]; identity for r == c.
  std::vector<std::vector<Eigen::MatrixXcd>> subband_filters;
  // Time mode: room responses[r][c]; a unit impulse for r == c.
  std::vector<std::vector<SparseFir>> fir;
  std::vector<std::vector<Eigen::MatrixXcd>> image_spec;  // [r][c]
  std::vector<std::vector<Waveform>> images;              // [r][c]
  std::vector<Eigen::MatrixXcd> noise_spec;               // [r]
  std::vector<Waveform> noise;                            // [r]
  std::vector<Eigen::MatrixXcd> mixture_spec;             // [r]
  std::vector<Waveform> mixtures;                         // [r]
  std::vector<ActivityVector> activity;                   // [c]

  double t60 = 0.0;
  std::vector<double> noise_snr_db;       // [r]
  std::vector<double> close_talk_dist;    // [c]
  std::vector<std::vector<double>> dist;  // [r][c], own mic = close_talk_dist
  std::vector<double> cross_talk_scale;   // [r], 1 for far mics

  int num_receivers() const { return num_speakers + num_far_mics; }

  // Ground-truth filters in FilterEstimate layout (subband mode only).
  FilterEstimate TrueFilters() const {
    if (mode != SceneMode::kSubbandExact) throw ConfigError("time-domain scenes have no subband ground truth");
    FilterEstimate est(num_speakers, num_far_mics, past_taps, future_taps);
    for (int r = 0; r < num_receivers(); ++r)
      for (int c = 0; c < num_speakers; ++c)
        if (r != c) est.Set(r, c, subband_filters[r][c]);
    return est;
  }
};

namespace detail {

inline std::mt19937_64 StreamRng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

enum Stream : std::uint64_t { kActivity = 1, kSources, kGeometry, kFilters, kNoise };

inline std::vector<double> Add(const std::vector<double>& a, const std::vector<double>& b, double scale = 1.0) {
  std::vector<double> out(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * b[i];
  return out;
}

// Scale k for the cross-talk sum so that SI-SDR(own + k*cross + noise(k), own)
// equals target. Noise follows the speech level at the requested SNR.
inline double CalibrateCrossTalk(const std::vector<double>& own, const std::vector<double>& cross,
                                 const std::vector<double>& unit_noise, double snr_db, double target) {
  if (!(Energy(own) > 0.0) || !(Energy(cross) > 0.0)) return 1.0;
  const double noise_e = Energy(unit_noise);
  auto score = [&](double k) {
    std::vector<double> y = Add(own, cross, k);
    if (std::isfinite(snr_db) && noise_e > 0.0) {
      const double g = std::sqrt(Energy(y) / (noise_e * std::pow(10.0, snr_db / 10.0)));
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += g * unit_noise[i];
    }
    return SiSdr(y, own);
  };
  if (score(0.0) <= target) return 0.0;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 60 && score(hi) > target; ++i) hi *= 2.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (score(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

inline Scene SynthScene(const SceneConfig& cfg) {
  cfg.Validate();
  const int C = cfg.num_speakers, P = cfg.num_far_mics, R = C + P;
  const int fs = cfg.sample_rate;
  const auto N = static_cast<std::size_t>(std::llround(cfg.duration_s * fs));
  const Stft stft(cfg.stft, fs);
  const StftGeometry& geo = stft.geometry();
  if (N == 0 || geo.FramesFor(N) < cfg.past_taps + cfg.future_taps)
    throw ConfigError("scene of " + std::to_string(N) + " samples is shorter than the " +
                      std::to_string(cfg.past_taps + cfg.future_taps) + "-frame filter");

  Scene s;
  s.mode = cfg.mode;
  s.num_speakers = C;
  s.num_far_mics = P;
  s.sample_rate = fs;
  s.stft = cfg.stft;
  s.past_taps = cfg.past_taps;
  s.future_taps = cfg.future_taps;
  s.seed = cfg.seed;
  s.length = N;

  auto activity_rng = detail::StreamRng(cfg.seed, detail::kActivity);
  if (cfg.overlap_style == OverlapStyle::kFull) {
    s.activity.assign(C, ActivityVector(N, 1));
  } else {
    s.activity = GenerateConversationActivity(cfg.activity, C, N, fs, activity_rng);
  }

  auto source_rng = detail::StreamRng(cfg.seed, detail::kSources);
  for (int c = 0; c < C; ++c) {
    std::vector<double> x;
    switch (cfg.source) {
      case SourceKind::kSpeechShaped: x = SpeechShapedNoise(N, fs, source_rng); break;
      case SourceKind::kWhiteBursts: x = WhiteBursts(N, fs, source_rng); break;
      case SourceKind::kWav: x = WavSource(cfg.source_paths[c], N, fs); break;
    }
    NormalizeUnitStd(x);
    x.resize(N);
    for (std::size_t n = 0; n < N; ++n)
      if (!s.activity[c][n]) x[n] = 0.0;
    // Keep samples in PCM16 range.
    for (double& v : x) v *= 0.05;
    s.dry.emplace_back(std::move(x), fs);
    s.dry_spec.push_back(stft.ForwardMatrix(s.dry.back().samples));
  }

  auto geo_rng = detail::StreamRng(cfg.seed, detail::kGeometry);
  s.t60 = cfg.t60_range.Sample(geo_rng);
  for (int c = 0; c < C; ++c) s.close_talk_dist.push_back(cfg.close_talk_dist_range.Sample(geo_rng));
  s.dist.assign(R, std::vector<double>(C, 0.0));
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) {
      if (r == c) {
        s.dist[r][c] = s.close_talk_dist[c];
      } else {
        const double d = (r < C ? cfg.cross_dist_range : cfg.far_dist_range).Sample(geo_rng);
        s.dist[r][c] = std::max(d, s.close_talk_dist[c]);
      }
    }
  for (int r = 0; r < R; ++r) s.noise_snr_db.push_back(cfg.noise_snr_range.Sample(geo_rng));

  // Paths relative to each speaker's own close-talk microphone.
  auto filter_rng = detail::StreamRng(cfg.seed, detail::kFilters);
  s.image_spec.assign(R, std::vector<Eigen::MatrixXcd>(C));
  s.images.assign(R, std::vector<Waveform>(C));
  if (cfg.mode == SceneMode::kSubbandExact) {
    s.subband_filters.assign(R, std::vector<Eigen::MatrixXcd>(C));
  } else {
    s.fir.assign(R, std::vector<SparseFir>(C));
  }
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < C; ++c) {
      const double gain = s.close_talk_dist[c] / s.dist[r][c];
      const double delay = (s.dist[r][c] - s.close_talk_dist[c]) / kSpeedOfSound;
      if (cfg.mode == SceneMode::kSubbandExact) {
        s.subband_filters[r][c] = r == c ? IdentitySubbandTaps(geo.bins(), cfg.past_taps, cfg.future_taps)
                                         : RandomSubbandTaps(geo.bins(), cfg.past_taps, cfg.future_taps, gain, delay,
                                                             s.t60, geo.hop, fs, cfg.subband, filter_rng);
        s.image_spec[r][c] = SubbandConvolve(s.subband_filters[r][c], cfg.past_taps, s.dry_spec[c]);
      } else {
        if (r == c) {
          s.fir[r][c].index = {0};
          s.fir[r][c].value = {1.0};
        } else {
          s.fir[r][c] = BuildRoomFir(gain, delay, s.t60, fs, cfg.room, filter_rng);
        }
        s.images[r][c] = Waveform(ApplyFir(s.fir[r][c], s.dry[c].samples), fs);
      }
    }
  }
  auto render_images = [&](int r) {
    for (int c = 0; c < C; ++c) {
      if (cfg.mode == SceneMode::kSubbandExact) {
        s.images[r][c] = Waveform(stft.InverseMatrix(s.image_spec[r][c], N), fs);
      } else {
        s.image_spec[r][c] = stft.ForwardMatrix(s.images[r][c].samples);
      }
    }
  };
  for (int r = 0; r < R; ++r) render_images(r);

  auto noise_rng = detail::StreamRng(cfg.seed, detail::kNoise);
  std::vector<std::vector<double>> unit_noise(R, std::vector<double>(N));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int r = 0; r < R; ++r)
    for (double& v : unit_noise[r]) v = normal(noise_rng);

  s.cross_talk_scale.assign(R, 1.0);
  if (std::isfinite(cfg.target_input_sisdr_db)) {
    for (int r = 0; r < C; ++r) {
      std::vector<double> cross(N, 0.0);
      for (int c = 0; c < C; ++c)
        if (c != r) cross = detail::Add(cross, s.images[r][c].samples);
      const double k = detail::CalibrateCrossTalk(s.images[r][r].samples, cross, unit_noise[r], s.noise_snr_db[r],
                                                  cfg.target_input_sisdr_db);
      s.cross_talk_scale[r] = k;
      for (int c = 0; c < C; ++c) {
        if (c == r) continue;
        if (cfg.mode == SceneMode::kSubbandExact) {
          s.subband_filters[r][c] *= k;
          s.image_spec[r][c] = SubbandConvolve(s.subband_filters[r][c], cfg.past_taps, s.dry_spec[c]);
        } else {
          for (double& v : s.fir[r][c].value) v *= k;
          s.images[r][c] = Waveform(ApplyFir(s.fir[r][c], s.dry[c].samples), fs);
        }
      }
      render_images(r);
    }
  }

  for (int r = 0; r < R; ++r) {
    std::vector<double> speech(N, 0.0);
    for (int c = 0; c < C; ++c) speech = detail::Add(speech, s.images[r][c].samples);
    std::vector<double> n(N, 0.0);
    const double speech_e = Energy(speech);
    if (std::isfinite(s.noise_snr_db[r]) && speech_e > 0.0) {
      const double g = std::sqrt(speech_e / (Energy(unit_noise[r]) * std::pow(10.0, s.noise_snr_db[r] / 10.0)));
      for (std::size_t i = 0; i < N; ++i) n[i] = g * unit_noise[r][i];
    }
    s.noise.emplace_back(std::move(n), fs);
    s.noise_spec.push_back(stft.ForwardMatrix(s.noise.back().samples));

    if (cfg.mode == SceneMode::kSubbandExact) {
      Eigen::MatrixXcd y = s.noise_spec.back();
      for (int c = 0; c < C; ++c) y += s.image_spec[r][c];
      s.mixtures.emplace_back(stft.InverseMatrix(y, N), fs);
      s.mixture_spec.push_back(std::move(y));
    } else {
      std::vector<double> y = detail::Add(speech, s.noise.back().samples);
      s.mixture_spec.push_back(stft.ForwardMatrix(y));
      s.mixtures.emplace_back(std::move(y), fs);
    }
  }
  return s;
}

inline Scene SynthSubbandScene(SceneConfig cfg) {
  cfg.mode = SceneMode::kSubbandExact;
  return SynthScene(cfg);
}

inline Scene SynthTimeDomainScene(SceneConfig cfg) {
  cfg.mode = SceneMode::kTimeDomain;
  return SynthScene(cfg);
}

}  // namespace ctr
