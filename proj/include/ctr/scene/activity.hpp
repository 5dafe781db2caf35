// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Speaker-activity patterns: binary per-sample vectors d(c), conversions to
// and from [on, off) sample intervals, and a turn-taking generator.

#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ctr/common/error.hpp"

namespace ctr {

using ActivityVector = std::vector<std::uint8_t>;
using Interval = std::pair<std::size_t, std::size_t>;  // [on, off)

inline std::vector<Interval> ActivityToIntervals(const ActivityVector& d) {
  std::vector<Interval> out;
  std::size_t i = 0;
  while (i < d.size()) {
    if (!d[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < d.size() && d[j]) ++j;
    out.emplace_back(i, j);
    i = j;
  }
  return out;
}

inline ActivityVector IntervalsToActivity(const std::vector<Interval>& intervals, std::size_t length) {
  ActivityVector d(length, 0);
  std::size_t prev_end = 0;
  for (const auto& [on, off] : intervals) {
    if (on >= off || off > length) throw DataError("activity interval out of bounds or empty");
    if (on < prev_end) throw DataError("activity intervals must be sorted and disjoint");
    std::fill(d.begin() + static_cast<long>(on), d.begin() + static_cast<long>(off), 1);
    prev_end = off;
  }
  return d;
}

/// Samples where at least two speakers talk, over samples where at least one does.
inline double OverlapRatio(const std::vector<ActivityVector>& activity) {
  if (activity.empty()) return 0.0;
  std::size_t any = 0, multi = 0;
  for (std::size_t n = 0; n < activity.front().size(); ++n) {
    int active = 0;
    for (const auto& d : activity) active += d[n] ? 1 : 0;
    any += active >= 1;
    multi += active >= 2;
  }
  return any == 0 ? 0.0 : static_cast<double>(multi) / static_cast<double>(any);
}

struct ActivityConfig {
  // Target OverlapRatio. Values >= 1 make every speaker active throughout.
  double overlap_ratio = 1.0;
  double min_turn_s = 1.0;
  double max_turn_s = 2.5;
  // Probability that a turn boundary is a silence gap instead of an overlap.
  double gap_probability = 0.0;
  double max_gap_s = 0.5;

  void Validate() const {
    if (!(overlap_ratio >= 0.0)) throw ConfigError("activity overlap ratio must be >= 0");
    if (!(min_turn_s > 0.0) || !(max_turn_s >= min_turn_s)) throw ConfigError("activity turn range is invalid");
    if (!(gap_probability >= 0.0 && gap_probability <= 1.0)) throw ConfigError("gap probability must be in [0, 1]");
    if (!(max_gap_s >= 0.0)) throw ConfigError("max gap must be >= 0");
  }
};

namespace detail {

struct Turn {
  int speaker;
  std::size_t length;
};

// Lays turns out back to back; overlapping boundaries pull the next turn
// back by share * min(len_i, len_i+1), gap boundaries push it forward.
inline std::vector<ActivityVector> LayOutTurns(const std::vector<Turn>& turns, const std::vector<long>& gaps,
                                               double share, int num_speakers, std::size_t length) {
  std::vector<ActivityVector> d(num_speakers, ActivityVector(length, 0));
  long start = 0;
  for (std::size_t i = 0; i < turns.size() && start < static_cast<long>(length); ++i) {
    const long end = std::min<long>(start + static_cast<long>(turns[i].length), static_cast<long>(length));
    for (long n = std::max(0L, start); n < end; ++n) d[turns[i].speaker][n] = 1;
    if (i + 1 == turns.size()) break;
    long next = start + static_cast<long>(turns[i].length);
    if (gaps[i] >= 0) {
      next += gaps[i];
    } else {
      next -= static_cast<long>(share * static_cast<double>(std::min(turns[i].length, turns[i + 1].length)));
    }
    start = next;
  }
  return d;
}

}  // namespace detail

// Alternating turns: each turn goes to a speaker other than the previous one;
// consecutive turns overlap or are separated by a gap. The overlap share is
// bisected so that the realized OverlapRatio over [0, length) matches the
// target as closely as the sample grid allows (shares are capped at 0.5 so a
// turn never overlaps both of its neighbours' neighbours).
inline std::vector<ActivityVector> GenerateConversationActivity(const ActivityConfig& cfg, int num_speakers,
                                                                std::size_t length, int sample_rate,
                                                                std::mt19937_64& rng) {
  cfg.Validate();
  if (num_speakers < 1) throw ConfigError("need at least one speaker");
  if (length == 0 || sample_rate <= 0) throw ConfigError("activity needs a positive duration");
  if (cfg.overlap_ratio >= 1.0) return std::vector<ActivityVector>(num_speakers, ActivityVector(length, 1));

  std::uniform_real_distribution<double> turn_len(cfg.min_turn_s, cfg.max_turn_s);
  std::uniform_real_distribution<double> gap_len(0.0, cfg.max_gap_s);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> first_speaker(0, num_speakers - 1);

  std::vector<detail::Turn> turns;
  std::vector<long> gaps;  // per boundary: >= 0 gap length, -1 overlap
  std::size_t total = 0;
  int speaker = first_speaker(rng);
  while (total < length + static_cast<std::size_t>(cfg.max_turn_s * sample_rate)) {
    const auto len = static_cast<std::size_t>(std::max(1.0, turn_len(rng) * sample_rate));
    turns.push_back({speaker, len});
    total += len;
    const bool gap = unit(rng) < cfg.gap_probability || cfg.overlap_ratio == 0.0;
    gaps.push_back(gap ? static_cast<long>(gap_len(rng) * sample_rate) : -1);
    if (num_speakers > 1) {
      std::uniform_int_distribution<int> other(0, num_speakers - 2);
      const int pick = other(rng);
      speaker = pick >= speaker ? pick + 1 : pick;
    }
  }

  if (cfg.overlap_ratio == 0.0 || num_speakers == 1)
    return detail::LayOutTurns(turns, gaps, 0.0, num_speakers, length);

  double lo = 0.0, hi = 0.5;
  auto best = detail::LayOutTurns(turns, gaps, hi, num_speakers, length);
  if (OverlapRatio(best) <= cfg.overlap_ratio) return best;
  for (int iter = 0; iter < 40; ++iter) {
    const double mid = 0.5 * (lo + hi);
    auto d = detail::LayOutTurns(turns, gaps, mid, num_speakers, length);
    if (OverlapRatio(d) < cfg.overlap_ratio) {
      lo = mid;
    } else {
      hi = mid;
      best = std::move(d);
    }
  }
  return best;
}

}  // namespace ctr
