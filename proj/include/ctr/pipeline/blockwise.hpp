// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Long-session processing: fixed-length blocks with context on both sides,
// per-block gain normalization, and stitching of the emitted centres.

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ctr/common/error.hpp"
#include "ctr/common/parallel.hpp"
#include "ctr/loss/loss.hpp"
#include "ctr/scene/activity.hpp"
#include "ctr/signal/waveform.hpp"
#include "ctr/solver/solver.hpp"

namespace ctr {

struct BlockPlan {
  double block_len_s = 8.0;
  double context_s = 0.96;

  double emit_len_s() const { return block_len_s - 2.0 * context_s; }

  void Validate() const {
    if (!(block_len_s > 0.0) || !(context_s >= 0.0)) throw ConfigError("block length must be > 0 and context >= 0");
    if (!(emit_len_s() > 0.0)) throw ConfigError("block length must exceed twice the context");
  }
};

struct Block {
  std::size_t begin = 0;  // samples [begin, end) are processed
  std::size_t end = 0;
  std::size_t emit_begin = 0;  // samples [emit_begin, emit_end) are kept
  std::size_t emit_end = 0;
};

// Block k starts at k * hop with hop = emit length. The first block also
// emits its leading context; the last block is right-aligned to the session
// end and emits everything after the previous block's region. Sessions no
// longer than one block form a single block.
inline std::vector<Block> PlanBlocks(std::size_t length, int sample_rate, const BlockPlan& plan) {
  plan.Validate();
  if (length == 0) throw DataError("cannot plan blocks for an empty session");
  const auto len = static_cast<std::size_t>(std::llround(plan.block_len_s * sample_rate));
  const auto ctx = static_cast<std::size_t>(std::llround(plan.context_s * sample_rate));
  if (len <= 2 * ctx) throw ConfigError("block length must exceed twice the context in samples");
  const std::size_t hop = len - 2 * ctx;
  if (length <= len) return {Block{0, length, 0, length}};
  std::vector<Block> blocks{Block{0, len, 0, len - ctx}};
  for (std::size_t k = 1;; ++k) {
    const std::size_t cursor = blocks.back().emit_end;
    const std::size_t start = k * hop;
    if (start + len >= length) {
      blocks.push_back(Block{length - len, length, cursor, length});
      break;
    }
    blocks.push_back(Block{start, start + len, cursor, start + len - ctx});
  }
  return blocks;
}

// Receivers (close-talk first) and activity restricted to one block.
struct BlockInput {
  std::vector<std::vector<double>> receivers;
  std::vector<ActivityVector> activity;  // empty when unknown
  int num_speakers = 0;
  int sample_rate = 0;
  std::size_t index = 0;  // block number
};

// Returns one waveform per speaker with the block's length.
using BlockSeparator = std::function<std::vector<std::vector<double>>(const BlockInput&)>;

struct BlockwiseResult {
  std::vector<std::vector<double>> outputs;  // per speaker, full session length
  std::vector<Block> blocks;
  std::vector<std::vector<LossBreakdown>> loss_traces;  // per block, solver separators only
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<double> Slice(const std::vector<double>& x, std::size_t begin, std::size_t end) {
  return std::vector<double>(x.begin() + static_cast<long>(begin), x.begin() + static_cast<long>(end));
}

// Nearest power of two (in log scale), so x / g * g == x exactly.
inline double PowerOfTwoGain(double sigma) {
  int e = 0;
  const double m = std::frexp(sigma, &e);  // sigma = m * 2^e, m in [0.5, 1)
  return std::ldexp(1.0, m >= std::sqrt(0.5) ? e : e - 1);
}

}  // namespace detail

inline BlockwiseResult BlockwiseSeparate(const std::vector<std::vector<double>>& receivers,
                                         const std::vector<ActivityVector>& activity, int num_speakers,
                                         int sample_rate, const BlockPlan& plan, const BlockSeparator& separator,
                                         int num_threads = 1) {
  if (num_speakers < 1 || static_cast<int>(receivers.size()) < num_speakers)
    throw DimensionError("need at least one close-talk mixture per speaker");
  const std::size_t length = receivers.front().size();
  for (const auto& x : receivers)
    if (x.size() != length) throw DimensionError("receiver waveforms differ in length");
  if (!activity.empty() && static_cast<int>(activity.size()) != num_speakers)
    throw DimensionError("activity must cover every speaker");

  BlockwiseResult res;
  res.blocks = PlanBlocks(length, sample_rate, plan);
  const std::size_t B = res.blocks.size();
  std::vector<std::vector<std::vector<double>>> block_out(B);
  std::vector<std::vector<double>> block_sigma(B);
  std::vector<std::vector<std::string>> block_warn(B);

  ParallelFor(B, num_threads, [&](std::size_t b) {
    const Block& blk = res.blocks[b];
    BlockInput in;
    in.num_speakers = num_speakers;
    in.sample_rate = sample_rate;
    in.index = b;
    for (std::size_t r = 0; r < receivers.size(); ++r) {
      std::vector<double> x = detail::Slice(receivers[r], blk.begin, blk.end);
      double sigma = StdDev(x);
      if (!(sigma > 0.0)) {
        block_warn[b].push_back("block " + std::to_string(b) + ": receiver " + std::to_string(r) +
                                " is silent; passed through unscaled");
        sigma = 1.0;
      }
      sigma = detail::PowerOfTwoGain(sigma);
      for (double& v : x) v /= sigma;
      block_sigma[b].push_back(sigma);
      in.receivers.push_back(std::move(x));
    }
    for (const auto& d : activity)
      in.activity.emplace_back(d.begin() + static_cast<long>(blk.begin), d.begin() + static_cast<long>(blk.end));
    block_out[b] = separator(in);
    if (static_cast<int>(block_out[b].size()) != num_speakers)
      throw DimensionError("separator returned the wrong number of outputs");
    for (const auto& y : block_out[b])
      if (y.size() != blk.end - blk.begin) throw DimensionError("separator changed the block length");
  });

  res.outputs.assign(num_speakers, std::vector<double>(length, 0.0));
  for (std::size_t b = 0; b < B; ++b) {
    const Block& blk = res.blocks[b];
    for (int c = 0; c < num_speakers; ++c)
      for (std::size_t n = blk.emit_begin; n < blk.emit_end; ++n)
        res.outputs[c][n] = block_out[b][c][n - blk.begin] * block_sigma[b][c];
    for (auto& w : block_warn[b]) res.warnings.push_back(std::move(w));
  }
  return res;
}

// Runs the alternating solver on every block and keeps its loss traces.
inline BlockwiseResult BlockwiseSolve(const std::vector<std::vector<double>>& receivers,
                                      const std::vector<ActivityVector>& activity, int num_speakers, int sample_rate,
                                      const StftConfig& stft, const BlockPlan& plan, SolveConfig cfg,
                                      int num_threads = 1) {
  if (receivers.empty()) throw DimensionError("no receivers");
  const std::size_t B = PlanBlocks(receivers.front().size(), sample_rate, plan).size();
  // Threads go to blocks when there are several, otherwise to the solver.
  const int block_threads = B > 1 ? num_threads : 1;
  cfg.num_threads = B > 1 ? 1 : num_threads;
  std::vector<std::vector<LossBreakdown>> traces(B);
  std::vector<std::string> notes(B);
  auto separator = [&](const BlockInput& in) {
    for (const auto& x : in.receivers) {
      if (Energy(x) > 0.0) continue;
      notes[in.index] = "a receiver is silent; close-talk mixtures passed through";
      return std::vector<std::vector<double>>(in.receivers.begin(), in.receivers.begin() + in.num_speakers);
    }
    const SolveInput si = MakeSolveInput(in.receivers, in.num_speakers, in.sample_rate, stft, in.activity);
    SolveResult r = Solve(si, cfg);
    traces[in.index] = std::move(r.state.loss_trace);
    notes[in.index] = std::move(r.warning);
    return std::move(r.waveforms);
  };
  BlockwiseResult res = BlockwiseSeparate(receivers, activity, num_speakers, sample_rate, plan, separator, block_threads);
  res.loss_traces = std::move(traces);
  for (std::size_t b = 0; b < B; ++b)
    if (!notes[b].empty()) res.warnings.push_back("block " + std::to_string(b) + ": " + notes[b]);
  return res;
}

struct TrainingSegment {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::vector<ActivityVector> activity;      // per speaker, sliced
  std::vector<std::uint8_t> speaker_active;  // E(c) for the segment
};

// Fixed-length windows with fractional overlap; a trailing partial window is
// dropped, so sessions shorter than one window yield no segments.
inline std::vector<TrainingSegment> SegmentTrainingWindows(std::size_t length, int sample_rate,
                                                           const std::vector<ActivityVector>& activity,
                                                           double seg_len_s = 8.0, double overlap = 0.5,
                                                           double min_active_s = 0.1) {
  if (!(seg_len_s > 0.0) || !(overlap >= 0.0 && overlap < 1.0))
    throw ConfigError("segment length must be > 0 and overlap in [0, 1)");
  const auto seg = static_cast<std::size_t>(std::llround(seg_len_s * sample_rate));
  const auto hop = static_cast<std::size_t>(std::llround(seg_len_s * (1.0 - overlap) * sample_rate));
  if (seg == 0 || hop == 0) throw ConfigError("segment length and hop must be at least one sample");
  for (const auto& d : activity)
    if (d.size() != length) throw DimensionError("activity length does not match the session");
  std::vector<TrainingSegment> out;
  for (std::size_t begin = 0; begin + seg <= length; begin += hop) {
    TrainingSegment s;
    s.begin = begin;
    s.end = begin + seg;
    for (const auto& d : activity) {
      ActivityVector slice(d.begin() + static_cast<long>(begin), d.begin() + static_cast<long>(begin + seg));
      std::size_t active = 0;
      for (auto v : slice) active += v ? 1 : 0;
      s.speaker_active.push_back(static_cast<double>(active) >= min_active_s * sample_rate ? 1 : 0);
      s.activity.push_back(std::move(slice));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace ctr
