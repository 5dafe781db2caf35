// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Alternating minimization of the mixture-constraint objective: closed-form
// FCP filters given the source estimates, then a backtracking (sub)gradient
// step on the estimates given the filters.
//
// Gradients use the convention dL/dRe + i dL/dIm, so a first-order change is
// Re sum conj(G) dX and a step X - eta G decreases L by about eta |G|^2.

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctr/common/error.hpp"
#include "ctr/common/parallel.hpp"
#include "ctr/fcp/fcp.hpp"
#include "ctr/loss/loss.hpp"
#include "ctr/scene/activity.hpp"
#include "ctr/signal/stft.hpp"
#include "ctr/signal/subband.hpp"

namespace ctr {

enum class SolveMode { kUnsupervised, kWeaklySupervised };
enum class Parametrization { kDirect, kMask };
enum class SolveStatus { kRunning, kConverged, kMaxIters, kStepUnderflow };

inline SolveMode ParseSolveMode(const std::string& s) {
  if (s == "unsupervised") return SolveMode::kUnsupervised;
  if (s == "weak" || s == "weakly-supervised") return SolveMode::kWeaklySupervised;
  throw ConfigError("unknown solver mode '" + s + "' (expected unsupervised or weakly-supervised)");
}
inline const char* SolveModeName(SolveMode m) {
  return m == SolveMode::kUnsupervised ? "unsupervised" : "weakly-supervised";
}
inline Parametrization ParseParametrization(const std::string& s) {
  if (s == "direct") return Parametrization::kDirect;
  if (s == "mask") return Parametrization::kMask;
  throw ConfigError("unknown parametrization '" + s + "' (expected direct or mask)");
}
inline const char* ParametrizationName(Parametrization p) { return p == Parametrization::kDirect ? "direct" : "mask"; }
inline const char* SolveStatusName(SolveStatus s) {
  switch (s) {
    case SolveStatus::kRunning: return "running";
    case SolveStatus::kConverged: return "converged";
    case SolveStatus::kMaxIters: return "max-iters";
    case SolveStatus::kStepUnderflow: return "step-underflow";
  }
  return "unknown";
}

struct SolveConfig {
  int max_iters = 200;
  // Source steps taken between two filter updates.
  int inner_steps = 1;
  FcpConfig fcp;
  std::optional<double> alpha;  // default 1/P
  double beta = 1.0;            // used in weakly-supervised mode only
  SolveMode mode = SolveMode::kUnsupervised;
  Objective objective = Objective::kFAbs;
  Parametrization parametrization = Parametrization::kDirect;
  bool backtracking = true;
  double shrink = 0.5;
  double grow = 2.0;
  double sufficient_decrease = 1e-4;
  // First step length as a fraction of |x| / |g|.
  double initial_step = 1e-2;
  double epsilon_mag = 1e-8;
  double rel_tol = 1e-6;
  int patience = 5;
  double abs_tol = 1e-12;
  double min_active_s = 0.1;
  int num_threads = 1;

  void Validate() const {
    fcp.Validate();
    if (max_iters < 0) throw ConfigError("solver.max_iters must be >= 0");
    if (inner_steps < 1) throw ConfigError("solver.inner_steps must be >= 1");
    if (!(beta >= 0.0)) throw ConfigError("loss.beta must be >= 0");
    if (!(shrink > 0.0 && shrink < 1.0)) throw ConfigError("solver.shrink must be in (0, 1)");
    if (!(grow >= 1.0)) throw ConfigError("solver.grow must be >= 1");
    if (!(sufficient_decrease >= 0.0 && sufficient_decrease < 1.0))
      throw ConfigError("solver.sufficient_decrease must be in [0, 1)");
    if (!(initial_step > 0.0)) throw ConfigError("solver.initial_step must be > 0");
    if (!(epsilon_mag > 0.0)) throw ConfigError("solver.epsilon_mag must be > 0");
    if (!(rel_tol >= 0.0) || patience < 1 || !(abs_tol >= 0.0)) throw ConfigError("invalid convergence settings");
    if (!(min_active_s >= 0.0)) throw ConfigError("solver.min_active_s must be >= 0");
  }
};

// Observations for one scene or block.
struct SolveInput {
  int num_speakers = 0;
  int sample_rate = 0;
  std::size_t length = 0;
  StftConfig stft;
  std::vector<Eigen::MatrixXcd> mixtures;        // receiver spectrograms, close-talk first
  std::vector<std::vector<double>> close_talk;  // close-talk waveforms (speaker-activity loss)
  std::vector<ActivityVector> activity;         // per speaker; required in weakly-supervised mode

  int num_receivers() const { return static_cast<int>(mixtures.size()); }
  int num_far_mics() const { return num_receivers() - num_speakers; }
};

// Builds a SolveInput from receiver waveforms (close-talk first).
inline SolveInput MakeSolveInput(const std::vector<std::vector<double>>& receivers, int num_speakers, int sample_rate,
                                 const StftConfig& stft_cfg, std::vector<ActivityVector> activity = {}) {
  if (num_speakers < 1 || static_cast<int>(receivers.size()) < num_speakers)
    throw DimensionError("need at least one close-talk mixture per speaker");
  SolveInput in;
  in.num_speakers = num_speakers;
  in.sample_rate = sample_rate;
  in.length = receivers.front().size();
  in.stft = stft_cfg;
  const Stft stft(stft_cfg, sample_rate);
  for (const auto& x : receivers) {
    if (x.size() != in.length) throw DimensionError("receiver waveforms differ in length");
    in.mixtures.push_back(stft.ForwardMatrix(x));
  }
  for (int c = 0; c < num_speakers; ++c) in.close_talk.push_back(receivers[c]);
  in.activity = std::move(activity);
  return in;
}

struct SeparatorState {
  std::vector<Eigen::MatrixXcd> estimates;  // Z_hat(c)
  std::vector<Eigen::MatrixXcd> masks;      // M_hat(c), mask parametrization only
  Parametrization parametrization = Parametrization::kDirect;
  double step_size = 0.0;  // 0 until the first source step picks one
  int iteration = 0;
  std::vector<LossBreakdown> loss_trace;
  SolveStatus status = SolveStatus::kRunning;
};

struct SolveResult {
  SeparatorState state;
  FilterEstimate filters;
  std::vector<std::vector<double>> waveforms;  // istft of the final estimates
  std::string warning;
};

class Separator {
 public:
  Separator(SolveInput input, SolveConfig cfg) : in_(std::move(input)), cfg_(std::move(cfg)), stft_(in_.stft, in_.sample_rate) {
    cfg_.Validate();
    const int C = in_.num_speakers;
    if (C < 1 || in_.num_receivers() < C) throw DimensionError("need at least one close-talk mixture per speaker");
    if (static_cast<int>(in_.close_talk.size()) != C) throw DimensionError("one close-talk waveform per speaker");
    const Eigen::Index frames = stft_.geometry().FramesFor(in_.length);
    for (const auto& y : in_.mixtures)
      if (y.rows() != frames || y.cols() != stft_.geometry().bins())
        throw DimensionError("mixture spectrogram does not match the signal length");
    alpha_ = in_.num_far_mics() > 0 ? ResolveAlpha(cfg_.alpha, in_.num_far_mics()) : cfg_.alpha.value_or(0.0);
    if (weak()) {
      if (static_cast<int>(in_.activity.size()) != C)
        throw ConfigError("weakly-supervised mode needs activity for every speaker");
      mask_ = BuildActivityMask(in_.activity, stft_.geometry(), in_.length, cfg_.min_active_s);
    }
    for (const auto& y : in_.mixtures) {
      if (cfg_.objective == Objective::kFAbs) {
        scale_.push_back(y.unaryExpr([](const Complex& v) { return Magnitude(v); }).sum());
      } else {
        scale_.push_back(y.squaredNorm());
      }
      if (!(scale_.back() > 0.0)) throw DataError("a receiver mixture is all zero");
    }
  }

  const SolveInput& input() const { return in_; }
  const SolveConfig& config() const { return cfg_; }
  const Stft& stft() const { return stft_; }
  double alpha() const { return alpha_; }
  bool weak() const { return cfg_.mode == SolveMode::kWeaklySupervised; }

  // Z_hat(c) = Y_c, or M_hat(c) = 1.
  SeparatorState Init() const {
    SeparatorState s;
    s.parametrization = cfg_.parametrization;
    for (int c = 0; c < in_.num_speakers; ++c) {
      if (cfg_.parametrization == Parametrization::kMask) {
        s.masks.push_back(Eigen::MatrixXcd::Ones(in_.mixtures[c].rows(), in_.mixtures[c].cols()));
        s.estimates.push_back(s.masks.back().cwiseProduct(in_.mixtures[c]));
      } else {
        s.estimates.push_back(in_.mixtures[c]);
      }
    }
    return s;
  }

  // Estimates the filters see: muted in weakly-supervised mode.
  std::vector<Eigen::MatrixXcd> Visible(const std::vector<Eigen::MatrixXcd>& estimates) const {
    return weak() ? MuteAll(estimates, mask_) : estimates;
  }

  FilterEstimate FilterStep(const SeparatorState& s) const {
    return EstimateAllFilters(Visible(s.estimates), in_.mixtures, in_.num_speakers, cfg_.fcp, cfg_.num_threads);
  }

  LossBreakdown Evaluate(const std::vector<Eigen::MatrixXcd>& estimates, const FilterEstimate& filters) const {
    const int C = in_.num_speakers;
    const auto visible = Visible(estimates);
    LossBreakdown out;
    out.alpha = alpha_;
    std::vector<double> terms(in_.num_receivers());
    ParallelFor(terms.size(), cfg_.num_threads, [&](std::size_t r) {
      terms[r] = Distance(cfg_.objective, in_.mixtures[r], ReconstructReceiver(static_cast<int>(r), visible, filters));
    });
    out.mc_close.assign(terms.begin(), terms.begin() + C);
    out.mc_far.assign(terms.begin() + C, terms.end());
    if (weak()) {
      out.beta = cfg_.beta;
      for (int c = 0; c < C; ++c)
        out.sa.push_back(SaLoss(stft_.InverseMatrix(estimates[c], in_.length), in_.close_talk[c], in_.activity[c], c));
    }
    out.Recompute();
    if (!std::isfinite(out.total)) throw NumericalError("loss is not finite");
    return out;
  }

  // Gradient of the total loss with respect to the estimates Z_hat.
  std::vector<Eigen::MatrixXcd> GradientEstimates(const std::vector<Eigen::MatrixXcd>& estimates,
                                                  const FilterEstimate& filters) const {
    const int C = in_.num_speakers, R = in_.num_receivers();
    const auto visible = Visible(estimates);
    std::vector<Eigen::MatrixXcd> residual_grad(R);
    ParallelFor(R, cfg_.num_threads, [&](std::size_t r) {
      const Eigen::MatrixXcd y_hat = ReconstructReceiver(static_cast<int>(r), visible, filters);
      const double weight = static_cast<int>(r) < C ? 1.0 : alpha_;
      residual_grad[r] = DistanceGradient(in_.mixtures[r], y_hat, scale_[r]) * weight;
    });
    std::vector<Eigen::MatrixXcd> grad(C);
    ParallelFor(C, cfg_.num_threads, [&](std::size_t ci) {
      const int c = static_cast<int>(ci);
      Eigen::MatrixXcd g = residual_grad[c];
      for (int r = 0; r < R; ++r) {
        if (r == c) continue;
        g += SubbandConvolveAdjoint(filters.At(r, c), filters.past_taps(), residual_grad[r]);
      }
      grad[c] = weak() ? Mute(g, mask_, c) : std::move(g);
    });
    // The Stft plan cache is not thread-safe; the activity term runs serially.
    if (weak())
      for (int c = 0; c < C; ++c) grad[c] += SaGradient(estimates[c], c);
    return grad;
  }

  // Gradient with respect to the free variables of the parametrization.
  std::vector<Eigen::MatrixXcd> Gradient(const SeparatorState& s, const FilterEstimate& filters) const {
    auto g = GradientEstimates(s.estimates, filters);
    if (s.parametrization == Parametrization::kMask)
      for (int c = 0; c < in_.num_speakers; ++c) g[c] = in_.mixtures[c].conjugate().cwiseProduct(g[c]);
    return g;
  }

  // One backtracking step with fixed filters. Returns false when no step
  // length achieves sufficient decrease (the state is then unchanged).
  bool SourceStep(SeparatorState& s, const FilterEstimate& filters, double current_total) const {
    const auto grad = Gradient(s, filters);
    const auto& vars = s.parametrization == Parametrization::kMask ? s.masks : s.estimates;
    double g2 = 0.0, x2 = 0.0;
    for (int c = 0; c < in_.num_speakers; ++c) {
      g2 += grad[c].squaredNorm();
      x2 += vars[c].squaredNorm();
    }
    if (!std::isfinite(g2)) throw NumericalError("gradient is not finite");
    if (g2 == 0.0) return true;
    const double gnorm = std::sqrt(g2), xnorm = std::sqrt(std::max(x2, 1e-300));
    double eta = s.step_size > 0.0 ? s.step_size : cfg_.initial_step * xnorm / gnorm;
    while (true) {
      SeparatorState trial = s;
      auto& tv = trial.parametrization == Parametrization::kMask ? trial.masks : trial.estimates;
      for (int c = 0; c < in_.num_speakers; ++c) tv[c] -= eta * grad[c];
      if (trial.parametrization == Parametrization::kMask)
        for (int c = 0; c < in_.num_speakers; ++c) trial.estimates[c] = trial.masks[c].cwiseProduct(in_.mixtures[c]);
      const double total = Evaluate(trial.estimates, filters).total;
      if (!cfg_.backtracking || total <= current_total - cfg_.sufficient_decrease * eta * g2) {
        trial.step_size = cfg_.backtracking ? eta * cfg_.grow : eta;
        s = std::move(trial);
        return true;
      }
      eta *= cfg_.shrink;
      if (eta * gnorm < 1e-14 * xnorm) {
        s.step_size = eta;
        return false;
      }
    }
  }

  SolveResult Solve() const {
    SolveResult res;
    res.state = Init();
    SeparatorState& s = res.state;
    auto wrap = [&](auto&& fn) {
      try {
        return fn();
      } catch (const NumericalError& e) {
        throw NumericalError("iteration " + std::to_string(s.iteration) + ": " + e.what());
      }
    };
    res.filters = wrap([&] { return FilterStep(s); });
    LossBreakdown loss = wrap([&] { return Evaluate(s.estimates, res.filters); });
    s.loss_trace.push_back(loss);
    while (true) {
      if (loss.total <= cfg_.abs_tol) {
        s.status = SolveStatus::kConverged;
        break;
      }
      if (s.iteration >= cfg_.max_iters) {
        s.status = SolveStatus::kMaxIters;
        break;
      }
      ++s.iteration;
      bool moved = true;
      for (int k = 0; k < cfg_.inner_steps && moved; ++k) {
        moved = wrap([&] { return SourceStep(s, res.filters, loss.total); });
        if (moved) loss = wrap([&] { return Evaluate(s.estimates, res.filters); });
      }
      // FCP minimizes a weighted squared error, not this objective, so new
      // filters are only kept when they do not increase the loss.
      FilterEstimate candidate = wrap([&] { return FilterStep(s); });
      LossBreakdown with_candidate = wrap([&] { return Evaluate(s.estimates, candidate); });
      if (with_candidate.total <= loss.total) {
        res.filters = std::move(candidate);
        loss = with_candidate;
      }
      s.loss_trace.push_back(loss);
      if (!moved) {
        s.status = SolveStatus::kStepUnderflow;
        res.warning = "step size underflow at iteration " + std::to_string(s.iteration);
        break;
      }
      const auto n = s.loss_trace.size();
      if (n > static_cast<std::size_t>(cfg_.patience)) {
        const double prev = s.loss_trace[n - 1 - cfg_.patience].total;
        if (std::abs(prev - loss.total) <= cfg_.rel_tol * std::max(std::abs(prev), 1e-300)) {
          s.status = SolveStatus::kConverged;
          break;
        }
      }
    }
    for (const auto& z : s.estimates) {
      if (!z.allFinite()) throw NumericalError("non-finite source estimate after " + std::to_string(s.iteration) + " iterations");
      res.waveforms.push_back(stft_.InverseMatrix(z, in_.length));
    }
    return res;
  }

 private:
  // dD(Y, Y_hat)/dY_hat with the normalization `scale`.
  Eigen::MatrixXcd DistanceGradient(const Eigen::MatrixXcd& y, const Eigen::MatrixXcd& y_hat, double scale) const {
    if (cfg_.objective == Objective::kL2) return (y_hat - y) * (2.0 / scale);
    Eigen::MatrixXcd g(y.rows(), y.cols());
    const double eps2 = cfg_.epsilon_mag * cfg_.epsilon_mag;
    const auto sign = [](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); };
    for (Eigen::Index f = 0; f < y.cols(); ++f) {
      for (Eigen::Index t = 0; t < y.rows(); ++t) {
        const Complex a = y(t, f), b = y_hat(t, f);
        const double mag = Magnitude(b);
        const Complex unit = b / std::sqrt(mag * mag + eps2);
        g(t, f) = (Complex(sign(b.real() - a.real()), sign(b.imag() - a.imag())) + sign(mag - Magnitude(a)) * unit) /
                  scale;
      }
    }
    return g;
  }

  // beta * d SA_c / d Z_hat(c) through the inverse STFT.
  Eigen::MatrixXcd SaGradient(const Eigen::MatrixXcd& z_hat, int c) const {
    const auto& d = in_.activity[c];
    const std::vector<double> z = stft_.InverseMatrix(z_hat, in_.length);
    double den = 0.0;
    std::size_t silent = 0;
    for (std::size_t i = 0; i < in_.length; ++i) {
      if (d[i]) continue;
      ++silent;
      den += std::abs(in_.close_talk[c][i]);
    }
    std::vector<double> g(in_.length, 0.0);
    if (silent > 0 && den > 0.0 && cfg_.beta > 0.0) {
      const double k = cfg_.beta * static_cast<double>(silent) / (static_cast<double>(in_.length) * den);
      for (std::size_t i = 0; i < in_.length; ++i)
        if (!d[i]) g[i] = k * static_cast<double>((z[i] > 0.0) - (z[i] < 0.0));
    }
    return stft_.InverseAdjoint(g);
  }

  SolveInput in_;
  SolveConfig cfg_;
  Stft stft_;
  double alpha_ = 0.0;
  ActivityMask mask_;
  std::vector<double> scale_;
};

inline SeparatorState InitEstimates(const SolveInput& in, const SolveConfig& cfg) { return Separator(in, cfg).Init(); }

inline SolveResult Solve(const SolveInput& in, const SolveConfig& cfg) { return Separator(in, cfg).Solve(); }

}  // namespace ctr
