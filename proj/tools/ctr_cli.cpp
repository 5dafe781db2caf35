// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Command-line front end: simulate | separate | evaluate | loss | fcp-check.
// Exit codes: 0 success, 1 usage, 2 data, 3 numerical. Errors and warnings
// go to stderr as one JSON object per line; results go to stdout as JSON.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctr/ctr.hpp"

namespace {

using ctr::Json;

void Warn(const std::string& message) { std::cerr << Json{{"warning", message}}.dump() << std::endl; }

int Fail(ctr::ErrorKind kind, const std::string& message) {
  std::cerr << Json{{"error", ctr::ErrorKindName(kind)}, {"message", message}}.dump() << std::endl;
  return static_cast<int>(kind);
}

ctr::WavFormat ParseFormat(const std::string& s) {
  if (s == "pcm16") return ctr::WavFormat::kPcm16;
  if (s == "float32") return ctr::WavFormat::kFloat32;
  throw ctr::ConfigError("unknown wav format '" + s + "' (expected pcm16 or float32)");
}

Json BreakdownJson(const ctr::LossBreakdown& b) {
  return {{"mc_close", b.mc_close}, {"mc_far", b.mc_far}, {"sa", b.sa},
          {"alpha", b.alpha},       {"beta", b.beta},     {"total", b.total}};
}

struct Globals {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

ctr::RunConfig BuildConfig(const Globals& g) {
  ctr::RunConfig cfg;
  if (!g.config_path.empty()) ctr::ApplyConfigFile(cfg, g.config_path);
  for (const auto& s : g.sets) ctr::SetConfigAssignment(cfg, s);
  if (g.seed) cfg.seed = *g.seed;
  if (g.threads) cfg.threads = *g.threads;
  if (cfg.threads < 1) throw ctr::ConfigError("--threads must be >= 1");
  cfg.Sync();
  return cfg;
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string out_dir;
  std::string format = "float32";
  std::optional<std::string> mode, overlap;
  std::optional<int> speakers, far_mics, sample_rate;
  std::optional<double> duration, overlap_ratio;
};

int RunSimulate(const Globals& g, const SimulateArgs& a) {
  ctr::RunConfig cfg = BuildConfig(g);
  if (a.mode) cfg.scene.mode = ctr::ParseSceneMode(*a.mode);
  if (a.overlap) cfg.scene.overlap_style = ctr::ParseOverlapStyle(*a.overlap);
  if (a.speakers) cfg.scene.num_speakers = *a.speakers;
  if (a.far_mics) cfg.scene.num_far_mics = *a.far_mics;
  if (a.sample_rate) cfg.scene.sample_rate = *a.sample_rate;
  if (a.duration) cfg.scene.duration_s = *a.duration;
  if (a.overlap_ratio) cfg.scene.activity.overlap_ratio = *a.overlap_ratio;
  const ctr::Scene scene = ctr::SynthScene(cfg.scene);
  const ctr::SessionManifest m = ctr::WriteScene(scene, cfg.scene, a.out_dir, ParseFormat(a.format));
  std::cout << Json{{"manifest", m.Resolve("manifest.json")},
                    {"num_speakers", scene.num_speakers},
                    {"num_far_mics", scene.num_far_mics},
                    {"samples", scene.length},
                    {"seed", scene.seed}}
                   .dump()
            << std::endl;
  return 0;
}

// --- separate ---------------------------------------------------------------

struct SolverFlags {
  std::optional<std::string> mode;
  std::optional<int> iters, past_taps, future_taps;
  std::optional<double> alpha, beta, xi;

  void Apply(ctr::SolveConfig& s) const {
    if (mode) s.mode = ctr::ParseSolveMode(*mode);
    if (iters) s.max_iters = *iters;
    if (past_taps) s.fcp.past_taps = *past_taps;
    if (future_taps) s.fcp.future_taps = *future_taps;
    if (alpha) s.alpha = *alpha;
    if (beta) s.beta = *beta;
    if (xi) s.fcp.xi = *xi;
  }
};

struct SeparateArgs {
  std::string manifest, out_dir;
  std::string format = "float32";
  SolverFlags solver;
};

int RunSeparate(const Globals& g, const SeparateArgs& a) {
  ctr::RunConfig cfg = BuildConfig(g);
  a.solver.Apply(cfg.solve);
  cfg.solve.Validate();
  const ctr::SessionManifest m = ctr::LoadManifest(a.manifest);
  const ctr::Session s = ctr::LoadSession(m);
  if (cfg.solve.mode == ctr::SolveMode::kWeaklySupervised && s.activity.empty())
    throw ctr::ConfigError("weakly-supervised mode needs activity timestamps in the manifest");
  const std::vector<ctr::ActivityVector> activity =
      cfg.solve.mode == ctr::SolveMode::kWeaklySupervised ? s.activity : std::vector<ctr::ActivityVector>{};
  const ctr::BlockwiseResult res = ctr::BlockwiseSolve(s.receivers, activity, s.num_speakers, s.sample_rate, cfg.stft,
                                                       cfg.block, cfg.solve, cfg.threads);
  for (const auto& w : res.warnings) Warn(w);

  std::filesystem::create_directories(a.out_dir);
  const ctr::WavFormat format = ParseFormat(a.format);
  ctr::EstimateSet est;
  est.sample_rate = s.sample_rate;
  est.source_manifest = std::filesystem::absolute(a.manifest).lexically_normal().string();
  est.base_dir = a.out_dir;
  for (int c = 0; c < s.num_speakers; ++c) {
    est.estimates.push_back({m.close_talk[c].id, "est_" + std::to_string(c) + ".wav"});
    ctr::WriteWav(est.Resolve(est.estimates.back().wav_path), ctr::Waveform(res.outputs[c], s.sample_rate), format);
  }
  ctr::WriteEstimateSet(est.Resolve("estimates.json"), est);

  Json trace = Json::array();
  for (std::size_t b = 0; b < res.blocks.size(); ++b) {
    Json steps = Json::array();
    for (const auto& l : res.loss_traces[b]) steps.push_back(BreakdownJson(l));
    trace.push_back({{"block", b},
                     {"begin", res.blocks[b].begin},
                     {"end", res.blocks[b].end},
                     {"emit_begin", res.blocks[b].emit_begin},
                     {"emit_end", res.blocks[b].emit_end},
                     {"loss_trace", steps}});
  }
  Json report = {{"mode", ctr::SolveModeName(cfg.solve.mode)},
                 {"objective", ctr::ObjectiveName(cfg.solve.objective)},
                 {"blocks", trace}};
  std::ofstream(est.Resolve("loss_trace.json")) << report.dump(2) << "\n";

  Json summary = {{"estimates", est.Resolve("estimates.json")}, {"blocks", res.blocks.size()}};
  Json finals = Json::array();
  for (const auto& t : res.loss_traces) finals.push_back(t.empty() ? Json(nullptr) : Json(t.back().total));
  summary["final_loss"] = finals;
  std::cout << summary.dump() << std::endl;
  return 0;
}

// --- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::string reference, estimates, csv;
  bool permute = false;
  int proj_taps = 512;
};

int RunEvaluate(const Globals& g, const EvaluateArgs& a) {
  BuildConfig(g);
  const ctr::SessionManifest m = ctr::LoadManifest(a.reference);
  if (m.dry.empty()) throw ctr::DataError("reference manifest has no ground-truth dry sources");
  const ctr::Session s = ctr::LoadSession(m);
  const ctr::EstimateSet e = ctr::LoadEstimateSet(a.estimates);
  const auto est = ctr::LoadEstimatesFor(e, m, s.length);
  const std::vector<std::vector<double>> mixtures(s.receivers.begin(), s.receivers.begin() + s.num_speakers);
  const ctr::ScoreReport r = ctr::Evaluate(est, s.dry, &mixtures, a.permute, a.proj_taps);

  Json speakers = Json::array();
  for (int c = 0; c < s.num_speakers; ++c)
    speakers.push_back({{"speaker_id", m.close_talk[c].id},
                        {"estimate", m.close_talk[r.assignment[c]].id},
                        {"si_sdr", r.si_sdr[c]},
                        {"sdr", r.sdr[c]},
                        {"si_sdr_mixture", r.si_sdr_mixture[c]},
                        {"sdr_mixture", r.sdr_mixture[c]},
                        {"si_sdr_delta", r.si_sdr_delta[c]},
                        {"sdr_delta", r.sdr_delta[c]}});
  const Json report = {{"assignment", r.assignment},
                       {"speakers", speakers},
                       {"mean_si_sdr", r.mean_si_sdr()},
                       {"mean_sdr", r.mean_sdr()},
                       {"mean_si_sdr_delta", ctr::ScoreReport::Mean(r.si_sdr_delta)},
                       {"mean_sdr_delta", ctr::ScoreReport::Mean(r.sdr_delta)}};
  if (!a.csv.empty()) {
    std::ofstream csv(a.csv);
    if (!csv) throw ctr::DataError("cannot write " + a.csv);
    csv << "speaker_id,estimate,si_sdr,sdr,si_sdr_mixture,sdr_mixture,si_sdr_delta,sdr_delta\n";
    for (const auto& sp : speakers)
      csv << sp["speaker_id"].get<std::string>() << "," << sp["estimate"].get<std::string>() << "," << sp["si_sdr"]
          << "," << sp["sdr"] << "," << sp["si_sdr_mixture"] << "," << sp["sdr_mixture"] << "," << sp["si_sdr_delta"]
          << "," << sp["sdr_delta"] << "\n";
  }
  std::cout << report.dump() << std::endl;
  return 0;
}

// --- loss -------------------------------------------------------------------

struct LossArgs {
  std::string manifest, estimates;
  SolverFlags solver;
};

int RunLoss(const Globals& g, const LossArgs& a) {
  ctr::RunConfig cfg = BuildConfig(g);
  a.solver.Apply(cfg.solve);
  const ctr::SessionManifest m = ctr::LoadManifest(a.manifest);
  const ctr::Session s = ctr::LoadSession(m);
  const bool weak = cfg.solve.mode == ctr::SolveMode::kWeaklySupervised;
  if (weak && s.activity.empty())
    throw ctr::ConfigError("weakly-supervised loss needs activity timestamps in the manifest");
  const auto est = ctr::LoadEstimatesFor(ctr::LoadEstimateSet(a.estimates), m, s.length);
  const ctr::Separator sep(
      ctr::MakeSolveInput(s.receivers, s.num_speakers, s.sample_rate, cfg.stft, weak ? s.activity : std::vector<ctr::ActivityVector>{}),
      cfg.solve);
  ctr::SeparatorState state;
  for (const auto& x : est) state.estimates.push_back(sep.stft().ForwardMatrix(x));
  const ctr::FilterEstimate filters = sep.FilterStep(state);
  Json out = BreakdownJson(sep.Evaluate(state.estimates, filters));
  out["mode"] = ctr::SolveModeName(cfg.solve.mode);
  out["objective"] = ctr::ObjectiveName(cfg.solve.objective);
  std::cout << out.dump() << std::endl;
  return 0;
}

// --- fcp-check --------------------------------------------------------------

struct FcpCheckArgs {
  std::string manifest;
  std::optional<int> past_taps, future_taps;
};

int RunFcpCheck(const Globals& g, const FcpCheckArgs& a) {
  ctr::RunConfig cfg = BuildConfig(g);
  const ctr::SessionManifest m = ctr::LoadManifest(a.manifest);
  if (m.sidecar.empty() || m.dry.empty()) throw ctr::DataError("fcp-check needs a manifest with ground truth");
  const ctr::Session s = ctr::LoadSession(m);
  const int C = s.num_speakers, R = static_cast<int>(s.receivers.size());
  const ctr::GroundTruth gt = ctr::LoadGroundTruth(m.Resolve(m.sidecar), C, R);
  if (gt.mode != ctr::SceneMode::kSubbandExact)
    throw ctr::DataError("fcp-check needs subband ground-truth filters (time-domain scenes have none)");
  ctr::FcpConfig fcp = cfg.solve.fcp;
  fcp.past_taps = a.past_taps.value_or(gt.past_taps);
  fcp.future_taps = a.future_taps.value_or(gt.future_taps);
  if (fcp.past_taps < gt.past_taps || fcp.future_taps < gt.future_taps)
    throw ctr::ConfigError("fcp-check needs at least as many past and future taps as the true filters");

  const ctr::Stft stft(gt.stft, s.sample_rate);
  std::vector<Eigen::MatrixXcd> dry, mix;
  for (const auto& x : s.dry) dry.push_back(stft.ForwardMatrix(x));
  for (const auto& x : s.receivers) mix.push_back(stft.ForwardMatrix(x));

  Json pairs = Json::array();
  std::vector<double> all;
  for (int r = 0; r < R; ++r) {
    const Eigen::MatrixXd w = ctr::FcpWeights(mix[r], fcp.xi);
    for (int c = 0; c < C; ++c) {
      if (r == c) continue;
      const Eigen::MatrixXcd est = ctr::EstimateFilter(dry[c], mix[r], w, fcp);
      const Eigen::MatrixXcd& truth = gt.filters[r][c];
      Eigen::MatrixXcd embedded = Eigen::MatrixXcd::Zero(est.rows(), est.cols());
      embedded.middleCols(fcp.past_taps - gt.past_taps, truth.cols()) = truth;
      std::vector<double> per_bin;
      for (Eigen::Index f = 0; f < est.rows(); ++f) {
        const double den = embedded.row(f).norm();
        per_bin.push_back(den > 0.0 ? (est.row(f) - embedded.row(f)).norm() / den : est.row(f).norm());
      }
      std::vector<double> sorted = per_bin;
      std::sort(sorted.begin(), sorted.end());
      double mean = 0.0;
      for (double v : per_bin) mean += v / static_cast<double>(per_bin.size());
      all.insert(all.end(), per_bin.begin(), per_bin.end());
      pairs.push_back({{"receiver", r},
                       {"speaker", c},
                       {"mean_rel_error", mean},
                       {"median_rel_error", sorted[sorted.size() / 2]},
                       {"max_rel_error", sorted.back()},
                       {"per_bin_rel_error", per_bin}});
    }
  }
  std::sort(all.begin(), all.end());
  Json out = {{"past_taps", fcp.past_taps}, {"future_taps", fcp.future_taps}, {"pairs", pairs}};
  if (!all.empty()) out["overall"] = {{"median_rel_error", all[all.size() / 2]}, {"max_rel_error", all.back()}};
  std::cout << out.dump() << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-talk reduction toolkit: scene simulation, separation and scoring"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config_path, "JSON config file (nested keys flatten to dotted names)")
      ->check(CLI::ExistingFile);
  app.add_option("--set", g.sets, "Override one config key, e.g. --set fcp.xi=0.001");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--threads", g.threads, "Worker threads");

  auto add_solver_flags = [](CLI::App* sub, SolverFlags& f) {
    sub->add_option("--mode", f.mode, "unsupervised | weakly-supervised");
    sub->add_option("--iters", f.iters, "Maximum outer iterations");
    sub->add_option("--alpha", f.alpha, "Far-field loss weight (default 1/P)");
    sub->add_option("--beta", f.beta, "Speaker-activity loss weight");
    sub->add_option("--past-taps,-I", f.past_taps, "FCP past taps I (includes the current frame)");
    sub->add_option("--future-taps,-J", f.future_taps, "FCP future taps J");
    sub->add_option("--xi", f.xi, "FCP weighting floor");
  };

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Render a synthetic scene to WAV files and JSON manifests");
  simulate->add_option("--out,-o", sim.out_dir, "Output directory")->required();
  simulate->add_option("--format", sim.format, "pcm16 | float32");
  simulate->add_option("--scene-mode", sim.mode, "subband-exact | time-domain");
  simulate->add_option("--speakers,-C", sim.speakers, "Number of speakers");
  simulate->add_option("--far-mics,-P", sim.far_mics, "Number of far-field microphones");
  simulate->add_option("--sample-rate", sim.sample_rate, "8000 or 16000");
  simulate->add_option("--duration", sim.duration, "Duration in seconds");
  simulate->add_option("--overlap", sim.overlap, "full | sparse");
  simulate->add_option("--overlap-ratio", sim.overlap_ratio, "Target overlap ratio for sparse scenes");

  SeparateArgs sep;
  auto* separate = app.add_subcommand("separate", "Separate a session block by block");
  separate->add_option("--manifest,-m", sep.manifest, "Session manifest")->required()->check(CLI::ExistingFile);
  separate->add_option("--out,-o", sep.out_dir, "Output directory")->required();
  separate->add_option("--format", sep.format, "pcm16 | float32");
  add_solver_flags(separate, sep.solver);

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score estimates against ground-truth dry sources");
  evaluate->add_option("--reference,-r", ev.reference, "Manifest with ground truth")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--estimates,-e", ev.estimates, "estimates.json")->required()->check(CLI::ExistingFile);
  evaluate->add_flag("--permute", ev.permute, "Resolve the output permutation before scoring");
  evaluate->add_option("--csv", ev.csv, "Also write a CSV table");
  evaluate->add_option("--proj-taps", ev.proj_taps, "FIR length of the SDR projection");

  LossArgs lo;
  auto* loss = app.add_subcommand("loss", "Print the loss breakdown of a set of estimates");
  loss->add_option("--manifest,-m", lo.manifest, "Session manifest")->required()->check(CLI::ExistingFile);
  loss->add_option("--estimates,-e", lo.estimates, "estimates.json")->required()->check(CLI::ExistingFile);
  add_solver_flags(loss, lo.solver);

  FcpCheckArgs fc;
  auto* fcp_check = app.add_subcommand("fcp-check", "Compare FCP filters from the dry sources with the true filters");
  fcp_check->add_option("--manifest,-m", fc.manifest, "Manifest with subband ground truth")->required()->check(CLI::ExistingFile);
  fcp_check->add_option("--past-taps,-I", fc.past_taps, "FCP past taps (default: as simulated)");
  fcp_check->add_option("--future-taps,-J", fc.future_taps, "FCP future taps (default: as simulated)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return Fail(ctr::ErrorKind::kUsage, e.what());
  }

  try {
    if (*simulate) return RunSimulate(g, sim);
    if (*separate) return RunSeparate(g, sep);
    if (*evaluate) return RunEvaluate(g, ev);
    if (*loss) return RunLoss(g, lo);
    if (*fcp_check) return RunFcpCheck(g, fc);
  } catch (const ctr::Error& e) {
    return Fail(e.kind(), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return Fail(ctr::ErrorKind::kData, e.what());
  } catch (const nlohmann::json::exception& e) {
    return Fail(ctr::ErrorKind::kData, e.what());
  } catch (const std::bad_alloc&) {
    return Fail(ctr::ErrorKind::kNumerical, "out of memory");
  }
  return Fail(ctr::ErrorKind::kUsage, "no subcommand given");
}
