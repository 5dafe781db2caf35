// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// JSON session manifests, ground-truth sidecars and estimate listings.
// Relative paths inside a file resolve against that file's directory.
//
// manifest.json
//   { "sample_rate": 8000,
//     "close_talk": [{"speaker_id": "spk0", "wav_path": "close_0.wav"}, ...],
//     "far_field":  [{"mic_id": "far0", "wav_path": "far_0.wav"}, ...],
//     "activity":   {"spk0": [[on, off], ...], ...},            optional
//     "ground_truth": {"dry": [{"speaker_id", "wav_path"}, ...],
//                      "sidecar": "ground_truth.json"},          optional
//     "seed": 0, "parameters": {...} }                           optional

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctr/common/error.hpp"
#include "ctr/fcp/fcp.hpp"
#include "ctr/scene/activity.hpp"
#include "ctr/scene/scene.hpp"
#include "ctr/signal/wav_io.hpp"

namespace ctr {

using Json = nlohmann::json;

struct ChannelRef {
  std::string id;
  std::string wav_path;  // as written in the file
};

struct SessionManifest {
  int sample_rate = 0;
  std::vector<ChannelRef> close_talk;
  std::vector<ChannelRef> far_field;
  // Per close-talk speaker, in close_talk order.
  std::optional<std::vector<std::vector<Interval>>> activity;
  std::vector<ChannelRef> dry;  // ground-truth dry sources, may be empty
  std::string sidecar;          // ground-truth sidecar path, may be empty
  std::optional<std::uint64_t> seed;
  Json parameters = Json::object();
  std::filesystem::path base_dir;

  int num_speakers() const { return static_cast<int>(close_talk.size()); }
  int num_far_mics() const { return static_cast<int>(far_field.size()); }

  std::string Resolve(const std::string& path) const {
    const std::filesystem::path p(path);
    return p.is_absolute() ? p.string() : (base_dir / p).string();
  }
};

namespace detail {

inline Json ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError(path + " is not valid JSON");
  return j;
}

inline void WriteJsonFile(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << "\n";
}

template <typename T>
T Field(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw DataError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw DataError(where + ": field '" + key + "' has the wrong type");
  }
}

inline std::vector<ChannelRef> ReadChannels(const Json& j, const char* key, const char* id_key,
                                            const std::string& where) {
  std::vector<ChannelRef> out;
  if (!j.contains(key)) return out;
  if (!j[key].is_array()) throw DataError(where + ": '" + key + "' must be a list");
  for (const auto& e : j[key]) out.push_back({Field<std::string>(e, id_key, where), Field<std::string>(e, "wav_path", where)});
  return out;
}

inline Json IntervalsJson(const std::vector<Interval>& iv) {
  Json a = Json::array();
  for (const auto& [on, off] : iv) a.push_back({on, off});
  return a;
}

inline std::vector<Interval> ParseIntervals(const Json& j, const std::string& where) {
  if (!j.is_array()) throw DataError(where + ": activity must be a list of [on, off] pairs");
  std::vector<Interval> out;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_unsigned() || !p[1].is_number_unsigned())
      throw DataError(where + ": activity entries must be [on, off] sample pairs");
    out.emplace_back(p[0].get<std::size_t>(), p[1].get<std::size_t>());
  }
  return out;
}

inline Json NumberOrNull(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace detail

inline SessionManifest ParseManifest(const Json& j, const std::filesystem::path& base_dir,
                                     const std::string& where = "manifest") {
  if (!j.is_object()) throw DataError(where + ": expected a JSON object");
  SessionManifest m;
  m.base_dir = base_dir;
  m.sample_rate = detail::Field<int>(j, "sample_rate", where);
  if (m.sample_rate <= 0) throw DataError(where + ": sample_rate must be positive");
  m.close_talk = detail::ReadChannels(j, "close_talk", "speaker_id", where);
  m.far_field = detail::ReadChannels(j, "far_field", "mic_id", where);
  if (m.close_talk.empty()) throw DataError(where + ": at least one close-talk channel is required");
  if (j.contains("activity") && !j["activity"].is_null()) {
    const Json& a = j["activity"];
    if (!a.is_object()) throw DataError(where + ": activity must map speaker ids to interval lists");
    std::vector<std::vector<Interval>> act;
    for (const auto& ch : m.close_talk) {
      if (!a.contains(ch.id)) throw DataError(where + ": no activity for speaker '" + ch.id + "'");
      act.push_back(detail::ParseIntervals(a[ch.id], where));
    }
    for (const auto& [k, _] : a.items()) {
      bool known = false;
      for (const auto& ch : m.close_talk) known = known || ch.id == k;
      if (!known) throw DataError(where + ": activity for unknown speaker '" + k + "'");
    }
    m.activity = std::move(act);
  }
  if (j.contains("ground_truth") && !j["ground_truth"].is_null()) {
    const Json& g = j["ground_truth"];
    m.dry = detail::ReadChannels(g, "dry", "speaker_id", where);
    if (g.contains("sidecar")) m.sidecar = detail::Field<std::string>(g, "sidecar", where);
  }
  if (j.contains("seed") && !j["seed"].is_null()) m.seed = detail::Field<std::uint64_t>(j, "seed", where);
  if (j.contains("parameters")) m.parameters = j["parameters"];
  return m;
}

inline SessionManifest LoadManifest(const std::string& path) {
  return ParseManifest(detail::ReadJsonFile(path), std::filesystem::path(path).parent_path(), path);
}

inline Json ManifestJson(const SessionManifest& m) {
  Json j;
  j["sample_rate"] = m.sample_rate;
  j["close_talk"] = Json::array();
  for (const auto& c : m.close_talk) j["close_talk"].push_back({{"speaker_id", c.id}, {"wav_path", c.wav_path}});
  j["far_field"] = Json::array();
  for (const auto& c : m.far_field) j["far_field"].push_back({{"mic_id", c.id}, {"wav_path", c.wav_path}});
  if (m.activity) {
    Json a = Json::object();
    for (std::size_t c = 0; c < m.close_talk.size(); ++c) a[m.close_talk[c].id] = detail::IntervalsJson((*m.activity)[c]);
    j["activity"] = a;
  }
  if (!m.dry.empty() || !m.sidecar.empty()) {
    Json g;
    g["dry"] = Json::array();
    for (const auto& c : m.dry) g["dry"].push_back({{"speaker_id", c.id}, {"wav_path", c.wav_path}});
    if (!m.sidecar.empty()) g["sidecar"] = m.sidecar;
    j["ground_truth"] = g;
  }
  if (m.seed) j["seed"] = *m.seed;
  j["parameters"] = m.parameters;
  return j;
}

// Audio and activity of a manifest, validated for rate and length.
struct Session {
  int sample_rate = 0;
  std::size_t length = 0;
  std::vector<std::vector<double>> receivers;  // close-talk first
  std::vector<ActivityVector> activity;        // empty when the manifest has none
  std::vector<std::vector<double>> dry;        // empty without ground truth
  int num_speakers = 0;
};

inline Session LoadSession(const SessionManifest& m) {
  Session s;
  s.sample_rate = m.sample_rate;
  s.num_speakers = m.num_speakers();
  auto load = [&](const ChannelRef& ch) {
    const std::string path = m.Resolve(ch.wav_path);
    Waveform w = ReadWav(path);
    if (w.sample_rate != m.sample_rate)
      throw DataError(path + " is " + std::to_string(w.sample_rate) + " Hz, manifest says " +
                      std::to_string(m.sample_rate) + " Hz");
    w.Validate();
    if (s.length == 0) s.length = w.size();
    if (w.size() != s.length)
      throw DataError(path + " has " + std::to_string(w.size()) + " samples, expected " + std::to_string(s.length));
    return std::move(w.samples);
  };
  for (const auto& ch : m.close_talk) s.receivers.push_back(load(ch));
  for (const auto& ch : m.far_field) s.receivers.push_back(load(ch));
  for (const auto& ch : m.dry) s.dry.push_back(load(ch));
  if (m.activity) {
    for (const auto& iv : *m.activity) {
      try {
        s.activity.push_back(IntervalsToActivity(iv, s.length));
      } catch (const DataError& e) {
        throw DataError(std::string("manifest activity: ") + e.what());
      }
    }
  }
  return s;
}

inline Json SceneParametersJson(const SceneConfig& cfg) {
  auto range = [](const Range& r) { return Json::array({detail::NumberOrNull(r.lo), detail::NumberOrNull(r.hi)}); };
  Json p;
  p["mode"] = SceneModeName(cfg.mode);
  p["num_speakers"] = cfg.num_speakers;
  p["num_far_mics"] = cfg.num_far_mics;
  p["duration_s"] = cfg.duration_s;
  p["t60_range"] = range(cfg.t60_range);
  p["close_talk_dist_range"] = range(cfg.close_talk_dist_range);
  p["cross_dist_range"] = range(cfg.cross_dist_range);
  p["far_dist_range"] = range(cfg.far_dist_range);
  p["noise_snr_range"] = range(cfg.noise_snr_range);
  p["overlap_style"] = OverlapStyleName(cfg.overlap_style);
  p["overlap_ratio"] = cfg.activity.overlap_ratio;
  p["past_taps"] = cfg.past_taps;
  p["future_taps"] = cfg.future_taps;
  p["source"] = SourceKindName(cfg.source);
  p["stft"] = {{"win_ms", cfg.stft.win_ms}, {"hop_ms", cfg.stft.hop_ms}};
  p["target_input_sisdr_db"] = detail::NumberOrNull(cfg.target_input_sisdr_db);
  return p;
}

inline Json SidecarJson(const Scene& s) {
  Json j;
  j["mode"] = SceneModeName(s.mode);
  j["sample_rate"] = s.sample_rate;
  j["stft"] = {{"win_ms", s.stft.win_ms}, {"hop_ms", s.stft.hop_ms}};
  j["past_taps"] = s.past_taps;
  j["future_taps"] = s.future_taps;
  j["t60"] = s.t60;
  j["noise_snr_db"] = Json::array();
  for (double v : s.noise_snr_db) j["noise_snr_db"].push_back(detail::NumberOrNull(v));
  j["cross_talk_scale"] = s.cross_talk_scale;
  j["distances"] = s.dist;
  j["activity"] = Json::array();
  for (const auto& d : s.activity) j["activity"].push_back(detail::IntervalsJson(ActivityToIntervals(d)));
  j["filters"] = Json::array();
  for (int r = 0; r < s.num_receivers(); ++r) {
    for (int c = 0; c < s.num_speakers; ++c) {
      Json f = {{"receiver", r}, {"speaker", c}};
      if (s.mode == SceneMode::kSubbandExact) {
        const auto& taps = s.subband_filters[r][c];
        Json re = Json::array(), im = Json::array();
        for (Eigen::Index b = 0; b < taps.rows(); ++b) {
          Json rr = Json::array(), ii = Json::array();
          for (Eigen::Index k = 0; k < taps.cols(); ++k) {
            rr.push_back(taps(b, k).real());
            ii.push_back(taps(b, k).imag());
          }
          re.push_back(rr);
          im.push_back(ii);
        }
        f["re"] = re;
        f["im"] = im;
      } else {
        f["index"] = s.fir[r][c].index;
        f["value"] = s.fir[r][c].value;
      }
      j["filters"].push_back(f);
    }
  }
  return j;
}

struct GroundTruth {
  SceneMode mode = SceneMode::kSubbandExact;
  StftConfig stft;
  int past_taps = 1;
  int future_taps = 0;
  // Subband mode only, [r][c] as [bin, tap].
  std::vector<std::vector<Eigen::MatrixXcd>> filters;
};

inline GroundTruth LoadGroundTruth(const std::string& path, int num_speakers, int num_receivers) {
  const Json j = detail::ReadJsonFile(path);
  GroundTruth g;
  g.mode = ParseSceneMode(detail::Field<std::string>(j, "mode", path));
  g.stft.win_ms = detail::Field<double>(j.at("stft"), "win_ms", path);
  g.stft.hop_ms = detail::Field<double>(j.at("stft"), "hop_ms", path);
  g.past_taps = detail::Field<int>(j, "past_taps", path);
  g.future_taps = detail::Field<int>(j, "future_taps", path);
  if (g.mode != SceneMode::kSubbandExact) return g;
  g.filters.assign(num_receivers, std::vector<Eigen::MatrixXcd>(num_speakers));
  for (const auto& f : detail::Field<Json>(j, "filters", path)) {
    const int r = detail::Field<int>(f, "receiver", path), c = detail::Field<int>(f, "speaker", path);
    if (r < 0 || r >= num_receivers || c < 0 || c >= num_speakers)
      throw DataError(path + ": filter index out of range for this manifest");
    const auto re = detail::Field<std::vector<std::vector<double>>>(f, "re", path);
    const auto im = detail::Field<std::vector<std::vector<double>>>(f, "im", path);
    if (re.size() != im.size() || re.empty()) throw DataError(path + ": malformed filter taps");
    Eigen::MatrixXcd taps(static_cast<Eigen::Index>(re.size()), g.past_taps + g.future_taps);
    for (std::size_t b = 0; b < re.size(); ++b) {
      if (re[b].size() != static_cast<std::size_t>(taps.cols()) || im[b].size() != re[b].size())
        throw DataError(path + ": filter tap count does not match past_taps + future_taps");
      for (Eigen::Index k = 0; k < taps.cols(); ++k) taps(b, k) = Complex(re[b][k], im[b][k]);
    }
    g.filters[r][c] = std::move(taps);
  }
  return g;
}

// Writes every receiver, the dry sources, manifest.json and ground_truth.json
// into `dir`. Returns the manifest as written.
inline SessionManifest WriteScene(const Scene& s, const SceneConfig& cfg, const std::string& dir, WavFormat format) {
  std::filesystem::create_directories(dir);
  SessionManifest m;
  m.base_dir = dir;
  m.sample_rate = s.sample_rate;
  for (int c = 0; c < s.num_speakers; ++c) {
    const std::string id = "spk" + std::to_string(c);
    m.close_talk.push_back({id, "close_" + std::to_string(c) + ".wav"});
    m.dry.push_back({id, "dry_" + std::to_string(c) + ".wav"});
    WriteWav(m.Resolve(m.close_talk.back().wav_path), s.mixtures[c], format);
    WriteWav(m.Resolve(m.dry.back().wav_path), s.dry[c], format);
  }
  for (int p = 0; p < s.num_far_mics; ++p) {
    m.far_field.push_back({"far" + std::to_string(p), "far_" + std::to_string(p) + ".wav"});
    WriteWav(m.Resolve(m.far_field.back().wav_path), s.mixtures[s.num_speakers + p], format);
  }
  std::vector<std::vector<Interval>> act;
  for (const auto& d : s.activity) act.push_back(ActivityToIntervals(d));
  m.activity = std::move(act);
  m.sidecar = "ground_truth.json";
  m.seed = s.seed;
  m.parameters = SceneParametersJson(cfg);
  detail::WriteJsonFile(m.Resolve("manifest.json"), ManifestJson(m));
  detail::WriteJsonFile(m.Resolve(m.sidecar), SidecarJson(s));
  return m;
}

// estimates.json: {"sample_rate": .., "source_manifest": .., "estimates": [{"speaker_id", "wav_path"}]}
struct EstimateSet {
  int sample_rate = 0;
  std::string source_manifest;
  std::vector<ChannelRef> estimates;
  std::filesystem::path base_dir;

  std::string Resolve(const std::string& path) const {
    const std::filesystem::path p(path);
    return p.is_absolute() ? p.string() : (base_dir / p).string();
  }
};

inline EstimateSet LoadEstimateSet(const std::string& path) {
  const Json j = detail::ReadJsonFile(path);
  EstimateSet e;
  e.base_dir = std::filesystem::path(path).parent_path();
  e.sample_rate = detail::Field<int>(j, "sample_rate", path);
  if (j.contains("source_manifest")) e.source_manifest = detail::Field<std::string>(j, "source_manifest", path);
  e.estimates = detail::ReadChannels(j, "estimates", "speaker_id", path);
  if (e.estimates.empty()) throw DataError(path + ": no estimates listed");
  return e;
}

inline void WriteEstimateSet(const std::string& path, const EstimateSet& e) {
  Json j;
  j["sample_rate"] = e.sample_rate;
  j["source_manifest"] = e.source_manifest;
  j["estimates"] = Json::array();
  for (const auto& c : e.estimates) j["estimates"].push_back({{"speaker_id", c.id}, {"wav_path", c.wav_path}});
  detail::WriteJsonFile(path, j);
}

// Estimate waveforms ordered like the manifest's close-talk speakers.
inline std::vector<std::vector<double>> LoadEstimatesFor(const EstimateSet& e, const SessionManifest& m,
                                                         std::size_t length) {
  std::vector<std::vector<double>> out;
  for (const auto& ch : m.close_talk) {
    const ChannelRef* found = nullptr;
    for (const auto& est : e.estimates)
      if (est.id == ch.id) found = &est;
    if (!found) throw DataError("no estimate for speaker '" + ch.id + "'");
    Waveform w = ReadWav(e.Resolve(found->wav_path));
    if (w.sample_rate != m.sample_rate) throw DataError("estimate for '" + ch.id + "' has the wrong sample rate");
    if (w.size() != length)
      throw DataError("estimate for '" + ch.id + "' has " + std::to_string(w.size()) + " samples, expected " +
                      std::to_string(length));
    out.push_back(std::move(w.samples));
  }
  return out;
}

}  // namespace ctr
