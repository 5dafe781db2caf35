// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Run configuration: one struct for everything the CLI can set, loaded from
// a JSON file whose nested objects flatten to dotted keys ("fcp.xi").

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctr/common/error.hpp"
#include "ctr/pipeline/blockwise.hpp"
#include "ctr/scene/scene.hpp"
#include "ctr/solver/solver.hpp"

namespace ctr {

struct RunConfig {
  StftConfig stft;
  SceneConfig scene;
  SolveConfig solve;
  BlockPlan block;
  std::uint64_t seed = 0;
  int threads = 1;

  // Propagates shared settings (STFT, seed, threads) into the sub-configs.
  void Sync() {
    scene.stft = stft;
    scene.seed = seed;
    solve.num_threads = threads;
  }
};

namespace detail {

inline double JsonNumber(const nlohmann::json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw ConfigError("config key '" + key + "' expects a number");
}

inline int JsonInt(const nlohmann::json& v, const std::string& key) {
  const double d = JsonNumber(v, key);
  if (d != std::floor(d) || std::abs(d) > 1e9) throw ConfigError("config key '" + key + "' expects an integer");
  return static_cast<int>(d);
}

inline bool JsonBool(const nlohmann::json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config key '" + key + "' expects true or false");
  return v.get<bool>();
}

inline std::string JsonString(const nlohmann::json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "' expects a string");
  return v.get<std::string>();
}

inline Range JsonRange(const nlohmann::json& v, const std::string& key) {
  if (v.is_array() && v.size() == 2) return {JsonNumber(v[0], key), JsonNumber(v[1], key)};
  if (v.is_number() || v.is_string()) {
    const double x = JsonNumber(v, key);
    return {x, x};
  }
  throw ConfigError("config key '" + key + "' expects [lo, hi] or a single number");
}

using Setter = std::function<void(RunConfig&, const nlohmann::json&, const std::string&)>;

inline const std::map<std::string, Setter>& ConfigSetters() {
  static const std::map<std::string, Setter> setters = [] {
    std::map<std::string, Setter> m;
    auto num = [&](const char* key, auto field) {
      m[key] = [field](RunConfig& c, const nlohmann::json& v, const std::string& k) { field(c) = JsonNumber(v, k); };
    };
    auto integer = [&](const char* key, auto field) {
      m[key] = [field](RunConfig& c, const nlohmann::json& v, const std::string& k) { field(c) = JsonInt(v, k); };
    };
    auto range = [&](const char* key, auto field) {
      m[key] = [field](RunConfig& c, const nlohmann::json& v, const std::string& k) { field(c) = JsonRange(v, k); };
    };
    num("stft.win_ms", [](RunConfig& c) -> double& { return c.stft.win_ms; });
    num("stft.hop_ms", [](RunConfig& c) -> double& { return c.stft.hop_ms; });
    integer("fcp.past_taps", [](RunConfig& c) -> int& { return c.solve.fcp.past_taps; });
    integer("fcp.future_taps", [](RunConfig& c) -> int& { return c.solve.fcp.future_taps; });
    num("fcp.xi", [](RunConfig& c) -> double& { return c.solve.fcp.xi; });
    num("fcp.diag_load", [](RunConfig& c) -> double& { return c.solve.fcp.diag_load; });
    m["loss.alpha"] = [](RunConfig& c, const nlohmann::json& v, const std::string& k) {
      if (v.is_null()) {
        c.solve.alpha.reset();
      } else {
        c.solve.alpha = JsonNumber(v, k);
      }
    };
    num("loss.beta", [](RunConfig& c) -> double& { return c.solve.beta; });
    integer("solver.max_iters", [](RunConfig& c) -> int& { return c.solve.max_iters; });
    integer("solver.inner_steps", [](RunConfig& c) -> int& { return c.solve.inner_steps; });
    m["solver.mode"] = [](RunConfig& c, const nlohmann::json& v, const std::string& k) {
      c.solve.mode = ParseSolveMode(JsonString(v, k));
    };
    m["solver.objective"] = [](RunConfig& c, const nlohmann::json& v, const std::string& k) {
      c.solve.objective = ParseObjective(JsonString(v, k));
    };
    m["solver.parametrization"] = [](RunConfig& c, const nlohmann::json& v, const std::string& k) {
      c.solve.parametrization = ParseParametrization(JsonString(v, k));
    };
    m["solver.backtracking"] = [](RunConfig& c, const nlohmann::json& v, const std::string& k) {
      c.solve.backtracking = JsonBool(v, k);
    };
    num("solver.shrink", [](RunConfig& c) -> double& { return c.solve.shrink; });
    num("solver.grow", [](RunConfig& c) -> double& { return c.solve.grow; });
    num("solver.sufficient_decrease", [](RunConfig& c) -> double& { return c.solve.sufficient_decrease; });
    num("solver.initial_step", [](RunConfig& c) -> double& { return c.solve.initial_step; });
    num("solver.epsilon_mag", [](RunConfig& c) -> double& { return c.solve.epsilon_mag; });
    num("solver.rel_tol", [](RunConfig& c) -> double& { return c.solve.rel_tol; });
    integer("solver.patience", [](RunConfig& c) -> int& { return c.solve.patience; });
    num("solver.abs_tol", [](RunConfig& c) -> double& { return c.solve.abs_tol; });
    num("solver.min_active_s", [](RunConfig& c) -> double& { return c.solve.min_active_s; });
    num("block.len_s", [](RunConfig& c) -> double& { return c.block.block_len_s; });
    num("block.context_s", [](RunConfig& c) -> double& { return c.block.context_s; });
    m["scene.mode"] = [](RunConfig& c, const nlohmann::json& v, const std::string& k) {
      c.scene.mode = ParseSceneMode(JsonString(v, k));
    };
    integer("scene.num_speakers", [](RunConfig& c) -> int& { return c.scene.num_speakers; });
    integer("scene.num_far_mics", [](RunConfig& c) -> int& { return c.scene.num_far_mics; });
    integer("scene.sample_rate", [](RunConfig& c) -> int& { return c.scene.sample_rate; });
    num("scene.duration_s", [](RunConfig& c) -> double& { return c.scene.duration_s; });
    range("scene.t60_range", [](RunConfig& c) -> Range& { return c.scene.t60_range; });
    range("scene.close_talk_dist_range", [](RunConfig& c) -> Range& { return c.scene.close_talk_dist_range; });
    range("scene.cross_dist_range", [](RunConfig& c) -> Range& { return c.scene.cross_dist_range; });
    range("scene.far_dist_range", [](RunConfig& c) -> Range& { return c.scene.far_dist_range; });
    range("scene.noise_snr_range", [](RunConfig& c) -> Range& { return c.scene.noise_snr_range; });
    m["scene.overlap_style"] = [](RunConfig& c, const nlohmann::json& v, const std::string& k) {
      c.scene.overlap_style = ParseOverlapStyle(JsonString(v, k));
    };
    num("scene.overlap_ratio", [](RunConfig& c) -> double& { return c.scene.activity.overlap_ratio; });
    num("scene.min_turn_s", [](RunConfig& c) -> double& { return c.scene.activity.min_turn_s; });
    num("scene.max_turn_s", [](RunConfig& c) -> double& { return c.scene.activity.max_turn_s; });
    num("scene.gap_probability", [](RunConfig& c) -> double& { return c.scene.activity.gap_probability; });
    num("scene.max_gap_s", [](RunConfig& c) -> double& { return c.scene.activity.max_gap_s; });
    integer("scene.past_taps", [](RunConfig& c) -> int& { return c.scene.past_taps; });
    integer("scene.future_taps", [](RunConfig& c) -> int& { return c.scene.future_taps; });
    num("scene.tail_scale", [](RunConfig& c) -> double& { return c.scene.subband.tail_scale; });
    num("scene.fir_length_s", [](RunConfig& c) -> double& { return c.scene.room.max_length_s; });
    num("scene.reflections_per_s", [](RunConfig& c) -> double& { return c.scene.room.reflections_per_s; });
    num("scene.target_input_sisdr_db", [](RunConfig& c) -> double& { return c.scene.target_input_sisdr_db; });
    m["scene.source"] = [](RunConfig& c, const nlohmann::json& v, const std::string& k) {
      c.scene.source = ParseSourceKind(JsonString(v, k));
    };
    m["scene.source_paths"] = [](RunConfig& c, const nlohmann::json& v, const std::string& k) {
      if (!v.is_array()) throw ConfigError("config key '" + k + "' expects a list of paths");
      c.scene.source_paths.clear();
      for (const auto& p : v) c.scene.source_paths.push_back(JsonString(p, k));
    };
    m["seed"] = [](RunConfig& c, const nlohmann::json& v, const std::string& k) {
      const double d = JsonNumber(v, k);
      if (d < 0 || d != std::floor(d)) throw ConfigError("seed must be a non-negative integer");
      c.seed = static_cast<std::uint64_t>(d);
    };
    integer("threads", [](RunConfig& c) -> int& { return c.threads; });
    return m;
  }();
  return setters;
}

inline void Flatten(const nlohmann::json& node, const std::string& prefix, std::map<std::string, nlohmann::json>& out) {
  if (node.is_object()) {
    for (const auto& [k, v] : node.items()) Flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else {
    out[prefix] = node;
  }
}

}  // namespace detail

/// Nested JSON objects become dotted keys; arrays and scalars are leaves.
inline std::map<std::string, nlohmann::json> FlattenConfig(const nlohmann::json& root) {
  if (!root.is_object()) throw ConfigError("config file must hold a JSON object");
  std::map<std::string, nlohmann::json> out;
  detail::Flatten(root, "", out);
  return out;
}

inline std::vector<std::string> ConfigKeys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : detail::ConfigSetters()) keys.push_back(k);
  return keys;
}

inline void SetConfigValue(RunConfig& cfg, const std::string& key, const nlohmann::json& value) {
  const auto& setters = detail::ConfigSetters();
  const auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(cfg, value, key);
}

// `key=value` with value parsed as JSON, falling back to a plain string.
inline void SetConfigAssignment(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  SetConfigValue(cfg, key, value);
}

inline void ApplyConfigJson(RunConfig& cfg, const nlohmann::json& root) {
  for (const auto& [k, v] : FlattenConfig(root)) SetConfigValue(cfg, k, v);
}

inline void ApplyConfigFile(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json root = nlohmann::json::parse(in, nullptr, false);
  if (root.is_discarded()) throw ConfigError("config file " + path + " is not valid JSON");
  ApplyConfigJson(cfg, root);
}

}  // namespace ctr
