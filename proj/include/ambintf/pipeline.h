/*
Copyright 2026 The ambintf Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#ifndef AMBINTF_PIPELINE_H_
#define AMBINTF_PIPELINE_H_

// Configuration, fixture generation, separation, evaluation and experiment
// sweeps built on the core library. Configuration is JSON.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ambintf/bsseval.h"
#include "ambintf/common.h"
#include "ambintf/model.h"
#include "ambintf/priors.h"
#include "ambintf/reconstruct.h"
#include "ambintf/roomsim.h"
#include "ambintf/signal.h"
#include "ambintf/solver.h"
#include "ambintf/sph.h"
#include "ambintf/synth.h"

namespace ambintf {

using Json = nlohmann::json;

// --- Algorithms ----------------------------------------------------------

enum class Algorithm { kEuMl, kEuWlp, kEuIwlp, kIsMl, kIsWlp, kIsIwlp, kMapMl, kPwd, kPwdMwf };

inline const std::vector<std::pair<Algorithm, std::string>>& algorithm_names() {
  static const std::vector<std::pair<Algorithm, std::string>> kNames = {
      {Algorithm::kEuMl, "eu_ml"},   {Algorithm::kEuWlp, "eu_wlp"}, {Algorithm::kEuIwlp, "eu_iwlp"},
      {Algorithm::kIsMl, "is_ml"},   {Algorithm::kIsWlp, "is_wlp"}, {Algorithm::kIsIwlp, "is_iwlp"},
      {Algorithm::kMapMl, "map_ml"}, {Algorithm::kPwd, "pwd"},      {Algorithm::kPwdMwf, "pwd_mwf"}};
  return kNames;
}

inline std::string to_string(Algorithm a) {
  for (const auto& [alg, name] : algorithm_names()) {
    if (alg == a) return name;
  }
  return "unknown";
}

inline Algorithm parse_algorithm(const std::string& s, const std::string& path = "algorithm") {
  for (const auto& [alg, name] : algorithm_names()) {
    if (name == s) return alg;
  }
  throw ConfigError(path + ": unknown algorithm '" + s + "'");
}

inline bool is_beamformer(Algorithm a) { return a == Algorithm::kPwd || a == Algorithm::kPwdMwf; }

inline Cost algorithm_cost(Algorithm a) {
  return (a == Algorithm::kIsMl || a == Algorithm::kIsWlp || a == Algorithm::kIsIwlp)
             ? Cost::kIs
             : Cost::kEu;
}

inline PriorKind algorithm_prior(Algorithm a) {
  switch (a) {
    case Algorithm::kEuWlp:
    case Algorithm::kIsWlp:
    case Algorithm::kMapMl: return PriorKind::kWishart;
    case Algorithm::kEuIwlp:
    case Algorithm::kIsIwlp: return PriorKind::kInvWishart;
    default: return PriorKind::kNone;
  }
}

// --- Seeds ---------------------------------------------------------------

// splitmix64 finalizer over a running state.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// --- Configuration -------------------------------------------------------

struct FixtureConfig {
  int sources = 4;
  int sh_order = 1;
  double rt60 = 0.25;
  Eigen::Vector3d room{10.0, 8.0, 4.0};
  double rate = 44100.0;
  double duration = 5.0;
  int max_reflection_order = -1;  // < 0: chosen from rt60
  double min_sep_deg = 45.0;
  double dist_lo = 1.5;
  double dist_hi = 2.0;
  std::uint64_t seed = 1;
};

enum class EpsilonMode { kValue, kEstimatePwd, kOracleRoom };

struct SeparationConfig {
  Algorithm algorithm = Algorithm::kEuWlp;
  int fft_size = 2048;
  int hop = 1024;
  int iterations = 500;
  int grid_size = 162;
  int components_per_source = 25;
  double sigma_eu = 1.0 / std::sqrt(kPi);
  std::string init = "random";
  double binary_threshold_deg = 22.5;
  std::pair<int, int> map_ml_split{450, 50};
  std::uint64_t seed = 0;
  std::optional<double> nu;
  EpsilonMode epsilon_mode = EpsilonMode::kOracleRoom;
  double epsilon = 0.0;
  double xi_deg = 0.0;
  double corruption_min_sep_deg = 45.0;
  int corruption_attempts = 10000;
  bool normalize_input = false;
  bool compensate_rescale = true;
  std::optional<ShNormalization> normalization;  // overrides the fixture's declaration
};

struct EvalConfig {
  int filter_len = 512;
};

struct SweepConfig {
  std::vector<Algorithm> algorithms;
  std::vector<int> sources;
  std::vector<int> sh_orders;
  std::vector<double> rt60s;
  std::vector<double> xi_degs;
  std::vector<std::uint64_t> seeds;
};

struct ExperimentConfig {
  FixtureConfig fixture;
  SeparationConfig separation;
  EvalConfig evaluation;
  SweepConfig sweep;
};

// Reduced scale that keeps full sweeps within minutes on a desktop.
inline void apply_desk_preset(FixtureConfig& f, SeparationConfig& s, EvalConfig& e) {
  f.rate = 16000.0;
  f.duration = 2.0;
  s.fft_size = 512;
  s.hop = 256;
  s.grid_size = 42;
  s.iterations = 100;
  s.map_ml_split = {90, 10};
  e.filter_len = 32;
}

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

template <typename T>
T read_field(const Json& obj, const std::string& key, const std::string& path, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  const Json& v = obj.at(key);
  const std::string p = join_path(path, key);
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(p + ": expected boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(p + ": expected integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(p + ": expected number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(p + ": expected string");
    }
    return v.get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(p + ": " + e.what());
  }
}

template <typename T>
std::vector<T> read_list(const Json& obj, const std::string& key, const std::string& path) {
  const std::string p = join_path(path, key);
  if (!obj.contains(key)) throw ConfigError(p + ": missing");
  const Json& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(p + ": expected array");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string ip = p + "[" + std::to_string(i) + "]";
    if constexpr (std::is_integral_v<T>) {
      if (!v[i].is_number_integer()) throw ConfigError(ip + ": expected integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v[i].is_number()) throw ConfigError(ip + ": expected number");
    } else {
      if (!v[i].is_string()) throw ConfigError(ip + ": expected string");
    }
    out.push_back(v[i].get<T>());
  }
  if (out.empty()) throw ConfigError(p + ": must not be empty");
  return out;
}

inline void require_object(const Json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError((path.empty() ? "config" : path) + ": expected object");
}

inline void reject_unknown(const Json& j, const std::string& path,
                           std::initializer_list<const char*> known) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(join_path(path, key) + ": unknown field");
  }
}

}  // namespace detail

inline void apply_preset(const std::string& name, FixtureConfig& f, SeparationConfig& s,
                         EvalConfig& e) {
  if (name == "desk") {
    apply_desk_preset(f, s, e);
  } else if (name != "full") {
    throw ConfigError("preset: expected \"full\" or \"desk\"");
  }
}

inline FixtureConfig parse_fixture_config(const Json& j, const std::string& path = "fixture",
                                          FixtureConfig c = {}) {
  detail::require_object(j, path);
  detail::reject_unknown(j, path,
                         {"sources", "sh_order", "rt60", "room", "rate", "duration",
                          "max_reflection_order", "min_sep_deg", "distance", "seed"});
  c.sources = detail::read_field(j, "sources", path, c.sources);
  c.sh_order = detail::read_field(j, "sh_order", path, c.sh_order);
  c.rt60 = detail::read_field(j, "rt60", path, c.rt60);
  c.rate = detail::read_field(j, "rate", path, c.rate);
  c.duration = detail::read_field(j, "duration", path, c.duration);
  c.max_reflection_order =
      detail::read_field(j, "max_reflection_order", path, c.max_reflection_order);
  c.min_sep_deg = detail::read_field(j, "min_sep_deg", path, c.min_sep_deg);
  c.seed = detail::read_field<std::uint64_t>(j, "seed", path, c.seed);
  if (j.contains("room")) {
    const auto dims = detail::read_list<double>(j, "room", path);
    if (dims.size() != 3) throw ConfigError(path + ".room: expected 3 dimensions");
    c.room = Eigen::Vector3d(dims[0], dims[1], dims[2]);
  }
  if (j.contains("distance")) {
    const auto d = detail::read_list<double>(j, "distance", path);
    if (d.size() != 2) throw ConfigError(path + ".distance: expected [min, max]");
    c.dist_lo = d[0];
    c.dist_hi = d[1];
  }
  if (c.sources < 1) throw ConfigError(path + ".sources: must be >= 1");
  if (c.sh_order < 0 || c.sh_order > 6) throw ConfigError(path + ".sh_order: must be in [0, 6]");
  if (!(c.rt60 > 0.0)) throw ConfigError(path + ".rt60: must be positive");
  if (!(c.rate > 0.0)) throw ConfigError(path + ".rate: must be positive");
  if (!(c.duration > 0.0)) throw ConfigError(path + ".duration: must be positive");
  if ((c.room.array() <= 2.0).any()) throw ConfigError(path + ".room: each side must exceed 2 m");
  if (!(c.dist_lo > 0.0) || c.dist_hi < c.dist_lo) {
    throw ConfigError(path + ".distance: need 0 < min <= max");
  }
  return c;
}

inline SeparationConfig parse_separation_config(const Json& j,
                                                const std::string& path = "separation",
                                                SeparationConfig c = {}) {
  detail::require_object(j, path);
  detail::reject_unknown(
      j, path,
      {"algorithm", "fft_size", "hop", "iterations", "grid_size", "components_per_source",
       "sigma_eu", "init", "binary_threshold_deg", "map_ml_split", "seed", "nu", "epsilon",
       "xi_deg", "corruption_min_sep_deg", "corruption_attempts", "normalize_input",
       "compensate_rescale", "normalization"});
  if (j.contains("algorithm")) {
    c.algorithm = parse_algorithm(detail::read_field<std::string>(j, "algorithm", path, ""),
                                  path + ".algorithm");
  }
  c.fft_size = detail::read_field(j, "fft_size", path, c.fft_size);
  c.hop = detail::read_field(j, "hop", path, c.hop);
  c.iterations = detail::read_field(j, "iterations", path, c.iterations);
  c.grid_size = detail::read_field(j, "grid_size", path, c.grid_size);
  c.components_per_source =
      detail::read_field(j, "components_per_source", path, c.components_per_source);
  c.sigma_eu = detail::read_field(j, "sigma_eu", path, c.sigma_eu);
  c.init = detail::read_field(j, "init", path, c.init);
  c.binary_threshold_deg =
      detail::read_field(j, "binary_threshold_deg", path, c.binary_threshold_deg);
  c.seed = detail::read_field<std::uint64_t>(j, "seed", path, c.seed);
  c.xi_deg = detail::read_field(j, "xi_deg", path, c.xi_deg);
  c.corruption_min_sep_deg =
      detail::read_field(j, "corruption_min_sep_deg", path, c.corruption_min_sep_deg);
  c.corruption_attempts = detail::read_field(j, "corruption_attempts", path, c.corruption_attempts);
  c.normalize_input = detail::read_field(j, "normalize_input", path, c.normalize_input);
  c.compensate_rescale = detail::read_field(j, "compensate_rescale", path, c.compensate_rescale);
  if (j.contains("normalization")) {
    c.normalization =
        parse_normalization(detail::read_field<std::string>(j, "normalization", path, ""));
  }
  if (j.contains("nu") && !j.at("nu").is_null()) {
    c.nu = detail::read_field<double>(j, "nu", path, 0.0);
  }
  if (j.contains("map_ml_split")) {
    const auto s = detail::read_list<int>(j, "map_ml_split", path);
    if (s.size() != 2 || s[0] < 0 || s[1] < 0) {
      throw ConfigError(path + ".map_ml_split: expected [map_iterations, ml_iterations] >= 0");
    }
    c.map_ml_split = {s[0], s[1]};
  }
  if (j.contains("epsilon")) {
    const Json& e = j.at("epsilon");
    if (e.is_number()) {
      c.epsilon_mode = EpsilonMode::kValue;
      c.epsilon = e.get<double>();
      if (c.epsilon < 0.0) throw ConfigError(path + ".epsilon: must be non-negative");
    } else if (e.is_string() && e.get<std::string>() == "estimate_pwd") {
      c.epsilon_mode = EpsilonMode::kEstimatePwd;
    } else if (e.is_string() && e.get<std::string>() == "oracle_room") {
      c.epsilon_mode = EpsilonMode::kOracleRoom;
    } else {
      throw ConfigError(path + ".epsilon: expected a number, \"estimate_pwd\" or \"oracle_room\"");
    }
  }
  if (c.fft_size < 2 || (c.fft_size & (c.fft_size - 1)) != 0) {
    throw ConfigError(path + ".fft_size: must be a power of two");
  }
  if (c.hop < 1 || c.hop > c.fft_size) throw ConfigError(path + ".hop: must be in [1, fft_size]");
  if (c.iterations < 0) throw ConfigError(path + ".iterations: must be >= 0");
  if (c.grid_size != 12 && c.grid_size != 42 && c.grid_size != 162 && c.grid_size != 642) {
    throw ConfigError(path + ".grid_size: must be 12, 42, 162 or 642");
  }
  if (c.components_per_source < 1) throw ConfigError(path + ".components_per_source: must be >= 1");
  if (!(c.sigma_eu > 0.0)) throw ConfigError(path + ".sigma_eu: must be positive");
  if (c.init != "random" && c.init != "binary") {
    throw ConfigError(path + ".init: expected \"random\" or \"binary\"");
  }
  if (c.xi_deg < 0.0 || c.xi_deg >= 90.0) throw ConfigError(path + ".xi_deg: must be in [0, 90)");
  if (c.corruption_attempts < 1) throw ConfigError(path + ".corruption_attempts: must be >= 1");
  return c;
}

inline EvalConfig parse_eval_config(const Json& j, const std::string& path = "evaluation",
                                    EvalConfig c = {}) {
  detail::require_object(j, path);
  detail::reject_unknown(j, path, {"filter_len"});
  c.filter_len = detail::read_field(j, "filter_len", path, c.filter_len);
  if (c.filter_len < 1) throw ConfigError(path + ".filter_len: must be >= 1");
  return c;
}

// Parses a whole configuration file. The sweep section is only required for
// experiments.
inline ExperimentConfig parse_experiment_config(const Json& j, bool require_sweep = true) {
  detail::require_object(j, "");
  detail::reject_unknown(j, "", {"preset", "fixture", "separation", "evaluation", "sweep"});
  ExperimentConfig c;
  apply_preset(detail::read_field<std::string>(j, "preset", "", "full"), c.fixture, c.separation,
               c.evaluation);
  if (j.contains("fixture")) c.fixture = parse_fixture_config(j.at("fixture"), "fixture", c.fixture);
  if (j.contains("separation")) {
    c.separation = parse_separation_config(j.at("separation"), "separation", c.separation);
  }
  if (j.contains("evaluation")) {
    c.evaluation = parse_eval_config(j.at("evaluation"), "evaluation", c.evaluation);
  }
  if (!j.contains("sweep")) {
    if (require_sweep) throw ConfigError("sweep: missing");
    return c;
  }
  const Json& s = j.at("sweep");
  detail::require_object(s, "sweep");
  detail::reject_unknown(s, "sweep",
                         {"algorithms", "sources", "sh_orders", "rt60s", "xi_degs", "seeds"});
  for (const auto& name : detail::read_list<std::string>(s, "algorithms", "sweep")) {
    c.sweep.algorithms.push_back(parse_algorithm(name, "sweep.algorithms"));
  }
  auto list_or = [&](const char* key, auto fallback) {
    using T = typename decltype(fallback)::value_type;
    return s.contains(key) ? detail::read_list<T>(s, key, "sweep") : fallback;
  };
  c.sweep.sources = list_or("sources", std::vector<int>{c.fixture.sources});
  c.sweep.sh_orders = list_or("sh_orders", std::vector<int>{c.fixture.sh_order});
  c.sweep.rt60s = list_or("rt60s", std::vector<double>{c.fixture.rt60});
  c.sweep.xi_degs = list_or("xi_degs", std::vector<double>{c.separation.xi_deg});
  c.sweep.seeds = list_or("seeds", std::vector<std::uint64_t>{c.fixture.seed});
  for (int v : c.sweep.sources) {
    if (v < 1) throw ConfigError("sweep.sources: entries must be >= 1");
  }
  for (int v : c.sweep.sh_orders) {
    if (v < 0 || v > 6) throw ConfigError("sweep.sh_orders: entries must be in [0, 6]");
  }
  for (double v : c.sweep.rt60s) {
    if (!(v > 0.0)) throw ConfigError("sweep.rt60s: entries must be positive");
  }
  for (double v : c.sweep.xi_degs) {
    if (v < 0.0 || v >= 90.0) throw ConfigError("sweep.xi_degs: entries must be in [0, 90)");
  }
  return c;
}

inline Json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// --- Fixtures ------------------------------------------------------------

struct Fixture {
  FixtureConfig config;
  Scene scene;
  std::vector<Direction> doas;
  MultichannelAudio mixture;
  std::vector<MultichannelAudio> images;
  std::vector<MultichannelAudio> early;
};

// Geometry depends only on (seed, sources) and dry signals only on
// (seed, source index), so fixtures differing in order or RT60 are matched.
inline Fixture simulate_fixture(const FixtureConfig& cfg) {
  RoomSpec room;
  room.dims = cfg.room;
  room.rt60 = cfg.rt60;
  Fixture fx;
  fx.config = cfg;
  fx.scene = place_sources_random(room, cfg.sources, cfg.min_sep_deg, cfg.dist_lo, cfg.dist_hi,
                                  derive_seed(cfg.seed, 1000 + cfg.sources));
  fx.doas = fx.scene.doas();
  const int max_order = cfg.max_reflection_order >= 0 ? cfg.max_reflection_order
                                                      : default_reflection_order(cfg.rt60);
  const auto rirs = image_source_rir(room, fx.scene, cfg.sh_order, max_order, cfg.rate);
  SynthOptions opt;
  opt.rate = cfg.rate;
  opt.duration = cfg.duration;
  std::vector<Eigen::VectorXd> dry;
  for (int j = 0; j < cfg.sources; ++j) dry.push_back(synth_source(derive_seed(cfg.seed, j), opt));
  RenderedMixture r = render_mixture(rirs, dry);
  fx.mixture = std::move(r.mixture);
  fx.images = std::move(r.images);
  fx.early = std::move(r.early_images);
  return fx;
}

inline Json direction_json(const Direction& d) {
  return {{"colatitude", d.colatitude()}, {"azimuth", d.azimuth()}};
}

inline Direction direction_from_json(const Json& j) {
  return Direction(j.at("colatitude").get<double>(), j.at("azimuth").get<double>());
}

inline void write_fixture(const std::filesystem::path& dir, const Fixture& fx) {
  std::filesystem::create_directories(dir);
  save_audio((dir / "mixture.wav").string(), fx.mixture);
  for (std::size_t j = 0; j < fx.images.size(); ++j) {
    save_audio((dir / ("image" + std::to_string(j) + ".wav")).string(), fx.images[j]);
    save_audio((dir / ("early" + std::to_string(j) + ".wav")).string(), fx.early[j]);
  }
  Json scene;
  scene["seed"] = fx.config.seed;
  scene["rate"] = fx.config.rate;
  scene["sh_order"] = fx.config.sh_order;
  scene["normalization"] = "N3D";
  scene["room"] = {{"dims", {fx.config.room.x(), fx.config.room.y(), fx.config.room.z()}},
                   {"rt60", fx.config.rt60}};
  scene["receiver"] = {fx.scene.receiver.x(), fx.scene.receiver.y(), fx.scene.receiver.z()};
  scene["sources"] = Json::array();
  for (std::size_t j = 0; j < fx.scene.sources.size(); ++j) {
    const auto& s = fx.scene.sources[j];
    scene["sources"].push_back({{"position", {s.x(), s.y(), s.z()}},
                                {"doa", direction_json(fx.doas[j])}});
  }
  std::ofstream out(dir / "scene.json");
  if (!out) throw IoError("cannot write " + (dir / "scene.json").string());
  out << std::setw(2) << scene << '\n';
}

// Loads scene.json, the mixture and whichever reference images exist.
inline Fixture load_fixture(const std::filesystem::path& dir) {
  const auto scene_path = dir / "scene.json";
  if (!std::filesystem::exists(scene_path)) throw IoError("missing " + scene_path.string());
  const Json scene = load_json_file(scene_path);
  Fixture fx;
  try {
    fx.config.seed = scene.value("seed", std::uint64_t{0});
    fx.config.rt60 = scene.at("room").at("rt60").get<double>();
    const auto dims = scene.at("room").at("dims");
    fx.config.room = Eigen::Vector3d(dims[0].get<double>(), dims[1].get<double>(),
                                     dims[2].get<double>());
    fx.config.sh_order = scene.at("sh_order").get<int>();
    for (const auto& s : scene.at("sources")) fx.doas.push_back(direction_from_json(s.at("doa")));
  } catch (const Json::exception& e) {
    throw ConfigError(scene_path.string() + ": " + e.what());
  }
  fx.config.sources = static_cast<int>(fx.doas.size());
  const auto norm = parse_normalization(scene.value("normalization", std::string("N3D")));
  fx.mixture = to_n3d(load_audio((dir / "mixture.wav").string(), norm));
  fx.config.rate = fx.mixture.rate;
  for (int j = 0; j < fx.config.sources; ++j) {
    const auto img = dir / ("image" + std::to_string(j) + ".wav");
    const auto early = dir / ("early" + std::to_string(j) + ".wav");
    if (std::filesystem::exists(img)) fx.images.push_back(to_n3d(load_audio(img.string(), norm)));
    if (std::filesystem::exists(early)) {
      fx.early.push_back(to_n3d(load_audio(early.string(), norm)));
    }
  }
  return fx;
}

// --- Separation ----------------------------------------------------------

struct SeparationOutput {
  std::vector<MultichannelAudio> images;
  std::optional<RunResult> run;
  std::vector<Direction> doas_used;
  double epsilon = 0.0;
  double nu = 0.0;
  std::vector<int> permutation;  // estimate index -> source index
};

inline int order_from_channels(int channels) {
  const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(channels)))) - 1;
  if (n < 0 || num_channels_for_order(n) != channels) {
    throw ConfigError("channel count " + std::to_string(channels) +
                      " is not a full spherical-harmonic order");
  }
  return n;
}

// Permutation maximizing the summed steered power y_j^T Xi_i y_j of
// estimated source i towards DOA j.
inline std::vector<int> align_to_doas(const NtfParams& p, const DoaGrid& grid,
                                      const std::vector<Direction>& doas) {
  const int n = p.sources();
  Eigen::MatrixXd score(n, n);
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd scm = source_scm(p, grid, i);
    for (int j = 0; j < n; ++j) {
      const Eigen::VectorXd y = steering_vector(grid.order, doas[j]).values;
      score(i, j) = y.dot(scm * y) / y.squaredNorm();
    }
  }
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_score = -1.0;
  do {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += score(i, perm[i]);
    if (s > best_score) {
      best_score = s;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

namespace detail {

inline std::vector<MultichannelAudio> to_time(const std::vector<SpectroTensor>& specs) {
  std::vector<MultichannelAudio> out;
  out.reserve(specs.size());
  for (const auto& s : specs) out.push_back(istft(s));
  return out;
}

inline SpectroTensor scaled(SpectroTensor s, double g) {
  for (auto& v : s.data) v *= g;
  return s;
}

inline SpectroTensor late_part(const SpectroTensor& mix, const std::vector<SpectroTensor>& early) {
  SpectroTensor late = mix;
  for (const auto& e : early) {
    for (std::size_t i = 0; i < late.data.size(); ++i) late.data[i] -= e.data[i];
  }
  return late;
}

}  // namespace detail

// `early` holds per-source early images and is only needed for the
// oracle_room epsilon.
inline SeparationOutput separate(const MultichannelAudio& mixture_in,
                                 const std::vector<Direction>& true_doas,
                                 const SeparationConfig& cfg, double rt60,
                                 const std::vector<MultichannelAudio>& early = {}) {
  const MultichannelAudio mixture = to_n3d(mixture_in);
  const int order = order_from_channels(mixture.channels());
  const int l = mixture.channels();
  const auto j_count = static_cast<int>(true_doas.size());
  if (j_count < 1) throw ConfigError("separation: need at least one source DOA");

  SeparationOutput out;
  out.doas_used = true_doas;
  if (cfg.xi_deg > 0.0) {
    out.doas_used = sample_corrupted_doas(true_doas, cfg.xi_deg, cfg.corruption_min_sep_deg,
                                          derive_seed(cfg.seed, 7001), cfg.corruption_attempts);
  }
  std::vector<SteeringVector> steering;
  for (const auto& d : out.doas_used) steering.push_back(steering_vector(order, d));

  const SpectroTensor spec = stft(mixture, cfg.fft_size, cfg.hop);
  out.permutation.resize(j_count);
  std::iota(out.permutation.begin(), out.permutation.end(), 0);
  if (cfg.algorithm == Algorithm::kPwd) {
    out.images = detail::to_time(pwd_respatialize(pwd_beamform(spec, steering), steering));
    return out;
  }
  if (cfg.algorithm == Algorithm::kPwdMwf) {
    out.images = detail::to_time(mwf_from_pwd(spec, steering));
    return out;
  }

  const Cost cost = algorithm_cost(cfg.algorithm);
  double gain = 1.0;
  if (cfg.normalize_input) {
    double mag = 0.0;
    for (const auto& v : spec.data) mag += std::abs(v);
    mag /= static_cast<double>(spec.data.size());
    if (mag > 0.0) gain = 1.0 / mag;
  }
  const SpectroTensor work = detail::scaled(spec, gain);
  const CovarianceField cov =
      cost == Cost::kEu ? empirical_covariance(compress_magnitude(work), CovarianceKind::kEuCompressed)
                        : empirical_covariance(work, CovarianceKind::kIsPower);
  const DoaGrid grid = build_doa_grid(order, cfg.grid_size);
  const Problem prob = make_problem(cov, grid);

  ModelDims dims{j_count, cfg.components_per_source * j_count, spec.num_bins, spec.num_frames,
                 grid.size(), l};
  const std::uint64_t init_seed = derive_seed(cfg.seed, 5001);
  NtfParams init = cfg.init == "binary"
                       ? init_binary(dims, grid, out.doas_used, init_seed, cfg.binary_threshold_deg)
                       : init_random(dims, init_seed);

  SolverConfig scfg;
  scfg.cost = cost;
  scfg.iterations = cfg.iterations;
  scfg.sigma_eu = cfg.sigma_eu;
  scfg.compensate_rescale = cfg.compensate_rescale;
  scfg.track_objective = true;
  const PriorKind kind = algorithm_prior(cfg.algorithm);
  if (kind != PriorKind::kNone) {
    switch (cfg.epsilon_mode) {
      case EpsilonMode::kValue: out.epsilon = cfg.epsilon; break;
      case EpsilonMode::kEstimatePwd: out.epsilon = estimate_epsilon_pwd(spec, steering, cost); break;
      case EpsilonMode::kOracleRoom: {
        if (static_cast<int>(early.size()) != j_count) {
          throw ConfigError("separation.epsilon: oracle_room needs the early images of the fixture");
        }
        std::vector<SpectroTensor> early_spec;
        for (const auto& e : early) early_spec.push_back(stft(to_n3d(e), cfg.fft_size, cfg.hop));
        out.epsilon = epsilon_from_split(early_spec, detail::late_part(spec, early_spec), cost);
        break;
      }
    }
    const auto nu = cfg.nu ? cfg.nu : default_nu(cost, kind, rt60, l);
    if (!nu) {
      throw ConfigError("separation.nu: no default for " + to_string(cfg.algorithm) +
                        " at rt60 " + std::to_string(rt60) + "; set it explicitly");
    }
    out.nu = *nu;
    scfg.prior.kind = kind;
    scfg.prior.nu = *nu;
    scfg.prior.epsilon = out.epsilon;
    scfg.prior.anchors = build_anchors(out.doas_used, order, out.epsilon);
  }

  RunResult res;
  if (cfg.algorithm == Algorithm::kMapMl) {
    scfg.map_ml_split = cfg.map_ml_split;
    res = run_map_ml(scfg, prob, grid, std::move(init));
  } else {
    res = run(scfg, prob, grid, std::move(init));
  }

  // Without a prior or binary initialization, source order is arbitrary.
  if (kind == PriorKind::kNone && cfg.init == "random") {
    out.permutation = align_to_doas(res.params, grid, out.doas_used);
  }
  const auto est = mwf_separate(spec, res.params, grid);
  std::vector<SpectroTensor> ordered(j_count);
  for (int i = 0; i < j_count; ++i) ordered[out.permutation[i]] = est[i];
  out.images = detail::to_time(ordered);
  if (mixture_in.normalization == ShNormalization::kSN3D) {
    for (auto& img : out.images) img = from_n3d(img, ShNormalization::kSN3D);
  }
  out.run = std::move(res);
  return out;
}

// --- Snapshots -----------------------------------------------------------

inline Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const Json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) throw ConfigError("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

inline Json params_json(const NtfParams& p) {
  return {{"Q", matrix_json(p.q)}, {"W", matrix_json(p.w)}, {"H", matrix_json(p.h)},
          {"Z", matrix_json(p.z)}};
}

inline NtfParams params_from_json(const Json& j) {
  NtfParams p;
  p.q = matrix_from_json(j.at("Q"));
  p.w = matrix_from_json(j.at("W"));
  p.h = matrix_from_json(j.at("H"));
  p.z = matrix_from_json(j.at("Z"));
  return p;
}

// --- Reports -------------------------------------------------------------

inline std::string format_number(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

inline void write_metrics_csv(std::ostream& out, const EvalResult& r) {
  out << "source,sdr,isr,sir,sar\n";
  for (std::size_t j = 0; j < r.sources.size(); ++j) {
    const auto& m = r.sources[j];
    out << j << ',' << format_number(m.sdr) << ',' << format_number(m.isr) << ','
        << format_number(m.sir) << ',' << format_number(m.sar) << '\n';
  }
  const SourceMetrics mean = mean_over_sources(r);
  out << "mean," << format_number(mean.sdr) << ',' << format_number(mean.isr) << ','
      << format_number(mean.sir) << ',' << format_number(mean.sar) << '\n';
}

struct Quartiles {
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
};

// Linear-interpolation quantiles.
inline Quartiles quartiles(std::vector<double> v) {
  if (v.empty()) throw DomainError("quartiles: empty sample");
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double pos = p * (v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - lo) * (v[hi] - v[lo]);
  };
  return {q(0.25), q(0.5), q(0.75)};
}

// --- Experiments ---------------------------------------------------------

struct CellKey {
  Algorithm algorithm = Algorithm::kEuWlp;
  int sources = 0;
  int sh_order = 0;
  double rt60 = 0.0;
  double xi_deg = 0.0;
  std::uint64_t seed = 0;
};

struct CellResult {
  CellKey key;
  EvalResult metrics;
  SourceMetrics mean;
  double epsilon = 0.0;
  double nu = 0.0;
};

inline int worker_count_from_env(const char* name = "AMBINTF_WORKERS") {
  if (const char* v = std::getenv(name)) {
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (end == v || *end != '\0' || n < 1) {
      throw ConfigError(std::string(name) + ": expected a positive integer");
    }
    return static_cast<int>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs every cell of the sweep. Cells sharing a fixture are evaluated by the
// same worker; results are returned in sweep order regardless of workers.
inline std::vector<CellResult> run_experiment(const ExperimentConfig& cfg, int workers) {
  struct Group {
    int sources;
    int order;
    double rt60;
    std::uint64_t seed;
  };
  std::vector<Group> groups;
  for (int j : cfg.sweep.sources) {
    for (int n : cfg.sweep.sh_orders) {
      for (double rt : cfg.sweep.rt60s) {
        for (std::uint64_t s : cfg.sweep.seeds) groups.push_back({j, n, rt, s});
      }
    }
  }
  const std::size_t per_group = cfg.sweep.algorithms.size() * cfg.sweep.xi_degs.size();
  std::vector<CellResult> results(groups.size() * per_group);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto work = [&] {
    for (std::size_t g = next++; g < groups.size(); g = next++) {
      try {
        const Group& grp = groups[g];
        FixtureConfig fc = cfg.fixture;
        fc.sources = grp.sources;
        fc.sh_order = grp.order;
        fc.rt60 = grp.rt60;
        fc.seed = grp.seed;
        const Fixture fx = simulate_fixture(fc);
        std::size_t slot = g * per_group;
        for (Algorithm alg : cfg.sweep.algorithms) {
          for (double xi : cfg.sweep.xi_degs) {
            SeparationConfig sc = cfg.separation;
            sc.algorithm = alg;
            sc.xi_deg = xi;
            sc.seed = derive_seed(cfg.separation.seed, grp.seed);
            const SeparationOutput sep = separate(fx.mixture, fx.doas, sc, grp.rt60, fx.early);
            CellResult& cell = results[slot++];
            cell.key = {alg, grp.sources, grp.order, grp.rt60, xi, grp.seed};
            cell.metrics = bss_eval_images(fx.images, sep.images, cfg.evaluation.filter_len);
            cell.mean = mean_over_sources(cell.metrics);
            cell.epsilon = sep.epsilon;
            cell.nu = sep.nu;
          }
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next = groups.size();
      }
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(groups.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  // Stable presentation order: algorithm, J, order, rt60, xi, seed.
  auto sort_key = [](const CellResult& c) {
    return std::make_tuple(static_cast<int>(c.key.algorithm), c.key.sources, c.key.sh_order,
                           c.key.rt60, c.key.xi_deg, c.key.seed);
  };
  std::stable_sort(results.begin(), results.end(),
                   [&](const CellResult& a, const CellResult& b) { return sort_key(a) < sort_key(b); });
  return results;
}

inline void write_results_csv(std::ostream& out, const std::vector<CellResult>& results) {
  out << "algorithm,sources,sh_order,rt60,xi_deg,seed,source,sdr,isr,sir,sar\n";
  for (const auto& c : results) {
    const std::string prefix = to_string(c.key.algorithm) + ',' + std::to_string(c.key.sources) +
                               ',' + std::to_string(c.key.sh_order) + ',' +
                               format_number(c.key.rt60) + ',' + format_number(c.key.xi_deg) +
                               ',' + std::to_string(c.key.seed) + ',';
    for (std::size_t j = 0; j < c.metrics.sources.size(); ++j) {
      const auto& m = c.metrics.sources[j];
      out << prefix << j << ',' << format_number(m.sdr) << ',' << format_number(m.isr) << ','
          << format_number(m.sir) << ',' << format_number(m.sar) << '\n';
    }
    out << prefix << "mean," << format_number(c.mean.sdr) << ',' << format_number(c.mean.isr)
        << ',' << format_number(c.mean.sir) << ',' << format_number(c.mean.sar) << '\n';
  }
}

struct SummaryRow {
  CellKey key;  // seed unused
  int files = 0;
  Quartiles sdr, isr, sir, sar;
};

inline std::vector<SummaryRow> summarize(const std::vector<CellResult>& results) {
  std::vector<SummaryRow> rows;
  std::map<std::tuple<int, int, int, double, double>, std::vector<const CellResult*>> cells;
  for (const auto& c : results) {
    cells[{static_cast<int>(c.key.algorithm), c.key.sources, c.key.sh_order, c.key.rt60,
           c.key.xi_deg}]
        .push_back(&c);
  }
  for (const auto& [k, members] : cells) {
    SummaryRow row;
    row.key = members.front()->key;
    row.files = static_cast<int>(members.size());
    std::vector<double> sdr, isr, sir, sar;
    for (const auto* m : members) {
      sdr.push_back(m->mean.sdr);
      isr.push_back(m->mean.isr);
      sir.push_back(m->mean.sir);
      sar.push_back(m->mean.sar);
    }
    row.sdr = quartiles(sdr);
    row.isr = quartiles(isr);
    row.sir = quartiles(sir);
    row.sar = quartiles(sar);
    rows.push_back(row);
  }
  return rows;
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "algorithm,sources,sh_order,rt60,xi_deg,files";
  for (const char* m : {"sdr", "isr", "sir", "sar"}) {
    out << ',' << m << "_q25," << m << "_median," << m << "_q75";
  }
  out << '\n';
  for (const auto& r : rows) {
    out << to_string(r.key.algorithm) << ',' << r.key.sources << ',' << r.key.sh_order << ','
        << format_number(r.key.rt60) << ',' << format_number(r.key.xi_deg) << ',' << r.files;
    for (const Quartiles* q : {&r.sdr, &r.isr, &r.sir, &r.sar}) {
      out << ',' << format_number(q->q25) << ',' << format_number(q->median) << ','
          << format_number(q->q75);
    }
    out << '\n';
  }
}

inline void write_summary_text(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << std::left << std::setw(10) << "algorithm" << std::setw(4) << "J" << std::setw(6)
      << "order" << std::setw(7) << "rt60" << std::setw(7) << "xi" << std::setw(6) << "files"
      << "median SDR / ISR / SIR / SAR [dB]\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(10) << to_string(r.key.algorithm) << std::setw(4)
        << r.key.sources << std::setw(6) << r.key.sh_order << std::setw(7)
        << format_number(r.key.rt60).substr(0, 5) << std::setw(7)
        << format_number(r.key.xi_deg).substr(0, 5) << std::setw(6) << r.files
        << std::fixed << std::setprecision(2) << r.sdr.median << " / " << r.isr.median << " / "
        << r.sir.median << " / " << r.sar.median << '\n';
  }
}

}  // namespace ambintf

#endif  // AMBINTF_PIPELINE_H_
